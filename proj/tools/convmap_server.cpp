#include "convmap/engine.hpp"
#include "convmap/error.hpp"
#include "convmap/http_api.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <iostream>

namespace {

httplib::Server * running = nullptr;

void stop(int)
{
    if (running != nullptr) {
        running->stop();
    }
}

} // namespace

int main(int argc, char ** argv)
{
    CLI::App app{"HTTP API over a conversation store."};
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::string> store;
    app.add_option("--host", host, "address to bind");
    app.add_option("--port", port, "port to listen on")->check(CLI::Range(0, 65535));
    app.add_option("--store", store, "store directory (default $CONVMAP_STORE or ./convmap-store)");
    CLI11_PARSE(app, argc, argv);

    std::unique_ptr<convmap::Engine> engine;
    try {
        auto config = convmap::ServiceConfig::from_env();
        if (store) {
            config.store = *store;
        }
        engine = convmap::Engine::from_config(config);
    } catch (std::exception const & e) {
        std::cerr << "convmap_server: " << e.what() << '\n';
        return 1;
    }

    httplib::Server server;
    convmap::register_routes(server, *engine);
    running = &server;
    std::signal(SIGINT, stop);
    std::signal(SIGTERM, stop);

    int const bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        std::cerr << "convmap_server: cannot bind " << host << ":" << port << '\n';
        return 1;
    }
    std::cerr << "convmap_server: listening on http://" << host << ":" << bound << " with store "
              << engine->store().root().string() << '\n';
    return server.listen_after_bind() ? 0 : 1;
}
