#include "convmap/http_api.hpp"

#include "convmap/error.hpp"

#include <httplib.h>

#include <charconv>

namespace convmap {

namespace {

using nlohmann::json;

template <typename T>
T parse_number(std::string const & name, std::string const & text)
{
    T value{};
    auto const * end = text.data() + text.size();
    auto const [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end) {
        throw Error(ErrorKind::argument, "parameter '" + name + "' must be a number, got '" + text + "'");
    }
    return value;
}

double parse_real(std::string const & name, std::string const & text)
{
    try {
        std::size_t used = 0;
        double const v = std::stod(text, &used);
        if (used == text.size()) {
            return v;
        }
    } catch (std::exception const &) {
    }
    throw Error(ErrorKind::argument, "parameter '" + name + "' must be a number, got '" + text + "'");
}

json parse_body(httplib::Request const & req)
{
    json body;
    try {
        body = json::parse(req.body);
    } catch (json::parse_error const & e) {
        throw Error(ErrorKind::parse, "request body is not valid JSON: " + std::string(e.what()));
    }
    if (! body.is_object()) {
        throw Error(ErrorKind::argument, "request body must be a JSON object");
    }
    return body;
}

template <typename T>
T field(json const & body, char const * name)
{
    if (! body.contains(name)) {
        throw Error(ErrorKind::argument, std::string("missing field '") + name + "'");
    }
    try {
        return body.at(name).get<T>();
    } catch (json::exception const &) {
        throw Error(ErrorKind::argument, std::string("field '") + name + "' has the wrong type");
    }
}

template <typename T>
std::optional<T> optional_field(json const & body, char const * name)
{
    if (! body.contains(name) || body.at(name).is_null()) {
        return std::nullopt;
    }
    return field<T>(body, name);
}

void reply(httplib::Response & res, int status, json const & body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

/// Runs `handler`, mapping thrown errors to JSON error responses.
template <typename Handler>
httplib::Server::Handler guarded(Handler handler)
{
    return [handler](httplib::Request const & req, httplib::Response & res) {
        try {
            reply(res, 200, handler(req));
        } catch (...) {
            auto [status, body] = error_response(std::current_exception());
            reply(res, status, body);
        }
    };
}

} // namespace

std::pair<int, json> error_response(std::exception_ptr error)
{
    try {
        std::rethrow_exception(error);
    } catch (BudgetError const & e) {
        return {http_status(e.kind()),
                {{"error", to_string(e.kind())}, {"detail", e.what()}, {"overshoot", e.overshoot()}}};
    } catch (ParseError const & e) {
        return {http_status(e.kind()),
                {{"error", to_string(e.kind())}, {"detail", e.what()}, {"line", e.line()}, {"column", e.column()}}};
    } catch (Error const & e) {
        return {http_status(e.kind()), {{"error", to_string(e.kind())}, {"detail", e.what()}}};
    } catch (std::exception const & e) {
        return {500, {{"error", "internal_error"}, {"detail", e.what()}}};
    } catch (...) {
        return {500, {{"error", "internal_error"}, {"detail", "unknown failure"}}};
    }
}

void register_routes(httplib::Server & server, Engine & engine)
{
    std::string const conv = R"(/api/conversations/([A-Za-z0-9_-]+))";

    server.Post("/api/conversations", guarded([&engine](httplib::Request const & req) {
        return engine.ingest(req.body);
    }));

    server.Post(conv + "/analyze", guarded([&engine](httplib::Request const & req) {
        return engine.analyze(req.matches[1]);
    }));

    server.Get(conv, guarded([&engine](httplib::Request const & req) {
        return engine.conversation(req.matches[1]);
    }));

    server.Get(conv + "/layout/global", guarded([&engine](httplib::Request const & req) {
        return engine.global_layout(req.matches[1]);
    }));

    server.Get(conv + "/topics", guarded([&engine](httplib::Request const & req) {
        return engine.topics(req.matches[1]);
    }));

    server.Get(conv + R"(/topics/([A-Za-z0-9_-]+)/layout)", guarded([&engine](httplib::Request const & req) {
        TopicLayoutQuery q;
        if (req.has_param("mode")) {
            q.mode = parse_layout_mode(req.get_param_value("mode"));
        }
        if (req.has_param("threshold")) {
            q.threshold = parse_real("threshold", req.get_param_value("threshold"));
        }
        if (req.has_param("key")) {
            q.key = parse_grid_order(req.get_param_value("key"));
        }
        if (req.has_param("seed")) {
            q.seed = parse_number<std::uint64_t>("seed", req.get_param_value("seed"));
        }
        return engine.topic_layout(req.matches[1], req.matches[2], q);
    }));

    server.Get(conv + R"(/nodes/([A-Za-z0-9_-]+))", guarded([&engine](httplib::Request const & req) {
        return engine.node(req.matches[1], req.matches[2]);
    }));

    server.Post(conv + "/search", guarded([&engine](httplib::Request const & req) {
        auto const body = parse_body(req);
        SearchQuery q;
        q.query = field<std::string>(body, "query");
        if (body.contains("top_k")) {
            q.top_k = optional_field<std::size_t>(body, "top_k");
        }
        q.min_score = optional_field<double>(body, "min_score").value_or(default_min_score);
        return engine.search(req.matches[1], q);
    }));

    server.Post(conv + "/keywords", guarded([&engine](httplib::Request const & req) {
        auto const body = parse_body(req);
        KeywordQuery q;
        q.from = field<std::size_t>(body, "from");
        q.to = field<std::size_t>(body, "to");
        q.top_m = optional_field<std::size_t>(body, "top_m").value_or(q.top_m);
        q.term = optional_field<std::string>(body, "term");
        return engine.keywords(req.matches[1], q);
    }));

    server.Post(conv + "/ask", guarded([&engine](httplib::Request const & req) {
        auto const body = parse_body(req);
        auto const question = field<std::string>(body, "question");
        auto const context = optional_field<std::vector<std::string>>(body, "context_node_ids")
                                 .value_or(std::vector<std::string>{});
        return engine.ask(req.matches[1], question, context);
    }));

    server.Get(conv + "/forgotten", guarded([&engine](httplib::Request const & req) {
        std::optional<std::size_t> budget;
        if (req.has_param("budget")) {
            budget = parse_number<std::size_t>("budget", req.get_param_value("budget"));
        }
        return engine.forgotten(req.matches[1], budget);
    }));

    server.set_error_handler([](httplib::Request const & req, httplib::Response & res) {
        if (! res.body.empty()) {
            return httplib::Server::HandlerResponse::Unhandled;
        }
        if (res.status == 404) {
            reply(res, 404, {{"error", "not_found"}, {"detail", "no route for " + req.method + " " + req.path}});
        } else {
            reply(res, res.status,
                  {{"error", "http_error"},
                   {"detail", "request to " + req.method + " " + req.path + " was rejected with HTTP "
                                  + std::to_string(res.status)}});
        }
        return httplib::Server::HandlerResponse::Handled;
    });
}

} // namespace convmap
