#include "convmap/engine.hpp"
#include "convmap/error.hpp"
#include "convmap/file_io.hpp"
#include "convmap/http_api.hpp"
#include "convmap/text.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using convmap::Engine;
using nlohmann::json;

std::vector<std::string> split_ids(std::string const & list)
{
    std::vector<std::string> ids;
    std::size_t start = 0;
    while (start <= list.size()) {
        auto const comma = list.find(',', start);
        auto const piece = convmap::text::trim(list.substr(start, comma == std::string::npos ? std::string::npos
                                                                                              : comma - start));
        if (! piece.empty()) {
            ids.push_back(piece);
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return ids;
}

} // namespace

int main(int argc, char ** argv)
{
    CLI::App app{"Build and query topic maps of chat conversations."};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::string> store;
    std::optional<std::string> provider;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> budget;
    std::optional<double> threshold;
    std::string format = "json";
    app.add_option("--store", store, "store directory (default $CONVMAP_STORE or ./convmap-store)");
    app.add_option("--provider", provider, "offline or remote")->check(CLI::IsMember({"offline", "remote"}));
    app.add_option("--seed", seed, "seed for clustering, row search and force layout");
    app.add_option("--budget", budget, "context token budget");
    app.add_option("--threshold", threshold, "topic membership threshold");
    app.add_option("--format", format, "json (one line) or pretty")->check(CLI::IsMember({"json", "pretty"}));

    std::string id;
    std::string file;
    auto * ingest = app.add_subcommand("ingest", "store a chat export and print its id");
    ingest->add_option("file", file, "export file, or - for stdin")->required();

    auto * analyze = app.add_subcommand("analyze", "embed, cluster and lay out a conversation");
    analyze->add_option("id", id)->required();

    auto * show = app.add_subcommand("show", "conversation summary");
    show->add_option("id", id)->required();

    auto * topics = app.add_subcommand("topics", "topic model of an analyzed conversation");
    topics->add_option("id", id)->required();

    std::string node_id;
    auto * node = app.add_subcommand("node", "one node");
    node->add_option("id", id)->required();
    node->add_option("node", node_id)->required();

    std::string view;
    std::string topic_id;
    std::string mode = "force";
    std::string key = "time";
    std::optional<double> edge_threshold;
    std::optional<std::uint64_t> layout_seed;
    auto * layout = app.add_subcommand("layout", "global timeline or the layout of one topic");
    layout->add_option("id", id)->required();
    layout->add_option("view", view, "global or topic")->required()->check(CLI::IsMember({"global", "topic"}));
    layout->add_option("topic", topic_id, "topic id, for the topic view");
    layout->add_option("--mode", mode, "force or grid")->check(CLI::IsMember({"force", "grid"}));
    layout->add_option("--edge-threshold", edge_threshold, "minimum similarity for an edge");
    layout->add_option("--key", key, "grid order: time or degree");
    layout->add_option("--layout-seed", layout_seed, "seed for the force layout");

    std::string query;
    std::optional<std::size_t> top_k = convmap::default_top_k;
    bool all_hits = false;
    double min_score = convmap::default_min_score;
    auto * search = app.add_subcommand("search", "nodes most similar to a query");
    search->add_option("id", id)->required();
    search->add_option("query", query)->required();
    search->add_option("--top-k", top_k);
    search->add_flag("--all", all_hits, "return every hit above --min-score");
    search->add_option("--min-score", min_score);

    convmap::KeywordQuery kq;
    std::optional<std::size_t> to;
    std::optional<std::string> term;
    auto * keywords = app.add_subcommand("keywords", "tf-idf keywords of a node range [from, to)");
    keywords->add_option("id", id)->required();
    keywords->add_option("--from", kq.from);
    keywords->add_option("--to", to, "end of the range (default: node count)");
    keywords->add_option("--top-m", kq.top_m);
    keywords->add_option("--term", term, "also report per-node highlights for this term");

    std::string question;
    std::string context;
    auto * ask = app.add_subcommand("ask", "answer a question with selected nodes as context");
    ask->add_option("id", id)->required();
    ask->add_option("question", question)->required();
    ask->add_option("--context", context, "comma-separated node ids");

    std::optional<std::size_t> forgotten_budget;
    auto * forgotten = app.add_subcommand("forgotten", "where the token budget cuts the history");
    forgotten->add_option("id", id)->required();
    forgotten->add_option("--budget", forgotten_budget);

    CLI11_PARSE(app, argc, argv);

    try {
        auto config = convmap::ServiceConfig::from_env();
        if (store) {
            config.store = *store;
        }
        if (provider) {
            config.provider = *provider;
        }
        if (seed) {
            config.seed = *seed;
        }
        if (budget) {
            config.budget = *budget;
        }
        if (threshold) {
            config.threshold = *threshold;
        }
        auto engine = Engine::from_config(config);

        json out;
        if (ingest->parsed()) {
            std::string text;
            if (file == "-") {
                text.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
            } else {
                text = convmap::read_file(file);
            }
            out = engine->ingest(text);
        } else if (analyze->parsed()) {
            out = engine->analyze(id);
        } else if (show->parsed()) {
            out = engine->conversation(id);
        } else if (topics->parsed()) {
            out = engine->topics(id);
        } else if (node->parsed()) {
            out = engine->node(id, node_id);
        } else if (layout->parsed()) {
            if (view == "global") {
                out = engine->global_layout(id);
            } else {
                if (topic_id.empty()) {
                    throw convmap::Error(convmap::ErrorKind::argument, "layout topic needs a topic id");
                }
                convmap::TopicLayoutQuery q;
                q.mode = convmap::parse_layout_mode(mode);
                q.key = convmap::parse_grid_order(key);
                q.threshold = edge_threshold;
                q.seed = layout_seed;
                out = engine->topic_layout(id, topic_id, q);
            }
        } else if (search->parsed()) {
            convmap::SearchQuery q;
            q.query = query;
            q.top_k = all_hits ? std::nullopt : top_k;
            q.min_score = min_score;
            out = engine->search(id, q);
        } else if (keywords->parsed()) {
            kq.to = to ? *to : engine->conversation(id).at("node_count").get<std::size_t>();
            kq.term = term;
            out = engine->keywords(id, kq);
        } else if (ask->parsed()) {
            out = engine->ask(id, question, split_ids(context));
        } else if (forgotten->parsed()) {
            out = engine->forgotten(id, forgotten_budget);
        }
        std::cout << (format == "pretty" ? out.dump(2) : out.dump()) << '\n';
        return 0;
    } catch (...) {
        auto const [status, body] = convmap::error_response(std::current_exception());
        std::cerr << "convmap: " << body.at("error").get<std::string>() << ": "
                  << body.at("detail").get<std::string>() << '\n';
        if (body.contains("overshoot")) {
            std::cerr << "convmap: over budget by " << body.at("overshoot") << " tokens\n";
        }
        return status >= 500 ? 3 : 1;
    }
}
