#include "convmap/engine.hpp"

#include "convmap/error.hpp"
#include "convmap/ingest.hpp"
#include "convmap/json_io.hpp"
#include "convmap/remote.hpp"
#include "convmap/retrieval.hpp"
#include "convmap/text.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>

namespace convmap {

namespace {

std::optional<std::string> env(char const * name)
{
    char const * value = std::getenv(name);
    if (value == nullptr || *value == '\0') {
        return std::nullopt;
    }
    return std::string(value);
}

template <typename T>
T env_number(char const * name, T fallback)
{
    auto const value = env(name);
    if (! value) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        T parsed;
        if constexpr (std::is_floating_point_v<T>) {
            parsed = static_cast<T>(std::stod(*value, &used));
        } else {
            if (value->front() == '-') {
                throw std::invalid_argument("negative");
            }
            parsed = static_cast<T>(std::stoull(*value, &used));
        }
        if (used != value->size()) {
            throw std::invalid_argument("trailing characters");
        }
        return parsed;
    } catch (std::exception const &) {
        throw Error(ErrorKind::argument, std::string(name) + " must be a number, got '" + *value + "'");
    }
}

std::size_t level0_count(Conversation const & c)
{
    return static_cast<std::size_t>(
        std::count_if(c.topics.begin(), c.topics.end(), [](Topic const & t) { return t.level == 0; }));
}

std::vector<std::size_t> token_counts(Conversation const & c)
{
    std::vector<std::size_t> counts;
    counts.reserve(c.nodes.size());
    for (auto const & n : c.nodes) {
        counts.push_back(n.token_count);
    }
    return counts;
}

} // namespace

std::string timestamp_now()
{
    std::time_t seconds = 0;
    if (auto const pinned = env("SOURCE_DATE_EPOCH")) {
        seconds = static_cast<std::time_t>(env_number<std::uint64_t>("SOURCE_DATE_EPOCH", 0));
    } else {
        seconds = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm utc{};
    gmtime_r(&seconds, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buffer;
}

ServiceConfig ServiceConfig::from_env()
{
    ServiceConfig c;
    if (auto v = env("CONVMAP_STORE")) {
        c.store = *v;
    }
    if (auto v = env("CONVMAP_PROVIDER")) {
        c.provider = *v;
    }
    if (auto v = env("CONVMAP_ENDPOINT")) {
        c.endpoint = *v;
    }
    if (auto v = env("CONVMAP_API_KEY")) {
        c.api_key = *v;
    }
    if (auto v = env("CONVMAP_EMBEDDING_MODEL")) {
        c.embedding_model = *v;
    }
    if (auto v = env("CONVMAP_CHAT_MODEL")) {
        c.chat_model = *v;
    }
    c.dimension = env_number<std::size_t>("CONVMAP_DIMENSION", c.dimension);
    c.budget = env_number<std::size_t>("CONVMAP_BUDGET", c.budget);
    c.threshold = env_number<double>("CONVMAP_THRESHOLD", c.threshold);
    c.edge_threshold = env_number<double>("CONVMAP_EDGE_THRESHOLD", c.edge_threshold);
    c.seed = env_number<std::uint64_t>("CONVMAP_SEED", c.seed);
    if (auto v = env("CONVMAP_REANALYZE_ON_ASK")) {
        c.reanalyze_on_ask = *v != "0" && *v != "false" && *v != "no";
    }
    return c;
}

void ServiceConfig::validate() const
{
    if (provider != "offline" && provider != "remote") {
        throw Error(ErrorKind::argument, "provider must be 'offline' or 'remote', got '" + provider + "'");
    }
    if (provider == "remote" && endpoint.empty()) {
        throw Error(ErrorKind::argument, "the remote provider needs an endpoint (CONVMAP_ENDPOINT)");
    }
    if (budget == 0) {
        throw Error(ErrorKind::argument, "token budget must be positive");
    }
    if (std::isnan(edge_threshold) || edge_threshold < -1.0) {
        throw Error(ErrorKind::argument, "edge threshold must be at least -1");
    }
    TopicConfig t = topics;
    t.membership_threshold = threshold;
    t.validate();
}

Engine::Engine(ServiceConfig config, std::unique_ptr<EmbeddingProvider> embedder, std::unique_ptr<LlmProvider> llm)
: config_(std::move(config))
, store_(config_.store)
, embedder_(std::move(embedder))
, llm_(std::move(llm))
{
    config_.validate();
    config_.topics.membership_threshold = config_.threshold;
    store_.update_meta({
        {"providers", {{"embedding", embedder_->name()}, {"llm", llm_->name()}}},
        {"dimension", embedder_->dimension()},
        {"templates",
         {{"summarize", prompts::summarize_version},
          {"topics", prompts::topics_version},
          {"context", prompt_template_version}}},
    });
}

std::unique_ptr<Engine> Engine::from_config(ServiceConfig config)
{
    config.validate();
    Store const store(config.store);
    std::unique_ptr<EmbeddingProvider> embedder;
    std::unique_ptr<LlmProvider> llm;
    if (config.provider == "offline") {
        embedder = std::make_unique<OfflineEmbeddingProvider>(config.dimension == 0 ? default_dimension
                                                                                    : config.dimension);
        llm = std::make_unique<OfflineLlm>(config.seed);
    } else {
        RemoteConfig remote;
        remote.endpoint = config.endpoint;
        remote.api_key = config.api_key;
        remote.embedding_model = config.embedding_model;
        remote.chat_model = config.chat_model;
        if (config.dimension != 0) {
            remote.dimension = config.dimension;
        }
        embedder = std::make_unique<RemoteEmbeddingProvider>(remote);
        llm = std::make_unique<CachedLlm>(std::make_unique<RemoteLlm>(remote), store.root() / "cache" / "llm");
    }
    auto cached = std::make_unique<CachedEmbeddingProvider>(std::move(embedder), store.embedding_cache_dir());
    return std::make_unique<Engine>(std::move(config), std::move(cached), std::move(llm));
}

StoredConversation Engine::analyzed_copy(Conversation conversation) const
{
    StoredConversation out;
    out.conversation = build_topic_model(std::move(conversation), *llm_, *embedder_, config_.topics);
    auto const primaries = primary_topic_indices(out.conversation);
    auto const matrix = build_transition_matrix(primaries, level0_count(out.conversation));
    AnalysisCache cache;
    cache.assignment = solve_rows(matrix, config_.seed);
    cache.geometry = build_global_geometry(out.conversation, cache.assignment, config_.budget);
    cache.budget = config_.budget;
    out.analysis = std::move(cache);
    return out;
}

void Engine::commit(StoredConversation const & next, std::uint64_t expected_version, std::size_t expected_nodes)
{
    auto const guard = store_.lock(next.conversation.id);
    auto const current = store_.load(next.conversation.id);
    if (current.conversation.analysis_version != expected_version
        || current.conversation.nodes.size() != expected_nodes) {
        throw Error(ErrorKind::state, "conversation '" + next.conversation.id
                                          + "' changed while this request was running; retry");
    }
    store_.save(next);
}

StoredConversation Engine::require_analyzed(std::string const & id) const
{
    auto stored = store_.load(id);
    if (! stored.analysis || ! is_analyzed(stored.conversation)) {
        throw Error(ErrorKind::state, "conversation '" + id + "' has not been analyzed at its current state");
    }
    return stored;
}

nlohmann::json Engine::ingest(std::string_view export_text)
{
    RawExport const raw = parse_export(export_text);
    StoredConversation stored;
    auto & c = stored.conversation;
    c.nodes = pair_messages(raw);
    c.title = raw.title;
    c.created = timestamp_now();
    c.updated = c.created;
    c.membership_threshold = config_.threshold;
    c.id = store_.allocate_id();
    {
        auto const guard = store_.lock(c.id);
        store_.save(stored);
    }
    return {{"id", c.id}, {"title", c.title}, {"node_count", c.nodes.size()}, {"version", c.analysis_version}};
}

nlohmann::json Engine::analyze(std::string const & id)
{
    auto const snapshot = store_.load(id);
    auto const & before = snapshot.conversation;
    if (before.nodes.empty()) {
        throw Error(ErrorKind::state, "conversation '" + id + "' has no nodes to analyze");
    }
    auto next = analyzed_copy(before);
    next.conversation.updated = timestamp_now();
    commit(next, before.analysis_version, before.nodes.size());

    auto const & c = next.conversation;
    std::size_t const top = level0_count(c);
    return {
        {"id", c.id},
        {"version", c.analysis_version},
        {"node_count", c.nodes.size()},
        {"topic_count", top},
        {"subtopic_count", c.topics.size() - top},
        {"row_method", to_string(next.analysis->assignment.method)},
        {"wiggle_cost", next.analysis->assignment.cost},
    };
}

nlohmann::json Engine::conversation(std::string const & id) const
{
    auto const stored = store_.load(id);
    auto j = conversation_summary_json(stored.conversation);
    j["version"] = stored.conversation.analysis_version;
    return j;
}

nlohmann::json Engine::global_layout(std::string const & id) const
{
    auto const stored = require_analyzed(id);
    auto j = geometry_to_json(stored.analysis->geometry);
    j["id"] = id;
    j["version"] = stored.conversation.analysis_version;
    j["budget"] = stored.analysis->budget;
    j["row_method"] = to_string(stored.analysis->assignment.method);
    j["wiggle_cost"] = stored.analysis->assignment.cost;
    return j;
}

nlohmann::json Engine::topics(std::string const & id) const
{
    auto const stored = require_analyzed(id);
    auto j = topic_model_json(stored.conversation);
    j["id"] = id;
    j["version"] = stored.conversation.analysis_version;
    return j;
}

nlohmann::json Engine::topic_layout(std::string const & id, std::string const & topic_id,
                                    TopicLayoutQuery const & query) const
{
    auto const stored = require_analyzed(id);
    double const threshold = query.threshold.value_or(config_.edge_threshold);
    auto const graph = build_topic_graph(stored.conversation, topic_id, threshold);
    LayoutResult const layout = query.mode == LayoutMode::force
                                    ? force_layout(graph, ForceParams{}, query.seed.value_or(config_.seed))
                                    : grid_layout(graph, query.key);
    auto j = layout_to_json(layout, graph);
    j["id"] = id;
    j["topic"] = topic_id;
    j["version"] = stored.conversation.analysis_version;
    j["threshold"] = threshold;
    if (query.mode == LayoutMode::grid) {
        j["key"] = to_string(query.key);
    }
    return j;
}

nlohmann::json Engine::node(std::string const & id, std::string const & node_id) const
{
    auto const stored = store_.load(id);
    auto const * n = find_node(stored.conversation, node_id);
    if (n == nullptr) {
        throw Error(ErrorKind::not_found, "node '" + node_id + "' not found in conversation '" + id + "'");
    }
    auto j = node_to_json(*n, false);
    j["version"] = stored.conversation.analysis_version;
    return j;
}

nlohmann::json Engine::search(std::string const & id, SearchQuery const & query) const
{
    auto const stored = require_analyzed(id);
    auto const & c = stored.conversation;
    if (c.embedding_provider != embedder_->name()) {
        throw Error(ErrorKind::state, "conversation '" + id + "' was embedded with '" + c.embedding_provider
                                          + "'; re-analyze it with '" + embedder_->name() + "'");
    }
    auto const hits = semantic_search(c, *embedder_, query.query, query.top_k, query.min_score);
    std::size_t const boundary = forgotten_boundary(token_counts(c), config_.budget);
    auto list = hits_to_json(hits);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        list[i]["forgotten"] = hits[i].seq_index < boundary;
    }
    return {{"id", id}, {"version", c.analysis_version}, {"forgotten_boundary", boundary}, {"hits", std::move(list)}};
}

nlohmann::json Engine::keywords(std::string const & id, KeywordQuery const & query) const
{
    auto const stored = store_.load(id);
    auto const & c = stored.conversation;
    if (query.from > query.to || query.to > c.nodes.size()) {
        throw Error(ErrorKind::argument, "keyword range [" + std::to_string(query.from) + ", "
                                             + std::to_string(query.to) + ") is outside [0, "
                                             + std::to_string(c.nodes.size()) + ")");
    }
    nlohmann::json j{{"id", id}, {"version", c.analysis_version}, {"from", query.from}, {"to", query.to}};
    if (query.from == query.to) {
        if (query.top_m == 0) {
            throw Error(ErrorKind::argument, "top_m must be at least 1");
        }
        j["keywords"] = nlohmann::json::array();
    } else {
        std::vector<std::string> docs;
        docs.reserve(c.nodes.size());
        for (auto const & n : c.nodes) {
            docs.push_back(embedding_text(n));
        }
        std::vector<std::size_t> scope;
        for (std::size_t i = query.from; i < query.to; ++i) {
            scope.push_back(i);
        }
        j["keywords"] = keywords_to_json(tfidf_keywords(docs, scope, query.top_m));
    }
    if (query.term) {
        j["term"] = *query.term;
        j["highlights"] = term_frequency_highlights(c, *query.term, query.from, query.to);
    }
    return j;
}

nlohmann::json Engine::ask(std::string const & id, std::string const & question,
                           std::vector<std::string> const & context_node_ids)
{
    auto const snapshot = store_.load(id);
    auto const & before = snapshot.conversation;
    if (before.analysis_version == 0) {
        throw Error(ErrorKind::state, "conversation '" + id + "' must be analyzed before asking");
    }
    auto const bundle = assemble_context(before, text::trim(question), context_node_ids, config_.budget);
    std::string const prompt = render_prompt(bundle);
    std::string const answer = text::trim(llm_->complete(prompt));
    if (answer.empty()) {
        throw ProviderError("provider '" + llm_->name() + "' returned an empty answer", false);
    }

    Conversation grown = before;
    ConversationNode fresh;
    fresh.seq_index = grown.nodes.size();
    fresh.id = node_id_for(fresh.seq_index);
    fresh.question = bundle.question;
    fresh.answer = answer;
    fresh.token_count = count_tokens(fresh.question + fresh.answer);
    grown.nodes.push_back(fresh);
    grown.updated = timestamp_now();

    StoredConversation next;
    if (config_.reanalyze_on_ask) {
        next = analyzed_copy(std::move(grown));
    } else {
        next.conversation = std::move(grown);
    }
    commit(next, before.analysis_version, before.nodes.size());

    return {
        {"id", id},
        {"node_id", fresh.id},
        {"answer", answer},
        {"version", next.conversation.analysis_version},
        {"context_node_ids", bundle.context_node_ids()},
        {"prompt_tokens", count_tokens(prompt)},
        {"total_tokens", bundle.total_tokens},
        {"budget", bundle.budget},
    };
}

nlohmann::json Engine::forgotten(std::string const & id, std::optional<std::size_t> budget) const
{
    auto const stored = store_.load(id);
    auto const & c = stored.conversation;
    std::size_t const b = budget.value_or(config_.budget);
    auto const counts = token_counts(c);
    std::size_t const boundary = forgotten_boundary(counts, b);
    std::size_t within = 0;
    for (std::size_t i = boundary; i < counts.size(); ++i) {
        within += counts[i];
    }
    return {
        {"id", id},
        {"version", c.analysis_version},
        {"budget", b},
        {"boundary", boundary},
        {"node_count", c.nodes.size()},
        {"tokens_within_budget", within},
    };
}

} // namespace convmap
