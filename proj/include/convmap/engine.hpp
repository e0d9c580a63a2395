#pragma once

#include "convmap/embedding.hpp"
#include "convmap/global_layout.hpp"
#include "convmap/retrieval.hpp"
#include "convmap/store.hpp"
#include "convmap/topic_layout.hpp"
#include "convmap/topics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace convmap {

struct ServiceConfig
{
    std::filesystem::path store = "convmap-store";
    /// "offline" or "remote"
    std::string provider = "offline";
    std::string endpoint;
    std::string api_key;
    std::string embedding_model = "text-embedding-3-small";
    std::string chat_model = "gpt-3.5-turbo";
    /// 0 selects the provider's default (256 offline, 1536 remote)
    std::size_t dimension = 0;
    std::size_t budget = default_token_budget;
    double threshold = 0.5;
    double edge_threshold = 0.5;
    std::uint64_t seed = 0;
    bool reanalyze_on_ask = true;
    TopicConfig topics;

    /// Defaults overridden by CONVMAP_STORE, CONVMAP_PROVIDER,
    /// CONVMAP_ENDPOINT, CONVMAP_API_KEY, CONVMAP_EMBEDDING_MODEL,
    /// CONVMAP_CHAT_MODEL, CONVMAP_DIMENSION, CONVMAP_BUDGET,
    /// CONVMAP_THRESHOLD, CONVMAP_EDGE_THRESHOLD, CONVMAP_SEED and
    /// CONVMAP_REANALYZE_ON_ASK.
    [[nodiscard]] static ServiceConfig from_env();

    void validate() const;
};

struct TopicLayoutQuery
{
    LayoutMode mode = LayoutMode::force;
    std::optional<double> threshold;
    GridOrder key = GridOrder::time;
    std::optional<std::uint64_t> seed;
};

struct SearchQuery
{
    std::string query;
    /// nullopt returns every node that clears min_score
    std::optional<std::size_t> top_k = default_top_k;
    double min_score = default_min_score;
};

struct KeywordQuery
{
    std::size_t from = 0;
    std::size_t to = 0;
    std::size_t top_m = 30;
    std::optional<std::string> term;
};

/// Current time as an ISO-8601 UTC string; SOURCE_DATE_EPOCH pins it.
[[nodiscard]] std::string timestamp_now();

/// The operations behind both the HTTP API and the command line. Every
/// result is the JSON body the API returns. Reads work from the last
/// committed document; writers take the conversation lock only to commit,
/// and provider calls run outside it.
class Engine
{
public:
    Engine(ServiceConfig config, std::unique_ptr<EmbeddingProvider> embedder, std::unique_ptr<LlmProvider> llm);

    /// Providers chosen by `config.provider`; embeddings are cached in the store.
    [[nodiscard]] static std::unique_ptr<Engine> from_config(ServiceConfig config);

    [[nodiscard]] ServiceConfig const & config() const noexcept { return config_; }
    [[nodiscard]] Store & store() noexcept { return store_; }

    [[nodiscard]] nlohmann::json ingest(std::string_view export_text);
    [[nodiscard]] nlohmann::json analyze(std::string const & id);
    [[nodiscard]] nlohmann::json conversation(std::string const & id) const;
    [[nodiscard]] nlohmann::json global_layout(std::string const & id) const;
    [[nodiscard]] nlohmann::json topics(std::string const & id) const;
    [[nodiscard]] nlohmann::json topic_layout(std::string const & id, std::string const & topic_id,
                                              TopicLayoutQuery const & query) const;
    [[nodiscard]] nlohmann::json node(std::string const & id, std::string const & node_id) const;
    [[nodiscard]] nlohmann::json search(std::string const & id, SearchQuery const & query) const;
    [[nodiscard]] nlohmann::json keywords(std::string const & id, KeywordQuery const & query) const;
    [[nodiscard]] nlohmann::json ask(std::string const & id, std::string const & question,
                                     std::vector<std::string> const & context_node_ids);
    [[nodiscard]] nlohmann::json forgotten(std::string const & id, std::optional<std::size_t> budget) const;

private:
    [[nodiscard]] StoredConversation analyzed_copy(Conversation conversation) const;
    [[nodiscard]] StoredConversation require_analyzed(std::string const & id) const;
    void commit(StoredConversation const & next, std::uint64_t expected_version, std::size_t expected_nodes);

    ServiceConfig config_;
    Store store_;
    std::unique_ptr<EmbeddingProvider> embedder_;
    std::unique_ptr<LlmProvider> llm_;
};

} // namespace convmap
