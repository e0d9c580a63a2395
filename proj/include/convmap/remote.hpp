#pragma once

#include "convmap/embedding.hpp"
#include "convmap/topics.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace convmap {

namespace prompts {

extern std::string_view const summarize_v1;
extern std::string_view const topics_v1;

inline constexpr std::string_view summarize_version = "summarize/1";
inline constexpr std::string_view topics_version = "topics/1";

} // namespace prompts

/// Replaces every "{{key}}" in `tmpl` with its value. Unknown placeholders
/// are left as they are.
[[nodiscard]] std::string fill_template(std::string_view tmpl, std::map<std::string, std::string> const & values);

/// OpenAI-compatible endpoint settings shared by both remote providers.
struct RemoteConfig
{
    /// scheme://host[:port][/base]; "/v1/..." is appended to the base path
    std::string endpoint;
    std::string api_key;
    std::string embedding_model = "text-embedding-3-small";
    std::string chat_model = "gpt-3.5-turbo";
    std::size_t dimension = 1536;
    std::chrono::seconds timeout{60};
    /// extra attempts after a retryable failure (connection error, 429, 5xx)
    std::size_t retries = 2;
};

/// POSTs `body` to `path` under the configured endpoint and returns the
/// parsed JSON reply. Failures surface as ProviderError.
[[nodiscard]] nlohmann::json post_json(RemoteConfig const & config, std::string_view path,
                                       nlohmann::json const & body);

/// /v1/embeddings client. Vectors are L2-normalized on arrival.
class RemoteEmbeddingProvider final : public EmbeddingProvider
{
public:
    explicit RemoteEmbeddingProvider(RemoteConfig config);

    [[nodiscard]] std::string name() const override { return "remote/" + config_.embedding_model; }
    [[nodiscard]] std::size_t dimension() const override { return config_.dimension; }
    [[nodiscard]] EmbeddingVector embed_text(std::string_view text) override;
    [[nodiscard]] std::vector<EmbeddingVector> embed_texts(std::span<std::string const> texts) override;

private:
    RemoteConfig config_;
};

/// /v1/chat/completions client driven by the shipped prompt templates.
class RemoteLlm final : public LlmProvider
{
public:
    explicit RemoteLlm(RemoteConfig config);

    [[nodiscard]] std::string name() const override { return "remote/" + config_.chat_model; }
    [[nodiscard]] std::string summarize(ConversationNode const & node, std::size_t max_tokens) override;
    [[nodiscard]] std::vector<TopicProposal> propose_topics(std::vector<std::string> const & summaries,
                                                            TopicConfig const & cfg) override;
    [[nodiscard]] std::string complete(std::string_view prompt) override;

private:
    RemoteConfig config_;
};

/// Memoizes summaries and topic proposals on disk, keyed by a hash of the
/// inputs, so re-analysis with a remote model is repeatable. Completions
/// always reach the inner provider.
class CachedLlm final : public LlmProvider
{
public:
    CachedLlm(std::unique_ptr<LlmProvider> inner, std::filesystem::path cache_dir);

    [[nodiscard]] std::string name() const override { return inner_->name(); }
    [[nodiscard]] std::string summarize(ConversationNode const & node, std::size_t max_tokens) override;
    [[nodiscard]] std::vector<TopicProposal> propose_topics(std::vector<std::string> const & summaries,
                                                            TopicConfig const & cfg) override;
    [[nodiscard]] std::string complete(std::string_view prompt) override { return inner_->complete(prompt); }

private:
    [[nodiscard]] std::optional<nlohmann::json> lookup(std::string const & key) const;
    void remember(std::string const & key, nlohmann::json const & value) const;

    std::unique_ptr<LlmProvider> inner_;
    std::filesystem::path dir_;
};

/// Labels from a reply that should hold a JSON array of strings. Tolerates
/// surrounding prose or code fences; throws ProviderError otherwise.
[[nodiscard]] std::vector<std::string> parse_label_array(std::string_view reply);

} // namespace convmap
