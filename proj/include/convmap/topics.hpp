#pragma once

#include "convmap/embedding.hpp"
#include "convmap/model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace convmap {

struct TopicConfig
{
    double membership_threshold = 0.5;
    std::size_t min_nodes_for_recursion = 5;
    std::size_t max_topics_hint = 8;
    std::size_t summary_max_tokens = 64;

    /// Throws Error(argument) when a field is out of range.
    void validate() const;
};

/// A proposed topic. `description` is optional extra text the topic is
/// embedded from; when empty the label itself is embedded.
struct TopicProposal
{
    std::string label;
    std::string description;
};

class LlmProvider
{
public:
    virtual ~LlmProvider() = default;

    [[nodiscard]] virtual std::string name() const = 0;

    [[nodiscard]] virtual std::string summarize(ConversationNode const & node, std::size_t max_tokens) = 0;

    [[nodiscard]] virtual std::vector<TopicProposal> propose_topics(std::vector<std::string> const & summaries,
                                                                    TopicConfig const & cfg) = 0;

    /// Free-form completion used to answer a context-augmented prompt.
    [[nodiscard]] virtual std::string complete(std::string_view prompt) = 0;
};

/// Network-free stand-in. Summaries are the question truncated to the token
/// budget behind a "Q: " prefix; topics come from seeded spherical k-means
/// over offline embeddings of the summaries; answers echo the prompt.
class OfflineLlm final : public LlmProvider
{
public:
    explicit OfflineLlm(std::uint64_t seed = 0)
    : seed_(seed)
    { }

    [[nodiscard]] std::string name() const override { return "offline-stub"; }
    [[nodiscard]] std::string summarize(ConversationNode const & node, std::size_t max_tokens) override;
    [[nodiscard]] std::vector<TopicProposal> propose_topics(std::vector<std::string> const & summaries,
                                                            TopicConfig const & cfg) override;
    [[nodiscard]] std::string complete(std::string_view prompt) override;

private:
    std::uint64_t seed_;
};

/// Longest prefix of `text` whose token count stays within `max_tokens`.
[[nodiscard]] std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens);

struct KMeansResult
{
    std::vector<std::size_t> assignment;
    std::vector<EmbeddingVector> centroids;
};

/// Spherical k-means: cosine assignment (ties to the smaller cluster),
/// normalized-mean centroids, k-means++ seeding from a fixed-seed
/// mt19937_64. Empty clusters keep their previous centroid.
[[nodiscard]] KMeansResult spherical_kmeans(std::span<EmbeddingVector const> points, std::size_t k,
                                            std::uint64_t seed, std::size_t max_iterations = 50);

/// Topic count the offline stub proposes for `summary_count` summaries:
/// min(hint, ceil(count / min_nodes_for_recursion)), at least 1.
[[nodiscard]] std::size_t stub_topic_count(std::size_t summary_count, TopicConfig const & cfg) noexcept;

[[nodiscard]] std::string summarize_node(LlmProvider & llm, ConversationNode const & node, TopicConfig const & cfg);

/// Non-empty, de-duplicated (first occurrence wins), at most
/// cfg.max_topics_hint proposals.
[[nodiscard]] std::vector<TopicProposal> propose_topics(LlmProvider & llm, std::vector<std::string> const & summaries,
                                                        TopicConfig const & cfg);

struct NodeMemberships
{
    /// (topic index, similarity) in ascending topic index.
    std::vector<std::pair<std::size_t, double>> memberships;
    std::size_t primary = 0;
};

/// Members are topics at or above `threshold` plus the argmax topic, which
/// is always included. Ties on the argmax go to the smaller index.
[[nodiscard]] std::vector<NodeMemberships> assign_memberships(std::span<EmbeddingVector const> node_vectors,
                                                              std::span<EmbeddingVector const> topic_vectors,
                                                              double threshold);

/// Full analysis: summaries, node embeddings, level-0 topics, memberships,
/// one level of subtopics for topics with enough members. Replaces any
/// previous topic model and increments analysis_version. Operates on a copy
/// so a provider failure leaves the caller's conversation untouched.
[[nodiscard]] Conversation build_topic_model(Conversation conversation, LlmProvider & llm,
                                             EmbeddingProvider & embedder, TopicConfig const & cfg);

[[nodiscard]] std::string topic_id_for(std::size_t ordinal);

} // namespace convmap
