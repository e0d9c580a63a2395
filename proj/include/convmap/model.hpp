#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace convmap {

/// Unit-length embedding of a text. Dimension is fixed per store.
using EmbeddingVector = Eigen::VectorXd;

struct Membership
{
    std::string topic_id;
    double similarity = 0.0;

    friend bool operator == (Membership const &, Membership const &) = default;
};

/// One question/answer round of a conversation.
struct ConversationNode
{
    std::string id;
    std::size_t seq_index = 0;
    std::string question;
    std::string answer;
    std::string summary;
    std::size_t token_count = 0;
    std::optional<EmbeddingVector> embedding;
    /// Level-0 and level-1 memberships, ordered by topic ordinal.
    std::vector<Membership> memberships;
    std::optional<std::string> primary_topic;
};

struct Topic
{
    std::string id;
    std::string label;
    std::size_t ordinal = 0;
    int level = 0;
    std::optional<std::string> parent;
    EmbeddingVector embedding;
    std::map<std::string, double> member_similarities;
};

struct Conversation
{
    std::string id;
    std::string title;
    std::vector<ConversationNode> nodes;
    std::vector<Topic> topics;
    std::string created;
    std::string updated;
    std::uint64_t analysis_version = 0;
    /// Threshold the current topic model was built with.
    double membership_threshold = 0.5;
    /// 0 until the first embedding is stored.
    std::size_t embedding_dimension = 0;
    std::string embedding_provider;
};

/// Human-readable descriptions of every broken invariant; empty when the
/// conversation is consistent. Never throws.
[[nodiscard]] std::vector<std::string> validate_conversation(Conversation const & conversation);

[[nodiscard]] Topic const * find_topic(Conversation const & conversation, std::string_view topic_id) noexcept;
[[nodiscard]] ConversationNode const * find_node(Conversation const & conversation, std::string_view node_id) noexcept;

/// True once a topic model exists and every node carries a primary topic.
[[nodiscard]] bool is_analyzed(Conversation const & conversation) noexcept;

/// Level-0 topics in ordinal order.
[[nodiscard]] std::vector<Topic const *> top_level_topics(Conversation const & conversation);

/// Index of the node's primary topic among the level-0 topics.
[[nodiscard]] std::vector<std::size_t> primary_topic_indices(Conversation const & conversation);

/// Text a node is embedded from.
[[nodiscard]] std::string embedding_text(ConversationNode const & node);

} // namespace convmap
