#pragma once

#include "convmap/global_layout.hpp"
#include "convmap/model.hpp"
#include "convmap/retrieval.hpp"
#include "convmap/topic_layout.hpp"

#include <nlohmann/json.hpp>

namespace convmap {

using nlohmann::json;

[[nodiscard]] json node_to_json(ConversationNode const & node, bool with_embedding);
[[nodiscard]] json topic_to_json(Topic const & topic, bool with_embedding);

/// Full document including embeddings; inverse of conversation_from_json.
[[nodiscard]] json conversation_to_json(Conversation const & conversation);
/// Throws Error(schema) on a malformed document.
[[nodiscard]] Conversation conversation_from_json(json const & doc);

/// Public view: metadata plus nodes, without embeddings.
[[nodiscard]] json conversation_summary_json(Conversation const & conversation);

/// Topics and per-node memberships only; stable across re-analysis of
/// unchanged input.
[[nodiscard]] json topic_model_json(Conversation const & conversation);

[[nodiscard]] json assignment_to_json(RowAssignment const & assignment);
[[nodiscard]] RowAssignment assignment_from_json(json const & doc);

[[nodiscard]] json geometry_to_json(GlobalGeometry const & geometry);
[[nodiscard]] GlobalGeometry geometry_from_json(json const & doc);

[[nodiscard]] json layout_to_json(LayoutResult const & layout, TopicGraph const & graph);

[[nodiscard]] json keywords_to_json(std::vector<KeywordWeight> const & keywords);
[[nodiscard]] json hits_to_json(std::vector<SearchHit> const & hits);

} // namespace convmap
