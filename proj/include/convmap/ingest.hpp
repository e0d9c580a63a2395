#pragma once

#include "convmap/model.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace convmap {

enum class Role { user, assistant };

struct RawMessage
{
    Role role = Role::user;
    std::string content;
    std::optional<std::string> ts;
};

/// Decoded conversation export, messages in file order.
struct RawExport
{
    std::string title;
    std::vector<RawMessage> messages;
};

using Tokenizer = std::function<std::size_t(std::string_view)>;

/// ceil(code points / 4). Deterministic and dependency free; swap in a real
/// tokenizer through the Tokenizer overloads.
[[nodiscard]] std::size_t count_tokens(std::string_view text) noexcept;

/// Parses the JSON export format:
/// { "title": string, "messages": [ { "role": "user"|"assistant", "content": string, "ts"?: string } ] }
/// Unknown keys are ignored. Throws ParseError on malformed JSON and
/// Error(schema) on shape or role violations.
[[nodiscard]] RawExport parse_export(std::string_view bytes);

/// Pairs each run of user messages with the assistant reply that follows it.
/// Consecutive user (or assistant) messages are joined with a blank line; a
/// trailing unanswered question becomes a node with an empty answer.
[[nodiscard]] std::vector<ConversationNode> pair_messages(RawExport const & raw);
[[nodiscard]] std::vector<ConversationNode> pair_messages(RawExport const & raw, Tokenizer const & tokenizer);

[[nodiscard]] std::string node_id_for(std::size_t seq_index);

} // namespace convmap
