#include "convmap/ingest.hpp"

#include "convmap/error.hpp"
#include "convmap/text.hpp"

#include <nlohmann/json.hpp>

namespace convmap {

namespace {

using nlohmann::json;

std::pair<std::size_t, std::size_t> line_and_column(std::string_view bytes, std::size_t offset)
{
    std::size_t line = 1;
    std::size_t column = 1;
    offset = std::min(offset, bytes.size());
    for (std::size_t i = 0; i < offset; ++i) {
        if (bytes[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

Role parse_role(json const & value, std::size_t index)
{
    if (! value.is_string()) {
        throw Error(ErrorKind::schema, "messages[" + std::to_string(index) + "].role must be a string");
    }
    auto const & role = value.get_ref<std::string const &>();
    if (role == "user") {
        return Role::user;
    }
    if (role == "assistant") {
        return Role::assistant;
    }
    throw Error(ErrorKind::schema, "messages[" + std::to_string(index) + "] has unsupported role '" + role + "'");
}

} // namespace

std::size_t count_tokens(std::string_view text) noexcept
{
    return (text::utf8_length(text) + 3) / 4;
}

std::string node_id_for(std::size_t seq_index)
{
    return "n" + std::to_string(seq_index);
}

RawExport parse_export(std::string_view bytes)
{
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (json::parse_error const & e) {
        // nlohmann reports the 1-based byte position of the failure
        std::size_t const offset = e.byte > 0 ? e.byte - 1 : 0;
        auto const [line, column] = line_and_column(bytes, offset);
        throw ParseError("malformed export", line, column);
    }
    if (! doc.is_object()) {
        throw Error(ErrorKind::schema, "export must be a JSON object");
    }
    RawExport out;
    if (auto it = doc.find("title"); it != doc.end()) {
        if (! it->is_string()) {
            throw Error(ErrorKind::schema, "title must be a string");
        }
        out.title = it->get<std::string>();
    }
    auto messages = doc.find("messages");
    if (messages == doc.end() || ! messages->is_array()) {
        throw Error(ErrorKind::schema, "export requires a 'messages' array");
    }
    out.messages.reserve(messages->size());
    for (std::size_t i = 0; i < messages->size(); ++i) {
        json const & m = (*messages)[i];
        if (! m.is_object()) {
            throw Error(ErrorKind::schema, "messages[" + std::to_string(i) + "] must be an object");
        }
        auto role = m.find("role");
        if (role == m.end()) {
            throw Error(ErrorKind::schema, "messages[" + std::to_string(i) + "] is missing 'role'");
        }
        auto content = m.find("content");
        if (content == m.end() || ! content->is_string()) {
            throw Error(ErrorKind::schema, "messages[" + std::to_string(i) + "].content must be a string");
        }
        RawMessage msg{parse_role(*role, i), content->get<std::string>(), std::nullopt};
        if (auto ts = m.find("ts"); ts != m.end() && ! ts->is_null()) {
            if (! ts->is_string()) {
                throw Error(ErrorKind::schema, "messages[" + std::to_string(i) + "].ts must be a string");
            }
            msg.ts = ts->get<std::string>();
        }
        out.messages.push_back(std::move(msg));
    }
    return out;
}

std::vector<ConversationNode> pair_messages(RawExport const & raw)
{
    return pair_messages(raw, [](std::string_view t) { return count_tokens(t); });
}

std::vector<ConversationNode> pair_messages(RawExport const & raw, Tokenizer const & tokenizer)
{
    if (! raw.messages.empty() && raw.messages.front().role == Role::assistant) {
        throw Error(ErrorKind::structural, "export begins with an assistant message");
    }
    std::vector<ConversationNode> nodes;
    auto append = [](std::string & into, std::string const & part) {
        if (! into.empty()) {
            into += "\n\n";
        }
        into += part;
    };
    Role previous = Role::assistant;
    for (RawMessage const & m : raw.messages) {
        if (m.role == Role::user) {
            if (previous == Role::assistant) {
                ConversationNode node;
                node.seq_index = nodes.size();
                node.id = node_id_for(node.seq_index);
                nodes.push_back(std::move(node));
            }
            append(nodes.back().question, m.content);
        } else {
            append(nodes.back().answer, m.content);
        }
        previous = m.role;
    }
    for (ConversationNode & n : nodes) {
        if (text::trim(n.question).empty()) {
            throw Error(ErrorKind::structural, "node " + std::to_string(n.seq_index) + " has an empty question");
        }
        n.token_count = tokenizer(n.question + n.answer);
    }
    return nodes;
}

} // namespace convmap
