#include "convmap/remote.hpp"

#include "convmap/error.hpp"
#include "convmap/file_io.hpp"
#include "convmap/text.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

namespace convmap {

namespace {

struct Endpoint
{
    std::string origin;
    std::string base_path;
};

Endpoint split_endpoint(std::string const & url)
{
    auto const scheme_end = url.find("://");
    if (url.empty() || scheme_end == std::string::npos) {
        throw Error(ErrorKind::argument, "remote endpoint must look like scheme://host[:port][/path], got '" + url + "'");
    }
    auto const path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    e.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (! e.base_path.empty() && e.base_path.back() == '/') {
        e.base_path.pop_back();
    }
    return e;
}

bool retryable_status(int status)
{
    return status == 408 || status == 429 || status >= 500;
}

std::string chat(RemoteConfig const & config, std::string_view user_message)
{
    nlohmann::json body{
        {"model", config.chat_model},
        {"temperature", 0},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(user_message)}}})},
    };
    auto const reply = post_json(config, "/v1/chat/completions", body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (nlohmann::json::exception const & e) {
        throw ProviderError("chat completion reply is missing choices[0].message.content: " + std::string(e.what()),
                            false);
    }
}

} // namespace

std::string fill_template(std::string_view tmpl, std::map<std::string, std::string> const & values)
{
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto const open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            break;
        }
        auto const close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        std::string const key(tmpl.substr(open + 2, close - open - 2));
        if (auto it = values.find(key); it != values.end()) {
            out += it->second;
        } else {
            out.append(tmpl.substr(open, close + 2 - open));
        }
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

nlohmann::json post_json(RemoteConfig const & config, std::string_view path, nlohmann::json const & body)
{
    Endpoint const e = split_endpoint(config.endpoint);
    std::string const full_path = e.base_path + std::string(path);
    std::string const payload = body.dump();
    httplib::Headers headers;
    if (! config.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config.api_key);
    }

    std::string last_failure;
    for (std::size_t attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
        }
        httplib::Client client(e.origin);
        client.set_connection_timeout(config.timeout);
        client.set_read_timeout(config.timeout);
        client.set_write_timeout(config.timeout);
        auto res = client.Post(full_path, headers, payload, "application/json");
        if (! res) {
            last_failure = "request to " + e.origin + full_path + " failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_failure = e.origin + full_path + " answered HTTP " + std::to_string(res->status) + ": "
                           + res->body.substr(0, 200);
            if (retryable_status(res->status)) {
                continue;
            }
            throw ProviderError(last_failure, false);
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (nlohmann::json::parse_error const & err) {
            throw ProviderError(e.origin + full_path + " returned malformed JSON: " + err.what(), false);
        }
    }
    throw ProviderError(last_failure, true);
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteConfig config)
: config_(std::move(config))
{
    (void) split_endpoint(config_.endpoint);
    if (config_.dimension == 0) {
        throw Error(ErrorKind::argument, "remote embedding dimension must be positive");
    }
}

EmbeddingVector RemoteEmbeddingProvider::embed_text(std::string_view text)
{
    std::string const one(text);
    return embed_texts(std::span<std::string const>(&one, 1)).front();
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_texts(std::span<std::string const> texts)
{
    if (texts.empty()) {
        return {};
    }
    nlohmann::json body{{"model", config_.embedding_model},
                        {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    auto const reply = post_json(config_, "/v1/embeddings", body);
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    try {
        auto const & data = reply.at("data");
        for (std::size_t pos = 0; pos < data.size(); ++pos) {
            auto const & item = data[pos];
            std::size_t const index = item.contains("index") ? item.at("index").get<std::size_t>() : pos;
            auto values = item.at("embedding").get<std::vector<double>>();
            if (index >= texts.size() || filled[index]) {
                throw ProviderError("embedding reply has a bad or repeated index " + std::to_string(index), false);
            }
            if (values.size() != config_.dimension) {
                throw ProviderError("embedding reply has dimension " + std::to_string(values.size()) + ", expected "
                                        + std::to_string(config_.dimension),
                                    false);
            }
            EmbeddingVector v = Eigen::Map<EmbeddingVector>(values.data(), static_cast<Eigen::Index>(values.size()));
            if (ordered_dot(v, v) == 0.0) {
                throw ProviderError("embedding reply contains a zero vector", false);
            }
            normalize_ordered(v);
            out[index] = std::move(v);
            filled[index] = true;
        }
    } catch (nlohmann::json::exception const & e) {
        throw ProviderError("embedding reply is not in the expected shape: " + std::string(e.what()), false);
    }
    if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
        throw ProviderError("embedding reply is missing vectors", false);
    }
    return out;
}

RemoteLlm::RemoteLlm(RemoteConfig config)
: config_(std::move(config))
{
    (void) split_endpoint(config_.endpoint);
}

std::string RemoteLlm::summarize(ConversationNode const & node, std::size_t max_tokens)
{
    // roughly three words per four tokens
    std::size_t const max_words = std::max<std::size_t>(1, max_tokens * 3 / 4);
    return chat(config_, fill_template(prompts::summarize_v1, {{"max_words", std::to_string(max_words)},
                                                               {"question", node.question},
                                                               {"answer", node.answer}}));
}

std::vector<TopicProposal> RemoteLlm::propose_topics(std::vector<std::string> const & summaries,
                                                     TopicConfig const & cfg)
{
    std::string lines;
    for (auto const & s : summaries) {
        std::string one_line = s;
        std::replace(one_line.begin(), one_line.end(), '\n', ' ');
        lines += "- " + one_line + "\n";
    }
    auto const reply = chat(config_, fill_template(prompts::topics_v1, {{"max_topics", std::to_string(cfg.max_topics_hint)},
                                                                        {"summaries", lines}}));
    std::vector<TopicProposal> out;
    for (auto & label : parse_label_array(reply)) {
        out.push_back({std::move(label), ""});
    }
    return out;
}

std::string RemoteLlm::complete(std::string_view prompt)
{
    return chat(config_, prompt);
}

CachedLlm::CachedLlm(std::unique_ptr<LlmProvider> inner, std::filesystem::path cache_dir)
: inner_(std::move(inner))
{
    std::string safe_name;
    for (char c : inner_->name()) {
        bool const ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        safe_name.push_back(ok ? c : '_');
    }
    dir_ = std::move(cache_dir) / safe_name;
}

std::optional<nlohmann::json> CachedLlm::lookup(std::string const & key) const
{
    auto const path = dir_ / (key + ".json");
    std::error_code ec;
    if (! std::filesystem::exists(path, ec)) {
        return std::nullopt;
    }
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (std::exception const &) {
        return std::nullopt;
    }
}

void CachedLlm::remember(std::string const & key, nlohmann::json const & value) const
{
    write_file_atomic(dir_ / (key + ".json"), value.dump());
}

std::string CachedLlm::summarize(ConversationNode const & node, std::size_t max_tokens)
{
    nlohmann::json const request{{"op", prompts::summarize_version},
                                 {"model", inner_->name()},
                                 {"question", node.question},
                                 {"answer", node.answer},
                                 {"max_tokens", max_tokens}};
    std::string const key = sha256_hex(request.dump());
    if (auto hit = lookup(key); hit && hit->is_string()) {
        return hit->get<std::string>();
    }
    std::string summary = inner_->summarize(node, max_tokens);
    remember(key, summary);
    return summary;
}

std::vector<TopicProposal> CachedLlm::propose_topics(std::vector<std::string> const & summaries,
                                                     TopicConfig const & cfg)
{
    nlohmann::json const request{{"op", prompts::topics_version},
                                 {"model", inner_->name()},
                                 {"summaries", summaries},
                                 {"max_topics", cfg.max_topics_hint},
                                 {"min_nodes", cfg.min_nodes_for_recursion}};
    std::string const key = sha256_hex(request.dump());
    if (auto hit = lookup(key); hit && hit->is_array()) {
        std::vector<TopicProposal> out;
        for (auto const & item : *hit) {
            out.push_back({item.value("label", ""), item.value("description", "")});
        }
        return out;
    }
    auto proposals = inner_->propose_topics(summaries, cfg);
    nlohmann::json stored = nlohmann::json::array();
    for (auto const & p : proposals) {
        stored.push_back({{"label", p.label}, {"description", p.description}});
    }
    remember(key, stored);
    return proposals;
}

std::vector<std::string> parse_label_array(std::string_view reply)
{
    auto const open = reply.find('[');
    auto const close = reply.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        throw ProviderError("topic reply holds no JSON array: '" + std::string(reply.substr(0, 120)) + "'", false);
    }
    try {
        auto const parsed = nlohmann::json::parse(reply.substr(open, close - open + 1));
        std::vector<std::string> labels;
        for (auto const & item : parsed) {
            if (item.is_string()) {
                labels.push_back(text::trim(item.get<std::string>()));
            }
        }
        return labels;
    } catch (nlohmann::json::exception const & e) {
        throw ProviderError("topic reply array is not valid JSON: " + std::string(e.what()), false);
    }
}

} // namespace convmap
