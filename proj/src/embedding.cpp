#include "convmap/embedding.hpp"

#include "convmap/file_io.hpp"
#include "convmap/text.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <map>

namespace convmap {

namespace {

constexpr double unit_tolerance = 1e-6;

void check_output(EmbeddingProvider const & provider, EmbeddingVector const & v)
{
    if (static_cast<std::size_t>(v.size()) != provider.dimension()) {
        throw ProviderError("provider '" + provider.name() + "' returned dimension " + std::to_string(v.size())
                                + ", expected " + std::to_string(provider.dimension()),
                            false);
    }
    if (! v.allFinite() || std::abs(std::sqrt(ordered_dot(v, v)) - 1.0) > unit_tolerance) {
        throw ProviderError("provider '" + provider.name() + "' returned a vector that is not unit length", false);
    }
}

} // namespace

std::vector<EmbeddingVector> EmbeddingProvider::embed_texts(std::span<std::string const> texts)
{
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto const & t : texts) {
        out.push_back(embed_text(t));
    }
    return out;
}

EmbeddingVector embed(EmbeddingProvider & provider, std::string_view text)
{
    if (text.empty()) {
        throw Error(ErrorKind::argument, "cannot embed empty text");
    }
    EmbeddingVector v = provider.embed_text(text);
    check_output(provider, v);
    return v;
}

std::vector<EmbeddingVector> embed_all(EmbeddingProvider & provider, std::span<std::string const> texts)
{
    for (auto const & t : texts) {
        if (t.empty()) {
            throw Error(ErrorKind::argument, "cannot embed empty text");
        }
    }
    auto out = provider.embed_texts(texts);
    if (out.size() != texts.size()) {
        throw ProviderError("provider '" + provider.name() + "' returned " + std::to_string(out.size())
                                + " vectors for " + std::to_string(texts.size()) + " inputs",
                            false);
    }
    for (auto const & v : out) {
        check_output(provider, v);
    }
    return out;
}

EmbeddingVector offline_embed(std::string_view text, std::size_t dimension)
{
    if (dimension == 0) {
        throw Error(ErrorKind::argument, "embedding dimension must be positive");
    }
    auto const words = text::split_words(text);
    if (words.empty()) {
        throw Error(ErrorKind::argument, "text has no tokens to embed");
    }
    EmbeddingVector v = EmbeddingVector::Zero(static_cast<Eigen::Index>(dimension));
    for (auto const & w : words) {
        std::uint64_t const h = text::hash64(w, offline_hash_seed);
        double const sign = (h >> 63) != 0 ? -1.0 : 1.0;
        v[static_cast<Eigen::Index>(h % dimension)] += sign;
    }
    if (ordered_dot(v, v) == 0.0) {
        // every bucket cancelled out; fall back to the first token's bucket
        std::uint64_t const h = text::hash64(words.front(), offline_hash_seed);
        v[static_cast<Eigen::Index>(h % dimension)] = 1.0;
    }
    normalize_ordered(v);
    return v;
}

OfflineEmbeddingProvider::OfflineEmbeddingProvider(std::size_t dimension)
: dimension_(dimension)
{
    if (dimension_ == 0) {
        throw Error(ErrorKind::argument, "embedding dimension must be positive");
    }
}

std::string OfflineEmbeddingProvider::name() const
{
    return "offline-hash-" + std::to_string(dimension_);
}

EmbeddingVector OfflineEmbeddingProvider::embed_text(std::string_view text)
{
    return offline_embed(text, dimension_);
}

std::string sha256_hex(std::string_view bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::io, "sha256 failed");
    }
    std::string hex;
    hex.reserve(length * 2);
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

CachedEmbeddingProvider::CachedEmbeddingProvider(std::unique_ptr<EmbeddingProvider> inner,
                                                 std::filesystem::path cache_dir)
: inner_(std::move(inner))
{
    std::string safe_name;
    for (char c : inner_->name()) {
        bool const ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        safe_name.push_back(ok ? c : '_');
    }
    dir_ = std::move(cache_dir) / safe_name;
}

std::optional<EmbeddingVector> CachedEmbeddingProvider::lookup(std::string const & key)
{
    {
        std::lock_guard lock(mutex_);
        if (auto it = memory_.find(key); it != memory_.end()) {
            return it->second;
        }
    }
    auto const path = dir_ / (key + ".json");
    std::error_code ec;
    if (! std::filesystem::exists(path, ec)) {
        return std::nullopt;
    }
    try {
        auto values = nlohmann::json::parse(read_file(path)).get<std::vector<double>>();
        EmbeddingVector v = Eigen::Map<EmbeddingVector>(values.data(), static_cast<Eigen::Index>(values.size()));
        if (static_cast<std::size_t>(v.size()) != inner_->dimension()) {
            return std::nullopt;
        }
        std::lock_guard lock(mutex_);
        memory_.emplace(key, v);
        return v;
    } catch (std::exception const &) {
        // unreadable entry; recompute and overwrite
        return std::nullopt;
    }
}

void CachedEmbeddingProvider::remember(std::string const & key, EmbeddingVector const & v)
{
    nlohmann::json values = std::vector<double>(v.data(), v.data() + v.size());
    write_file_atomic(dir_ / (key + ".json"), values.dump());
    std::lock_guard lock(mutex_);
    memory_[key] = v;
}

EmbeddingVector CachedEmbeddingProvider::embed_text(std::string_view text)
{
    std::string const key = sha256_hex(text);
    if (auto hit = lookup(key)) {
        return *hit;
    }
    EmbeddingVector v = inner_->embed_text(text);
    {
        std::lock_guard lock(mutex_);
        ++misses_;
    }
    remember(key, v);
    return v;
}

std::vector<EmbeddingVector> CachedEmbeddingProvider::embed_texts(std::span<std::string const> texts)
{
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::string> missing;
    // key -> position in `missing`, so repeats within a batch go out once
    std::map<std::string, std::size_t> pending;
    std::vector<std::size_t> slot_of(texts.size(), 0);
    std::vector<bool> is_missing(texts.size(), false);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = sha256_hex(texts[i]);
        if (auto it = pending.find(keys[i]); it != pending.end()) {
            is_missing[i] = true;
            slot_of[i] = it->second;
        } else if (auto hit = lookup(keys[i])) {
            out[i] = std::move(*hit);
        } else {
            is_missing[i] = true;
            slot_of[i] = missing.size();
            pending.emplace(keys[i], missing.size());
            missing.push_back(texts[i]);
        }
    }
    if (! missing.empty()) {
        auto fresh = inner_->embed_texts(missing);
        if (fresh.size() != missing.size()) {
            throw ProviderError("provider '" + inner_->name() + "' returned a short batch", false);
        }
        for (auto const & [key, slot] : pending) {
            check_output(*inner_, fresh[slot]);
            remember(key, fresh[slot]);
        }
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (is_missing[i]) {
                out[i] = fresh[slot_of[i]];
            }
        }
        std::lock_guard lock(mutex_);
        misses_ += missing.size();
    }
    return out;
}

} // namespace convmap
