#pragma once

#include "convmap/error.hpp"
#include "convmap/model.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace convmap {

/// Text to unit vector. Implementations must return identical vectors for
/// identical text under one configuration.
class EmbeddingProvider
{
public:
    virtual ~EmbeddingProvider() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::size_t dimension() const = 0;

    /// `text` is non-empty; callers go through convmap::embed.
    [[nodiscard]] virtual EmbeddingVector embed_text(std::string_view text) = 0;

    [[nodiscard]] virtual std::vector<EmbeddingVector> embed_texts(std::span<std::string const> texts);
};

/// Validated entry point: rejects empty text and checks the provider's
/// output dimension and norm.
[[nodiscard]] EmbeddingVector embed(EmbeddingProvider & provider, std::string_view text);
[[nodiscard]] std::vector<EmbeddingVector> embed_all(EmbeddingProvider & provider, std::span<std::string const> texts);

/// Sequential dot product. Summation order is fixed so results do not depend
/// on the SIMD width Eigen picks on a given machine.
template <typename DerivedA, typename DerivedB>
[[nodiscard]] typename DerivedA::Scalar
ordered_dot(Eigen::MatrixBase<DerivedA> const & a, Eigen::MatrixBase<DerivedB> const & b)
{
    using Scalar = typename DerivedA::Scalar;
    Scalar sum(0);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        sum += a.coeff(i) * b.coeff(i);
    }
    return sum;
}

template <typename DerivedA, typename DerivedB>
[[nodiscard]] typename DerivedA::Scalar
cosine(Eigen::MatrixBase<DerivedA> const & a, Eigen::MatrixBase<DerivedB> const & b)
{
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size()) {
        throw Error(ErrorKind::argument,
                    "cosine of vectors with dimensions " + std::to_string(a.size()) + " and "
                        + std::to_string(b.size()));
    }
    Scalar const na = ordered_dot(a, a);
    Scalar const nb = ordered_dot(b, b);
    if (na == Scalar(0) || nb == Scalar(0)) {
        return Scalar(0);
    }
    Scalar const c = ordered_dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, Scalar(-1), Scalar(1));
}

/// In-place L2 normalization with the fixed-order norm.
template <typename Derived>
void normalize_ordered(Eigen::MatrixBase<Derived> & v)
{
    auto const n = std::sqrt(ordered_dot(v, v));
    if (n > 0) {
        v /= n;
    }
}

inline constexpr std::uint64_t offline_hash_seed = 0x5EEDC0FFEE123457ULL;
inline constexpr std::size_t default_dimension = 256;

/// Feature-hashing embedding: lowercase word tokens, each occurrence adds
/// +1 or -1 (sign from the top hash bit) into bucket hash mod dimension,
/// then L2 normalization. Throws Error(argument) when no token survives.
[[nodiscard]] EmbeddingVector offline_embed(std::string_view text, std::size_t dimension);

class OfflineEmbeddingProvider final : public EmbeddingProvider
{
public:
    explicit OfflineEmbeddingProvider(std::size_t dimension = default_dimension);

    [[nodiscard]] std::string name() const override;
    [[nodiscard]] std::size_t dimension() const override { return dimension_; }
    [[nodiscard]] EmbeddingVector embed_text(std::string_view text) override;

private:
    std::size_t dimension_;
};

/// Memoizes another provider in memory and on disk, one file per
/// (provider name, SHA-256 of the text). Entries are written atomically.
class CachedEmbeddingProvider final : public EmbeddingProvider
{
public:
    CachedEmbeddingProvider(std::unique_ptr<EmbeddingProvider> inner, std::filesystem::path cache_dir);

    [[nodiscard]] std::string name() const override { return inner_->name(); }
    [[nodiscard]] std::size_t dimension() const override { return inner_->dimension(); }
    [[nodiscard]] EmbeddingVector embed_text(std::string_view text) override;
    [[nodiscard]] std::vector<EmbeddingVector> embed_texts(std::span<std::string const> texts) override;

    [[nodiscard]] std::size_t misses() const noexcept { return misses_; }

private:
    std::optional<EmbeddingVector> lookup(std::string const & key);
    void remember(std::string const & key, EmbeddingVector const & v);

    std::unique_ptr<EmbeddingProvider> inner_;
    std::filesystem::path dir_;
    std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> memory_;
    std::size_t misses_ = 0;
};

[[nodiscard]] std::string sha256_hex(std::string_view bytes);

} // namespace convmap
