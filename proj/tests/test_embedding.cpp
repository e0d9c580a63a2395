#include "convmap/embedding.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <random>

using namespace convmap;

TEST_CASE("offline embedding is deterministic and unit length")
{
    OfflineEmbeddingProvider p;
    auto const a = embed(p, "How does the evaluation pipeline work?");
    auto const b = embed(p, "How does the evaluation pipeline work?");
    CHECK(a.size() == 256);
    CHECK((a.array() == b.array()).all());
    CHECK(std::abs(a.norm() - 1.0) < 1e-6);
}

TEST_CASE("embedding empty or token-free text is an argument error")
{
    OfflineEmbeddingProvider p;
    CHECK_THROWS_AS((void) embed(p, ""), Error);
    CHECK_THROWS_AS((void) offline_embed("   ...  ", 16), Error);
}

TEST_CASE("repeated tokens point the same way as a single token")
{
    auto const many = offline_embed("a a a", 256);
    auto const one = offline_embed("a", 256);
    CHECK(cosine(many, one) == doctest::Approx(1.0).epsilon(1e-12));
    // the vector is a signed basis vector
    CHECK((many.array() != 0.0).count() == 1);
}

TEST_CASE("embedding is case-insensitive and ignores punctuation")
{
    auto const a = offline_embed("Risk, ASSESSMENT!", 64);
    auto const b = offline_embed("risk assessment", 64);
    CHECK((a.array() == b.array()).all());
}

TEST_CASE("cosine identities")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        EmbeddingVector v(32);
        EmbeddingVector w(32);
        for (Eigen::Index i = 0; i < 32; ++i) {
            v[i] = g(rng);
            w[i] = g(rng);
        }
        normalize_ordered(v);
        normalize_ordered(w);
        CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(cosine(v, EmbeddingVector(-v)) == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(cosine(v, w) == cosine(w, v));
    }
    EmbeddingVector e1 = EmbeddingVector::Zero(4);
    EmbeddingVector e2 = EmbeddingVector::Zero(4);
    e1[0] = 1.0;
    e2[1] = 1.0;
    CHECK(cosine(e1, e2) == 0.0);
    CHECK_THROWS_AS((void) cosine(e1, EmbeddingVector::Zero(5)), Error);
}

TEST_CASE("texts with disjoint tokens are nearly orthogonal")
{
    std::mt19937_64 rng(17);
    std::size_t next = 0;
    auto fresh_text = [&](std::size_t words) {
        std::string t;
        for (std::size_t i = 0; i < words; ++i) {
            t += "w" + std::to_string(next++) + " ";
        }
        return t;
    };
    int failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto const a = offline_embed(fresh_text(3 + rng() % 20), 256);
        auto const b = offline_embed(fresh_text(3 + rng() % 20), 256);
        if (std::abs(cosine(a, b)) >= 0.5) {
            ++failures;
        }
    }
    CHECK(failures == 0);
}

TEST_CASE("sha256 matches the published test vector")
{
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

namespace {

class CountingProvider final : public EmbeddingProvider
{
public:
    std::string name() const override { return "counting/test"; }
    std::size_t dimension() const override { return 8; }
    EmbeddingVector embed_text(std::string_view text) override
    {
        ++calls;
        return offline_embed(text, 8);
    }
    int calls = 0;
};

} // namespace

TEST_CASE("cached provider serves repeats from memory and disk")
{
    testing::TempDir dir("cache");
    std::vector<std::string> texts{"alpha beta", "gamma", "alpha beta"};
    std::vector<EmbeddingVector> first;
    {
        auto inner = std::make_unique<CountingProvider>();
        auto * counter = inner.get();
        CachedEmbeddingProvider cached(std::move(inner), dir.path());
        first = embed_all(cached, texts);
        CHECK(counter->calls == 2);
        (void) embed(cached, "gamma");
        CHECK(counter->calls == 2);
    }
    {
        auto inner = std::make_unique<CountingProvider>();
        auto * counter = inner.get();
        CachedEmbeddingProvider cached(std::move(inner), dir.path());
        auto const again = embed_all(cached, texts);
        CHECK(counter->calls == 0);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            CHECK((again[i].array() == first[i].array()).all());
        }
    }
}

TEST_CASE("provider output is checked")
{
    class Bad final : public EmbeddingProvider
    {
    public:
        std::string name() const override { return "bad"; }
        std::size_t dimension() const override { return 4; }
        EmbeddingVector embed_text(std::string_view) override { return EmbeddingVector::Ones(4); }
    } bad;
    CHECK_THROWS_AS((void) embed(bad, "x"), ProviderError);
}
