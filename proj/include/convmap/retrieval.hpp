#pragma once

#include "convmap/embedding.hpp"
#include "convmap/model.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace convmap {

struct KeywordOptions
{
    std::size_t min_length = 2;
    std::set<std::string, std::less<>> stoplist;

    /// Minimum length 2 with the built-in English stoplist.
    [[nodiscard]] static KeywordOptions defaults();
};

[[nodiscard]] std::set<std::string, std::less<>> const & default_stoplist();

[[nodiscard]] std::vector<std::string> keyword_tokens(std::string_view text, KeywordOptions const & options);

struct KeywordWeight
{
    std::string term;
    double weight = 0.0;
    std::size_t df = 0;
};

/// tf = occurrences across the scoped documents, idf = ln(N / df) over all
/// N documents. Top `top_m` by weight, ties by term. Zero-weight terms are
/// dropped whenever some term has positive weight.
[[nodiscard]] std::vector<KeywordWeight> tfidf_keywords(std::span<std::string const> docs,
                                                        std::span<std::size_t const> scope, std::size_t top_m,
                                                        KeywordOptions const & options = KeywordOptions::defaults());

/// 0 for no occurrences, then thirds of the scope maximum: (0, max/3] -> 1,
/// (max/3, 2max/3] -> 2, above -> 3.
[[nodiscard]] int quantize_count(std::size_t count, std::size_t max) noexcept;

/// Highlight level per document for a single term.
[[nodiscard]] std::vector<int> term_frequency_highlights(std::string_view term,
                                                         std::span<std::string const> scope_docs);

/// Node id to highlight level for nodes with seq_index in [from, to).
[[nodiscard]] std::map<std::string, int> term_frequency_highlights(Conversation const & conversation,
                                                                   std::string_view term, std::size_t from,
                                                                   std::size_t to);

struct SearchHit
{
    std::string node_id;
    std::size_t seq_index = 0;
    double score = 0.0;
    int highlight_level = 0;
};

inline constexpr double default_min_score = 0.3;
inline constexpr std::size_t default_top_k = 5;

/// Cosine-ranked nodes (score descending, then seq_index). Without `top_k`
/// every node clearing `min_score` is returned. Levels split the hit list
/// into rank thirds: 3 for the first third, then 2, then 1.
[[nodiscard]] std::vector<SearchHit> semantic_search(Conversation const & conversation, EmbeddingProvider & embedder,
                                                     std::string_view query, std::optional<std::size_t> top_k,
                                                     double min_score);

struct ContextEntry
{
    std::string id;
    std::size_t seq_index = 0;
    std::string question;
    std::string answer;
    std::size_t token_count = 0;
};

struct ContextBundle
{
    std::string question;
    std::vector<ContextEntry> context;
    std::size_t question_tokens = 0;
    std::size_t total_tokens = 0;
    std::size_t budget = 0;

    [[nodiscard]] std::vector<std::string> context_node_ids() const;
};

/// Unknown ids throw Error(not_found); duplicates are dropped; entries are
/// ordered by seq_index. Throws BudgetError when the total exceeds budget.
[[nodiscard]] ContextBundle assemble_context(Conversation const & conversation, std::string_view question,
                                             std::span<std::string const> selected_node_ids, std::size_t budget);

inline constexpr std::string_view prompt_template_version = "context-prompt/1";

[[nodiscard]] std::string render_prompt(ContextBundle const & bundle);

} // namespace convmap
