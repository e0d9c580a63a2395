#include "convmap/retrieval.hpp"

#include "convmap/error.hpp"
#include "convmap/ingest.hpp"
#include "convmap/text.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace convmap {

std::set<std::string, std::less<>> const & default_stoplist()
{
    static std::set<std::string, std::less<>> const words{
        "a",     "about", "after", "all",   "also",  "am",    "an",    "and",   "any",   "are",   "as",
        "at",    "be",    "been",  "but",   "by",    "can",   "could", "did",   "do",    "does",  "for",
        "from",  "had",   "has",   "have",  "how",   "i",     "if",    "in",    "into",  "is",    "it",
        "its",   "just",  "me",    "more",  "most",  "my",    "no",    "not",   "of",    "on",    "one",
        "or",    "other", "our",   "out",   "over",  "should", "so",   "some",  "such",  "than",  "that",
        "the",   "their", "them",  "then",  "there", "these", "they",  "this",  "those", "to",    "too",
        "up",    "very",  "was",   "we",    "were",  "what",  "when",  "where", "which", "while", "who",
        "why",   "will",  "with",  "would", "you",   "your",
    };
    return words;
}

KeywordOptions KeywordOptions::defaults()
{
    return KeywordOptions{2, default_stoplist()};
}

std::vector<std::string> keyword_tokens(std::string_view text, KeywordOptions const & options)
{
    auto words = text::split_words(text);
    std::erase_if(words, [&](std::string const & w) {
        return text::utf8_length(w) < options.min_length || options.stoplist.contains(w);
    });
    return words;
}

std::vector<KeywordWeight> tfidf_keywords(std::span<std::string const> docs, std::span<std::size_t const> scope,
                                          std::size_t top_m, KeywordOptions const & options)
{
    if (docs.empty()) {
        throw Error(ErrorKind::argument, "keyword extraction needs at least one document");
    }
    if (top_m == 0) {
        throw Error(ErrorKind::argument, "top_m must be at least 1");
    }
    if (scope.empty()) {
        return {};
    }
    std::unordered_map<std::string, std::size_t> df;
    std::vector<std::vector<std::string>> tokens(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        tokens[d] = keyword_tokens(docs[d], options);
        std::unordered_set<std::string> distinct(tokens[d].begin(), tokens[d].end());
        for (auto const & t : distinct) {
            ++df[t];
        }
    }
    std::map<std::string, std::size_t> tf;
    std::set<std::size_t> seen_scope;
    for (std::size_t d : scope) {
        if (d >= docs.size()) {
            throw Error(ErrorKind::argument, "scope index " + std::to_string(d) + " is out of range");
        }
        if (! seen_scope.insert(d).second) {
            continue;
        }
        for (auto const & t : tokens[d]) {
            ++tf[t];
        }
    }
    double const n = static_cast<double>(docs.size());
    std::vector<KeywordWeight> out;
    out.reserve(tf.size());
    bool any_positive = false;
    for (auto const & [term, count] : tf) {
        std::size_t const f = df.at(term);
        double const weight = static_cast<double>(count) * std::log(n / static_cast<double>(f));
        any_positive = any_positive || weight > 0.0;
        out.push_back({term, weight, f});
    }
    if (any_positive) {
        std::erase_if(out, [](KeywordWeight const & k) { return k.weight <= 0.0; });
    }
    std::sort(out.begin(), out.end(), [](KeywordWeight const & x, KeywordWeight const & y) {
        return x.weight != y.weight ? x.weight > y.weight : x.term < y.term;
    });
    if (out.size() > top_m) {
        out.resize(top_m);
    }
    return out;
}

int quantize_count(std::size_t count, std::size_t max) noexcept
{
    if (count == 0 || max == 0) {
        return 0;
    }
    if (3 * count <= max) {
        return 1;
    }
    if (3 * count <= 2 * max) {
        return 2;
    }
    return 3;
}

std::vector<int> term_frequency_highlights(std::string_view term, std::span<std::string const> scope_docs)
{
    auto const needle = text::split_words(term);
    if (needle.size() != 1) {
        throw Error(ErrorKind::argument, "highlight term must be a single word");
    }
    std::vector<std::size_t> counts;
    counts.reserve(scope_docs.size());
    for (auto const & doc : scope_docs) {
        auto const words = text::split_words(doc);
        counts.push_back(static_cast<std::size_t>(std::count(words.begin(), words.end(), needle.front())));
    }
    std::size_t const max = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    std::vector<int> levels;
    levels.reserve(counts.size());
    for (std::size_t c : counts) {
        levels.push_back(quantize_count(c, max));
    }
    return levels;
}

std::map<std::string, int> term_frequency_highlights(Conversation const & conversation, std::string_view term,
                                                     std::size_t from, std::size_t to)
{
    std::vector<std::string> docs;
    std::vector<std::string const *> ids;
    for (auto const & n : conversation.nodes) {
        if (n.seq_index >= from && n.seq_index < to) {
            docs.push_back(embedding_text(n));
            ids.push_back(&n.id);
        }
    }
    auto const levels = term_frequency_highlights(term, docs);
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.emplace(*ids[i], levels[i]);
    }
    return out;
}

std::vector<SearchHit> semantic_search(Conversation const & conversation, EmbeddingProvider & embedder,
                                       std::string_view query, std::optional<std::size_t> top_k, double min_score)
{
    if (text::trim(query).empty()) {
        throw Error(ErrorKind::argument, "search query is empty");
    }
    if (top_k && *top_k == 0) {
        throw Error(ErrorKind::argument, "top_k must be at least 1");
    }
    for (auto const & n : conversation.nodes) {
        if (! n.embedding) {
            throw Error(ErrorKind::state, "conversation '" + conversation.id + "' has not been embedded");
        }
    }
    EmbeddingVector const q = embed(embedder, query);
    std::vector<SearchHit> hits;
    for (auto const & n : conversation.nodes) {
        double const s = cosine(q, *n.embedding);
        if (s >= min_score) {
            hits.push_back({n.id, n.seq_index, s, 0});
        }
    }
    std::sort(hits.begin(), hits.end(), [](SearchHit const & a, SearchHit const & b) {
        return a.score != b.score ? a.score > b.score : a.seq_index < b.seq_index;
    });
    if (top_k && hits.size() > *top_k) {
        hits.resize(*top_k);
    }
    std::size_t const h = hits.size();
    for (std::size_t rank = 0; rank < h; ++rank) {
        hits[rank].highlight_level = 3 - static_cast<int>((3 * rank) / h);
    }
    return hits;
}

std::vector<std::string> ContextBundle::context_node_ids() const
{
    std::vector<std::string> out;
    out.reserve(context.size());
    for (auto const & e : context) {
        out.push_back(e.id);
    }
    return out;
}

ContextBundle assemble_context(Conversation const & conversation, std::string_view question,
                               std::span<std::string const> selected_node_ids, std::size_t budget)
{
    if (text::trim(question).empty()) {
        throw Error(ErrorKind::argument, "question is empty");
    }
    ContextBundle bundle;
    bundle.question = std::string(question);
    bundle.budget = budget;
    bundle.question_tokens = count_tokens(question);
    std::set<std::string, std::less<>> seen;
    for (auto const & id : selected_node_ids) {
        if (! seen.insert(id).second) {
            continue;
        }
        ConversationNode const * n = find_node(conversation, id);
        if (n == nullptr) {
            throw Error(ErrorKind::not_found, "context node '" + id + "' not found");
        }
        bundle.context.push_back({n->id, n->seq_index, n->question, n->answer, n->token_count});
    }
    std::sort(bundle.context.begin(), bundle.context.end(),
              [](ContextEntry const & a, ContextEntry const & b) { return a.seq_index < b.seq_index; });
    bundle.total_tokens = bundle.question_tokens;
    for (auto const & e : bundle.context) {
        bundle.total_tokens += e.token_count;
    }
    if (bundle.total_tokens > budget) {
        throw BudgetError(bundle.total_tokens, budget);
    }
    return bundle;
}

std::string render_prompt(ContextBundle const & bundle)
{
    std::string out = "Continue this conversation. Earlier exchanges selected as context follow, oldest first.\n\n";
    for (auto const & e : bundle.context) {
        out += "Q: " + e.question + "\nA: " + e.answer + "\n\n";
    }
    if (! bundle.context.empty()) {
        out += "---\n\n";
    }
    out += "New question: " + bundle.question + "\n";
    return out;
}

} // namespace convmap
