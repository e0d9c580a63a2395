#include "convmap/topics.hpp"

#include "convmap/error.hpp"
#include "convmap/ingest.hpp"
#include "convmap/text.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace convmap {

namespace {

constexpr std::string_view summary_prefix = "Q: ";

double unit_draw(std::mt19937_64 & rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t argmax_cosine(EmbeddingVector const & v, std::span<EmbeddingVector const> centers, double * best_out)
{
    std::size_t best = 0;
    double best_s = cosine(v, centers[0]);
    for (std::size_t j = 1; j < centers.size(); ++j) {
        double const s = cosine(v, centers[j]);
        if (s > best_s) {
            best = j;
            best_s = s;
        }
    }
    if (best_out != nullptr) {
        *best_out = best_s;
    }
    return best;
}

std::vector<EmbeddingVector> seed_centroids(std::span<EmbeddingVector const> points, std::size_t k,
                                            std::mt19937_64 & rng)
{
    std::vector<EmbeddingVector> centers;
    std::vector<bool> chosen(points.size(), false);
    auto const first = static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(points.size()));
    centers.push_back(points[std::min(first, points.size() - 1)]);
    chosen[std::min(first, points.size() - 1)] = true;
    while (centers.size() < k) {
        std::vector<double> weight(points.size(), 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (chosen[i]) {
                continue;
            }
            double nearest = 0.0;
            argmax_cosine(points[i], centers, &nearest);
            double const d = std::max(0.0, 1.0 - nearest);
            weight[i] = d * d;
            total += weight[i];
        }
        std::size_t pick = points.size();
        if (total > 0.0) {
            double target = unit_draw(rng) * total;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (weight[i] <= 0.0) {
                    continue;
                }
                pick = i;
                if (target < weight[i]) {
                    break;
                }
                target -= weight[i];
            }
        } else {
            // remaining points coincide with existing centers
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (! chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick == points.size()) {
            break;
        }
        chosen[pick] = true;
        centers.push_back(points[pick]);
    }
    return centers;
}

} // namespace

void TopicConfig::validate() const
{
    if (! (membership_threshold > 0.0 && membership_threshold < 1.0)) {
        throw Error(ErrorKind::argument, "membership_threshold must lie strictly between 0 and 1");
    }
    if (min_nodes_for_recursion == 0 || max_topics_hint == 0 || summary_max_tokens == 0) {
        throw Error(ErrorKind::argument, "topic configuration counts must be positive");
    }
}

std::string topic_id_for(std::size_t ordinal)
{
    return "t" + std::to_string(ordinal);
}

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens)
{
    if (count_tokens(text) <= max_tokens) {
        return std::string(text);
    }
    return std::string(text::utf8_prefix(text, max_tokens * 4));
}

std::size_t stub_topic_count(std::size_t summary_count, TopicConfig const & cfg) noexcept
{
    std::size_t const by_size = (summary_count + cfg.min_nodes_for_recursion - 1) / cfg.min_nodes_for_recursion;
    return std::max<std::size_t>(1, std::min(cfg.max_topics_hint, by_size));
}

KMeansResult spherical_kmeans(std::span<EmbeddingVector const> points, std::size_t k, std::uint64_t seed,
                              std::size_t max_iterations)
{
    if (points.empty() || k == 0) {
        throw Error(ErrorKind::argument, "k-means needs at least one point and one cluster");
    }
    k = std::min(k, points.size());
    std::mt19937_64 rng(seed);
    KMeansResult result;
    result.centroids = seed_centroids(points, k, rng);
    while (result.centroids.size() < k) {
        result.centroids.push_back(result.centroids.back());
    }
    result.assignment.assign(points.size(), 0);
    bool first = true;
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        bool changed = first;
        first = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t const a = argmax_cosine(points[i], result.centroids, nullptr);
            if (a != result.assignment[i]) {
                result.assignment[i] = a;
                changed = true;
            }
        }
        if (! changed) {
            break;
        }
        for (std::size_t j = 0; j < k; ++j) {
            EmbeddingVector sum = EmbeddingVector::Zero(points[0].size());
            bool any = false;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (result.assignment[i] == j) {
                    sum += points[i];
                    any = true;
                }
            }
            if (any && ordered_dot(sum, sum) > 0.0) {
                normalize_ordered(sum);
                result.centroids[j] = std::move(sum);
            }
        }
    }
    return result;
}

std::string OfflineLlm::summarize(ConversationNode const & node, std::size_t max_tokens)
{
    std::string const question = text::trim(node.question);
    std::size_t const budget_chars = max_tokens * 4;
    std::size_t const prefix_chars = summary_prefix.size();
    if (budget_chars <= prefix_chars) {
        return truncate_to_tokens(question, max_tokens);
    }
    return std::string(summary_prefix) + std::string(text::utf8_prefix(question, budget_chars - prefix_chars));
}

std::vector<TopicProposal> OfflineLlm::propose_topics(std::vector<std::string> const & summaries,
                                                      TopicConfig const & cfg)
{
    std::vector<EmbeddingVector> points;
    points.reserve(summaries.size());
    for (auto const & s : summaries) {
        points.push_back(text::split_words(s).empty() ? offline_embed("empty", default_dimension)
                                                       : offline_embed(s, default_dimension));
    }
    std::size_t const k = stub_topic_count(summaries.size(), cfg);
    auto const km = spherical_kmeans(points, k, seed_);
    std::vector<TopicProposal> out(k);
    for (std::size_t j = 0; j < k; ++j) {
        out[j].label = "cluster-" + std::to_string(j);
    }
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        auto & d = out[km.assignment[i]].description;
        if (! d.empty()) {
            d += "\n";
        }
        d += summaries[i];
    }
    return out;
}

std::string OfflineLlm::complete(std::string_view prompt)
{
    std::string last_line;
    std::size_t end = prompt.size();
    while (end > 0) {
        std::size_t const start = prompt.rfind('\n', end - 1);
        std::size_t const begin = start == std::string_view::npos ? 0 : start + 1;
        last_line = text::trim(prompt.substr(begin, end - begin));
        if (! last_line.empty() || begin == 0) {
            break;
        }
        end = begin - 1;
    }
    return "Offline answer (" + std::to_string(count_tokens(prompt))
           + " prompt tokens): " + truncate_to_tokens(last_line, 48);
}

std::string summarize_node(LlmProvider & llm, ConversationNode const & node, TopicConfig const & cfg)
{
    if (text::trim(node.question).empty()) {
        throw Error(ErrorKind::argument, "node '" + node.id + "' has an empty question");
    }
    std::string summary = text::trim(llm.summarize(node, cfg.summary_max_tokens));
    if (summary.empty()) {
        throw ProviderError("provider '" + llm.name() + "' returned an empty summary for node '" + node.id + "'",
                            false);
    }
    return truncate_to_tokens(summary, cfg.summary_max_tokens);
}

std::vector<TopicProposal> propose_topics(LlmProvider & llm, std::vector<std::string> const & summaries,
                                          TopicConfig const & cfg)
{
    if (summaries.empty()) {
        throw Error(ErrorKind::argument, "topic proposal needs at least one summary");
    }
    auto raw = llm.propose_topics(summaries, cfg);
    std::vector<TopicProposal> out;
    std::set<std::string> seen;
    for (auto & p : raw) {
        p.label = text::trim(p.label);
        if (p.label.empty() || ! seen.insert(p.label).second) {
            continue;
        }
        out.push_back(std::move(p));
        if (out.size() == cfg.max_topics_hint) {
            break;
        }
    }
    if (out.empty()) {
        throw ProviderError("provider '" + llm.name() + "' proposed no usable topic labels", false);
    }
    return out;
}

std::vector<NodeMemberships> assign_memberships(std::span<EmbeddingVector const> node_vectors,
                                                std::span<EmbeddingVector const> topic_vectors, double threshold)
{
    if (topic_vectors.empty()) {
        throw Error(ErrorKind::argument, "membership assignment needs at least one topic");
    }
    std::vector<NodeMemberships> out(node_vectors.size());
    std::vector<double> sims(topic_vectors.size());
    for (std::size_t i = 0; i < node_vectors.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t t = 0; t < topic_vectors.size(); ++t) {
            sims[t] = cosine(node_vectors[i], topic_vectors[t]);
            if (sims[t] > sims[best]) {
                best = t;
            }
        }
        out[i].primary = best;
        for (std::size_t t = 0; t < topic_vectors.size(); ++t) {
            if (t == best || sims[t] >= threshold) {
                out[i].memberships.emplace_back(t, sims[t]);
            }
        }
    }
    return out;
}

Conversation build_topic_model(Conversation conversation, LlmProvider & llm, EmbeddingProvider & embedder,
                               TopicConfig const & cfg)
{
    cfg.validate();
    auto & nodes = conversation.nodes;
    if (nodes.empty()) {
        throw Error(ErrorKind::state, "conversation '" + conversation.id + "' has no nodes to analyze");
    }
    if (conversation.embedding_dimension != 0 && conversation.embedding_dimension != embedder.dimension()) {
        throw Error(ErrorKind::argument,
                    "conversation uses dimension " + std::to_string(conversation.embedding_dimension)
                        + " but provider '" + embedder.name() + "' produces " + std::to_string(embedder.dimension()));
    }

    std::vector<std::string> texts;
    std::vector<std::string> summaries;
    texts.reserve(nodes.size());
    summaries.reserve(nodes.size());
    for (auto const & n : nodes) {
        texts.push_back(embedding_text(n));
        summaries.push_back(summarize_node(llm, n, cfg));
    }
    auto const node_vectors = embed_all(embedder, texts);

    auto topic_texts = [](std::vector<TopicProposal> const & proposals) {
        std::vector<std::string> out;
        for (auto const & p : proposals) {
            out.push_back(p.description.empty() ? p.label : p.description);
        }
        return out;
    };

    auto const proposals = propose_topics(llm, summaries, cfg);
    auto const topic_vectors = embed_all(embedder, topic_texts(proposals));
    auto const level0 = assign_memberships(node_vectors, topic_vectors, cfg.membership_threshold);

    std::vector<Topic> topics;
    for (std::size_t t = 0; t < proposals.size(); ++t) {
        Topic topic;
        topic.ordinal = topics.size();
        topic.id = topic_id_for(topic.ordinal);
        topic.label = proposals[t].label;
        topic.embedding = topic_vectors[t];
        topics.push_back(std::move(topic));
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto & n = nodes[i];
        n.summary = summaries[i];
        n.embedding = node_vectors[i];
        n.memberships.clear();
        for (auto const & [t, s] : level0[i].memberships) {
            n.memberships.push_back({topics[t].id, s});
            topics[t].member_similarities[n.id] = s;
        }
        n.primary_topic = topics[level0[i].primary].id;
    }

    std::size_t const top_count = topics.size();
    for (std::size_t t = 0; t < top_count; ++t) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (topics[t].member_similarities.contains(nodes[i].id)) {
                members.push_back(i);
            }
        }
        if (members.size() < cfg.min_nodes_for_recursion) {
            continue;
        }
        std::vector<std::string> member_summaries;
        std::vector<EmbeddingVector> member_vectors;
        for (std::size_t i : members) {
            member_summaries.push_back(summaries[i]);
            member_vectors.push_back(node_vectors[i]);
        }
        auto const sub = propose_topics(llm, member_summaries, cfg);
        auto const sub_vectors = embed_all(embedder, topic_texts(sub));
        auto const rows = assign_memberships(member_vectors, sub_vectors, cfg.membership_threshold);
        std::size_t const first_ordinal = topics.size();
        for (std::size_t s = 0; s < sub.size(); ++s) {
            Topic topic;
            topic.ordinal = topics.size();
            topic.id = topic_id_for(topic.ordinal);
            topic.label = sub[s].label;
            topic.level = 1;
            topic.parent = topics[t].id;
            topic.embedding = sub_vectors[s];
            topics.push_back(std::move(topic));
        }
        for (std::size_t m = 0; m < members.size(); ++m) {
            auto & n = nodes[members[m]];
            for (auto const & [s, sim] : rows[m].memberships) {
                auto & topic = topics[first_ordinal + s];
                n.memberships.push_back({topic.id, sim});
                topic.member_similarities[n.id] = sim;
            }
        }
    }

    conversation.topics = std::move(topics);
    conversation.membership_threshold = cfg.membership_threshold;
    conversation.embedding_dimension = embedder.dimension();
    conversation.embedding_provider = embedder.name();
    ++conversation.analysis_version;
    return conversation;
}

} // namespace convmap
