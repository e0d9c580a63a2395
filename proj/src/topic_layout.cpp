#include "convmap/topic_layout.hpp"

#include "convmap/embedding.hpp"

#include <numeric>
#include <unordered_map>

namespace convmap {

namespace {

constexpr double pi = 3.14159265358979323846;

double seeded_unit(std::uint64_t seed, std::uint64_t salt)
{
    return static_cast<double>(text::mix64(seed ^ text::mix64(salt)) >> 11) * 0x1.0p-53;
}

} // namespace

void ForceParams::validate() const
{
    bool const ok = k > 0 && r > 0 && damping > 0 && damping < 1 && dt > 0 && max_iters > 0 && epsilon > 0
                    && centering_strength >= 0 && max_speed_factor >= 0 && center.allFinite();
    if (! ok) {
        throw Error(ErrorKind::argument, "force parameters out of range");
    }
}

std::string_view to_string(LayoutMode mode) noexcept
{
    return mode == LayoutMode::force ? "force" : "grid";
}

std::string_view to_string(GridOrder order) noexcept
{
    switch (order) {
    case GridOrder::time: return "time";
    case GridOrder::degree: return "degree";
    case GridOrder::subtopic: return "subtopic";
    }
    return "time";
}

GridOrder parse_grid_order(std::string_view key)
{
    if (key == "time") {
        return GridOrder::time;
    }
    if (key == "degree") {
        return GridOrder::degree;
    }
    if (key == "subtopic") {
        return GridOrder::subtopic;
    }
    throw Error(ErrorKind::argument, "unknown grid order '" + std::string(key) + "' (time|degree|subtopic)");
}

LayoutMode parse_layout_mode(std::string_view mode)
{
    if (mode == "force") {
        return LayoutMode::force;
    }
    if (mode == "grid") {
        return LayoutMode::grid;
    }
    throw Error(ErrorKind::argument, "unknown layout mode '" + std::string(mode) + "' (force|grid)");
}

TopicGraph build_topic_graph(Conversation const & conversation, std::string_view topic_id, double edge_threshold)
{
    Topic const * topic = find_topic(conversation, topic_id);
    if (topic == nullptr) {
        throw Error(ErrorKind::not_found, "topic '" + std::string(topic_id) + "' not found");
    }
    // thresholds above 1 are accepted and simply keep no edges
    if (std::isnan(edge_threshold) || edge_threshold < -1.0) {
        throw Error(ErrorKind::argument, "edge threshold must be at least -1");
    }

    // inner ring: subtopics of this topic, or siblings when it is a subtopic
    std::string const ring_parent = topic->parent.value_or(topic->id);
    std::unordered_map<std::string, Topic const *> by_id;
    for (Topic const & t : conversation.topics) {
        by_id.emplace(t.id, &t);
    }

    TopicGraph g;
    g.topic_id = topic->id;
    std::vector<EmbeddingVector const *> vectors;
    for (ConversationNode const & n : conversation.nodes) {
        if (! topic->member_similarities.contains(n.id)) {
            continue;
        }
        if (! n.embedding) {
            throw Error(ErrorKind::state, "node '" + n.id + "' has no embedding; analyze the conversation first");
        }
        g.node_ids.push_back(n.id);
        g.seq_indices.push_back(n.seq_index);
        vectors.push_back(&*n.embedding);
        std::vector<RingSector> outer;
        std::vector<RingSector> inner;
        std::optional<std::size_t> best_sub;
        double best_s = 0.0;
        for (Membership const & m : n.memberships) {
            auto it = by_id.find(m.topic_id);
            if (it == by_id.end()) {
                continue;
            }
            Topic const * t = it->second;
            if (t->level == 0) {
                outer.push_back({t->id, m.similarity});
            } else if (t->parent == ring_parent) {
                inner.push_back({t->id, m.similarity});
                if (! best_sub || m.similarity > best_s) {
                    best_sub = t->ordinal;
                    best_s = m.similarity;
                }
            }
        }
        g.outer_ring.push_back(std::move(outer));
        g.inner_ring.push_back(std::move(inner));
        g.subtopic_ordinal.push_back(best_sub);
    }

    auto const n = static_cast<Eigen::Index>(g.node_ids.size());
    g.similarity = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double const s = cosine(*vectors[static_cast<std::size_t>(i)], *vectors[static_cast<std::size_t>(j)]);
            g.similarity(i, j) = s;
            g.similarity(j, i) = s;
            if (s >= edge_threshold) {
                g.edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), s});
            }
        }
    }
    return g;
}

LayoutResult force_layout(TopicGraph const & graph, ForceParams const & p, std::uint64_t seed)
{
    p.validate();
    auto const n = static_cast<Eigen::Index>(graph.size());
    if (n == 0) {
        throw Error(ErrorKind::argument, "cannot lay out an empty graph");
    }
    ForceState<double> state;
    state.positions.resize(2, n);
    state.velocities = Positions<double>::Zero(2, n);
    if (n == 1) {
        state.positions.col(0) = p.center;
    } else {
        double const radius = p.r * std::sqrt(static_cast<double>(n));
        double const jitter = 0.05 * p.r;
        for (Eigen::Index i = 0; i < n; ++i) {
            double const angle = 2.0 * pi * static_cast<double>(i) / static_cast<double>(n);
            auto const salt = static_cast<std::uint64_t>(i) * 2;
            state.positions(0, i) = p.center.x() + radius * std::cos(angle)
                                    + jitter * (2.0 * seeded_unit(seed, salt) - 1.0);
            state.positions(1, i) = p.center.y() + radius * std::sin(angle)
                                    + jitter * (2.0 * seeded_unit(seed, salt + 1) - 1.0);
        }
    }

    LayoutResult result;
    result.node_ids = graph.node_ids;
    result.mode = LayoutMode::force;
    for (std::size_t it = 0; it < p.max_iters; ++it) {
        auto const step = force_step<double>(state, graph.edges, p, seed + it);
        result.iterations = it + 1;
        if (! state.positions.allFinite()) {
            throw Error(ErrorKind::state, "force simulation diverged");
        }
        // a small move alone can be a velocity reversal, not a rest state
        if (step.max_displacement < p.epsilon && step.max_force_step < p.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.positions = std::move(state.positions);
    return result;
}

LayoutResult grid_layout(TopicGraph const & graph, GridOrder order, double r)
{
    std::size_t const n = graph.size();
    if (n == 0) {
        throw Error(ErrorKind::argument, "cannot lay out an empty graph");
    }
    std::vector<std::size_t> degree(n, 0);
    for (GraphEdge const & e : graph.edges) {
        ++degree[e.a];
        ++degree[e.b];
    }
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    auto by_time = [&](std::size_t x, std::size_t y) { return graph.seq_indices[x] < graph.seq_indices[y]; };
    switch (order) {
    case GridOrder::time:
        std::sort(rank.begin(), rank.end(), by_time);
        break;
    case GridOrder::degree:
        std::sort(rank.begin(), rank.end(), [&](std::size_t x, std::size_t y) {
            return degree[x] != degree[y] ? degree[x] > degree[y] : by_time(x, y);
        });
        break;
    case GridOrder::subtopic:
        std::sort(rank.begin(), rank.end(), [&](std::size_t x, std::size_t y) {
            auto const & sx = graph.subtopic_ordinal[x];
            auto const & sy = graph.subtopic_ordinal[y];
            if (sx != sy) {
                // nodes without a subtopic go last
                if (! sx || ! sy) {
                    return sx.has_value();
                }
                return *sx < *sy;
            }
            return by_time(x, y);
        });
        break;
    }

    auto const columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    std::size_t const rows = (n + columns - 1) / columns;
    double const spacing = 2.0 * r;
    double const x0 = -0.5 * static_cast<double>(columns - 1) * spacing;
    double const y0 = -0.5 * static_cast<double>(rows - 1) * spacing;

    LayoutResult result;
    result.mode = LayoutMode::grid;
    result.converged = true;
    result.node_ids = graph.node_ids;
    result.positions.resize(2, static_cast<Eigen::Index>(n));
    for (std::size_t place = 0; place < n; ++place) {
        auto const node = static_cast<Eigen::Index>(rank[place]);
        result.positions(0, node) = x0 + static_cast<double>(place % columns) * spacing;
        result.positions(1, node) = y0 + static_cast<double>(place / columns) * spacing;
    }
    return result;
}

} // namespace convmap
