#pragma once

#include "convmap/error.hpp"
#include "convmap/model.hpp"
#include "convmap/text.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace convmap {

struct ForceParams
{
    double k = 0.05;
    /// desired separation, in layout units
    double r = 30.0;
    double damping = 0.9;
    double dt = 1.0;
    std::size_t max_iters = 500;
    /// stop threshold for both the largest move and the largest force step
    double epsilon = 0.01;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double centering_strength = 0.01;
    /// per-step speed cap, in multiples of r; 0 disables it. The d^2 spring
    /// is unstable under dt = 1 beyond roughly 0.7 r without it.
    double max_speed_factor = 0.1;

    void validate() const;
};

struct RingSector
{
    std::string topic_id;
    double similarity = 0.0;
};

struct GraphEdge
{
    std::size_t a = 0;
    std::size_t b = 0;
    double similarity = 0.0;
};

/// Member nodes of one topic (seq order), their pairwise cosine matrix and
/// the edges that clear the threshold. Ring sectors carry raw similarities.
struct TopicGraph
{
    std::string topic_id;
    std::vector<std::string> node_ids;
    std::vector<std::size_t> seq_indices;
    Eigen::MatrixXd similarity;
    std::vector<GraphEdge> edges;
    std::vector<std::vector<RingSector>> outer_ring;
    std::vector<std::vector<RingSector>> inner_ring;
    /// ordinal of the strongest inner-ring subtopic per node
    std::vector<std::optional<std::size_t>> subtopic_ordinal;

    [[nodiscard]] std::size_t size() const noexcept { return node_ids.size(); }
};

[[nodiscard]] TopicGraph build_topic_graph(Conversation const & conversation, std::string_view topic_id,
                                           double edge_threshold);

enum class LayoutMode { force, grid };
enum class GridOrder { time, degree, subtopic };

[[nodiscard]] std::string_view to_string(LayoutMode mode) noexcept;
[[nodiscard]] std::string_view to_string(GridOrder order) noexcept;
[[nodiscard]] GridOrder parse_grid_order(std::string_view key);
[[nodiscard]] LayoutMode parse_layout_mode(std::string_view mode);

struct LayoutResult
{
    std::vector<std::string> node_ids;
    Eigen::Matrix2Xd positions;
    std::size_t iterations = 0;
    bool converged = false;
    LayoutMode mode = LayoutMode::force;
};

template <typename Scalar>
using Positions = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

template <typename Scalar>
struct ForceState
{
    Positions<Scalar> positions;
    Positions<Scalar> velocities;
};

/// Repulsion on node i from node j: k * r^2 / d^2 * (p_i - p_j).
template <typename Scalar>
[[nodiscard]] Eigen::Matrix<Scalar, 2, 1> pair_repulsion(Eigen::Matrix<Scalar, 2, 1> const & pi,
                                                         Eigen::Matrix<Scalar, 2, 1> const & pj,
                                                         ForceParams const & p)
{
    Eigen::Matrix<Scalar, 2, 1> const delta = pi - pj;
    Scalar const d2 = delta.squaredNorm();
    return (Scalar(p.k) * Scalar(p.r * p.r) / d2) * delta;
}

/// Spring pull on node i toward neighbour j with magnitude k * s * d^2.
/// Dissimilar pairs (s <= 0) exert no pull.
template <typename Scalar>
[[nodiscard]] Eigen::Matrix<Scalar, 2, 1> pair_attraction(Eigen::Matrix<Scalar, 2, 1> const & pi,
                                                          Eigen::Matrix<Scalar, 2, 1> const & pj,
                                                          double similarity, ForceParams const & p)
{
    Eigen::Matrix<Scalar, 2, 1> const delta = pj - pi;
    Scalar const s = Scalar(std::max(similarity, 0.0));
    return (Scalar(p.k) * s * delta.norm()) * delta;
}

/// Net force per node: repulsion from every other node, attraction along
/// edges, and a pull toward the layout center.
template <typename Scalar>
[[nodiscard]] Positions<Scalar> compute_forces(Positions<Scalar> const & pos, std::span<GraphEdge const> edges,
                                               ForceParams const & p)
{
    using Vec = Eigen::Matrix<Scalar, 2, 1>;
    Eigen::Index const n = pos.cols();
    Positions<Scalar> f = Positions<Scalar>::Zero(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            Vec const rep = pair_repulsion<Scalar>(pos.col(i), pos.col(j), p);
            f.col(i) += rep;
            f.col(j) -= rep;
        }
    }
    for (GraphEdge const & e : edges) {
        auto const a = static_cast<Eigen::Index>(e.a);
        auto const b = static_cast<Eigen::Index>(e.b);
        Vec const att = pair_attraction<Scalar>(pos.col(a), pos.col(b), e.similarity, p);
        f.col(a) += att;
        f.col(b) -= att;
    }
    Vec const center = p.center.template cast<Scalar>();
    for (Eigen::Index i = 0; i < n; ++i) {
        f.col(i) += Scalar(p.centering_strength) * (center - pos.col(i));
    }
    return f;
}

inline constexpr double coincidence_jitter = 1e-3;

/// Moves the later node of every coincident pair by a seeded unit vector
/// scaled to `coincidence_jitter`.
template <typename Scalar>
void separate_coincident(Positions<Scalar> & pos, std::uint64_t seed)
{
    Eigen::Index const n = pos.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if ((pos.col(i) - pos.col(j)).squaredNorm() != Scalar(0)) {
                continue;
            }
            std::uint64_t const h = text::mix64(seed ^ text::mix64(static_cast<std::uint64_t>(i) * 0x10001ULL
                                                                   + static_cast<std::uint64_t>(j)));
            double const angle = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 * 3.14159265358979323846;
            pos(0, j) += Scalar(coincidence_jitter * std::cos(angle));
            pos(1, j) += Scalar(coincidence_jitter * std::sin(angle));
        }
    }
}

template <typename Scalar>
struct StepResult
{
    /// largest distance any node moved
    Scalar max_displacement;
    /// largest |dt * f| before integration
    Scalar max_force_step;
};

/// One damped semi-implicit Euler step.
template <typename Scalar>
StepResult<Scalar> force_step(ForceState<Scalar> & state, std::span<GraphEdge const> edges,
                              ForceParams const & p, std::uint64_t seed = 0)
{
    if (! state.positions.allFinite() || ! state.velocities.allFinite()) {
        throw Error(ErrorKind::argument, "force simulation received non-finite coordinates");
    }
    separate_coincident(state.positions, seed);
    Positions<Scalar> const f = compute_forces<Scalar>(state.positions, edges, p);
    Scalar const dt(p.dt);
    Scalar const cap = Scalar(p.max_speed_factor * p.r);
    state.velocities = Scalar(p.damping) * (state.velocities + dt * f);
    Scalar max_step(0);
    Scalar max_force(0);
    for (Eigen::Index i = 0; i < state.positions.cols(); ++i) {
        max_force = std::max(max_force, dt * f.col(i).norm());
        auto v = state.velocities.col(i);
        Scalar const speed = v.norm();
        if (cap > Scalar(0) && speed > cap) {
            v *= cap / speed;
        }
        state.positions.col(i) += dt * v;
        max_step = std::max(max_step, dt * v.norm());
    }
    return {max_step, max_force};
}

/// Seeds nodes on a circle of radius r * sqrt(n) with a small seeded
/// jitter, then steps until both the largest move and the largest net
/// force step drop below epsilon, or max_iters is reached. A single node
/// sits at the center.
[[nodiscard]] LayoutResult force_layout(TopicGraph const & graph, ForceParams const & p, std::uint64_t seed);

/// Reading-order grid with ceil(sqrt(n)) columns, cells 2r apart, centered
/// on the origin.
[[nodiscard]] LayoutResult grid_layout(TopicGraph const & graph, GridOrder order, double r = 30.0);

} // namespace convmap
