#pragma once

#include "convmap/model.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace convmap {

/// a(i, j) = number of times the timeline moves from topic i to topic j.
/// Diagonal is always zero.
using TransitionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class SolveMethod { exact, heuristic };

[[nodiscard]] std::string_view to_string(SolveMethod method) noexcept;

/// rows[i] is the vertical row of topic i; always a permutation of 0..n-1.
struct RowAssignment
{
    std::vector<std::size_t> rows;
    std::int64_t cost = 0;
    SolveMethod method = SolveMethod::exact;

    friend bool operator == (RowAssignment const &, RowAssignment const &) = default;
};

inline constexpr std::size_t default_exact_limit = 10;
inline constexpr std::size_t default_restarts = 8;
inline constexpr std::size_t default_token_budget = 4096;

[[nodiscard]] TransitionMatrix build_transition_matrix(std::span<std::size_t const> primary_topics,
                                                       std::size_t topic_count);

[[nodiscard]] bool is_permutation_of_range(std::span<std::size_t const> rows) noexcept;

/// Sum over topic pairs of a(i, k) * |rows[i] - rows[k]|.
[[nodiscard]] std::int64_t wiggle_cost(TransitionMatrix const & a, std::span<std::size_t const> rows);

/// Minimum-wiggle permutation; lexicographically smallest among optima.
/// Plain enumeration up to six topics, branch and bound above that.
/// Throws Error(capacity) when the topic count exceeds `exact_limit`.
[[nodiscard]] RowAssignment solve_rows_exact(TransitionMatrix const & a,
                                             std::size_t exact_limit = default_exact_limit);

/// Topics ordered by descending total transition weight (ties by index).
[[nodiscard]] std::vector<std::size_t> greedy_start_rows(TransitionMatrix const & a);

/// Pairwise-swap descent from the greedy start, then `restarts` descents
/// from seeded shuffles; keeps the lowest cost (ties by lexicographic rows).
[[nodiscard]] RowAssignment solve_rows_heuristic(TransitionMatrix const & a, std::uint64_t seed,
                                                 std::size_t restarts = default_restarts);

/// Exact when the topic count permits, heuristic otherwise.
[[nodiscard]] RowAssignment solve_rows(TransitionMatrix const & a, std::uint64_t seed,
                                       std::size_t exact_limit = default_exact_limit);

/// Index of the oldest node that still fits in `budget` tokens when counting
/// back from the newest. 0 when everything fits; token_counts.size() when
/// even the newest node alone exceeds the budget.
[[nodiscard]] std::size_t forgotten_boundary(std::span<std::size_t const> token_counts, std::size_t budget);

struct GeometryNode
{
    std::string id;
    std::size_t x = 0;
    std::size_t row = 0;
};

struct GeometryTopic
{
    std::string id;
    std::size_t row = 0;
    std::size_t ordinal = 0;
};

struct GlobalGeometry
{
    std::vector<GeometryNode> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<GeometryTopic> topics;
    std::size_t forgotten_boundary = 0;
};

[[nodiscard]] GlobalGeometry build_global_geometry(Conversation const & conversation, RowAssignment const & assignment,
                                                   std::size_t budget);

} // namespace convmap
