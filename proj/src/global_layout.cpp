#include "convmap/global_layout.hpp"

#include "convmap/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace convmap {

namespace {

using Index = Eigen::Index;

/// w(i, k) = a(i, k) + a(k, i); the objective only sees the symmetric part.
Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> symmetric_weights(TransitionMatrix const & a)
{
    return a + a.transpose();
}

void check_square(TransitionMatrix const & a)
{
    if (a.rows() != a.cols()) {
        throw Error(ErrorKind::argument, "transition matrix must be square");
    }
}

std::int64_t distance(std::size_t x, std::size_t y) noexcept
{
    return x > y ? static_cast<std::int64_t>(x - y) : static_cast<std::int64_t>(y - x);
}

std::int64_t cost_unchecked(TransitionMatrix const & a, std::span<std::size_t const> rows)
{
    std::int64_t total = 0;
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index k = 0; k < a.cols(); ++k) {
            if (a(i, k) != 0) {
                total += a(i, k) * distance(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(k)]);
            }
        }
    }
    return total;
}

bool better(std::int64_t cost, std::vector<std::size_t> const & rows, RowAssignment const & best)
{
    return cost < best.cost || (cost == best.cost && rows < best.rows);
}

class BranchAndBound
{
public:
    explicit BranchAndBound(TransitionMatrix const & a)
    : w_(symmetric_weights(a))
    , n_(static_cast<std::size_t>(a.rows()))
    , rows_(n_, 0)
    , used_(n_, false)
    { }

    RowAssignment solve()
    {
        best_.cost = std::numeric_limits<std::int64_t>::max();
        descend(0, 0);
        best_.method = SolveMethod::exact;
        return best_;
    }

private:
    /// Placed-placed pairs are exact; every pair touching an unplaced topic
    /// is charged the smallest distance still available to it.
    std::int64_t remaining_bound(std::size_t placed) const
    {
        std::int64_t bound = 0;
        for (std::size_t k = placed; k < n_; ++k) {
            for (std::size_t i = 0; i < placed; ++i) {
                auto const wik = w_(static_cast<Index>(i), static_cast<Index>(k));
                if (wik == 0) {
                    continue;
                }
                std::int64_t nearest = std::numeric_limits<std::int64_t>::max();
                for (std::size_t f = 0; f < n_; ++f) {
                    if (! used_[f]) {
                        nearest = std::min(nearest, distance(rows_[i], f));
                    }
                }
                bound += wik * nearest;
            }
            for (std::size_t l = k + 1; l < n_; ++l) {
                bound += w_(static_cast<Index>(k), static_cast<Index>(l));
            }
        }
        return bound;
    }

    void descend(std::size_t depth, std::int64_t cost_so_far)
    {
        if (depth == n_) {
            if (cost_so_far < best_.cost) {
                best_.cost = cost_so_far;
                best_.rows = rows_;
            }
            return;
        }
        for (std::size_t r = 0; r < n_; ++r) {
            if (used_[r]) {
                continue;
            }
            std::int64_t added = 0;
            for (std::size_t i = 0; i < depth; ++i) {
                added += w_(static_cast<Index>(i), static_cast<Index>(depth)) * distance(rows_[i], r);
            }
            rows_[depth] = r;
            used_[r] = true;
            std::int64_t const cost = cost_so_far + added;
            // later siblings are lexicographically larger, so ties prune too
            if (cost + remaining_bound(depth + 1) < best_.cost) {
                descend(depth + 1, cost);
            }
            used_[r] = false;
        }
    }

    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> w_;
    std::size_t n_;
    std::vector<std::size_t> rows_;
    std::vector<bool> used_;
    RowAssignment best_;
};

RowAssignment enumerate_all(TransitionMatrix const & a)
{
    std::vector<std::size_t> rows(static_cast<std::size_t>(a.rows()));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    RowAssignment best{rows, cost_unchecked(a, rows), SolveMethod::exact};
    while (std::next_permutation(rows.begin(), rows.end())) {
        auto const c = cost_unchecked(a, rows);
        if (c < best.cost) {
            best.cost = c;
            best.rows = rows;
        }
    }
    return best;
}

/// Best-improvement pairwise swaps until no swap lowers the cost.
std::int64_t swap_descent(TransitionMatrix const & a, std::vector<std::size_t> & rows)
{
    std::int64_t cost = cost_unchecked(a, rows);
    std::size_t const n = rows.size();
    for (;;) {
        std::int64_t best_cost = cost;
        std::size_t bi = n;
        std::size_t bj = n;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                std::swap(rows[i], rows[j]);
                auto const c = cost_unchecked(a, rows);
                std::swap(rows[i], rows[j]);
                if (c < best_cost) {
                    best_cost = c;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == n) {
            return cost;
        }
        std::swap(rows[bi], rows[bj]);
        cost = best_cost;
    }
}

} // namespace

std::string_view to_string(SolveMethod method) noexcept
{
    return method == SolveMethod::exact ? "exact" : "heuristic";
}

TransitionMatrix build_transition_matrix(std::span<std::size_t const> primary_topics, std::size_t topic_count)
{
    TransitionMatrix a = TransitionMatrix::Zero(static_cast<Index>(topic_count), static_cast<Index>(topic_count));
    for (std::size_t k = 0; k < primary_topics.size(); ++k) {
        if (primary_topics[k] >= topic_count) {
            throw Error(ErrorKind::argument, "topic index " + std::to_string(primary_topics[k]) + " at position "
                                                 + std::to_string(k) + " is out of range for "
                                                 + std::to_string(topic_count) + " topics");
        }
    }
    for (std::size_t k = 0; k + 1 < primary_topics.size(); ++k) {
        auto const from = primary_topics[k];
        auto const to = primary_topics[k + 1];
        if (from != to) {
            a(static_cast<Index>(from), static_cast<Index>(to)) += 1;
        }
    }
    return a;
}

bool is_permutation_of_range(std::span<std::size_t const> rows) noexcept
{
    std::vector<bool> seen(rows.size(), false);
    for (std::size_t r : rows) {
        if (r >= rows.size() || seen[r]) {
            return false;
        }
        seen[r] = true;
    }
    return true;
}

std::int64_t wiggle_cost(TransitionMatrix const & a, std::span<std::size_t const> rows)
{
    check_square(a);
    if (rows.size() != static_cast<std::size_t>(a.rows()) || ! is_permutation_of_range(rows)) {
        throw Error(ErrorKind::argument, "rows must be a permutation of 0.." + std::to_string(a.rows()) + "-1");
    }
    return cost_unchecked(a, rows);
}

RowAssignment solve_rows_exact(TransitionMatrix const & a, std::size_t exact_limit)
{
    check_square(a);
    auto const n = static_cast<std::size_t>(a.rows());
    if (n > exact_limit) {
        throw Error(ErrorKind::capacity, std::to_string(n) + " topics exceed the exact solver limit of "
                                             + std::to_string(exact_limit) + "; use the heuristic solver");
    }
    if (n <= 6) {
        return enumerate_all(a);
    }
    return BranchAndBound(a).solve();
}

std::vector<std::size_t> greedy_start_rows(TransitionMatrix const & a)
{
    check_square(a);
    auto const n = static_cast<std::size_t>(a.rows());
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> const weight = a.rowwise().sum() + a.colwise().sum().transpose();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return weight[static_cast<Index>(x)] > weight[static_cast<Index>(y)];
    });
    std::vector<std::size_t> rows(n);
    for (std::size_t p = 0; p < n; ++p) {
        rows[order[p]] = p;
    }
    return rows;
}

RowAssignment solve_rows_heuristic(TransitionMatrix const & a, std::uint64_t seed, std::size_t restarts)
{
    check_square(a);
    auto const n = static_cast<std::size_t>(a.rows());
    RowAssignment best;
    best.method = SolveMethod::heuristic;
    best.cost = std::numeric_limits<std::int64_t>::max();

    auto consider = [&](std::vector<std::size_t> rows) {
        auto const c = swap_descent(a, rows);
        if (better(c, rows, best)) {
            best.cost = c;
            best.rows = std::move(rows);
        }
    };

    consider(greedy_start_rows(a));
    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    consider(identity);

    std::mt19937_64 rng(seed);
    for (std::size_t r = 0; r < restarts; ++r) {
        std::vector<std::size_t> rows = identity;
        // Fisher-Yates with an explicit draw; std::shuffle is not portable
        for (std::size_t i = n; i > 1; --i) {
            std::swap(rows[i - 1], rows[static_cast<std::size_t>(rng() % i)]);
        }
        consider(std::move(rows));
    }
    return best;
}

RowAssignment solve_rows(TransitionMatrix const & a, std::uint64_t seed, std::size_t exact_limit)
{
    if (static_cast<std::size_t>(a.rows()) <= exact_limit) {
        return solve_rows_exact(a, exact_limit);
    }
    return solve_rows_heuristic(a, seed);
}

std::size_t forgotten_boundary(std::span<std::size_t const> token_counts, std::size_t budget)
{
    if (budget == 0) {
        throw Error(ErrorKind::argument, "token budget must be positive");
    }
    std::size_t used = 0;
    for (std::size_t i = token_counts.size(); i > 0; --i) {
        std::size_t const c = token_counts[i - 1];
        if (c > budget - used) {
            return i;
        }
        used += c;
    }
    return 0;
}

GlobalGeometry build_global_geometry(Conversation const & conversation, RowAssignment const & assignment,
                                     std::size_t budget)
{
    if (! is_analyzed(conversation)) {
        throw Error(ErrorKind::state, "conversation '" + conversation.id + "' has not been analyzed");
    }
    auto const top = top_level_topics(conversation);
    if (assignment.rows.size() != top.size() || ! is_permutation_of_range(assignment.rows)) {
        throw Error(ErrorKind::argument, "row assignment does not match the conversation's topics");
    }
    auto const primary = primary_topic_indices(conversation);

    GlobalGeometry g;
    std::vector<std::size_t> counts;
    for (std::size_t k = 0; k < conversation.nodes.size(); ++k) {
        auto const & n = conversation.nodes[k];
        g.nodes.push_back({n.id, n.seq_index, assignment.rows[primary[k]]});
        counts.push_back(n.token_count);
        if (k + 1 < conversation.nodes.size()) {
            g.edges.emplace_back(n.seq_index, n.seq_index + 1);
        }
    }
    for (std::size_t t = 0; t < top.size(); ++t) {
        g.topics.push_back({top[t]->id, assignment.rows[t], top[t]->ordinal});
    }
    g.forgotten_boundary = forgotten_boundary(counts, budget);
    return g;
}

} // namespace convmap
