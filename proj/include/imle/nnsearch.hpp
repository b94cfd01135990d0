#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "imle/numerics.hpp"

namespace imle {

enum class IndexStructure { brute, vp_tree };

inline std::string_view to_string(IndexStructure s) noexcept {
    return s == IndexStructure::brute ? "brute" : "vp-tree";
}

inline IndexStructure parse_index_structure(std::string_view name) {
    if (name == "brute") return IndexStructure::brute;
    if (name == "vp-tree" || name == "vptree") return IndexStructure::vp_tree;
    throw Error(ErrorCode::config, "unknown index structure '" + std::string(name) + "'");
}

/// Result of a nearest-neighbour query. `index` is zero-based.
struct MatchResult {
    std::size_t index = 0;
    double sq_dist = 0.0;
    friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Immutable exact nearest-neighbour index under squared Euclidean distance.
///
/// Ties are broken by the lowest point index, for both structures. The VP-tree takes each
/// node's vantage point as the first unused point in a seeded shuffle of the input, splits
/// the rest at the median distance to it, and prunes with the triangle inequality on the
/// (square-rooted) metric. Reported distances are always the exact `sq_euclidean` value.
class NearestIndex {
public:
    NearestIndex(std::vector<Vec64> points, IndexStructure structure, std::uint64_t shuffle_seed = 0)
        : points_(std::move(points)), structure_(structure) {
        detail::require(!points_.empty(), ErrorCode::invalid_argument, "build_index: no points");
        dim_ = points_.front().size();
        detail::require(dim_ >= 1, ErrorCode::invalid_argument, "build_index: dim must be >= 1");
        for (const auto& p : points_) detail::require_dims(p.size(), dim_, "build_index");
        if (structure_ == IndexStructure::vp_tree) build_tree(shuffle_seed);
    }

    std::size_t size() const noexcept { return points_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    IndexStructure structure() const noexcept { return structure_; }
    const std::vector<Vec64>& points() const noexcept { return points_; }

    MatchResult query(std::span<const double> q) const {
        detail::require_dims(q.size(), dim_, "query_nearest");
        return structure_ == IndexStructure::brute ? query_brute(q) : query_tree(q);
    }

    /// Order-preserving batch query; `workers > 1` splits the batch into contiguous chunks.
    std::vector<MatchResult> query_batch(std::span<const Vec64> queries, unsigned workers = 1) const {
        for (const auto& q : queries) detail::require_dims(q.size(), dim_, "query_batch");
        std::vector<MatchResult> out(queries.size());
        const std::size_t n = queries.size();
        workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
        if (workers == 1) {
            for (std::size_t i = 0; i < n; ++i) out[i] = query(queries[i]);
            return out;
        }
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i) out[i] = query(queries[i]);
            });
        }
        for (auto& t : pool) t.join();
        return out;
    }

private:
    struct Node {
        std::uint32_t point = 0;
        double radius = 0.0;
        std::int32_t inside = -1;
        std::int32_t outside = -1;
    };

    static bool better(double sq, std::size_t idx, const MatchResult& best) noexcept {
        return sq < best.sq_dist || (sq == best.sq_dist && idx < best.index);
    }

    MatchResult query_brute(std::span<const double> q) const {
        MatchResult best{0, sq_euclidean(q, points_[0])};
        for (std::size_t j = 1; j < points_.size(); ++j) {
            const double sq = sq_euclidean(q, points_[j]);
            if (sq < best.sq_dist) best = {j, sq};
        }
        return best;
    }

    void build_tree(std::uint64_t seed) {
        std::vector<std::uint32_t> order(points_.size());
        std::iota(order.begin(), order.end(), 0u);
        RngStream rng(seed, 0x7670);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        }
        nodes_.reserve(points_.size());

        struct Task {
            std::int32_t* slot;
            std::size_t begin, end;
        };
        root_ = -1;
        std::vector<Task> stack{{&root_, 0, order.size()}};
        std::vector<double> dist(points_.size());
        std::vector<double> median_buf;
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            if (task.begin == task.end) continue;
            const auto node_id = static_cast<std::int32_t>(nodes_.size());
            *task.slot = node_id;
            const std::uint32_t pivot = order[task.begin];
            nodes_.push_back({pivot, 0.0, -1, -1});
            const std::size_t lo = task.begin + 1;
            const std::size_t hi = task.end;
            if (lo == hi) continue;

            median_buf.clear();
            for (std::size_t i = lo; i < hi; ++i) {
                const double d = std::sqrt(sq_euclidean(points_[pivot], points_[order[i]]));
                dist[order[i]] = d;
                median_buf.push_back(d);
            }
            const std::size_t mid = (median_buf.size() - 1) / 2;
            std::nth_element(median_buf.begin(), median_buf.begin() + static_cast<std::ptrdiff_t>(mid),
                             median_buf.end());
            const double radius = median_buf[mid];
            nodes_[static_cast<std::size_t>(node_id)].radius = radius;

            // Stable split keeps the shuffled order inside each half.
            auto first = order.begin() + static_cast<std::ptrdiff_t>(lo);
            auto last = order.begin() + static_cast<std::ptrdiff_t>(hi);
            auto split = std::stable_partition(first, last, [&](std::uint32_t p) { return dist[p] <= radius; });
            const auto split_pos = static_cast<std::size_t>(split - order.begin());
            // Pointers into nodes_ stay valid: capacity was reserved for every point.
            stack.push_back({&nodes_[static_cast<std::size_t>(node_id)].outside, split_pos, hi});
            stack.push_back({&nodes_[static_cast<std::size_t>(node_id)].inside, lo, split_pos});
        }
    }

    MatchResult query_tree(std::span<const double> q) const {
        MatchResult best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
        // (node, lower bound on the metric distance from q to anything in its subtree)
        std::vector<std::pair<std::int32_t, double>> stack;
        stack.reserve(64);
        stack.emplace_back(root_, 0.0);
        while (!stack.empty()) {
            const auto [id, bound] = stack.back();
            stack.pop_back();
            if (id < 0) continue;
            const double tau = std::sqrt(best.sq_dist);
            // Slack absorbs rounding in the square roots so that no exact or tied
            // candidate is ever pruned.
            if (bound > tau + 1e-9 * (bound + tau)) continue;
            const Node& node = nodes_[static_cast<std::size_t>(id)];
            const double sq = sq_euclidean(q, points_[node.point]);
            if (better(sq, node.point, best)) best = {node.point, sq};
            if (node.inside < 0 && node.outside < 0) continue;

            const double d = std::sqrt(sq);
            const double inside_bound = std::max(bound, d - node.radius - 1e-9 * (d + node.radius));
            const double outside_bound = std::max(bound, node.radius - d - 1e-9 * (d + node.radius));
            // Push the far side first so the near side is explored first.
            if (d <= node.radius) {
                stack.emplace_back(node.outside, outside_bound);
                stack.emplace_back(node.inside, inside_bound);
            } else {
                stack.emplace_back(node.inside, inside_bound);
                stack.emplace_back(node.outside, outside_bound);
            }
        }
        return best;
    }

    std::vector<Vec64> points_;
    std::size_t dim_ = 0;
    IndexStructure structure_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

inline NearestIndex build_index(std::vector<Vec64> points, IndexStructure structure,
                                std::uint64_t shuffle_seed = 0) {
    return NearestIndex(std::move(points), structure, shuffle_seed);
}

inline MatchResult query_nearest(const NearestIndex& index, std::span<const double> q) {
    return index.query(q);
}

inline std::vector<MatchResult> query_batch(const NearestIndex& index, std::span<const Vec64> queries,
                                            unsigned workers = 1) {
    return index.query_batch(queries, workers);
}

} // namespace imle
