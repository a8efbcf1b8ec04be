#include "tsad/isolation_forest.hpp"

#include "tsad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tsad {

double average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    double harmonic = 0.0;
    for (std::size_t i = 1; i < n; ++i) harmonic += 1.0 / static_cast<double>(i);
    const auto dn = static_cast<double>(n);
    return 2.0 * harmonic - 2.0 * (dn - 1.0) / dn;
}

int IsoTree::height() const {
    int h = 0;
    for (const auto& node : nodes) h = std::max(h, node.depth);
    return h;
}

double IsoTree::path_length(const Vector& x) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
        const auto& node = nodes[static_cast<std::size_t>(idx)];
        idx = x[node.feature] < node.threshold ? node.left : node.right;
    }
    const auto& leaf = nodes[static_cast<std::size_t>(idx)];
    return static_cast<double>(leaf.depth) + average_path_length(static_cast<std::size_t>(leaf.size));
}

namespace {

int grow(IsoTree& tree, const Matrix& states, std::vector<Eigen::Index>& rows, std::size_t begin,
         std::size_t end, int depth, int limit, std::mt19937_64& rng) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.back().size = static_cast<int>(end - begin);
    tree.nodes.back().depth = depth;
    if (depth >= limit || end - begin <= 1) return id;

    // Only attributes that still vary can split the node.
    std::vector<std::pair<int, std::pair<double, double>>> candidates;
    for (Eigen::Index f = 0; f < states.cols(); ++f) {
        double lo = states(rows[begin], f);
        double hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = std::min(lo, states(rows[i], f));
            hi = std::max(hi, states(rows[i], f));
        }
        if (hi > lo) candidates.push_back({static_cast<int>(f), {lo, hi}});
    }
    if (candidates.empty()) return id;

    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const auto& [feature, range] = candidates[pick(rng)];
    std::uniform_real_distribution<double> split(range.first, range.second);
    double threshold = split(rng);
    if (threshold <= range.first) threshold = std::nextafter(range.first, range.second);

    const auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                       rows.begin() + static_cast<std::ptrdiff_t>(end),
                                       [&](Eigen::Index r) { return states(r, feature) < threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows.begin());

    tree.nodes[static_cast<std::size_t>(id)].feature = feature;
    tree.nodes[static_cast<std::size_t>(id)].threshold = threshold;
    const int left = grow(tree, states, rows, begin, mid, depth + 1, limit, rng);
    const int right = grow(tree, states, rows, mid, end, depth + 1, limit, rng);
    tree.nodes[static_cast<std::size_t>(id)].left = left;
    tree.nodes[static_cast<std::size_t>(id)].right = right;
    return id;
}

}  // namespace

IsolationForest IsolationForest::fit(const Matrix& states, int num_trees, int subsample_size,
                                     std::uint64_t seed) {
    if (num_trees < 1) throw ArgumentError("isolation forest needs at least one tree");
    if (subsample_size < 2) throw ArgumentError("subsample_size must be at least 2");
    if (states.rows() < subsample_size) {
        throw DataError("isolation forest needs at least " + std::to_string(subsample_size) +
                        " states, got " + std::to_string(states.rows()));
    }
    IsolationForest forest;
    forest.subsample_size_ = subsample_size;
    forest.height_limit_ = static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample_size))));
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(states.rows()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    for (int t = 0; t < num_trees; ++t) {
        std::vector<Eigen::Index> rows;
        rows.reserve(static_cast<std::size_t>(subsample_size));
        std::sample(all.begin(), all.end(), std::back_inserter(rows), subsample_size, rng);
        IsoTree tree;
        grow(tree, states, rows, 0, rows.size(), 0, forest.height_limit_, rng);
        forest.trees_.push_back(std::move(tree));
    }
    return forest;
}

double IsolationForest::mean_path_length(const Vector& x) const {
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree.path_length(x);
    return sum / static_cast<double>(trees_.size());
}

double IsolationForest::anomaly_score(const Vector& x) const {
    return std::exp2(-mean_path_length(x) /
                     average_path_length(static_cast<std::size_t>(subsample_size_)));
}

Vector IsolationForest::anomaly_scores(const Matrix& states) const {
    Vector out(states.rows());
    for (Eigen::Index i = 0; i < states.rows(); ++i) out[i] = anomaly_score(states.row(i).transpose());
    return out;
}

}  // namespace tsad
