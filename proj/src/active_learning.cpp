#include "tsad/active_learning.hpp"

#include "tsad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

namespace tsad {

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::ground_truth: return "ground-truth";
        case Provenance::human: return "human";
        case Provenance::propagated: return "propagated";
    }
    return "ground-truth";
}

// --- LabelPool --------------------------------------------------------------

LabelPool::LabelPool(std::size_t size, std::size_t budget_total)
    : entries_(size), budget_total_(budget_total) {}

std::optional<int> LabelPool::label(std::size_t index) const {
    const auto& e = entries_.at(index);
    if (!e) return std::nullopt;
    return e->label;
}

std::optional<Provenance> LabelPool::provenance(std::size_t index) const {
    const auto& e = entries_.at(index);
    if (!e) return std::nullopt;
    return e->provenance;
}

bool LabelPool::oracle_labeled(std::size_t index) const {
    const auto& e = entries_.at(index);
    return e && e->provenance != Provenance::propagated;
}

void LabelPool::set_oracle_label(std::size_t index, int label, Provenance provenance) {
    if (label != 0 && label != 1) throw ArgumentError("labels must be 0 or 1");
    if (provenance == Provenance::propagated) throw ContractError("oracle labels cannot be 'propagated'");
    entries_.at(index) = Entry{label, provenance};
}

bool LabelPool::set_propagated(std::size_t index, int label) {
    if (oracle_labeled(index)) return false;
    entries_.at(index) = Entry{label, Provenance::propagated};
    return true;
}

void LabelPool::clear_propagated() {
    for (auto& e : entries_)
        if (e && e->provenance == Provenance::propagated) e.reset();
}

void LabelPool::charge(std::size_t count) {
    if (count > budget_left()) throw BudgetError("query budget exhausted");
    budget_spent_ += count;
}

std::size_t LabelPool::oracle_count() const {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const auto& e) {
        return e && e->provenance != Provenance::propagated;
    }));
}

std::size_t LabelPool::propagated_count() const {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const auto& e) {
        return e && e->provenance == Provenance::propagated;
    }));
}

std::vector<std::size_t> LabelPool::query_candidates() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (!oracle_labeled(i)) out.push_back(i);
    return out;
}

// --- margin sampling ----------------------------------------------------------

double margin(double q0, double q1) { return std::abs(q0 - q1); }

std::vector<std::size_t> select_queries(std::span<const std::size_t> candidates,
                                        std::span<const double> margins, std::size_t k) {
    if (candidates.size() != margins.size()) throw ShapeError("one margin per candidate required");
    if (k > candidates.size()) {
        throw BudgetError("requested " + std::to_string(k) + " queries from a pool of " +
                          std::to_string(candidates.size()));
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
        if (margins[a] != margins[b]) return margins[a] < margins[b];
        return candidates[a] < candidates[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = candidates[order[i]];
    return out;
}

std::vector<std::size_t> select_queries(std::span<const std::size_t> candidates,
                                        const Matrix& q_values, std::size_t k) {
    if (q_values.rows() != 2 || static_cast<std::size_t>(q_values.cols()) != candidates.size()) {
        throw ShapeError("q_values must be 2 x |candidates|");
    }
    std::vector<double> margins(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        margins[i] = margin(q_values(0, c), q_values(1, c));
    }
    return select_queries(candidates, margins, k);
}

// --- oracles --------------------------------------------------------------------

std::vector<int> SimulatedOracle::request(std::span<const std::size_t> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(truth_.at(i));
    return out;
}

std::vector<int> ChannelOracle::request(std::span<const std::size_t> indices) {
    std::vector<QueryMessage> batch;
    for (auto i : indices) {
        QueryMessage q;
        q.window_index = i;
        const auto row = dataset_.windows.row(static_cast<Eigen::Index>(i));
        q.values.resize(static_cast<std::size_t>(row.size()));
        for (Eigen::Index k = 0; k < row.size(); ++k) q.values[static_cast<std::size_t>(k)] = row[k];
        q.context = dataset_.raw_context(i);
        batch.push_back(std::move(q));
    }
    const auto ids = channel_.post(std::move(batch));
    auto labels = channel_.wait(ids, timeout_);
    if (!labels) throw TimeoutError("no labels received for " + std::to_string(ids.size()) + " queries");
    std::vector<int> out;
    for (const auto& l : *labels) out.push_back(l.label);
    return out;
}

std::size_t query_oracle(LabelPool& pool, std::span<const std::size_t> indices, Oracle& oracle) {
    std::vector<std::size_t> fresh;
    for (auto i : indices) {
        if (i >= pool.size()) throw ArgumentError("query index out of range");
        if (!pool.oracle_labeled(i) && std::find(fresh.begin(), fresh.end(), i) == fresh.end())
            fresh.push_back(i);
    }
    if (fresh.size() > pool.budget_left()) {
        throw BudgetError("query of " + std::to_string(fresh.size()) + " windows exceeds the remaining budget of " +
                          std::to_string(pool.budget_left()));
    }
    if (fresh.empty()) return 0;
    const auto labels = oracle.request(fresh);
    if (labels.size() != fresh.size()) throw ContractError("oracle returned the wrong number of labels");
    for (int l : labels)
        if (l != 0 && l != 1) throw DataError("oracle returned a label outside {0, 1}");
    for (std::size_t k = 0; k < fresh.size(); ++k) pool.set_oracle_label(fresh[k], labels[k], oracle.provenance());
    pool.charge(fresh.size());
    return fresh.size();
}

// --- similarity graph -------------------------------------------------------------

double SimilarityGraph::weight(std::size_t i, std::size_t j) const {
    for (const auto& [n, w] : adjacency.at(i))
        if (n == j) return w;
    return 0.0;
}

Matrix SimilarityGraph::dense() const {
    const auto n = static_cast<Eigen::Index>(size());
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < size(); ++i)
        for (const auto& [j, w] : adjacency[i]) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
    return out;
}

SimilarityGraph SimilarityGraph::from_dense(const Matrix& weights) {
    if (weights.rows() != weights.cols()) throw ShapeError("weight matrix must be square");
    SimilarityGraph g;
    g.adjacency.resize(static_cast<std::size_t>(weights.rows()));
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < weights.cols(); ++j) {
            const double w = weights(i, j);
            if (w < 0.0 || w != weights(j, i)) throw DataError("weights must be symmetric and non-negative");
            if (i != j && w > 0.0) g.adjacency[static_cast<std::size_t>(i)].emplace_back(static_cast<std::size_t>(j), w);
        }
    }
    return g;
}

SimilarityGraph build_similarity_graph(const Matrix& windows, double bandwidth, int neighbors) {
    if (!(bandwidth > 0.0)) throw ArgumentError("bandwidth must be positive");
    if (neighbors < 1) throw ArgumentError("neighbors must be at least 1");
    const Eigen::Index n = windows.rows();
    if (n < 2) throw DataError("similarity graph needs at least two windows");
    bool all_same = true;
    for (Eigen::Index i = 1; i < n && all_same; ++i) all_same = windows.row(i) == windows.row(0);
    if (all_same) throw DataError("degenerate windows: all windows are identical");

    const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(neighbors, n - 1));
    const Vector norms = windows.rowwise().squaredNorm();
    std::vector<std::vector<std::size_t>> knn(static_cast<std::size_t>(n));
    std::vector<std::vector<double>> knn_d2(static_cast<std::size_t>(n));
    constexpr Eigen::Index kBlock = 256;
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    for (Eigen::Index start = 0; start < n; start += kBlock) {
        const Eigen::Index len = std::min(kBlock, n - start);
        Matrix d2 = -2.0 * windows.middleRows(start, len) * windows.transpose();
        d2.colwise() += norms.segment(start, len);
        d2.rowwise() += norms.transpose();
        for (Eigen::Index r = 0; r < len; ++r) {
            const Eigen::Index i = start + r;
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            auto dist = [&](std::size_t j) { return std::max(0.0, d2(r, static_cast<Eigen::Index>(j))); };
            auto less = [&](std::size_t a, std::size_t b) {
                if (a == static_cast<std::size_t>(i)) return false;
                if (b == static_cast<std::size_t>(i)) return true;
                const double da = dist(a), db = dist(b);
                return da != db ? da < db : a < b;
            };
            std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), less);
            auto& out = knn[static_cast<std::size_t>(i)];
            out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
            auto& outd = knn_d2[static_cast<std::size_t>(i)];
            for (auto j : out) outd.push_back((windows.row(i) - windows.row(static_cast<Eigen::Index>(j))).squaredNorm());
        }
    }

    SimilarityGraph g;
    g.bandwidth = bandwidth;
    g.adjacency.resize(static_cast<std::size_t>(n));
    const double denom = 2.0 * bandwidth * bandwidth;
    for (std::size_t i = 0; i < knn.size(); ++i) {
        for (std::size_t m = 0; m < knn[i].size(); ++m) {
            const std::size_t j = knn[i][m];
            if (j <= i) continue;
            const auto& back = knn[j];
            if (std::find(back.begin(), back.end(), i) == back.end()) continue;
            const double w = std::exp(-knn_d2[i][m] / denom);
            g.adjacency[i].emplace_back(j, w);
            g.adjacency[j].emplace_back(i, w);
        }
    }
    for (auto& row : g.adjacency) std::sort(row.begin(), row.end());
    return g;
}

double median_pairwise_distance(const Matrix& windows, std::size_t sample_size, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(windows.rows());
    if (n < 2) throw DataError("need at least two windows for a pairwise distance");
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> rows;
    if (sample_size >= n) {
        rows = all;
    } else {
        std::mt19937_64 rng(seed);
        std::sample(all.begin(), all.end(), std::back_inserter(rows), sample_size, rng);
    }
    std::vector<double> d;
    d.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = a + 1; b < rows.size(); ++b)
            d.push_back((windows.row(static_cast<Eigen::Index>(rows[a])) -
                         windows.row(static_cast<Eigen::Index>(rows[b]))).norm());
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    return med;
}

// --- propagation -------------------------------------------------------------------

PropagationResult propagate_labels(const SimilarityGraph& graph, const LabelPool& pool, int max_iters,
                                   double tol) {
    const std::size_t n = graph.size();
    if (pool.size() != n) throw ShapeError("label pool and graph cover different node sets");
    PropagationResult r;
    r.probabilities.assign(n, {0.5, 0.5});
    r.clamped.assign(n, false);
    r.reached.assign(n, false);

    std::vector<double> p1(n, 0.5);
    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i) {
        if (pool.oracle_labeled(i)) {
            r.clamped[i] = true;
            r.reached[i] = true;
            p1[i] = static_cast<double>(*pool.label(i));
            frontier.push_back(i);
        }
    }
    if (frontier.empty()) throw DataError("label propagation needs at least one labeled node");
    while (!frontier.empty()) {
        const auto i = frontier.front();
        frontier.pop_front();
        for (const auto& [j, w] : graph.adjacency[i]) {
            if (w > 0.0 && !r.reached[j]) {
                r.reached[j] = true;
                frontier.push_back(j);
            }
        }
    }

    std::vector<std::size_t> free_nodes;
    for (std::size_t i = 0; i < n; ++i)
        if (r.reached[i] && !r.clamped[i]) free_nodes.push_back(i);

    std::vector<double> next = p1;
    for (int it = 0; it < max_iters && !free_nodes.empty(); ++it) {
        double change = 0.0;
        for (auto i : free_nodes) {
            double num = 0.0, den = 0.0;
            for (const auto& [j, w] : graph.adjacency[i]) {
                num += w * p1[j];
                den += w;
            }
            next[i] = num / den;
            change = std::max(change, std::abs(next[i] - p1[i]));
        }
        for (auto i : free_nodes) p1[i] = next[i];
        r.iterations = it + 1;
        r.max_changes.push_back(change);
        if (change < tol) {
            r.converged = true;
            break;
        }
    }
    if (free_nodes.empty()) r.converged = true;
    for (std::size_t i = 0; i < n; ++i)
        if (r.reached[i]) r.probabilities[i] = {1.0 - p1[i], p1[i]};
    return r;
}

std::size_t apply_pseudo_labels(LabelPool& pool, const PropagationResult& result, double confidence) {
    pool.clear_propagated();
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < result.probabilities.size(); ++i) {
        if (result.clamped[i] || !result.reached[i]) continue;
        const auto& p = result.probabilities[i];
        if (p[1] >= confidence) assigned += pool.set_propagated(i, 1);
        else if (p[0] >= confidence) assigned += pool.set_propagated(i, 0);
    }
    return assigned;
}

}  // namespace tsad

namespace tsad {

ActiveLearner::ActiveLearner(LabelPool& pool, const SimilarityGraph& graph, Oracle& oracle,
                             ActiveLearnerConfig config, int rounds)
    : pool_(pool), graph_(graph), oracle_(oracle), config_(config), rounds_(std::max(rounds, 1)) {
    if (graph.size() != pool.size()) throw ShapeError("label pool and similarity graph sizes differ");
}

std::size_t ActiveLearner::scheduled_queries(int round) const {
    const auto total = static_cast<long double>(pool_.budget_total());
    const auto n = static_cast<long double>(rounds_);
    const auto upto = [&](long double r) { return static_cast<std::size_t>(std::floor(r * total / n)); };
    return upto(round + 1) - upto(round);
}

QueryRound ActiveLearner::run_round(int round, std::span<const std::size_t> candidates,
                                    const Matrix& q_values) {
    QueryRound out;
    std::size_t k = scheduled_queries(round) + carried_;
    k = std::min({k, pool_.budget_left(), candidates.size()});
    out.requested = k;
    if (k > 0) {
        const auto picks = select_queries(candidates, q_values, k);
        try {
            out.labeled = query_oracle(pool_, picks, oracle_);
            carried_ = 0;
        } catch (const TimeoutError&) {
            out.timed_out = true;
            carried_ = k;
        }
    }
    if (pool_.oracle_count() > 0 && (out.labeled > 0 || propagation_runs_ == 0)) {
        const auto result = propagate_labels(graph_, pool_, config_.max_iters, config_.tol);
        out.pseudo_labeled = apply_pseudo_labels(pool_, result, config_.confidence);
        out.propagation_iterations = result.iterations;
        out.propagated = true;
        ++propagation_runs_;
    } else {
        out.pseudo_labeled = pool_.propagated_count();
    }
    return out;
}

}  // namespace tsad
