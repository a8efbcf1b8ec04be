#pragma once

#include "tsad/label_channel.hpp"
#include "tsad/timeseries.hpp"

#include <array>
#include <chrono>
#include <optional>
#include <span>
#include <vector>

namespace tsad {

enum class Provenance { ground_truth, human, propagated };
const char* to_string(Provenance p);

// Labels over a fixed set of window indices [0, size). Oracle labels
// (ground-truth or human) are permanent; propagated labels are recomputed and
// never replace an oracle label.
class LabelPool {
public:
    LabelPool(std::size_t size, std::size_t budget_total);

    std::size_t size() const { return entries_.size(); }
    std::optional<int> label(std::size_t index) const;
    std::optional<Provenance> provenance(std::size_t index) const;
    bool oracle_labeled(std::size_t index) const;

    void set_oracle_label(std::size_t index, int label, Provenance provenance);
    // Ignored (returns false) when the index already has an oracle label.
    bool set_propagated(std::size_t index, int label);
    void clear_propagated();

    std::size_t budget_spent() const { return budget_spent_; }
    std::size_t budget_total() const { return budget_total_; }
    std::size_t budget_left() const { return budget_total_ - budget_spent_; }
    void charge(std::size_t count);

    std::size_t oracle_count() const;
    std::size_t propagated_count() const;
    // Indices without an oracle label, ascending.
    std::vector<std::size_t> query_candidates() const;

private:
    struct Entry {
        int label = 0;
        Provenance provenance = Provenance::ground_truth;
    };
    std::vector<std::optional<Entry>> entries_;
    std::size_t budget_spent_ = 0;
    std::size_t budget_total_ = 0;
};

double margin(double q0, double q1);

// The k candidates with the smallest margin; ties go to the smaller window
// index. `margins[i]` belongs to `candidates[i]`.
std::vector<std::size_t> select_queries(std::span<const std::size_t> candidates,
                                        std::span<const double> margins, std::size_t k);
// Same, from a 2 x |candidates| matrix of Q-values.
std::vector<std::size_t> select_queries(std::span<const std::size_t> candidates,
                                        const Matrix& q_values, std::size_t k);

class Oracle {
public:
    virtual ~Oracle() = default;
    // One label per index, or TimeoutError when none arrive in time.
    virtual std::vector<int> request(std::span<const std::size_t> indices) = 0;
    virtual Provenance provenance() const = 0;
};

// Reveals the dataset's ground truth.
class SimulatedOracle : public Oracle {
public:
    explicit SimulatedOracle(std::vector<int> truth) : truth_(std::move(truth)) {}
    std::vector<int> request(std::span<const std::size_t> indices) override;
    Provenance provenance() const override { return Provenance::ground_truth; }

private:
    std::vector<int> truth_;
};

// Posts queries to a LabelChannel and blocks until a human labels them.
class ChannelOracle : public Oracle {
public:
    ChannelOracle(LabelChannel& channel, const WindowDataset& dataset, std::chrono::milliseconds timeout)
        : channel_(channel), dataset_(dataset), timeout_(timeout) {}
    std::vector<int> request(std::span<const std::size_t> indices) override;
    Provenance provenance() const override { return Provenance::human; }

private:
    LabelChannel& channel_;
    const WindowDataset& dataset_;
    std::chrono::milliseconds timeout_;
};

// Labels the indices that lack an oracle label and charges the budget for
// them. All-or-nothing: a BudgetError or TimeoutError leaves the pool as it was.
// Returns the number of newly labeled indices.
std::size_t query_oracle(LabelPool& pool, std::span<const std::size_t> indices, Oracle& oracle);

// Sparse symmetric graph over window indices.
struct SimilarityGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency;
    double bandwidth = 0.0;

    std::size_t size() const { return adjacency.size(); }
    double weight(std::size_t i, std::size_t j) const;
    Matrix dense() const;
    static SimilarityGraph from_dense(const Matrix& weights);
};

// Gaussian kernel exp(-|xi - xj|^2 / (2 bandwidth^2)) on mutual k-nearest
// neighbours (one window per row of `windows`).
SimilarityGraph build_similarity_graph(const Matrix& windows, double bandwidth, int neighbors);

// Median Euclidean distance over all pairs of a seeded sample of rows.
double median_pairwise_distance(const Matrix& windows, std::size_t sample_size, std::uint64_t seed);

struct PropagationResult {
    std::vector<std::array<double, 2>> probabilities;  // (P(normal), P(anomaly)) per node
    std::vector<bool> clamped;   // oracle-labeled nodes
    std::vector<bool> reached;   // connected to at least one clamped node
    int iterations = 0;
    std::vector<double> max_changes;  // per sweep
    bool converged = false;
};

// Jacobi sweeps of P_i = sum_j w_ij P_j / sum_j w_ij over unclamped nodes,
// with oracle-labeled nodes fixed to their one-hot distribution.
PropagationResult propagate_labels(const SimilarityGraph& graph, const LabelPool& pool, int max_iters,
                                   double tol);

// Replaces previous propagated labels with those whose confidence reaches the
// threshold; returns how many were assigned.
std::size_t apply_pseudo_labels(LabelPool& pool, const PropagationResult& result, double confidence);

}  // namespace tsad

namespace tsad {

struct ActiveLearnerConfig {
    double confidence = 0.9;
    int max_iters = 1000;
    double tol = 1e-6;
};

struct QueryRound {
    std::size_t requested = 0;       // queries scheduled for this round
    std::size_t labeled = 0;         // newly oracle-labeled windows
    std::size_t pseudo_labeled = 0;  // confident propagated labels after the round
    int propagation_iterations = 0;
    bool propagated = false;
    bool timed_out = false;
};

// Per-episode margin sampling + oracle query + label propagation. The total
// budget is spread evenly: round e asks for floor((e+1) B / N) - floor(e B / N).
class ActiveLearner {
public:
    ActiveLearner(LabelPool& pool, const SimilarityGraph& graph, Oracle& oracle, ActiveLearnerConfig config,
                  int rounds);

    std::size_t scheduled_queries(int round) const;
    // `q_values` holds the agent's Q-values (2 x |candidates|) for
    // pool.query_candidates().
    QueryRound run_round(int round, std::span<const std::size_t> candidates, const Matrix& q_values);

    LabelPool& pool() { return pool_; }
    const LabelPool& pool() const { return pool_; }
    int propagation_runs() const { return propagation_runs_; }

private:
    LabelPool& pool_;
    const SimilarityGraph& graph_;
    Oracle& oracle_;
    ActiveLearnerConfig config_;
    int rounds_;
    std::size_t carried_ = 0;  // scheduled queries skipped after a timeout are refunded
    int propagation_runs_ = 0;
};

}  // namespace tsad
