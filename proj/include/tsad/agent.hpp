#pragma once

#include "tsad/active_learning.hpp"
#include "tsad/dynamic_reward.hpp"
#include "tsad/env.hpp"
#include "tsad/isolation_forest.hpp"
#include "tsad/nn.hpp"

#include <functional>
#include <random>
#include <vector>

namespace tsad {

struct Transition {
    Vector state;
    int action = 0;
    double reward = 0.0;  // R_total
    Vector next_state;    // ignored when done
    bool done = false;
};

// Fixed-capacity FIFO ring of transitions.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return buffer_.size(); }
    // i = 0 is the oldest retained transition.
    const Transition& at(std::size_t i) const;
    // Uniform sample of distinct positions (no replacement within a batch).
    std::vector<std::size_t> sample_indices(std::size_t batch_size, std::mt19937_64& rng) const;

private:
    std::vector<Transition> buffer_;
    std::size_t head_ = 0;  // next write position
    std::size_t size_ = 0;
};

enum class QNetworkKind { recurrent, dense };

struct AgentConfig {
    QNetworkKind network = QNetworkKind::recurrent;
    int hidden = 32;
    double gamma = 0.5;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_steps = 5000;
    int sync_interval = 200;

    void validate() const;
};

nn::NetworkSpec make_q_network_spec(QNetworkKind kind, int n_steps, int hidden);

class DqnAgent {
public:
    DqnAgent(int n_steps, AgentConfig config, std::uint64_t seed);
    // Wraps an existing network (e.g. loaded from a checkpoint).
    DqnAgent(nn::NetworkSpec spec, nn::ParameterStore q_store, AgentConfig config);

    double epsilon() const;
    static double epsilon_at(const AgentConfig& config, std::int64_t step);

    Vector q_values(const Vector& state) const;
    // One column of (Q(s,0), Q(s,1)) per column of `states`.
    Matrix q_values_batch(const Matrix& states) const;
    Matrix target_q_values_batch(const Matrix& states) const;

    int greedy_action(const Vector& state) const;
    int select_action(const Vector& state, std::mt19937_64& rng) const;

    // r for terminal transitions, r + gamma * max_a' Q_target(s', a') otherwise.
    Vector bellman_targets(std::span<const Transition* const> batch) const;

    // One minibatch regression of Q(s, a) onto the Bellman targets. Only the
    // taken action's output receives gradient. Returns the mean squared TD error.
    double train_step(const ReplayMemory& memory, std::size_t batch_size, std::mt19937_64& rng);

    void sync_target();

    // Advances the environment-step counter; syncs the target every sync_interval.
    void record_step();

    const nn::NetworkSpec& spec() const { return spec_; }
    const nn::ParameterStore& q_store() const { return q_; }
    nn::ParameterStore& q_store() { return q_; }
    const nn::ParameterStore& target_store() const { return target_; }
    const AgentConfig& config() const { return config_; }
    AgentConfig& config() { return config_; }
    std::int64_t step_count() const { return step_count_; }
    std::int64_t sync_count() const { return sync_count_; }
    int n_steps() const { return n_steps_; }

private:
    int n_steps_;
    AgentConfig config_;
    nn::NetworkSpec spec_;
    nn::ParameterStore q_;
    nn::ParameterStore target_;
    nn::AdamState adam_;
    std::int64_t step_count_ = 0;
    std::int64_t sync_count_ = 0;
};

struct WarmUpReport {
    std::size_t transitions = 0;
    std::size_t heuristic_actions = 0;
    std::size_t outlier_states = 0;  // M
    double score_threshold = 0.0;
};

// Fills `memory` with init_mem transitions by walking contiguous episodes from
// window 0. Actions are 1 on the top-M isolation-forest outliers
// (M = round(outlier_fraction * windows)) and uniformly random elsewhere.
WarmUpReport warm_up(AnomalyEnv& env, ReplayMemory& memory, const IsolationForest& forest,
                     const Vector& r2, const LambdaController& controller, std::size_t init_mem,
                     double outlier_fraction, std::mt19937_64& rng);

struct EpisodeLog {
    int episode = 0;
    int steps = 0;
    double reward = 0.0;  // sum of R_total
    double r1_sum = 0.0;
    double r2_sum = 0.0;
    double lambda = 0.0;       // coefficient used during the episode
    double lambda_next = 0.0;  // after the end-of-episode update
    double mean_loss = 0.0;
    double epsilon = 0.0;
    std::size_t queries_spent = 0;
    std::size_t queried = 0;
    std::size_t pseudo_labels = 0;
    bool query_timeout = false;
};

struct TrainOptions {
    int episodes = 0;
    std::size_t batch_size = 64;
    std::function<void(const EpisodeLog&)> on_episode;
};

// Episode loop: epsilon-greedy step, R_total = r1 + lambda * r2, replay push,
// minibatch update, periodic target sync; then an active-learning round over
// `candidate_windows` and the lambda update.
std::vector<EpisodeLog> train(DqnAgent& agent, AnomalyEnv& env, ReplayMemory& memory, const Vector& r2,
                              LambdaController& controller, ActiveLearner* learner,
                              const Matrix& candidate_windows, const TrainOptions& options,
                              std::mt19937_64& rng);

}  // namespace tsad
