#include "tsad/agent.hpp"

#include "tsad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace tsad {

// --- ReplayMemory -------------------------------------------------------------

ReplayMemory::ReplayMemory(std::size_t capacity) : buffer_(capacity) {
    if (capacity == 0) throw ArgumentError("replay capacity must be positive");
}

void ReplayMemory::push(Transition t) {
    if (!std::isfinite(t.reward)) throw NumericError("non-finite reward pushed to replay memory");
    buffer_[head_] = std::move(t);
    head_ = (head_ + 1) % buffer_.size();
    size_ = std::min(size_ + 1, buffer_.size());
}

const Transition& ReplayMemory::at(std::size_t i) const {
    if (i >= size_) throw ArgumentError("replay index out of range");
    const std::size_t oldest = (head_ + buffer_.size() - size_) % buffer_.size();
    return buffer_[(oldest + i) % buffer_.size()];
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t batch_size, std::mt19937_64& rng) const {
    if (batch_size > size_) {
        throw ContractError("cannot sample " + std::to_string(batch_size) + " transitions from a memory of " +
                            std::to_string(size_));
    }
    std::vector<std::size_t> all(size_);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> out;
    out.reserve(batch_size);
    std::sample(all.begin(), all.end(), std::back_inserter(out), batch_size, rng);
    return out;
}

// --- agent ------------------------------------------------------------------------

void AgentConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (hidden <= 0) throw ConfigError("hidden width must be positive");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
        throw ConfigError("epsilon bounds must lie in [0, 1]");
    if (epsilon_decay_steps <= 0) throw ConfigError("epsilon_decay_steps must be positive");
    if (sync_interval <= 0) throw ConfigError("sync_interval must be positive");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
}

nn::NetworkSpec make_q_network_spec(QNetworkKind kind, int n_steps, int hidden) {
    using nn::Activation;
    using nn::LayerKind;
    nn::NetworkSpec spec;
    if (kind == QNetworkKind::recurrent) {
        spec.layers = {{LayerKind::recurrent, 1, hidden, Activation::tanh},
                       {LayerKind::dense, hidden, 2, Activation::identity}};
    } else {
        spec.layers = {{LayerKind::dense, n_steps, hidden, Activation::tanh},
                       {LayerKind::dense, hidden, hidden, Activation::tanh},
                       {LayerKind::dense, hidden, 2, Activation::identity}};
    }
    spec.validate();
    return spec;
}

DqnAgent::DqnAgent(int n_steps, AgentConfig config, std::uint64_t seed)
    : n_steps_(n_steps), config_(config), spec_(make_q_network_spec(config.network, n_steps, config.hidden)),
      q_(nn::init_network(spec_, seed)), target_(q_) {
    config_.validate();
}

DqnAgent::DqnAgent(nn::NetworkSpec spec, nn::ParameterStore q_store, AgentConfig config)
    : config_(config), spec_(std::move(spec)), q_(std::move(q_store)), target_(q_) {
    spec_.validate();
    if (spec_.output_width() != 2) throw SpecError("a Q-network must have two outputs");
    n_steps_ = spec_.recurrent() ? 0 : spec_.input_width();
}

double DqnAgent::epsilon_at(const AgentConfig& c, std::int64_t step) {
    const double decayed = c.epsilon_start - static_cast<double>(step) * (c.epsilon_start - c.epsilon_end) /
                                                 static_cast<double>(c.epsilon_decay_steps);
    return std::max(c.epsilon_end, decayed);
}

double DqnAgent::epsilon() const { return epsilon_at(config_, step_count_); }

Matrix DqnAgent::q_values_batch(const Matrix& states) const { return nn::predict(q_, spec_, states); }

Matrix DqnAgent::target_q_values_batch(const Matrix& states) const {
    return nn::predict(target_, spec_, states);
}

Vector DqnAgent::q_values(const Vector& state) const { return q_values_batch(state).col(0); }

int DqnAgent::greedy_action(const Vector& state) const {
    const Vector q = q_values(state);
    return q[1] > q[0] ? 1 : 0;
}

int DqnAgent::select_action(const Vector& state, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon()) return unit(rng) < 0.5 ? 0 : 1;
    return greedy_action(state);
}

Vector DqnAgent::bellman_targets(std::span<const Transition* const> batch) const {
    if (batch.empty()) throw ContractError("bellman_targets needs a non-empty batch");
    Vector targets(static_cast<Eigen::Index>(batch.size()));
    std::vector<Eigen::Index> live;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        targets[static_cast<Eigen::Index>(i)] = batch[i]->reward;
        if (!batch[i]->done) live.push_back(static_cast<Eigen::Index>(i));
    }
    if (live.empty()) return targets;
    const Eigen::Index rows = batch[static_cast<std::size_t>(live.front())]->next_state.size();
    Matrix next(rows, static_cast<Eigen::Index>(live.size()));
    for (std::size_t c = 0; c < live.size(); ++c)
        next.col(static_cast<Eigen::Index>(c)) = batch[static_cast<std::size_t>(live[c])]->next_state;
    const Matrix q_next = target_q_values_batch(next);
    for (std::size_t c = 0; c < live.size(); ++c)
        targets[live[c]] += config_.gamma * q_next.col(static_cast<Eigen::Index>(c)).maxCoeff();
    return targets;
}

double DqnAgent::train_step(const ReplayMemory& memory, std::size_t batch_size, std::mt19937_64& rng) {
    if (batch_size == 0) throw ArgumentError("batch_size must be positive");
    const auto picks = memory.sample_indices(batch_size, rng);
    std::vector<const Transition*> batch;
    batch.reserve(picks.size());
    for (auto i : picks) batch.push_back(&memory.at(i));

    const Vector targets = bellman_targets(batch);
    const Eigen::Index rows = batch.front()->state.size();
    Matrix states(rows, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t c = 0; c < batch.size(); ++c) states.col(static_cast<Eigen::Index>(c)) = batch[c]->state;

    auto fwd = nn::forward(q_, spec_, states);
    Matrix grad = Matrix::Zero(2, states.cols());
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(batch.size());
    for (std::size_t c = 0; c < batch.size(); ++c) {
        const auto col = static_cast<Eigen::Index>(c);
        const double td = fwd.output(batch[c]->action, col) - targets[col];
        loss += td * td;
        grad(batch[c]->action, col) = scale * td;
    }
    loss /= static_cast<double>(batch.size());
    nn::backward(q_, spec_, fwd.tape, grad);
    nn::optimizer_step(q_, config_.learning_rate, adam_);
    return loss;
}

void DqnAgent::sync_target() {
    target_.copy_values_from(q_);
    ++sync_count_;
}

void DqnAgent::record_step() {
    ++step_count_;
    if (step_count_ % config_.sync_interval == 0) sync_target();
}

// --- warm-up ------------------------------------------------------------------------

WarmUpReport warm_up(AnomalyEnv& env, ReplayMemory& memory, const IsolationForest& forest,
                     const Vector& r2, const LambdaController& controller, std::size_t init_mem,
                     double outlier_fraction, std::mt19937_64& rng) {
    if (init_mem > memory.capacity()) throw ConfigError("init_mem exceeds the replay capacity");
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
        throw ConfigError("outlier_fraction must lie in [0, 1)");
    const auto& ds = env.dataset();
    const std::size_t count = ds.num_windows();
    if (static_cast<std::size_t>(r2.size()) != count) throw ShapeError("one r2 score per window required");

    WarmUpReport report;
    report.outlier_states = static_cast<std::size_t>(std::llround(outlier_fraction * static_cast<double>(count)));
    std::vector<bool> heuristic(count, false);
    if (report.outlier_states > 0) {
        const Vector scores = forest.anomaly_scores(ds.windows);
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
        });
        for (std::size_t i = 0; i < report.outlier_states; ++i) heuristic[order[i]] = true;
        report.score_threshold = scores[static_cast<Eigen::Index>(order[report.outlier_states - 1])];
    }

    std::uniform_int_distribution<int> coin(0, 1);
    std::size_t cursor = 0;
    while (report.transitions < init_mem) {
        if (cursor >= count) {
            throw DataError("environment exhausted after " + std::to_string(report.transitions) +
                            " warm-up transitions (init_mem " + std::to_string(init_mem) + ")");
        }
        Vector state = env.reset(cursor, rng);
        bool done = false;
        while (!done && report.transitions < init_mem) {
            const std::size_t window = env.cursor();
            int action = coin(rng);
            if (heuristic[window]) {
                action = 1;
                ++report.heuristic_actions;
            }
            auto res = env.step(action);
            const double r = total_reward(res.r1, r2[static_cast<Eigen::Index>(res.window)], controller);
            Transition t{std::move(state), action, r, res.next_state.value_or(Vector()), res.done};
            state = res.next_state.value_or(Vector());
            memory.push(std::move(t));
            ++report.transitions;
            done = res.done;
        }
        cursor = env.cursor();
    }
    return report;
}

// --- TrainRL ----------------------------------------------------------------------------

std::vector<EpisodeLog> train(DqnAgent& agent, AnomalyEnv& env, ReplayMemory& memory, const Vector& r2,
                              LambdaController& controller, ActiveLearner* learner,
                              const Matrix& candidate_windows, const TrainOptions& options,
                              std::mt19937_64& rng) {
    std::vector<EpisodeLog> log;
    if (options.episodes <= 0) return log;
    if (static_cast<std::size_t>(r2.size()) != env.dataset().num_windows())
        throw ShapeError("one r2 score per window required");

    for (int episode = 0; episode < options.episodes; ++episode) {
        EpisodeLog entry;
        entry.episode = episode;
        entry.lambda = controller.lambda();
        Vector state = env.reset(std::nullopt, rng);
        double loss_sum = 0.0;
        int updates = 0;
        bool done = false;
        while (!done) {
            const int action = agent.select_action(state, rng);
            auto res = env.step(action);
            const double r2_value = r2[static_cast<Eigen::Index>(res.window)];
            const double reward = total_reward(res.r1, r2_value, controller);
            entry.reward += reward;
            entry.r1_sum += res.r1;
            entry.r2_sum += r2_value;
            ++entry.steps;
            Vector next = res.next_state.value_or(Vector());
            memory.push(Transition{std::move(state), action, reward, next, res.done});
            state = std::move(next);
            done = res.done;
            if (memory.size() >= options.batch_size) {
                loss_sum += agent.train_step(memory, options.batch_size, rng);
                ++updates;
            }
            agent.record_step();
        }
        entry.mean_loss = updates > 0 ? loss_sum / updates : 0.0;
        entry.epsilon = agent.epsilon();

        if (learner) {
            const auto candidates = learner->pool().query_candidates();
            Matrix q;
            if (!candidates.empty()) {
                Matrix states(candidate_windows.cols(), static_cast<Eigen::Index>(candidates.size()));
                for (std::size_t c = 0; c < candidates.size(); ++c)
                    states.col(static_cast<Eigen::Index>(c)) =
                        candidate_windows.row(static_cast<Eigen::Index>(candidates[c])).transpose();
                q = agent.q_values_batch(states);
            } else {
                q = Matrix(2, 0);
            }
            const auto round = learner->run_round(episode, candidates, q);
            entry.queried = round.labeled;
            entry.pseudo_labels = round.pseudo_labeled;
            entry.query_timeout = round.timed_out;
            entry.queries_spent = learner->pool().budget_spent();
        }

        entry.lambda_next = controller.update(entry.reward);
        log.push_back(entry);
        if (options.on_episode) options.on_episode(entry);
    }
    return log;
}

}  // namespace tsad
