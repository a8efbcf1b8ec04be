#include "tsad/agent.hpp"
#include "tsad/errors.hpp"
#include "tsad/vae.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace tsad;

namespace {

AgentConfig dense_config() {
    AgentConfig c;
    c.network = QNetworkKind::dense;
    c.hidden = 8;
    return c;
}

// Dense agent whose network outputs the constant pair (q0, q1).
DqnAgent constant_agent(double q0, double q1, AgentConfig cfg, int n = 2) {
    auto spec = make_q_network_spec(QNetworkKind::dense, n, cfg.hidden);
    auto store = nn::init_network(spec, 1);
    store.at("l2.w").value.setZero();
    store.at("l2.b").value << q0, q1;
    return DqnAgent(spec, store, cfg);
}

Transition transition(double reward, bool done, int action = 0) {
    return Transition{Vector::Zero(2), action, reward, Vector::Zero(2), done};
}

// Two states, deterministic moves: action 0 goes to A, action 1 to B.
struct ToyMdp {
    std::array<std::array<double, 2>, 2> reward{{{1.0, 0.0}, {0.0, 3.0}}};
    double gamma = 0.5;

    static Vector state(int s) { return s == 0 ? Vector::Unit(2, 0) : Vector::Unit(2, 1); }
    static int next(int, int a) { return a; }

    std::array<std::array<double, 2>, 2> q_star() const {
        std::array<std::array<double, 2>, 2> q{};
        for (int it = 0; it < 2000; ++it) {
            auto nq = q;
            for (int s = 0; s < 2; ++s)
                for (int a = 0; a < 2; ++a) {
                    const int n = next(s, a);
                    nq[s][a] = reward[s][a] + gamma * std::max(q[n][0], q[n][1]);
                }
            q = nq;
        }
        return q;
    }
};

}  // namespace

TEST_CASE("replay memory is a FIFO ring") {
    ReplayMemory m(5);
    for (int i = 0; i < 8; ++i) m.push(transition(i, false));
    CHECK(m.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(m.at(i).reward == static_cast<double>(i + 3));
    std::mt19937_64 rng(1);
    auto picks = m.sample_indices(5, rng);
    std::sort(picks.begin(), picks.end());
    CHECK(picks == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(m.sample_indices(6, rng), ContractError);
    CHECK_THROWS_AS(ReplayMemory(0), ArgumentError);
    CHECK_THROWS_AS(m.push(transition(std::nan(""), false)), NumericError);
}

TEST_CASE("epsilon schedule") {
    AgentConfig c;
    c.epsilon_start = 1.0;
    c.epsilon_end = 0.05;
    c.epsilon_decay_steps = 5000;
    for (std::int64_t step : {0, 1, 100, 2500, 4999, 5000, 5001, 100000}) {
        const double expected = std::max(0.05, 1.0 - static_cast<double>(step) * (1.0 - 0.05) / 5000.0);
        CHECK(DqnAgent::epsilon_at(c, step) == expected);
    }
}

TEST_CASE("action selection") {
    AgentConfig greedy = dense_config();
    greedy.epsilon_start = greedy.epsilon_end = 0.0;
    auto a = constant_agent(0.2, 0.9, greedy);
    std::mt19937_64 rng(1);
    CHECK(a.select_action(Vector::Zero(2), rng) == 1);
    auto tie = constant_agent(0.5, 0.5, greedy);
    CHECK(tie.select_action(Vector::Zero(2), rng) == 0);
    CHECK(tie.greedy_action(Vector::Zero(2)) == 0);

    AgentConfig random = dense_config();
    random.epsilon_start = random.epsilon_end = 1.0;
    auto r = constant_agent(0.2, 0.9, random);
    int ones = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) ones += r.select_action(Vector::Zero(2), rng);
    const double e = n / 2.0;
    const double chi2 = (ones - e) * (ones - e) / e + ((n - ones) - e) * ((n - ones) - e) / e;
    CHECK(chi2 < 6.635);  // p > 0.01 with one degree of freedom
}

TEST_CASE("bellman targets") {
    AgentConfig c = dense_config();
    c.gamma = 0.9;
    auto agent = constant_agent(2.0, 1.0, c);
    std::vector<Transition> batch{transition(5.0, true), transition(1.0, false)};
    std::vector<const Transition*> ptrs{&batch[0], &batch[1]};
    const Vector t = agent.bellman_targets(ptrs);
    CHECK(t[0] == 5.0);
    CHECK(t[1] == doctest::Approx(2.8).epsilon(1e-15));

    c.gamma = 0.0;
    auto myopic = constant_agent(2.0, 1.0, c);
    const Vector m = myopic.bellman_targets(ptrs);
    CHECK(m[0] == 5.0);
    CHECK(m[1] == 1.0);
    CHECK_THROWS_AS(agent.bellman_targets(std::span<const Transition* const>{}), ContractError);
}

TEST_CASE("train_step at the fixed point leaves parameters alone") {
    AgentConfig c = dense_config();
    c.gamma = 0.0;
    auto agent = constant_agent(1.0, 1.0, c);
    ReplayMemory m(10);
    for (int i = 0; i < 10; ++i) m.push(transition(1.0, false, i % 2));
    const auto before = agent.q_store();
    std::mt19937_64 rng(1);
    CHECK(agent.train_step(m, 4, rng) == 0.0);
    CHECK(agent.q_store().values_equal(before));
    CHECK_THROWS_AS(agent.train_step(m, 11, rng), ContractError);
}

TEST_CASE("target network follows the sync schedule") {
    AgentConfig c = dense_config();
    c.sync_interval = 3;
    c.learning_rate = 1e-2;
    DqnAgent agent(2, c, 7);
    ReplayMemory m(20);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) m.push(Transition{Vector::Random(2), i % 2, 1.0 * i, Vector::Random(2), false});
    for (int step = 1; step <= 7; ++step) {
        const auto target_before = agent.target_store();
        agent.train_step(m, 8, rng);
        agent.record_step();
        if (step % 3 == 0) {
            CHECK(agent.target_store().values_equal(agent.q_store()));
        } else {
            CHECK(agent.target_store().values_equal(target_before));
        }
    }
    CHECK(agent.sync_count() == 2);

    agent.train_step(m, 8, rng);
    agent.sync_target();
    agent.sync_target();
    const Matrix states = Matrix::Random(2, 100);
    CHECK(agent.q_values_batch(states) == agent.target_q_values_batch(states));
}

TEST_CASE("q-network specs") {
    auto r = make_q_network_spec(QNetworkKind::recurrent, 16, 32);
    CHECK(r.recurrent());
    CHECK(r.input_width() == 1);
    CHECK(r.output_width() == 2);
    auto d = make_q_network_spec(QNetworkKind::dense, 16, 32);
    CHECK(d.input_width() == 16);
    DqnAgent agent(16, AgentConfig{}, 1);
    CHECK(agent.q_values(Vector::Zero(16)).size() == 2);
}

TEST_CASE("frozen-target regression on the toy MDP") {
    ToyMdp mdp;
    AgentConfig c = dense_config();
    c.gamma = mdp.gamma;
    c.learning_rate = 1e-2;
    c.sync_interval = 100000;
    DqnAgent agent(2, c, 3);
    ReplayMemory m(64);
    for (int i = 0; i < 64; ++i) {
        const int s = (i / 2) % 2, a = i % 2;
        m.push({ToyMdp::state(s), a, mdp.reward[s][a], ToyMdp::state(ToyMdp::next(s, a)), false});
    }
    std::mt19937_64 rng(4);
    double loss = 1.0;
    for (int step = 0; step < 500; ++step) loss = agent.train_step(m, 16, rng);
    CHECK(loss < 1e-3);
}

TEST_CASE("toy MDP converges to Q*") {
    ToyMdp mdp;
    const auto q_star = mdp.q_star();
    CHECK(q_star[0][1] == doctest::Approx(3.0));
    CHECK(q_star[1][1] == doctest::Approx(6.0));
    AgentConfig c = dense_config();
    c.gamma = mdp.gamma;
    c.learning_rate = 5e-3;
    c.sync_interval = 100;
    DqnAgent agent(2, c, 5);
    ReplayMemory m(400);
    for (int i = 0; i < 400; ++i) {
        const int s = (i / 2) % 2, a = i % 2;
        m.push({ToyMdp::state(s), a, mdp.reward[s][a], ToyMdp::state(ToyMdp::next(s, a)), false});
    }
    std::mt19937_64 rng(6);
    for (int step = 0; step < 5000; ++step) {
        agent.train_step(m, 32, rng);
        agent.record_step();
    }
    for (int s = 0; s < 2; ++s) {
        const Vector q = agent.q_values(ToyMdp::state(s));
        for (int a = 0; a < 2; ++a) CHECK(std::abs(q[a] - q_star[s][a]) < 0.05);
    }
}

namespace {

struct Fixture {
    std::shared_ptr<WindowDataset> ds;
    Vector r2;
    IsolationForest forest;
    Fixture()
        : ds(std::make_shared<WindowDataset>(make_windows(generate_synthetic(700, 0.02, 3), 8, true))),
          r2(Vector::Constant(static_cast<Eigen::Index>(ds->num_windows()), 0.1)),
          forest(IsolationForest::fit(ds->windows, 20, 64, 1)) {}
    EnvConfig env_cfg() const {
        EnvConfig c;
        c.episode_length = 100;
        return c;
    }
};

}  // namespace

TEST_CASE("warm-up fills memory deterministically") {
    Fixture f;
    AnomalyEnv env(f.ds, f.env_cfg(), AnomalyEnv::dataset_labels(f.ds));
    LambdaController ctrl;
    ReplayMemory m(1000);
    std::mt19937_64 rng(1);
    auto rep = warm_up(env, m, f.forest, f.r2, ctrl, 500, 0.02, rng);
    CHECK(m.size() == 500);
    CHECK(rep.transitions == 500);
    CHECK(rep.outlier_states == static_cast<std::size_t>(std::llround(0.02 * static_cast<double>(f.ds->num_windows()))));
    CHECK(m.at(0).reward == doctest::Approx(env.reward(m.at(0).action, (*f.ds->labels)[0]) + 0.1));

    ReplayMemory m2(1000);
    std::mt19937_64 rng2(1);
    AnomalyEnv env2(f.ds, f.env_cfg(), AnomalyEnv::dataset_labels(f.ds));
    warm_up(env2, m2, f.forest, f.r2, ctrl, 500, 0.02, rng2);
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(m.at(i).action == m2.at(i).action);
        CHECK(m.at(i).reward == m2.at(i).reward);
    }

    ReplayMemory m3(1000);
    auto none = warm_up(env, m3, f.forest, f.r2, ctrl, 300, 0.0, rng);
    CHECK(none.outlier_states == 0);
    CHECK(none.heuristic_actions == 0);

    ReplayMemory big(5000);
    CHECK_THROWS_AS(warm_up(env, big, f.forest, f.r2, ctrl, 4000, 0.02, rng), DataError);
}

TEST_CASE("training loop bookkeeping") {
    Fixture f;
    AnomalyEnv env(f.ds, f.env_cfg(), AnomalyEnv::dataset_labels(f.ds));
    LambdaController ctrl;
    AgentConfig c = dense_config();
    DqnAgent agent(8, c, 2);
    ReplayMemory m(2000);
    std::mt19937_64 rng(1);
    warm_up(env, m, f.forest, f.r2, ctrl, 200, 0.02, rng);
    const auto before = agent.q_store();
    TrainOptions none;
    none.episodes = 0;
    CHECK(train(agent, env, m, f.r2, ctrl, nullptr, f.ds->windows, none, rng).empty());
    CHECK(agent.q_store().values_equal(before));

    TrainOptions opts;
    opts.episodes = 3;
    opts.batch_size = 16;
    int callbacks = 0;
    opts.on_episode = [&](const EpisodeLog&) { ++callbacks; };
    auto log = train(agent, env, m, f.r2, ctrl, nullptr, f.ds->windows, opts, rng);
    REQUIRE(log.size() == 3);
    CHECK(callbacks == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(log[static_cast<std::size_t>(i)].episode == i);
        CHECK(log[static_cast<std::size_t>(i)].steps == 100);
        CHECK(log[static_cast<std::size_t>(i)].reward ==
              doctest::Approx(log[static_cast<std::size_t>(i)].r1_sum + log[static_cast<std::size_t>(i)].lambda * log[static_cast<std::size_t>(i)].r2_sum));
    }
    CHECK(ctrl.history().size() == 3);
    CHECK(log[1].lambda == log[0].lambda_next);
    CHECK(agent.step_count() == 300);
    CHECK_FALSE(agent.q_store().values_equal(before));
}
