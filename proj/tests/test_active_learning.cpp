#include "tsad/active_learning.hpp"
#include "tsad/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <thread>

using namespace tsad;

namespace {

// Dense solve of the clamped harmonic system: for free nodes u,
// (D_uu - W_uu) p_u = W_ul y_l.
std::vector<double> harmonic_oracle(const Matrix& w, const std::vector<int>& labels) {
    const auto n = static_cast<std::size_t>(w.rows());
    std::vector<std::size_t> free_nodes, fixed;
    for (std::size_t i = 0; i < n; ++i) (labels[i] >= 0 ? fixed : free_nodes).push_back(i);
    std::vector<double> p(n, 0.0);
    for (auto i : fixed) p[i] = labels[i];
    if (free_nodes.empty()) return p;
    const auto u = static_cast<Eigen::Index>(free_nodes.size());
    Matrix a = Matrix::Zero(u, u);
    Vector b = Vector::Zero(u);
    for (Eigen::Index r = 0; r < u; ++r) {
        const auto i = static_cast<Eigen::Index>(free_nodes[static_cast<std::size_t>(r)]);
        a(r, r) = w.row(i).sum();
        for (Eigen::Index c = 0; c < u; ++c) a(r, c) -= w(i, static_cast<Eigen::Index>(free_nodes[static_cast<std::size_t>(c)]));
        for (auto j : fixed) b[r] += w(i, static_cast<Eigen::Index>(j)) * labels[j];
    }
    const Vector x = a.fullPivLu().solve(b);
    for (Eigen::Index r = 0; r < u; ++r) p[free_nodes[static_cast<std::size_t>(r)]] = x[r];
    return p;
}

// Connected random graph: a spanning path plus random extra edges.
Matrix random_graph(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> wdist(0.05, 1.0);
    std::bernoulli_distribution extra(0.2);
    Matrix w = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) w(i, i + 1) = w(i + 1, i) = wdist(rng);
    for (int i = 0; i < n; ++i)
        for (int j = i + 2; j < n; ++j)
            if (extra(rng)) w(i, j) = w(j, i) = wdist(rng);
    return w;
}

class FailingOracle : public Oracle {
public:
    std::vector<int> request(std::span<const std::size_t>) override { throw TimeoutError("no labels"); }
    Provenance provenance() const override { return Provenance::human; }
};

}  // namespace

TEST_CASE("margin") {
    CHECK(margin(0.5, 0.5) == 0.0);
    CHECK(margin(2.0, -1.0) == 3.0);
    CHECK(margin(-1.0, 2.0) == margin(2.0, -1.0));
}

TEST_CASE("select_queries") {
    std::vector<std::size_t> idx{10, 11, 12};
    std::vector<double> m{3.0, 0.1, 1.0};
    CHECK(select_queries(idx, m, 1) == std::vector<std::size_t>{11});
    CHECK(select_queries(idx, m, 3) == std::vector<std::size_t>{11, 12, 10});
    CHECK(select_queries(idx, m, 0).empty());
    CHECK_THROWS_AS(select_queries(idx, m, 4), BudgetError);

    std::vector<double> ties{1.0, 1.0, 1.0};
    std::vector<std::size_t> rev{12, 11, 10};
    CHECK(select_queries(rev, ties, 2) == std::vector<std::size_t>{10, 11});

    Matrix q(2, 3);
    q << 0.0, 1.0, 2.0,
         3.0, 1.2, 2.5;
    CHECK(select_queries(idx, q, 2) == std::vector<std::size_t>{11, 12});
}

TEST_CASE("select_queries matches a full sort and ignores presentation order") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> size(1, 300);
    std::uniform_int_distribution<int> coarse(0, 20);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = size(rng);
        std::vector<std::size_t> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), std::size_t{100});
        std::vector<double> m(idx.size());
        for (auto& v : m) v = coarse(rng) * 0.25;
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, idx.size())(rng);

        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t i = 0; i < idx.size(); ++i) all.emplace_back(m[i], idx[i]);
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i < k; ++i) expected.push_back(all[i].second);
        CHECK(select_queries(idx, m, k) == expected);

        std::vector<std::size_t> perm(idx.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::size_t> idx2;
        std::vector<double> m2;
        for (auto p : perm) {
            idx2.push_back(idx[p]);
            m2.push_back(m[p]);
        }
        CHECK(select_queries(idx2, m2, k) == expected);
    }
}

TEST_CASE("label pool and oracle queries") {
    LabelPool pool(5, 10);
    SimulatedOracle oracle({0, 1, 0, 0, 1});
    std::vector<std::size_t> one{1};
    CHECK(query_oracle(pool, one, oracle) == 1);
    CHECK(pool.label(1) == 1);
    CHECK(pool.provenance(1) == Provenance::ground_truth);
    CHECK(pool.budget_spent() == 1);

    CHECK(query_oracle(pool, one, oracle) == 0);
    CHECK(pool.budget_spent() == 1);

    std::vector<std::size_t> dup{3, 3, 4};
    CHECK(query_oracle(pool, dup, oracle) == 2);
    CHECK(pool.budget_spent() == 3);
    CHECK(pool.query_candidates() == std::vector<std::size_t>{0, 2});

    CHECK(pool.set_propagated(0, 1));
    CHECK_FALSE(pool.set_propagated(1, 0));
    CHECK(pool.label(1) == 1);
    CHECK(pool.propagated_count() == 1);
    pool.clear_propagated();
    CHECK_FALSE(pool.label(0).has_value());
    CHECK_THROWS_AS(pool.set_oracle_label(0, 2, Provenance::human), ArgumentError);
}

TEST_CASE("budget overrun leaves the pool unchanged") {
    LabelPool pool(20, 10);
    SimulatedOracle oracle(std::vector<int>(20, 0));
    std::vector<std::size_t> eleven(11);
    std::iota(eleven.begin(), eleven.end(), std::size_t{0});
    CHECK_THROWS_AS(query_oracle(pool, eleven, oracle), BudgetError);
    CHECK(pool.budget_spent() == 0);
    CHECK(pool.oracle_count() == 0);
}

TEST_CASE("similarity graph") {
    Matrix w(4, 3);
    w << 0, 0, 0,
         0, 0, 0,
         5, 5, 5,
         50, 50, 50;
    auto g = build_similarity_graph(w, 1.0, 1);
    CHECK(g.weight(0, 1) == 1.0);
    CHECK(g.weight(1, 0) == 1.0);
    CHECK(g.weight(0, 3) == 0.0);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    Matrix x(60, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    auto rg = build_similarity_graph(x, 1.5, 6);
    const Matrix d = rg.dense();
    CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < rg.size(); ++i)
        for (const auto& [j, wij] : rg.adjacency[i]) {
            const double dist2 = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
            CHECK(wij == doctest::Approx(std::exp(-dist2 / (2 * 1.5 * 1.5))).epsilon(1e-9));
        }

    Matrix far(2, 1);
    far << 0.0, 1e3;
    CHECK(build_similarity_graph(far, 1.0, 1).weight(0, 1) < 1e-300);
    CHECK_THROWS_AS(build_similarity_graph(Matrix::Ones(5, 2), 1.0, 2), DataError);
    CHECK_THROWS_AS(build_similarity_graph(x, 0.0, 2), ArgumentError);
    CHECK(median_pairwise_distance(x, 1000, 1) > 0.0);
}

TEST_CASE("propagation on a path") {
    Matrix w = Matrix::Zero(3, 3);
    w(0, 1) = w(1, 0) = w(1, 2) = w(2, 1) = 1.0;
    auto g = SimilarityGraph::from_dense(w);
    LabelPool pool(3, 3);
    pool.set_oracle_label(0, 0, Provenance::ground_truth);
    pool.set_oracle_label(2, 1, Provenance::ground_truth);
    auto r = propagate_labels(g, pool, 100, 1e-12);
    CHECK(r.probabilities[1][0] == doctest::Approx(0.5));
    CHECK(r.probabilities[1][1] == doctest::Approx(0.5));
    CHECK(r.converged);

    pool.set_oracle_label(1, 1, Provenance::human);
    auto full = propagate_labels(g, pool, 100, 1e-12);
    CHECK(full.probabilities[0][0] == 1.0);
    CHECK(full.probabilities[1][1] == 1.0);
    CHECK(full.probabilities[2][1] == 1.0);

    LabelPool empty(3, 3);
    CHECK_THROWS_AS(propagate_labels(g, empty, 10, 1e-9), DataError);
}

TEST_CASE("propagation matches the dense harmonic solve") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 6 + trial % 10;
        const Matrix w = random_graph(n, rng);
        auto g = SimilarityGraph::from_dense(w);
        LabelPool pool(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n), -1);
        labels[0] = 0;
        labels[static_cast<std::size_t>(n - 1)] = 1;
        if (trial % 3 == 0) labels[static_cast<std::size_t>(n / 2)] = 1;
        for (int i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] >= 0)
                pool.set_oracle_label(static_cast<std::size_t>(i), labels[static_cast<std::size_t>(i)], Provenance::ground_truth);
        auto r = propagate_labels(g, pool, 100000, 1e-13);
        const auto expected = harmonic_oracle(w, labels);
        for (int i = 0; i < n; ++i) {
            const auto& p = r.probabilities[static_cast<std::size_t>(i)];
            CHECK(std::abs(p[1] - expected[static_cast<std::size_t>(i)]) < 1e-6);
            CHECK(p[0] >= 0.0);
            CHECK(p[1] >= 0.0);
            CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-9);
        }
        for (std::size_t s = 1; s < r.max_changes.size(); ++s) CHECK(r.max_changes[s] <= r.max_changes[s - 1] + 1e-15);
    }
}

TEST_CASE("pseudo labels never replace oracle labels") {
    Matrix w = Matrix::Zero(4, 4);
    w(0, 1) = w(1, 0) = 1.0;
    w(1, 2) = w(2, 1) = 1.0;
    w(2, 3) = w(3, 2) = 0.01;
    auto g = SimilarityGraph::from_dense(w);
    LabelPool pool(4, 4);
    pool.set_oracle_label(0, 1, Provenance::human);
    pool.set_oracle_label(3, 0, Provenance::ground_truth);
    auto r = propagate_labels(g, pool, 1000, 1e-12);
    const auto assigned = apply_pseudo_labels(pool, r, 0.9);
    CHECK(assigned == 2);
    CHECK(pool.label(0) == 1);
    CHECK(pool.provenance(0) == Provenance::human);
    CHECK(pool.label(3) == 0);
    CHECK(pool.label(1) == 1);
    CHECK(pool.provenance(1) == Provenance::propagated);

    Matrix island = Matrix::Zero(3, 3);
    island(0, 1) = island(1, 0) = 1.0;
    LabelPool p2(3, 3);
    p2.set_oracle_label(0, 1, Provenance::ground_truth);
    auto r2 = propagate_labels(SimilarityGraph::from_dense(island), p2, 100, 1e-12);
    CHECK_FALSE(r2.reached[2]);
    CHECK(apply_pseudo_labels(p2, r2, 0.9) == 1);
    CHECK_FALSE(p2.label(2).has_value());
}

TEST_CASE("active learner spreads the budget and refunds on timeout") {
    const std::size_t n = 40;
    Matrix x(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) x.row(static_cast<Eigen::Index>(i)) << static_cast<double>(i % 7), static_cast<double>(i) * 0.1;
    auto g = build_similarity_graph(x, 2.0, 4);
    LabelPool pool(n, 10);
    std::vector<int> truth(n, 0);
    truth[5] = 1;
    SimulatedOracle oracle(truth);
    ActiveLearner learner(pool, g, oracle, {}, 4);
    std::size_t total = 0;
    for (int r = 0; r < 4; ++r) total += learner.scheduled_queries(r);
    CHECK(total == 10);
    CHECK(learner.scheduled_queries(0) == 2);
    CHECK(learner.scheduled_queries(1) == 3);

    auto candidates = pool.query_candidates();
    Matrix q = Matrix::Zero(2, static_cast<Eigen::Index>(candidates.size()));
    auto round = learner.run_round(0, candidates, q);
    CHECK(round.labeled == 2);
    CHECK(round.propagated);
    CHECK(pool.budget_spent() == 2);

    FailingOracle failing;
    LabelPool pool2(n, 10);
    ActiveLearner slow(pool2, g, failing, {}, 4);
    auto c2 = pool2.query_candidates();
    auto t = slow.run_round(0, c2, Matrix::Zero(2, static_cast<Eigen::Index>(c2.size())));
    CHECK(t.timed_out);
    CHECK(pool2.budget_spent() == 0);
    CHECK_FALSE(t.propagated);
    auto t2 = slow.run_round(1, c2, Matrix::Zero(2, static_cast<Eigen::Index>(c2.size())));
    CHECK(t2.requested == 5);
}

TEST_CASE("channel oracle round trip") {
    auto pts = generate_synthetic(60, 0.05, 1);
    auto ds = make_windows(pts, 4, true);
    LabelChannel channel;
    ChannelOracle oracle(channel, ds, std::chrono::milliseconds(5000));
    LabelPool pool(ds.num_windows(), 5);
    std::thread annotator([&] {
        for (int tries = 0; tries < 500; ++tries) {
            auto pending = channel.pending();
            if (pending.size() == 2) {
                for (const auto& q : pending) channel.submit({q.query_id, q.window_index == 7 ? 1 : 0, "t", ""});
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
    });
    std::vector<std::size_t> idx{7, 9};
    CHECK(query_oracle(pool, idx, oracle) == 2);
    annotator.join();
    CHECK(pool.label(7) == 1);
    CHECK(pool.label(9) == 0);
    CHECK(pool.provenance(7) == Provenance::human);
    CHECK(pool.budget_spent() == 2);

    ChannelOracle impatient(channel, ds, std::chrono::milliseconds(20));
    std::vector<std::size_t> idx2{11};
    CHECK_THROWS_AS(query_oracle(pool, idx2, impatient), TimeoutError);
    CHECK(pool.budget_spent() == 2);
    CHECK(channel.pending().empty());
}
