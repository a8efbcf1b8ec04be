#include "test_support.hpp"
#include "tsad/dynamic_reward.hpp"
#include "tsad/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tsad;

TEST_CASE("total reward") {
    CHECK(total_reward(5.0, 0.2, 1.0) == doctest::Approx(5.2).epsilon(1e-15));
    CHECK(total_reward(-5.0, 3.7, 0.0) == -5.0);
    CHECK(total_reward(0.0, 0.0, 2.0) == 0.0);
    CHECK_THROWS_AS(total_reward(1.0, -0.1, 1.0), ContractError);
    LambdaController c({1.5, 0.01, 0, 10, 200});
    CHECK(total_reward(1.0, 2.0, c) == 1.0 + 1.5 * 2.0);
    for (double r2 : {0.0, 0.5, 1.0, 7.0}) CHECK(total_reward(1.0, r2, c) - total_reward(1.0, 0.0, c) == 1.5 * r2);
}

TEST_CASE("controller updates") {
    LambdaController a({1.5, 0.01, 0, 10, 200});
    CHECK(a.update(150) == doctest::Approx(2.0).epsilon(1e-14));
    LambdaController b({9.95, 0.01, 0, 10, 300});
    CHECK(b.update(0) == 10.0);
    LambdaController c({3.0, 0.05, 0, 10, 300});
    CHECK(c.update(300) == 3.0);
    CHECK(c.history().size() == 1);
    CHECK(c.history()[0].episode == 0);
    CHECK(c.history()[0].lambda == 3.0);
    LambdaController d({0.1, 1.0, 0, 10, 0});
    CHECK(d.update(100) == 0.0);
    LambdaController e({1.0, 0.1, 0, 10, 0});
    CHECK(e.update(std::nan("")) == 10.0);
    CHECK_THROWS_AS(LambdaController({11, 0.1, 0, 10, 0}), ConfigError);
    CHECK_THROWS_AS(LambdaController({1, 0.1, 5, 1, 0}), ConfigError);
}

TEST_CASE("controller properties over random states") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const double lo = 5.0 * unit(rng);
        const double hi = lo + 10.0 * unit(rng);
        LambdaConfig cfg{lo + (hi - lo) * unit(rng), 0.1 * unit(rng), lo, hi, 600.0 * unit(rng)};
        LambdaController c(cfg);
        const double before = c.lambda();
        const double reward = 1200.0 * unit(rng) - 300.0;
        const double after = c.update(reward);
        CHECK(after >= lo);
        CHECK(after <= hi);
        const double raw = before + cfg.alpha * (cfg.r_target - reward);
        if (raw > lo && raw < hi) {
            const double err = cfg.r_target - reward;
            const double delta = after - before;
            CHECK(((err > 0) - (err < 0)) == ((delta > 0) - (delta < 0)));
        }
        LambdaController c2(cfg);
        CHECK(c2.update(reward + 10.0) <= after);
    }
}

TEST_CASE("curve files") {
    tsad_test::TempDir dir("curves");
    LambdaController c({1.0, 0.01, 0, 10, 300});
    std::vector<double> rewards{100.123456789012345, 250.5, 412.25};
    for (double r : rewards) c.update(r);
    auto paths = emit_curves(c, rewards, dir.path());
    const auto lambda = read_curve(paths.lambda_curve, "lambda");
    const auto reward = read_curve(paths.reward_curve, "reward");
    REQUIRE(lambda.size() == 3);
    REQUIRE(reward.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(lambda[i].episode == static_cast<int>(i));
        CHECK(lambda[i].value == c.history()[i].lambda);
        CHECK(reward[i].value == rewards[i]);
    }
    const auto text = tsad_test::read_file(paths.lambda_curve);
    CHECK(text.rfind("episode,lambda\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);

    LambdaController empty;
    CHECK_THROWS_AS(emit_curves(empty, {}, dir.path()), ContractError);
    CHECK_THROWS_AS(emit_curves(c, {1.0}, dir.path()), ContractError);
}

TEST_CASE("lambda trend check") {
    LambdaConfig cfg{5.0, 0.01, 0, 10, 300};
    auto curve = [](std::vector<double> v) {
        std::vector<CurvePoint> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back({static_cast<int>(i), v[i]});
        return out;
    };
    // Rewards rise above target at episode 2, lambda decays to the floor.
    auto ok = check_lambda_trend(curve({6, 7, 6, 5, 3, 0, 0.5}), curve({100, 200, 350, 400, 500, 600, 250}), cfg);
    CHECK(ok.pass);
    CHECK(ok.first_above_target == 2);
    CHECK(ok.bound_hit_episode == 5);

    auto bad = check_lambda_trend(curve({6, 7, 6, 6.5, 3}), curve({100, 200, 350, 250, 500}), cfg);
    CHECK_FALSE(bad.pass);
    CHECK(bad.violation_episode == 3);

    auto never = check_lambda_trend(curve({6, 7}), curve({100, 200}), cfg);
    CHECK(never.first_above_target == -1);
}
