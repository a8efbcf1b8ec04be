#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tsad {

struct LambdaConfig {
    double lambda0 = 1.0;
    double alpha = 0.01;
    double lambda_min = 0.0;
    double lambda_max = 10.0;
    double r_target = 300.0;

    void validate() const;
};

struct LambdaRecord {
    int episode = 0;
    double lambda = 0.0;          // value after the update at this episode
    double episode_reward = 0.0;
};

// Clipped proportional controller for the reconstruction-bonus coefficient:
//   lambda <- clip(lambda + alpha * (r_target - episode_reward), lambda_min, lambda_max)
// applied once per finished episode.
class LambdaController {
public:
    explicit LambdaController(LambdaConfig config = {});

    double lambda() const { return lambda_; }
    const LambdaConfig& config() const { return config_; }
    const std::vector<LambdaRecord>& history() const { return history_; }

    double update(double episode_reward);

    // Restores a controller mid-run (e.g. for property tests over random states).
    void set_lambda(double value);

private:
    LambdaConfig config_;
    double lambda_;
    std::vector<LambdaRecord> history_;
};

// R_total = r1 + lambda * r2; r2 must be non-negative.
double total_reward(double r1, double r2, const LambdaController& controller);
double total_reward(double r1, double r2, double lambda);

struct CurvePaths {
    std::filesystem::path lambda_curve;
    std::filesystem::path reward_curve;
};

// Writes lambda_curve.csv (episode,lambda) and reward_curve.csv (episode,reward)
// under `directory`. `episode_rewards[i]` belongs to history()[i].
CurvePaths emit_curves(const LambdaController& controller, const std::vector<double>& episode_rewards,
                       const std::filesystem::path& directory);

struct CurvePoint {
    int episode = 0;
    double value = 0.0;
};
std::vector<CurvePoint> read_curve(const std::filesystem::path& path, const std::string& value_column);

// True when the lambda series never increases from the first episode whose
// reward exceeds r_target until lambda sits on one of its bounds.
struct TrendCheck {
    bool pass = true;
    int first_above_target = -1;  // -1 when no episode exceeded the target
    int bound_hit_episode = -1;
    int violation_episode = -1;
};
TrendCheck check_lambda_trend(const std::vector<CurvePoint>& lambda_curve,
                              const std::vector<CurvePoint>& reward_curve, const LambdaConfig& config);

}  // namespace tsad
