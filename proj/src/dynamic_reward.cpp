#include "tsad/dynamic_reward.hpp"

#include "tsad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tsad {

void LambdaConfig::validate() const {
    if (!(lambda_min <= lambda_max)) throw ConfigError("lambda_min must not exceed lambda_max");
    if (!(lambda0 >= lambda_min && lambda0 <= lambda_max)) {
        throw ConfigError("lambda0 must lie within [lambda_min, lambda_max]");
    }
    if (!std::isfinite(alpha) || !std::isfinite(r_target)) {
        throw ConfigError("alpha and r_target must be finite");
    }
}

LambdaController::LambdaController(LambdaConfig config) : config_(config), lambda_(config.lambda0) {
    config_.validate();
}

double LambdaController::update(double episode_reward) {
    const double raw = lambda_ + config_.alpha * (config_.r_target - episode_reward);
    lambda_ = std::clamp(raw, config_.lambda_min, config_.lambda_max);
    // NaN rewards would otherwise escape the clip.
    if (std::isnan(lambda_)) lambda_ = config_.lambda_max;
    const int episode = history_.empty() ? 0 : history_.back().episode + 1;
    history_.push_back({episode, lambda_, episode_reward});
    return lambda_;
}

void LambdaController::set_lambda(double value) {
    lambda_ = std::clamp(value, config_.lambda_min, config_.lambda_max);
}

double total_reward(double r1, double r2, double lambda) {
    if (r2 < 0.0) throw ContractError("reconstruction error r2 must be non-negative");
    return r1 + lambda * r2;
}

double total_reward(double r1, double r2, const LambdaController& controller) {
    return total_reward(r1, r2, controller.lambda());
}

namespace {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_curve(const std::filesystem::path& path, const char* column,
                 const std::vector<std::pair<int, double>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write curve file: " + path.string());
    out << "episode," << column << '\n';
    for (const auto& [episode, value] : rows) out << episode << ',' << format_value(value) << '\n';
    if (!out) throw IoError("failed writing curve file: " + path.string());
}

}  // namespace

CurvePaths emit_curves(const LambdaController& controller, const std::vector<double>& episode_rewards,
                       const std::filesystem::path& directory) {
    const auto& history = controller.history();
    if (history.empty()) throw ContractError("cannot emit curves for an empty controller history");
    if (episode_rewards.size() != history.size()) {
        throw ContractError("reward log length does not match controller history");
    }
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError("cannot create curve directory " + directory.string() + ": " + ec.message());

    std::vector<std::pair<int, double>> lambdas;
    std::vector<std::pair<int, double>> rewards;
    for (std::size_t i = 0; i < history.size(); ++i) {
        lambdas.emplace_back(history[i].episode, history[i].lambda);
        rewards.emplace_back(history[i].episode, episode_rewards[i]);
    }
    CurvePaths paths{directory / "lambda_curve.csv", directory / "reward_curve.csv"};
    write_curve(paths.lambda_curve, "lambda", lambdas);
    write_curve(paths.reward_curve, "reward", rewards);
    return paths;
}

std::vector<CurvePoint> read_curve(const std::filesystem::path& path, const std::string& value_column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open curve file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "episode," + value_column) {
        throw ParseError("unexpected curve header in " + path.string());
    }
    std::vector<CurvePoint> points;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("missing comma");
            points.push_back({std::stoi(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw ParseError("malformed curve row at line " + std::to_string(line_no) + " of " +
                             path.string());
        }
    }
    return points;
}

TrendCheck check_lambda_trend(const std::vector<CurvePoint>& lambda_curve,
                              const std::vector<CurvePoint>& reward_curve, const LambdaConfig& config) {
    TrendCheck check;
    const std::size_t n = std::min(lambda_curve.size(), reward_curve.size());
    std::size_t first = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (reward_curve[i].value > config.r_target) {
            first = i;
            break;
        }
    }
    if (first == n) return check;
    check.first_above_target = lambda_curve[first].episode;
    for (std::size_t i = first; i < n; ++i) {
        const double prev = i == 0 ? config.lambda0 : lambda_curve[i - 1].value;
        const double cur = lambda_curve[i].value;
        if (cur > prev) {
            check.pass = false;
            check.violation_episode = lambda_curve[i].episode;
            return check;
        }
        if (cur <= config.lambda_min || cur >= config.lambda_max) {
            check.bound_hit_episode = lambda_curve[i].episode;
            return check;
        }
    }
    return check;
}

}  // namespace tsad
