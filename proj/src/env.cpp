#include "tsad/env.hpp"

#include "tsad/errors.hpp"

namespace tsad {

void EnvConfig::validate() const {
    if (!(tp_val > 0.0 && tn_val > 0.0 && fp_val < 0.0 && fn_val < 0.0)) {
        throw ConfigError("reward table requires tp_val > 0, tn_val > 0, fp_val < 0, fn_val < 0");
    }
    if (episode_length <= 0) throw ConfigError("episode_length must be positive");
}

AnomalyEnv::AnomalyEnv(std::shared_ptr<const WindowDataset> dataset, EnvConfig config,
                       LabelLookup labels)
    : dataset_(std::move(dataset)), config_(config), labels_(std::move(labels)) {
    config_.validate();
    if (!dataset_) throw ContractError("environment needs a dataset");
}

LabelLookup AnomalyEnv::dataset_labels(std::shared_ptr<const WindowDataset> dataset) {
    if (!dataset || !dataset->labels) throw DataError("dataset has no ground-truth labels");
    return [dataset](std::size_t i) -> std::optional<int> { return (*dataset->labels)[i]; };
}

Vector AnomalyEnv::reset(std::optional<std::size_t> start, std::mt19937_64& rng) {
    const std::size_t count = dataset_->num_windows();
    const auto length = static_cast<std::size_t>(config_.episode_length);
    if (length > count) {
        throw ConfigError("episode_length " + std::to_string(length) + " exceeds the " +
                          std::to_string(count) + " available windows");
    }
    if (start) {
        if (*start >= count) throw ArgumentError("episode start beyond the last window");
        start_ = *start;
    } else {
        std::uniform_int_distribution<std::size_t> dist(0, count - length);
        start_ = dist(rng);
    }
    cursor_ = start_;
    steps_taken_ = 0;
    active_ = true;
    return dataset_->windows.row(static_cast<Eigen::Index>(cursor_)).transpose();
}

std::pair<double, double> AnomalyEnv::reward_vector(int true_label) const {
    if (true_label == 1) return {config_.fn_val, config_.tp_val};
    return {config_.tn_val, config_.fp_val};
}

double AnomalyEnv::reward(int action, int true_label) const {
    const auto [r0, r1] = reward_vector(true_label);
    return action == 1 ? r1 : r0;
}

StepResult AnomalyEnv::step(int action) {
    if (!active_) throw ContractError("step called on an inactive episode; call reset first");
    if (action != 0 && action != 1) throw ArgumentError("action must be 0 or 1");

    StepResult result;
    result.window = cursor_;
    result.true_label = labels_ ? labels_(cursor_) : std::nullopt;
    // Windows without a visible label yield a neutral reward.
    result.r1 = result.true_label ? reward(action, *result.true_label) : 0.0;

    ++steps_taken_;
    ++cursor_;
    const bool exhausted = cursor_ >= dataset_->num_windows();
    result.done = exhausted || steps_taken_ >= config_.episode_length;
    if (result.done) {
        active_ = false;
    } else {
        result.next_state = dataset_->windows.row(static_cast<Eigen::Index>(cursor_)).transpose();
    }
    return result;
}

}  // namespace tsad
