#pragma once

#include "tsad/timeseries.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <utility>

namespace tsad {

struct EnvConfig {
    double tp_val = 5.0;
    double tn_val = 1.0;
    double fp_val = -1.0;
    double fn_val = -5.0;
    int episode_length = 300;

    void validate() const;
};

// Returns the label visible to the agent for a window index, if any.
using LabelLookup = std::function<std::optional<int>(std::size_t)>;

struct StepResult {
    std::optional<Vector> next_state;  // empty at a terminal step
    double r1 = 0.0;
    std::optional<int> true_label;     // withheld when no label is visible
    bool done = false;
    std::size_t window = 0;            // index of the window just classified
};

// Sequential presentation of sliding-window states. Episodes are contiguous
// slices of at most episode_length windows; the cursor advances by one window
// per step.
class AnomalyEnv {
public:
    AnomalyEnv(std::shared_ptr<const WindowDataset> dataset, EnvConfig config, LabelLookup labels);

    // Ground-truth labels of the dataset (throws if the dataset is unlabeled).
    static LabelLookup dataset_labels(std::shared_ptr<const WindowDataset> dataset);

    Vector reset(std::optional<std::size_t> start, std::mt19937_64& rng);
    StepResult step(int action);

    // (reward if the agent says normal, reward if it says anomaly).
    std::pair<double, double> reward_vector(int true_label) const;
    double reward(int action, int true_label) const;

    bool active() const { return active_; }
    std::size_t cursor() const { return cursor_; }
    std::size_t episode_start() const { return start_; }
    const WindowDataset& dataset() const { return *dataset_; }
    const EnvConfig& config() const { return config_; }

private:
    std::shared_ptr<const WindowDataset> dataset_;
    EnvConfig config_;
    LabelLookup labels_;
    std::size_t start_ = 0;
    std::size_t cursor_ = 0;
    int steps_taken_ = 0;
    bool active_ = false;
};

}  // namespace tsad
