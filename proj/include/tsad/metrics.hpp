#pragma once

#include "tsad/env.hpp"

#include <functional>
#include <vector>

namespace tsad {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& other);
};

void accumulate(ConfusionCounts& counts, int predicted, int actual);

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Set when any ratio was 0/0 and defined as 0.
    bool degenerate = false;
};

Scores scores(const ConfusionCounts& counts);

struct TraceStep {
    int episode = 0;
    std::size_t window = 0;
    std::size_t point = 0;  // index of the scored point in the source series
    int prediction = 0;
    int actual = 0;
};

struct ValidationResult {
    ConfusionCounts counts;
    Scores scores;
    std::vector<TraceStep> trace;
    int episodes = 0;
    // Leading points of the series that no window ends on, hence never scored.
    std::size_t excluded_points = 0;
};

using Policy = std::function<int(const Vector& state)>;

// Greedy roll-outs over the environment's dataset. Episode e starts at window
// (e * episode_length) mod num_windows, so successive episodes tile the split.
// The environment must expose a label for every window.
ValidationResult validate(const Policy& policy, AnomalyEnv& env, int episodes);

}  // namespace tsad
