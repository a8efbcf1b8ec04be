#pragma once

#include "tsad/agent.hpp"
#include "tsad/config.hpp"
#include "tsad/label_channel.hpp"

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <vector>

namespace tsad {

// Loads the configured series, or generates the synthetic one.
std::vector<SeriesPoint> load_dataset(const RunConfig& config);

struct PipelineHooks {
    // Required when the oracle mode is `human`.
    LabelChannel* channel = nullptr;
    std::function<void(const EpisodeLog&)> on_episode;
};

// Full run: build the VAE on presumed-normal train windows, warm up the replay
// memory, train the agent with dynamic reward scaling and active learning, then
// validate greedily for ceil(N / 10) episodes. Writes the manifest, run log,
// curves, checkpoints and report.json under run.out_dir and returns the report.
nlohmann::json run_train(const RunConfig& config, const PipelineHooks& hooks = {});

// Validation only, from a saved agent checkpoint.
nlohmann::json run_evaluate(const std::filesystem::path& checkpoint, const RunConfig& config);

struct SweepGrid {
    std::vector<double> query_rates;
    std::vector<double> alphas;
    std::vector<double> lambda0s;
};

// One run per grid point (cartesian product of the non-empty axes). Rows carry
// f1, precision, recall in that order. Also writes sweep.csv under run.out_dir.
nlohmann::json run_sweep(const RunConfig& base, const SweepGrid& grid);

}  // namespace tsad
