#pragma once

#include "tsad/agent.hpp"
#include "tsad/timeseries.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tsad {

enum class OracleMode { full, queried, human };
const char* to_string(OracleMode mode);
OracleMode parse_oracle_mode(const std::string& text);

// Every tunable of a run. Written out verbatim as the run manifest, so a
// manifest re-executes the run exactly.
struct RunConfig {
    struct Data {
        std::string path;  // empty: synthetic series
        SeriesSchema schema = SeriesSchema::detect;
        std::string name;  // used in artifact file names; derived when empty
        std::size_t synthetic_length = 5000;
        double synthetic_anomaly_rate = 0.01;
        std::uint64_t synthetic_seed = 7;
        double train_fraction = 0.8;
    } data;
    struct Series {
        int n_steps = 16;
    } series;
    struct Env {
        double tp_val = 5.0;
        double tn_val = 1.0;
        double fp_val = -1.0;
        double fn_val = -5.0;
        int episode_length = 300;
        OracleMode oracle = OracleMode::queried;
    } env;
    struct Reward {
        double lambda0 = 1.0;
        double alpha = 0.01;
        double lambda_min = 0.0;
        double lambda_max = 10.0;
        std::optional<double> r_target;  // default tn_val * episode_length
    } reward;
    struct Agent {
        int episodes = 150;
        int batch_size = 64;
        QNetworkKind network = QNetworkKind::recurrent;
        int hidden = 32;
        double gamma = 0.5;
        double learning_rate = 1e-3;
        double epsilon_start = 1.0;
        double epsilon_end = 0.05;
        int epsilon_decay_steps = 5000;
        int sync_interval = 200;
        std::size_t replay_capacity = 10000;
        std::size_t init_mem = 1000;
        double outlier_fraction = 0.02;
        int forest_trees = 100;
        int forest_subsample = 256;
        int checkpoint_interval = 0;  // episodes; 0 keeps only the final checkpoint
    } agent;
    struct Vae {
        int latent_dim = 4;
        int hidden = 32;
        int epochs = 30;
        int batch_size = 64;
        double learning_rate = 1e-3;
        double exclude_fraction = 0.05;  // top isolation-forest outliers left out of VAE training
    } vae;
    struct Active {
        double query_rate = 0.05;
        int neighbors = 10;
        std::optional<double> bandwidth;  // default: median pairwise distance of a sample
        std::size_t bandwidth_sample = 500;
        double confidence = 0.9;
        double tol = 1e-6;
        int max_iters = 1000;
        double label_timeout_s = 300.0;
    } active;
    struct Run {
        std::uint64_t seed = 1;
        std::string out_dir = "runs/default";
    } run;
    struct Service {
        int port = 8765;
        std::string ui_dir;
    } service;

    double resolved_r_target() const;
    std::string dataset_name() const;
    void validate() const;

    // Component seeds, derived from run.seed by fixed offsets.
    std::uint64_t seed_for(const std::string& component) const;
};

// All keys in "section.key" form, in manifest order.
std::vector<std::string> config_keys();
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

// Sectioned key/value text:
//   [agent]
//   episodes = 150
// '#' or ';' start comments. Unknown sections or keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string to_config_text(const RunConfig& config);

// Applies "section.key=value" overrides on top of `config`.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

}  // namespace tsad
