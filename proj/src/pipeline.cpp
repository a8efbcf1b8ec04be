#include "tsad/pipeline.hpp"

#include "tsad/checkpoint.hpp"
#include "tsad/errors.hpp"
#include "tsad/metrics.hpp"
#include "tsad/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace tsad {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<SeriesPoint> load_dataset(const RunConfig& config) {
    if (!config.data.path.empty()) return load_series(config.data.path, config.data.schema);
    return generate_synthetic(config.data.synthetic_length, config.data.synthetic_anomaly_rate,
                              config.data.synthetic_seed);
}

namespace {

struct Prepared {
    std::vector<SeriesPoint> points;
    std::shared_ptr<WindowDataset> train;
    std::shared_ptr<WindowDataset> valid;
};

Prepared prepare(const RunConfig& config) {
    Prepared p;
    p.points = load_dataset(config);
    const auto all = make_windows(p.points, config.series.n_steps, true);
    auto [train, valid] = split(all, config.data.train_fraction);
    p.train = std::make_shared<WindowDataset>(std::move(train));
    p.valid = std::make_shared<WindowDataset>(std::move(valid));
    return p;
}

EnvConfig env_config(const RunConfig& config) {
    EnvConfig e;
    e.tp_val = config.env.tp_val;
    e.tn_val = config.env.tn_val;
    e.fp_val = config.env.fp_val;
    e.fn_val = config.env.fn_val;
    e.episode_length = config.env.episode_length;
    return e;
}

AgentConfig agent_config(const RunConfig& config) {
    AgentConfig a;
    a.network = config.agent.network;
    a.hidden = config.agent.hidden;
    a.gamma = config.agent.gamma;
    a.learning_rate = config.agent.learning_rate;
    a.epsilon_start = config.agent.epsilon_start;
    a.epsilon_end = config.agent.epsilon_end;
    a.epsilon_decay_steps = config.agent.epsilon_decay_steps;
    a.sync_interval = config.agent.sync_interval;
    return a;
}

LambdaConfig lambda_config(const RunConfig& config) {
    LambdaConfig l;
    l.lambda0 = config.reward.lambda0;
    l.alpha = config.reward.alpha;
    l.lambda_min = config.reward.lambda_min;
    l.lambda_max = config.reward.lambda_max;
    l.r_target = config.resolved_r_target();
    return l;
}

int validation_episodes(const RunConfig& config) {
    return std::max(1, (config.agent.episodes + 9) / 10);
}

json scores_json(const ValidationResult& v) {
    return json{{"episodes", v.episodes},
                {"f1", v.scores.f1},
                {"precision", v.scores.precision},
                {"recall", v.scores.recall},
                {"degenerate", v.scores.degenerate},
                {"tp", v.counts.tp},
                {"tn", v.counts.tn},
                {"fp", v.counts.fp},
                {"fn", v.counts.fn},
                {"excluded_points", v.excluded_points}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void write_trace(const fs::path& path, const ValidationResult& v) {
    std::string text = "episode,window,point,prediction,actual\n";
    for (const auto& s : v.trace) {
        text += std::to_string(s.episode) + ',' + std::to_string(s.window) + ',' + std::to_string(s.point) +
                ',' + std::to_string(s.prediction) + ',' + std::to_string(s.actual) + '\n';
    }
    write_text(path, text);
}

json config_json(const RunConfig& config) {
    json j = json::object();
    for (const auto& key : config_keys()) j[key] = get_config_value(config, key);
    return j;
}

Checkpoint agent_checkpoint(const DqnAgent& agent, const WindowDataset& train, const RunConfig& config,
                            int episodes_done) {
    Checkpoint ckpt;
    ckpt.metadata = json{{"kind", "q-network"},
                         {"n_steps", train.n_steps},
                         {"mean", train.mean},
                         {"std", train.std},
                         {"dataset", config.dataset_name()},
                         {"seed", config.run.seed},
                         {"episodes", episodes_done},
                         {"manifest", to_config_text(config)}};
    ckpt.networks.push_back({"q", agent.spec(), agent.q_store()});
    ckpt.networks.push_back({"target", agent.spec(), agent.target_store()});
    return ckpt;
}

std::size_t count_anomalies(const std::vector<SeriesPoint>& points) {
    std::size_t n = 0;
    for (const auto& p : points)
        if (p.label && *p.label == 1) ++n;
    return n;
}

}  // namespace

json run_train(const RunConfig& config, const PipelineHooks& hooks) {
    config.validate();
    if (config.env.oracle == OracleMode::human && hooks.channel == nullptr)
        throw ConfigError("oracle mode 'human' needs a labeling service");

    const fs::path out_dir = config.run.out_dir;
    fs::create_directories(out_dir);
    const std::string name = config.dataset_name();
    const std::string stem = name + "-" + std::to_string(config.run.seed);
    write_text(out_dir / "manifest.ini", to_config_text(config));

    Prepared data = prepare(config);
    const WindowDataset& train_ds = *data.train;
    const std::size_t num_train = train_ds.num_windows();
    if (config.env.oracle != OracleMode::human && !train_ds.has_labels())
        throw DataError("oracle mode '" + std::string(to_string(config.env.oracle)) +
                        "' requires a labeled series");
    if (!data.valid->has_labels()) throw DataError("evaluation requires labels");

    // Isolation forest over training states.
    const int subsample = std::min<int>(config.agent.forest_subsample, static_cast<int>(num_train));
    const auto forest =
        IsolationForest::fit(train_ds.windows, config.agent.forest_trees, subsample, config.seed_for("forest"));
    const Vector iso_scores = forest.anomaly_scores(train_ds.windows);

    // VAE on windows the forest considers normal.
    std::vector<std::size_t> order(num_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return iso_scores[static_cast<Eigen::Index>(a)] > iso_scores[static_cast<Eigen::Index>(b)];
    });
    const auto excluded = static_cast<std::size_t>(
        std::floor(config.vae.exclude_fraction * static_cast<double>(num_train)));
    std::vector<std::size_t> keep(order.begin() + static_cast<std::ptrdiff_t>(excluded), order.end());
    std::sort(keep.begin(), keep.end());
    Matrix vae_windows(static_cast<Eigen::Index>(keep.size()), train_ds.windows.cols());
    for (std::size_t i = 0; i < keep.size(); ++i)
        vae_windows.row(static_cast<Eigen::Index>(i)) = train_ds.windows.row(static_cast<Eigen::Index>(keep[i]));

    vae::VaeConfig vcfg;
    vcfg.input_dim = config.series.n_steps;
    vcfg.latent_dim = config.vae.latent_dim;
    vcfg.hidden = config.vae.hidden;
    auto model = vae::VaeModel::create(vcfg, config.seed_for("vae_init"));
    vae::TrainConfig vtrain;
    vtrain.epochs = config.vae.epochs;
    vtrain.batch_size = config.vae.batch_size;
    vtrain.learning_rate = config.vae.learning_rate;
    vtrain.seed = config.seed_for("vae_train");
    const auto vae_log = vae::train_vae(model, vae_windows, vtrain);

    const std::string vae_file = "vae-" + stem + ".ckpt";
    {
        Checkpoint ckpt;
        ckpt.metadata = json{{"kind", "vae"},
                             {"n_steps", train_ds.n_steps},
                             {"latent_dim", model.latent_dim},
                             {"mean", train_ds.mean},
                             {"std", train_ds.std},
                             {"dataset", name},
                             {"seed", config.run.seed}};
        ckpt.networks.push_back({"encoder", model.encoder_spec, model.encoder});
        ckpt.networks.push_back({"decoder", model.decoder_spec, model.decoder});
        save_checkpoint(out_dir / vae_file, ckpt);
    }
    const Vector r2 = vae::reconstruction_errors(model, train_ds.windows);

    // Label pool and the oracle behind it.
    const auto budget_total = static_cast<std::size_t>(
        std::ceil(config.active.query_rate * static_cast<double>(num_train) - 1e-9));
    LabelPool pool(num_train, budget_total);

    std::unique_ptr<Oracle> oracle;
    if (config.env.oracle == OracleMode::human) {
        oracle = std::make_unique<ChannelOracle>(
            *hooks.channel, train_ds,
            std::chrono::milliseconds(static_cast<std::int64_t>(config.active.label_timeout_s * 1000.0)));
    } else {
        oracle = std::make_unique<SimulatedOracle>(*train_ds.labels);
    }

    LabelLookup lookup;
    if (config.env.oracle == OracleMode::full) {
        lookup = AnomalyEnv::dataset_labels(data.train);
    } else {
        lookup = [&pool](std::size_t w) { return pool.label(w); };
    }
    AnomalyEnv env(data.train, env_config(config), lookup);

    const double bandwidth = config.active.bandwidth.value_or(median_pairwise_distance(
        train_ds.windows, config.active.bandwidth_sample, config.seed_for("bandwidth")));
    std::optional<SimilarityGraph> graph;
    std::optional<ActiveLearner> learner;
    std::size_t graph_edges = 0;
    if (config.env.oracle != OracleMode::full) {
        graph = build_similarity_graph(train_ds.windows, bandwidth, config.active.neighbors);
        for (const auto& adj : graph->adjacency) graph_edges += adj.size();
        graph_edges /= 2;
        ActiveLearnerConfig acfg;
        acfg.confidence = config.active.confidence;
        acfg.max_iters = config.active.max_iters;
        acfg.tol = config.active.tol;
        learner.emplace(pool, *graph, *oracle, acfg, config.agent.episodes);
    }

    LambdaController controller(lambda_config(config));
    DqnAgent agent(config.series.n_steps, agent_config(config), config.seed_for("q_init"));
    ReplayMemory memory(config.agent.replay_capacity);

    std::mt19937_64 warm_rng(config.seed_for("warmup"));
    const auto warm = warm_up(env, memory, forest, r2, controller, config.agent.init_mem,
                              config.agent.outlier_fraction, warm_rng);

    const fs::path run_log_path = out_dir / "run_log.jsonl";
    std::ofstream run_log(run_log_path, std::ios::binary);
    if (!run_log) throw IoError("cannot write " + run_log_path.string());

    if (hooks.channel) hooks.channel->update_status(0, controller.lambda(), pool.budget_spent(), budget_total);

    std::vector<double> episode_rewards;
    TrainOptions options;
    options.episodes = config.agent.episodes;
    options.batch_size = static_cast<std::size_t>(config.agent.batch_size);
    options.on_episode = [&](const EpisodeLog& e) {
        episode_rewards.push_back(e.reward);
        json line{{"episode", e.episode},
                  {"steps", e.steps},
                  {"reward", e.reward},
                  {"r1_sum", e.r1_sum},
                  {"r2_sum", e.r2_sum},
                  {"lambda", e.lambda},
                  {"lambda_next", e.lambda_next},
                  {"mean_loss", e.mean_loss},
                  {"epsilon", e.epsilon},
                  {"queries_spent", e.queries_spent},
                  {"queried", e.queried},
                  {"pseudo_labels", e.pseudo_labels},
                  {"query_timeout", e.query_timeout}};
        run_log << line.dump() << '\n';
        const int done = e.episode + 1;
        if (config.agent.checkpoint_interval > 0 && done % config.agent.checkpoint_interval == 0 &&
            done < config.agent.episodes) {
            save_checkpoint(out_dir / ("agent-" + stem + "-ep" + std::to_string(done) + ".ckpt"),
                            agent_checkpoint(agent, train_ds, config, done));
        }
        if (hooks.channel) hooks.channel->update_status(done, e.lambda_next, pool.budget_spent(), budget_total);
        if (hooks.on_episode) hooks.on_episode(e);
    };

    std::mt19937_64 train_rng(config.seed_for("train"));
    const auto episodes =
        train(agent, env, memory, r2, controller, learner ? &*learner : nullptr, train_ds.windows, options, train_rng);
    run_log.close();

    const std::string agent_file = "agent-" + stem + ".ckpt";
    save_checkpoint(out_dir / agent_file, agent_checkpoint(agent, train_ds, config, config.agent.episodes));

    CurvePaths curves;
    if (!controller.history().empty()) curves = emit_curves(controller, episode_rewards, out_dir);

    // Greedy validation on the held-out split with ground truth.
    AnomalyEnv valid_env(data.valid, env_config(config), AnomalyEnv::dataset_labels(data.valid));
    const auto result = validate([&agent](const Vector& s) { return agent.greedy_action(s); }, valid_env,
                                 validation_episodes(config));
    write_trace(out_dir / "validation_trace.csv", result);

    double r2_normal = 0.0, r2_anomaly = 0.0;
    std::size_t n_normal = 0, n_anomaly = 0;
    if (train_ds.has_labels()) {
        for (std::size_t w = 0; w < num_train; ++w) {
            if ((*train_ds.labels)[w] == 1) {
                r2_anomaly += r2[static_cast<Eigen::Index>(w)];
                ++n_anomaly;
            } else {
                r2_normal += r2[static_cast<Eigen::Index>(w)];
                ++n_normal;
            }
        }
    }

    // Agreement of propagated labels with ground truth, when the series has it.
    json pseudo_quality = nullptr;
    if (train_ds.has_labels()) {
        ConfusionCounts agreement;
        for (std::size_t w = 0; w < num_train; ++w) {
            if (pool.provenance(w) != Provenance::propagated) continue;
            accumulate(agreement, *pool.label(w), (*train_ds.labels)[w]);
        }
        pseudo_quality = json{{"tp", agreement.tp}, {"tn", agreement.tn}, {"fp", agreement.fp}, {"fn", agreement.fn}};
    }

    json seeds = json::object();
    for (const char* c : {"forest", "vae_init", "vae_train", "q_init", "warmup", "train", "bandwidth"})
        seeds[c] = config.seed_for(c);

    json report;
    report["format"] = "tsad-report";
    report["dataset"] = json{{"name", name},
                             {"source", config.data.path.empty() ? std::string("synthetic") : config.data.path},
                             {"points", data.points.size()},
                             {"anomalies", count_anomalies(data.points)},
                             {"windows_train", num_train},
                             {"windows_validation", data.valid->num_windows()},
                             {"n_steps", train_ds.n_steps},
                             {"mean", train_ds.mean},
                             {"std", train_ds.std}};
    report["config"] = config_json(config);
    report["seeds"] = seeds;
    report["optimizer"] = json{{"name", "adam"}, {"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}};
    report["vae"] = json{{"train_windows", keep.size()},
                         {"excluded_windows", excluded},
                         {"final_loss", vae_log.empty() ? 0.0 : vae_log.back().total},
                         {"final_recon", vae_log.empty() ? 0.0 : vae_log.back().recon},
                         {"final_kl", vae_log.empty() ? 0.0 : vae_log.back().kl},
                         {"r2_mean_normal", n_normal ? r2_normal / static_cast<double>(n_normal) : 0.0},
                         {"r2_mean_anomaly", n_anomaly ? r2_anomaly / static_cast<double>(n_anomaly) : 0.0}};
    report["warm_up"] = json{{"transitions", warm.transitions},
                             {"heuristic_actions", warm.heuristic_actions},
                             {"outlier_states", warm.outlier_states},
                             {"score_threshold", warm.score_threshold}};
    report["training"] = json{{"episodes", episodes.size()},
                              {"steps", agent.step_count()},
                              {"target_syncs", agent.sync_count()},
                              {"final_lambda", controller.lambda()},
                              {"final_epsilon", agent.epsilon()},
                              {"r_target", config.resolved_r_target()},
                              {"last_reward", episode_rewards.empty() ? 0.0 : episode_rewards.back()}};
    report["active_learning"] = json{{"oracle", to_string(config.env.oracle)},
                                     {"budget_total", budget_total},
                                     {"budget_spent", pool.budget_spent()},
                                     {"oracle_labels", pool.oracle_count()},
                                     {"propagated_labels", pool.propagated_count()},
                                     {"propagated_vs_truth", pseudo_quality},
                                     {"propagation_runs", learner ? learner->propagation_runs() : 0},
                                     {"bandwidth", bandwidth},
                                     {"graph_edges", graph_edges},
                                     {"timeouts", std::count_if(episodes.begin(), episodes.end(),
                                                                [](const EpisodeLog& e) { return e.query_timeout; })}};
    report["validation"] = scores_json(result);
    json artifacts{{"manifest", "manifest.ini"},
                   {"run_log", "run_log.jsonl"},
                   {"checkpoint", agent_file},
                   {"vae_checkpoint", vae_file},
                   {"validation_trace", "validation_trace.csv"}};
    if (!controller.history().empty()) {
        artifacts["lambda_curve"] = curves.lambda_curve.filename().string();
        artifacts["reward_curve"] = curves.reward_curve.filename().string();
    }
    report["artifacts"] = artifacts;
    write_text(out_dir / "report.json", report.dump(2) + "\n");
    return report;
}

json run_evaluate(const fs::path& checkpoint, const RunConfig& config) {
    config.validate();
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const auto& meta = ckpt.metadata;
    if (!meta.contains("kind") || meta["kind"] != "q-network")
        throw VersionError("checkpoint " + checkpoint.string() + " does not hold a Q-network");
    const int n_steps = meta.value("n_steps", 0);
    if (n_steps != config.series.n_steps)
        throw VersionError("checkpoint expects n_steps " + std::to_string(n_steps) + ", config has " +
                           std::to_string(config.series.n_steps));
    const auto& q = ckpt.network("q");
    if (q.spec.input_width() != (q.spec.recurrent() ? 1 : n_steps))
        throw VersionError("checkpoint network does not match its window length");

    auto points = load_dataset(config);
    for (const auto& p : points)
        if (!p.label) throw DataError("evaluation requires labels");
    const auto all = make_windows(points, n_steps, true);
    auto parts = split(all, config.data.train_fraction);
    auto valid = std::make_shared<WindowDataset>(std::move(parts.second));
    restandardize(*valid, meta.at("mean").get<double>(), meta.at("std").get<double>());

    DqnAgent agent(q.spec, q.store, agent_config(config));
    AnomalyEnv env(valid, env_config(config), AnomalyEnv::dataset_labels(valid));
    const auto result =
        validate([&agent](const Vector& s) { return agent.greedy_action(s); }, env, validation_episodes(config));

    json report{{"format", "tsad-evaluation"},
                {"checkpoint", checkpoint.filename().string()},
                {"dataset", config.dataset_name()},
                {"validation", scores_json(result)}};
    if (!config.run.out_dir.empty()) {
        fs::create_directories(config.run.out_dir);
        write_text(fs::path(config.run.out_dir) / "evaluation.json", report.dump(2) + "\n");
    }
    return report;
}

json run_sweep(const RunConfig& base, const SweepGrid& grid) {
    if (grid.query_rates.empty() && grid.alphas.empty() && grid.lambda0s.empty())
        throw ArgumentError("sweep grid is empty");
    const std::vector<double> rates = grid.query_rates.empty() ? std::vector<double>{base.active.query_rate}
                                                               : grid.query_rates;
    const std::vector<double> alphas = grid.alphas.empty() ? std::vector<double>{base.reward.alpha} : grid.alphas;
    const std::vector<double> lambdas =
        grid.lambda0s.empty() ? std::vector<double>{base.reward.lambda0} : grid.lambda0s;

    const fs::path root = base.run.out_dir;
    json rows = json::array();
    std::string csv = "query_rate,alpha,lambda0,f1,precision,recall\n";
    int index = 0;
    for (double rate : rates) {
        for (double alpha : alphas) {
            for (double lambda0 : lambdas) {
                RunConfig cfg = base;
                cfg.active.query_rate = rate;
                cfg.reward.alpha = alpha;
                cfg.reward.lambda0 = lambda0;
                cfg.run.out_dir = (root / ("point-" + std::to_string(index++))).string();
                const json report = run_train(cfg);
                const auto& v = report["validation"];
                rows.push_back(json{{"query_rate", rate},
                                    {"alpha", alpha},
                                    {"lambda0", lambda0},
                                    {"f1", v["f1"]},
                                    {"precision", v["precision"]},
                                    {"recall", v["recall"]}});
                char line[256];
                std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", rate, alpha, lambda0,
                              v["f1"].get<double>(), v["precision"].get<double>(), v["recall"].get<double>());
                csv += line;
            }
        }
    }
    fs::create_directories(root);
    write_text(root / "sweep.csv", csv);
    return json{{"columns", {"f1", "precision", "recall"}}, {"rows", rows}};
}

}  // namespace tsad
