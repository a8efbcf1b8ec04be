// tsad: train, evaluate, label, sweep.
#include "tsad/config.hpp"
#include "tsad/errors.hpp"
#include "tsad/label_service.hpp"
#include "tsad/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

using nlohmann::json;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("-c,--config", common.config_path, "Config file (sections of key = value)");
    cmd->add_option("-s,--set", common.overrides, "Override, e.g. agent.episodes=50 (repeatable)");
}

tsad::RunConfig resolve(const Common& common) {
    tsad::RunConfig config = common.config_path.empty() ? tsad::RunConfig{} : tsad::load_config(common.config_path);
    tsad::apply_overrides(config, common.overrides);
    config.validate();
    return config;
}

int fail(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return 1;
}

void print_summary(const json& report) {
    json out{{"validation", report.at("validation")}};
    if (report.contains("artifacts")) out["artifacts"] = report["artifacts"];
    std::cout << out.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised time-series anomaly detection with a reward-scaled DQN"};
    app.require_subcommand(1);

    Common train_opts;
    auto* train = app.add_subcommand("train", "Full pipeline: VAE, warm-up, training, validation");
    add_common(train, train_opts);

    Common eval_opts;
    std::string checkpoint;
    std::string dataset;
    auto* evaluate = app.add_subcommand("evaluate", "Validate a saved agent checkpoint");
    add_common(evaluate, eval_opts);
    evaluate->add_option("checkpoint,--checkpoint", checkpoint, "Agent checkpoint")->required();
    evaluate->add_option("-d,--dataset", dataset, "Series CSV (overrides data.path)");

    Common serve_opts;
    int port = -1;
    std::string host = "127.0.0.1";
    auto* serve = app.add_subcommand("serve-labels", "Train with a human oracle behind the HTTP labeling service");
    add_common(serve, serve_opts);
    serve->add_option("-p,--port", port, "Listening port (default service.port)");
    serve->add_option("--host", host, "Listening address");

    Common sweep_opts;
    std::vector<double> rates, alphas, lambda0s;
    auto* sweep = app.add_subcommand("sweep", "One run per grid point; prints f1, precision, recall per row");
    add_common(sweep, sweep_opts);
    sweep->add_option("--query-rates", rates, "e.g. 0.01,0.05,0.1")->delimiter(',');
    sweep->add_option("--alphas", alphas, "Controller gains")->delimiter(',');
    sweep->add_option("--lambda0s", lambda0s, "Initial coefficients")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("argument", e.what());
    }

    try {
        if (*train) {
            print_summary(tsad::run_train(resolve(train_opts)));
        } else if (*evaluate) {
            auto config = resolve(eval_opts);
            if (!dataset.empty()) config.data.path = dataset;
            print_summary(tsad::run_evaluate(checkpoint, config));
        } else if (*serve) {
            auto config = resolve(serve_opts);
            config.env.oracle = tsad::OracleMode::human;
            if (port >= 0) config.service.port = port;
            tsad::LabelChannel channel;
            tsad::LabelService service(channel, config.service.ui_dir);
            service.start(host, config.service.port);
            std::cerr << "labeling service on http://" << host << ':' << service.port() << "/\n";
            tsad::PipelineHooks hooks;
            hooks.channel = &channel;
            hooks.on_episode = [](const tsad::EpisodeLog& e) {
                std::cerr << "episode " << e.episode << " reward " << e.reward << " lambda " << e.lambda_next
                          << (e.query_timeout ? " (label timeout)" : "") << '\n';
            };
            const auto report = tsad::run_train(config, hooks);
            service.stop();
            print_summary(report);
        } else if (*sweep) {
            tsad::SweepGrid grid{rates, alphas, lambda0s};
            std::cout << tsad::run_sweep(resolve(sweep_opts), grid).dump(2) << '\n';
        }
    } catch (const tsad::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("io", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 0;
}
