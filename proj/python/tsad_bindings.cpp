#include "tsad/active_learning.hpp"
#include "tsad/config.hpp"
#include "tsad/dynamic_reward.hpp"
#include "tsad/errors.hpp"
#include "tsad/isolation_forest.hpp"
#include "tsad/metrics.hpp"
#include "tsad/pipeline.hpp"
#include "tsad/timeseries.hpp"
#include "tsad/vae.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>

namespace py = pybind11;
using namespace tsad;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig make_config(const std::optional<std::filesystem::path>& config_path,
                      const std::map<std::string, py::object>& overrides) {
    RunConfig config = config_path ? load_config(*config_path) : RunConfig{};
    for (const auto& [key, value] : overrides) {
        std::string text;
        if (py::isinstance<py::bool_>(value)) {
            text = value.cast<bool>() ? "true" : "false";
        } else if (py::isinstance<py::float_>(value)) {
            text = py::repr(value).cast<std::string>();
        } else {
            text = py::str(value).cast<std::string>();
        }
        set_config_value(config, key, text);
    }
    return config;
}

py::dict series_to_dict(const std::vector<SeriesPoint>& points) {
    std::vector<std::int64_t> ts;
    std::vector<double> values;
    std::vector<std::optional<int>> labels;
    for (const auto& p : points) {
        ts.push_back(p.timestamp);
        values.push_back(p.value);
        labels.push_back(p.label);
    }
    py::dict d;
    d["timestamp"] = ts;
    d["value"] = values;
    d["label"] = labels;
    return d;
}

}  // namespace

PYBIND11_MODULE(tsad, m) {
    m.doc() = "Reinforcement-learning time-series anomaly detection";

    py::exception<Error>(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::gil_scoped_acquire gil;
            const py::object type = py::module_::import("tsad").attr("Error");
            PyErr_SetString(type.ptr(), (e.kind() + ": " + e.what()).c_str());
        }
    });

    m.def("config_keys", &config_keys, "All configuration keys in section.key form.");
    m.def(
        "default_config",
        [] {
            RunConfig c;
            std::map<std::string, std::string> out;
            for (const auto& k : config_keys()) out[k] = get_config_value(c, k);
            return out;
        },
        "Default configuration as a key -> text mapping.");

    m.def(
        "generate_synthetic",
        [](std::size_t length, double anomaly_rate, std::uint64_t seed) {
            return series_to_dict(generate_synthetic(length, anomaly_rate, seed));
        },
        py::arg("length") = 5000, py::arg("anomaly_rate") = 0.01, py::arg("seed") = 7);
    m.def(
        "load_series", [](const std::filesystem::path& path) { return series_to_dict(load_series(path)); },
        py::arg("path"));

    m.def("kl_divergence", &vae::kl_divergence, py::arg("mu"), py::arg("log_var"),
          "Closed-form KL(N(mu, exp(log_var)) || N(0, I)).");
    m.def("total_reward", py::overload_cast<double, double, double>(&total_reward), py::arg("r1"), py::arg("r2"),
          py::arg("lam"));

    py::class_<LambdaController>(m, "LambdaController")
        .def(py::init([](double lambda0, double alpha, double lambda_min, double lambda_max, double r_target) {
                 return LambdaController(LambdaConfig{lambda0, alpha, lambda_min, lambda_max, r_target});
             }),
             py::arg("lambda0") = 1.0, py::arg("alpha") = 0.01, py::arg("lambda_min") = 0.0,
             py::arg("lambda_max") = 10.0, py::arg("r_target") = 300.0)
        .def_property_readonly("value", &LambdaController::lambda)
        .def("update", &LambdaController::update, py::arg("episode_reward"))
        .def("set", &LambdaController::set_lambda, py::arg("value"));

    m.def(
        "select_queries",
        [](const std::vector<std::size_t>& candidates, const std::vector<double>& margins, std::size_t k) {
            return select_queries(candidates, margins, k);
        },
        py::arg("candidates"), py::arg("margins"), py::arg("k"),
        "The k candidates with the smallest Q-value margin, ties by index.");

    m.def(
        "isolation_scores",
        [](const Matrix& states, int trees, int subsample, std::uint64_t seed) {
            return IsolationForest::fit(states, trees, subsample, seed).anomaly_scores(states);
        },
        py::arg("states"), py::arg("trees") = 100, py::arg("subsample") = 256, py::arg("seed") = 1,
        "Fit an isolation forest on the rows of `states` and score them.");

    m.def(
        "scores",
        [](std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
            const auto s = scores(ConfusionCounts{tp, tn, fp, fn});
            py::dict d;
            d["precision"] = s.precision;
            d["recall"] = s.recall;
            d["f1"] = s.f1;
            d["degenerate"] = s.degenerate;
            return d;
        },
        py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));

    m.def(
        "train",
        [](const std::map<std::string, py::object>& overrides, std::optional<std::filesystem::path> config) {
            const RunConfig cfg = make_config(config, overrides);
            nlohmann::json report;
            {
                py::gil_scoped_release release;
                report = run_train(cfg);
            }
            return to_python(report);
        },
        py::arg("overrides") = std::map<std::string, py::object>{}, py::arg("config") = py::none(),
        "Run the full training pipeline and return the report.");
    m.def(
        "evaluate",
        [](const std::filesystem::path& checkpoint, const std::map<std::string, py::object>& overrides,
           std::optional<std::filesystem::path> config) {
            const RunConfig cfg = make_config(config, overrides);
            nlohmann::json report;
            {
                py::gil_scoped_release release;
                report = run_evaluate(checkpoint, cfg);
            }
            return to_python(report);
        },
        py::arg("checkpoint"), py::arg("overrides") = std::map<std::string, py::object>{},
        py::arg("config") = py::none());
    m.def(
        "sweep",
        [](std::vector<double> query_rates, std::vector<double> alphas, std::vector<double> lambda0s,
           const std::map<std::string, py::object>& overrides, std::optional<std::filesystem::path> config) {
            const RunConfig cfg = make_config(config, overrides);
            nlohmann::json out;
            {
                py::gil_scoped_release release;
                out = run_sweep(cfg, SweepGrid{query_rates, alphas, lambda0s});
            }
            return to_python(out);
        },
        py::arg("query_rates") = std::vector<double>{}, py::arg("alphas") = std::vector<double>{},
        py::arg("lambda0s") = std::vector<double>{}, py::arg("overrides") = std::map<std::string, py::object>{},
        py::arg("config") = py::none());
}
