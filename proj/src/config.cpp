#include "tsad/config.hpp"

#include "tsad/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace tsad {

const char* to_string(OracleMode mode) {
    switch (mode) {
        case OracleMode::full: return "full";
        case OracleMode::queried: return "queried";
        case OracleMode::human: return "human";
    }
    return "queried";
}

OracleMode parse_oracle_mode(const std::string& text) {
    if (text == "full") return OracleMode::full;
    if (text == "queried") return OracleMode::queried;
    if (text == "human") return OracleMode::human;
    throw ConfigError("oracle must be one of full, queried, human (got '" + text + "')");
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key " + key + " expects a number, got '" + v + "'");
    }
}

long long to_integer(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("key " + key + " expects an integer, got '" + v + "'");
    }
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const long long i = to_integer(key, v);
    if (i < 0) throw ConfigError("key " + key + " must be non-negative");
    return static_cast<std::size_t>(i);
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define TSAD_DOUBLE(k, member)                                                        \
    Field{k, [](const RunConfig& c) { return fmt_double(c.member); },                 \
          [](RunConfig& c, const std::string& v) { c.member = to_double(k, v); }}
#define TSAD_INT(k, member)                                                           \
    Field{k, [](const RunConfig& c) { return std::to_string(c.member); },             \
          [](RunConfig& c, const std::string& v) {                                    \
              c.member = static_cast<decltype(c.member)>(to_integer(k, v));           \
          }}
#define TSAD_COUNT(k, member)                                                         \
    Field{k, [](const RunConfig& c) { return std::to_string(c.member); },             \
          [](RunConfig& c, const std::string& v) {                                    \
              c.member = static_cast<decltype(c.member)>(to_count(k, v));             \
          }}
#define TSAD_STRING(k, member)                                                        \
    Field{k, [](const RunConfig& c) { return c.member; },                             \
          [](RunConfig& c, const std::string& v) { c.member = v; }}
#define TSAD_AUTO_DOUBLE(k, member)                                                   \
    Field{k, [](const RunConfig& c) { return c.member ? fmt_double(*c.member) : std::string("auto"); }, \
          [](RunConfig& c, const std::string& v) {                                    \
              if (v == "auto") c.member.reset();                                      \
              else c.member = to_double(k, v);                                        \
          }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        TSAD_STRING("data.path", data.path),
        Field{"data.schema",
              [](const RunConfig& c) -> std::string {
                  switch (c.data.schema) {
                      case SeriesSchema::detect: return "detect";
                      case SeriesSchema::labeled: return "labeled";
                      case SeriesSchema::unlabeled: return "unlabeled";
                  }
                  return "detect";
              },
              [](RunConfig& c, const std::string& v) {
                  if (v == "detect") c.data.schema = SeriesSchema::detect;
                  else if (v == "labeled") c.data.schema = SeriesSchema::labeled;
                  else if (v == "unlabeled") c.data.schema = SeriesSchema::unlabeled;
                  else throw ConfigError("data.schema must be detect, labeled or unlabeled");
              }},
        TSAD_STRING("data.name", data.name),
        TSAD_COUNT("data.synthetic_length", data.synthetic_length),
        TSAD_DOUBLE("data.synthetic_anomaly_rate", data.synthetic_anomaly_rate),
        TSAD_COUNT("data.synthetic_seed", data.synthetic_seed),
        TSAD_DOUBLE("data.train_fraction", data.train_fraction),
        TSAD_INT("timeseries.n_steps", series.n_steps),
        TSAD_DOUBLE("env.tp_val", env.tp_val),
        TSAD_DOUBLE("env.tn_val", env.tn_val),
        TSAD_DOUBLE("env.fp_val", env.fp_val),
        TSAD_DOUBLE("env.fn_val", env.fn_val),
        TSAD_INT("env.episode_length", env.episode_length),
        Field{"env.oracle", [](const RunConfig& c) { return std::string(to_string(c.env.oracle)); },
              [](RunConfig& c, const std::string& v) { c.env.oracle = parse_oracle_mode(v); }},
        TSAD_DOUBLE("reward.lambda0", reward.lambda0),
        TSAD_DOUBLE("reward.alpha", reward.alpha),
        TSAD_DOUBLE("reward.lambda_min", reward.lambda_min),
        TSAD_DOUBLE("reward.lambda_max", reward.lambda_max),
        TSAD_AUTO_DOUBLE("reward.r_target", reward.r_target),
        TSAD_INT("agent.episodes", agent.episodes),
        TSAD_INT("agent.batch_size", agent.batch_size),
        Field{"agent.network",
              [](const RunConfig& c) {
                  return std::string(c.agent.network == QNetworkKind::recurrent ? "recurrent" : "dense");
              },
              [](RunConfig& c, const std::string& v) {
                  if (v == "recurrent") c.agent.network = QNetworkKind::recurrent;
                  else if (v == "dense") c.agent.network = QNetworkKind::dense;
                  else throw ConfigError("agent.network must be recurrent or dense");
              }},
        TSAD_INT("agent.hidden", agent.hidden),
        TSAD_DOUBLE("agent.gamma", agent.gamma),
        TSAD_DOUBLE("agent.learning_rate", agent.learning_rate),
        TSAD_DOUBLE("agent.epsilon_start", agent.epsilon_start),
        TSAD_DOUBLE("agent.epsilon_end", agent.epsilon_end),
        TSAD_INT("agent.epsilon_decay_steps", agent.epsilon_decay_steps),
        TSAD_INT("agent.sync_interval", agent.sync_interval),
        TSAD_COUNT("agent.replay_capacity", agent.replay_capacity),
        TSAD_COUNT("agent.init_mem", agent.init_mem),
        TSAD_DOUBLE("agent.outlier_fraction", agent.outlier_fraction),
        TSAD_INT("agent.forest_trees", agent.forest_trees),
        TSAD_INT("agent.forest_subsample", agent.forest_subsample),
        TSAD_INT("agent.checkpoint_interval", agent.checkpoint_interval),
        TSAD_INT("vae.latent_dim", vae.latent_dim),
        TSAD_INT("vae.hidden", vae.hidden),
        TSAD_INT("vae.epochs", vae.epochs),
        TSAD_INT("vae.batch_size", vae.batch_size),
        TSAD_DOUBLE("vae.learning_rate", vae.learning_rate),
        TSAD_DOUBLE("vae.exclude_fraction", vae.exclude_fraction),
        TSAD_DOUBLE("active.query_rate", active.query_rate),
        TSAD_INT("active.neighbors", active.neighbors),
        TSAD_AUTO_DOUBLE("active.bandwidth", active.bandwidth),
        TSAD_COUNT("active.bandwidth_sample", active.bandwidth_sample),
        TSAD_DOUBLE("active.confidence", active.confidence),
        TSAD_DOUBLE("active.tol", active.tol),
        TSAD_INT("active.max_iters", active.max_iters),
        TSAD_DOUBLE("active.label_timeout_s", active.label_timeout_s),
        TSAD_COUNT("run.seed", run.seed),
        TSAD_STRING("run.out_dir", run.out_dir),
        TSAD_INT("service.port", service.port),
        TSAD_STRING("service.ui_dir", service.ui_dir),
    };
    return table;
}

#undef TSAD_DOUBLE
#undef TSAD_INT
#undef TSAD_COUNT
#undef TSAD_STRING
#undef TSAD_AUTO_DOUBLE

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw ConfigError("unknown config key: " + key);
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

double RunConfig::resolved_r_target() const {
    return reward.r_target.value_or(env.tn_val * static_cast<double>(env.episode_length));
}

std::string RunConfig::dataset_name() const {
    if (!data.name.empty()) return data.name;
    if (data.path.empty()) return "synthetic";
    return std::filesystem::path(data.path).stem().string();
}

void RunConfig::validate() const {
    if (data.path.empty()) {
        if (!(data.synthetic_anomaly_rate > 0.0 && data.synthetic_anomaly_rate < 0.5))
            throw ConfigError("data.synthetic_anomaly_rate must lie in (0, 0.5)");
        if (data.synthetic_length < 100) throw ConfigError("data.synthetic_length must be at least 100");
    }
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0))
        throw ConfigError("data.train_fraction must lie in (0, 1)");
    if (series.n_steps < 2 || series.n_steps > 64) throw ConfigError("timeseries.n_steps must lie in [2, 64]");
    EnvConfig{env.tp_val, env.tn_val, env.fp_val, env.fn_val, env.episode_length}.validate();
    LambdaConfig{reward.lambda0, reward.alpha, reward.lambda_min, reward.lambda_max, resolved_r_target()}
        .validate();
    if (agent.episodes < 0) throw ConfigError("agent.episodes must be non-negative");
    if (agent.batch_size <= 0) throw ConfigError("agent.batch_size must be positive");
    AgentConfig{agent.network, agent.hidden, agent.gamma, agent.learning_rate, agent.epsilon_start,
                agent.epsilon_end, agent.epsilon_decay_steps, agent.sync_interval}
        .validate();
    if (agent.replay_capacity == 0) throw ConfigError("agent.replay_capacity must be positive");
    if (agent.init_mem > agent.replay_capacity) throw ConfigError("agent.init_mem exceeds agent.replay_capacity");
    if (!(agent.outlier_fraction >= 0.0 && agent.outlier_fraction < 1.0))
        throw ConfigError("agent.outlier_fraction must lie in [0, 1)");
    if (agent.forest_trees < 1 || agent.forest_subsample < 2) throw ConfigError("invalid isolation forest size");
    if (agent.checkpoint_interval < 0) throw ConfigError("agent.checkpoint_interval must be non-negative");
    if (vae.latent_dim < 1 || vae.hidden < 1 || vae.epochs < 0 || vae.batch_size < 1)
        throw ConfigError("invalid vae dimensions");
    if (!(vae.exclude_fraction >= 0.0 && vae.exclude_fraction < 1.0))
        throw ConfigError("vae.exclude_fraction must lie in [0, 1)");
    if (!(active.query_rate >= 0.0 && active.query_rate <= 1.0))
        throw ConfigError("active.query_rate must lie in [0, 1]");
    if (active.neighbors < 1) throw ConfigError("active.neighbors must be at least 1");
    if (active.bandwidth && !(*active.bandwidth > 0.0)) throw ConfigError("active.bandwidth must be positive");
    if (active.bandwidth_sample < 2) throw ConfigError("active.bandwidth_sample must be at least 2");
    if (!(active.confidence > 0.5 && active.confidence <= 1.0))
        throw ConfigError("active.confidence must lie in (0.5, 1]");
    if (!(active.tol > 0.0) || active.max_iters < 1) throw ConfigError("invalid propagation tolerance");
    if (!(active.label_timeout_s > 0.0)) throw ConfigError("active.label_timeout_s must be positive");
    if (service.port < 0 || service.port > 65535) throw ConfigError("service.port out of range");
}

std::uint64_t RunConfig::seed_for(const std::string& component) const {
    static const std::vector<std::pair<std::string, std::uint64_t>> offsets = {
        {"forest", 1}, {"vae_init", 2}, {"vae_train", 3}, {"q_init", 4},   {"warmup", 5},
        {"train", 6},  {"bandwidth", 7}, {"validate", 8},
    };
    for (const auto& [name, offset] : offsets)
        if (name == component) return run.seed * 1000003ULL + offset;
    throw ContractError("unknown seed component: " + component);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    find_field(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
    return find_field(key).get(config);
}

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("bad section header at line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value at line " + std::to_string(line_no));
        if (section.empty()) throw ConfigError("key outside any section at line " + std::to_string(line_no));
        const auto key = section + "." + trim(line.substr(0, eq));
        set_config_value(config, key, trim(line.substr(eq + 1)));
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string to_config_text(const RunConfig& config) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const auto sec = f.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        out << f.key.substr(dot + 1) << " = " << f.get(config) << '\n';
    }
    return out.str();
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override must look like section.key=value: " + o);
        set_config_value(config, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
}

}  // namespace tsad
