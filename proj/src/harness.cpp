#include "softmod/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace softmod {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_metric(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
        if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
    if (pos != v.size() || !std::isfinite(out)) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::string parse_tristate(const std::string& key, const std::string& v) {
    if (v == "auto") return v;
    return parse_bool(key, v) ? "true" : "false";
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
    const char* name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define SIZE_KEY(NAME, FIELD)                                                                   \
    Key {                                                                                       \
        NAME, [](const RunConfig& c) { return std::to_string(c.FIELD); },                       \
            [](RunConfig& c, const std::string& v) { c.FIELD = static_cast<std::size_t>(parse_uint(NAME, v)); } \
    }
#define DOUBLE_KEY(NAME, FIELD)                                                                       \
    Key {                                                                                             \
        NAME, [](const RunConfig& c) { return fmt_double(c.FIELD); },                                 \
            [](RunConfig& c, const std::string& v) { c.FIELD = parse_double(NAME, v); }               \
    }
#define BOOL_KEY(NAME, FIELD)                                                                         \
    Key {                                                                                             \
        NAME, [](const RunConfig& c) { return fmt_bool(c.FIELD); },                                   \
            [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(NAME, v); }                 \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        Key{"label", [](const RunConfig& c) { return c.label; }, [](RunConfig& c, const std::string& v) { c.label = v; }},
        Key{"suite", [](const RunConfig& c) { return c.suite; },
            [](RunConfig& c, const std::string& v) {
                make_suite(v, 0);  // validates the name
                c.suite = v;
            }},
        Key{"suite_seed", [](const RunConfig& c) { return std::to_string(c.suite_seed); },
            [](RunConfig& c, const std::string& v) { c.suite_seed = parse_uint("suite_seed", v); }},
        Key{"arch", [](const RunConfig& c) { return c.arch; },
            [](RunConfig& c, const std::string& v) {
                static const std::vector<std::string> ok{"shallow", "deep", "custom", "mtsac", "mtmh", "moe"};
                if (std::find(ok.begin(), ok.end(), v) == ok.end()) {
                    throw ConfigError("key 'arch': unknown architecture '" + v + "'");
                }
                c.arch = v;
            }},
        SIZE_KEY("layers", layers),
        SIZE_KEY("modules", modules),
        SIZE_KEY("width", width),
        SIZE_KEY("hidden_width", hidden_width),
        SIZE_KEY("hidden_layers", hidden_layers),
        SIZE_KEY("experts", experts),
        SIZE_KEY("gate_width", gate_width),
        Key{"seeds",
            [](const RunConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
                return s;
            },
            [](RunConfig& c, const std::string& v) {
                std::vector<std::uint64_t> seeds;
                std::stringstream ss(v);
                std::string item;
                while (std::getline(ss, item, ',')) seeds.push_back(parse_uint("seeds", trim(item)));
                if (seeds.empty()) throw ConfigError("key 'seeds': empty seed list");
                c.seeds = std::move(seeds);
            }},
        SIZE_KEY("steps", steps),
        SIZE_KEY("eval_interval", eval_interval),
        SIZE_KEY("eval_episodes", eval_episodes),
        SIZE_KEY("final_eval_episodes", final_eval_episodes),
        SIZE_KEY("steps_per_task", steps_per_task),
        SIZE_KEY("updates_per_round", updates_per_round),
        DOUBLE_KEY("gamma", sac.gamma),
        DOUBLE_KEY("tau", sac.tau),
        SIZE_KEY("batch_size", sac.batch_size),
        DOUBLE_KEY("actor_lr", sac.actor_lr),
        DOUBLE_KEY("critic_lr", sac.critic_lr),
        DOUBLE_KEY("alpha_lr", sac.alpha_lr),
        DOUBLE_KEY("initial_alpha", sac.initial_alpha),
        BOOL_KEY("twin_q", sac.twin_q),
        Key{"balance", [](const RunConfig& c) { return c.balance; },
            [](RunConfig& c, const std::string& v) { c.balance = parse_tristate("balance", v); }},
        Key{"shared_alpha", [](const RunConfig& c) { return c.shared_alpha; },
            [](RunConfig& c, const std::string& v) { c.shared_alpha = parse_tristate("shared_alpha", v); }},
        SIZE_KEY("buffer_capacity", sac.buffer_capacity),
        SIZE_KEY("warmup_steps", sac.warmup_steps),
        Key{"out", [](const RunConfig& c) { return c.out; }, [](RunConfig& c, const std::string& v) { c.out = v; }},
    };
    return table;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY

bool is_soft_modular(const std::string& arch) { return arch == "shallow" || arch == "deep" || arch == "custom"; }

void apply_lines(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        try {
            apply_setting(cfg, key, trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

// Lockstep evaluation of `episodes` episodes of one task.
struct Episodes {
    std::vector<EnvState> states;
    std::vector<bool> active;
    std::vector<bool> succeeded;
};

Episodes start_episodes(const TaskSpec& spec, std::size_t episodes, Rng& rng) {
    Episodes e;
    for (std::size_t k = 0; k < episodes; ++k) e.states.push_back(reset(spec, rng));
    e.active.assign(episodes, true);
    e.succeeded.assign(episodes, false);
    return e;
}

Tensor active_observations(const Episodes& e, std::vector<std::size_t>& index) {
    index.clear();
    for (std::size_t k = 0; k < e.states.size(); ++k) {
        if (e.active[k]) index.push_back(k);
    }
    Matrix obs(static_cast<Eigen::Index>(index.size()), static_cast<Eigen::Index>(kObservationDim));
    for (std::size_t r = 0; r < index.size(); ++r) {
        const Observation o = observe(e.states[index[r]]);
        for (std::size_t c = 0; c < kObservationDim; ++c) obs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = o[c];
    }
    return Tensor(std::move(obs));
}

std::vector<std::unique_ptr<Environment>> make_envs(const std::vector<TaskSpec>& suite) {
    std::vector<std::unique_ptr<Environment>> envs;
    for (const auto& spec : suite) envs.push_back(std::make_unique<SuiteEnv>(spec));
    return envs;
}

void check_suite_dims(const ModelSpec& spec, const std::vector<TaskSpec>& suite) {
    if (spec.tasks() != suite.size() || spec.state_dim() != kObservationDim || spec.action_dim() != kActionDim) {
        throw ConfigError("checkpoint dims (tasks " + std::to_string(spec.tasks()) + ", state " +
                          std::to_string(spec.state_dim()) + ", action " + std::to_string(spec.action_dim()) +
                          ") do not match suite (tasks " + std::to_string(suite.size()) + ", state " +
                          std::to_string(kObservationDim) + ", action " + std::to_string(kActionDim) + ")");
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

double interpolate(const Curve& c, double step) {
    if (c.steps.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (step <= c.steps.front()) return c.values.front();
    if (step >= c.steps.back()) return c.values.back();
    const auto it = std::lower_bound(c.steps.begin(), c.steps.end(), step);
    const std::size_t hi = static_cast<std::size_t>(it - c.steps.begin());
    if (c.steps[hi] == step) return c.values[hi];
    const std::size_t lo = hi - 1;
    const double f = (step - c.steps[lo]) / (c.steps[hi] - c.steps[lo]);
    return c.values[lo] + f * (c.values[hi] - c.values[lo]);
}

}  // namespace

// ---- config -----------------------------------------------------------------

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : keys()) {
        if (key == k.name) {
            k.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    for (const auto& k : keys()) os << k.name << " = " << k.get(*this) << "\n";
    return os.str();
}

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    apply_lines(cfg, text, "config");
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "': expected key=value");
        apply_setting(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::string text;
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) throw ConfigError("config file not found: " + path);
        std::stringstream ss;
        ss << is.rdbuf();
        text = ss.str();
    }
    RunConfig cfg;
    apply_lines(cfg, text, path.empty() ? "config" : path);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "': expected key=value");
        apply_setting(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

ModelSpec RunConfig::model_spec(std::size_t tasks) const {
    ModelSpec spec;
    if (arch == "shallow") {
        spec.modular = NetworkConfig::shallow(kObservationDim, kActionDim, tasks);
    } else if (arch == "deep") {
        spec.modular = NetworkConfig::deep(kObservationDim, kActionDim, tasks);
    } else {
        spec.modular = NetworkConfig::custom(layers, modules, 256, kObservationDim, kActionDim, tasks);
    }
    if (width != 0) {
        spec.modular.module_width = width;
        spec.modular.embed_width = width;
    }
    spec.kind = is_soft_modular(arch) ? ArchKind::SoftModular : arch_kind_from_string(arch);
    spec.baseline = {hidden_width, hidden_layers, experts, gate_width};
    return spec;
}

SacConfig RunConfig::resolved_sac() const {
    SacConfig s = sac;
    const bool modular = is_soft_modular(arch);
    s.balance = balance == "auto" ? modular : balance == "true";
    s.shared_alpha = shared_alpha == "auto" ? !modular : shared_alpha == "true";
    return s;
}

void RunConfig::validate() const {
    const std::size_t tasks = make_suite(suite, suite_seed).size();
    if (sac.batch_size == 0 || sac.batch_size % tasks != 0) {
        throw ConfigError("key 'batch_size': " + std::to_string(sac.batch_size) +
                          " is not a positive multiple of the task count " + std::to_string(tasks));
    }
    if (!(sac.tau > 0.0 && sac.tau <= 1.0)) throw ConfigError("key 'tau': must lie in (0, 1]");
    if (!(sac.gamma >= 0.0 && sac.gamma < 1.0)) throw ConfigError("key 'gamma': must lie in [0, 1)");
    if (!(sac.initial_alpha > 0.0)) throw ConfigError("key 'initial_alpha': must be positive");
    if (eval_interval == 0) throw ConfigError("key 'eval_interval': must be positive");
    if (steps_per_task == 0) throw ConfigError("key 'steps_per_task': must be positive");
    if (sac.buffer_capacity == 0) throw ConfigError("key 'buffer_capacity': must be positive");
    if (arch == "custom" && layers < 2) throw ConfigError("key 'layers': soft-modular networks need at least 2");
    if (arch == "custom" && modules < 1) throw ConfigError("key 'modules': must be positive");
    if (hidden_layers < 1 || hidden_width < 1) throw ConfigError("baseline widths must be positive");
    if (arch == "mtmh" && hidden_layers < 2) throw ConfigError("key 'hidden_layers': multi-head needs at least 2");
}

// ---- evaluation -------------------------------------------------------------

double EvalReport::average() const {
    if (success_rate.empty()) return 0.0;
    return std::accumulate(success_rate.begin(), success_rate.end(), 0.0) / static_cast<double>(success_rate.size());
}

EvalReport evaluate_actions(const ActionSource& policy, const std::vector<TaskSpec>& suite, std::size_t episodes,
                            std::uint64_t seed) {
    if (episodes == 0) throw ConfigError("evaluation needs at least one episode per task");
    Rng rng(seed);
    EvalReport report;
    report.episodes = episodes;
    report.seed = seed;
    std::vector<std::size_t> index;
    for (const auto& spec : suite) {
        Episodes e = start_episodes(spec, episodes, rng);
        while (true) {
            const Tensor obs = active_observations(e, index);
            if (index.empty()) break;
            const std::vector<int> ids(index.size(), spec.task_id);
            const Tensor actions = policy(obs, ids);
            for (std::size_t r = 0; r < index.size(); ++r) {
                const auto row = actions.mat().row(static_cast<Eigen::Index>(r));
                const std::size_t k = index[r];
                StepResult s = step(e.states[k], spec, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
                e.states[k] = s.state;
                if (s.success) e.succeeded[k] = true;
                if (s.done) e.active[k] = false;
            }
        }
        const auto wins = static_cast<std::size_t>(std::count(e.succeeded.begin(), e.succeeded.end(), true));
        report.successes.push_back(wins);
        report.success_rate.push_back(static_cast<double>(wins) / static_cast<double>(episodes));
        report.task_names.push_back(to_string(spec.kind));
    }
    return report;
}

EvalReport evaluate(const Checkpoint& ckpt, const std::vector<TaskSpec>& suite, std::size_t episodes,
                    std::uint64_t seed) {
    check_suite_dims(ckpt.spec, suite);
    const auto net = make_policy_network(ckpt.spec);
    const ParamSet& params = ckpt.section("policy");
    return evaluate_actions(deterministic_policy(*net, params, ckpt.spec.action_dim()), suite, episodes, seed);
}

ActionSource scripted_expert_policy(const std::vector<TaskSpec>& suite) {
    return [suite](const Tensor& obs, const std::vector<int>& task_ids) {
        Matrix a(static_cast<Eigen::Index>(obs.rows()), static_cast<Eigen::Index>(kActionDim));
        for (std::size_t r = 0; r < obs.rows(); ++r) {
            EnvState s;
            s.agent = {obs.at(r, 0), obs.at(r, 1)};
            s.object = {obs.at(r, 2), obs.at(r, 3)};
            s.goal = {obs.at(r, 4), obs.at(r, 5)};
            s.held = obs.at(r, 6) > 0.5;
            const auto u = scripted_expert(s, suite.at(static_cast<std::size_t>(task_ids[r])));
            for (std::size_t c = 0; c < kActionDim; ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = u[c];
        }
        return Tensor(std::move(a));
    };
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path);
    os << "task_id,task,successes,episodes,success_rate\n";
    for (std::size_t i = 0; i < report.success_rate.size(); ++i) {
        os << i << "," << report.task_names[i] << "," << report.successes[i] << "," << report.episodes << ","
           << fmt_rate(report.success_rate[i]) << "\n";
    }
    os << "average,all,,," << fmt_rate(report.average()) << "\n";
}

void print_eval_table(std::ostream& os, const EvalReport& report) {
    os << "task                 success\n";
    for (std::size_t i = 0; i < report.success_rate.size(); ++i) {
        os << std::left << std::setw(3) << i << std::setw(18) << report.task_names[i] << std::right << std::setw(7)
           << std::fixed << std::setprecision(1) << 100.0 * report.success_rate[i] << "%\n";
    }
    os << std::left << std::setw(21) << "average" << std::right << std::setw(7) << std::fixed << std::setprecision(1)
       << 100.0 * report.average() << "%  (" << report.episodes << " episodes per task, seed " << report.seed
       << ")\n";
    os.unsetf(std::ios::floatfield);
}

// ---- training ---------------------------------------------------------------

std::vector<RunResult> train_run(const RunConfig& config, std::ostream* log) {
    config.validate();
    const auto suite = make_suite(config.suite, config.suite_seed);
    const std::size_t m = suite.size();
    const ModelSpec spec = config.model_spec(m);
    const SacConfig sac = config.resolved_sac();

    fs::create_directories(config.out);
    {
        std::ofstream os(fs::path(config.out) / "config.resolved", std::ios::binary | std::ios::trunc);
        os << config.serialize();
    }

    std::vector<RunResult> results;
    for (const std::uint64_t seed : config.seeds) {
        const fs::path dir = fs::path(config.out) / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);

        Trainer trainer(spec, sac, seed);
        Rng env_rng(seed * 0x9E3779B97F4A7C15ull + 1);
        Rng act_rng(seed * 0x9E3779B97F4A7C15ull + 2);
        Rng train_rng(seed * 0x9E3779B97F4A7C15ull + 3);
        const std::uint64_t eval_seed = seed * 0x9E3779B97F4A7C15ull + 4;
        ReplayBuffer buffer(m, sac.buffer_capacity, kObservationDim, kActionDim);
        Collector collector(make_envs(suite), env_rng);
        const ActionSource random_actions = uniform_random_policy(kActionDim, act_rng);
        const ActionSource policy_actions = stochastic_policy(trainer, act_rng);
        const ActionSource eval_actions = deterministic_policy(trainer.policy_net(), trainer.policy, kActionDim);

        std::ofstream metrics(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
        metrics << "step";
        for (std::size_t i = 0; i < m; ++i) metrics << ",success_" << i;
        for (std::size_t i = 0; i < m; ++i) metrics << ",alpha_" << i;
        for (std::size_t i = 0; i < m; ++i) metrics << ",w_" << i;
        metrics << ",actor_loss,critic_loss\n";
        metrics.flush();

        std::size_t env_steps = 0;
        double actor_sum = 0.0, critic_sum = 0.0;
        std::size_t updates = 0;
        const std::size_t warmup_total = sac.warmup_steps * m;
        try {
            while (env_steps < config.steps) {
                const bool warm = env_steps < warmup_total;
                env_steps += collector.collect(buffer, config.steps_per_task, warm ? random_actions : policy_actions,
                                               env_rng);
                if (env_steps >= warmup_total) {
                    for (std::size_t u = 0; u < config.updates_per_round * config.steps_per_task; ++u) {
                        const StepMetrics sm = train_step(trainer, buffer, train_rng);
                        actor_sum += sm.actor_loss;
                        critic_sum += sm.critic_loss;
                        ++updates;
                    }
                }
                const std::size_t collected = config.steps_per_task * m;
                if (env_steps / config.eval_interval != (env_steps - collected) / config.eval_interval) {
                    const EvalReport r = evaluate_actions(eval_actions, suite, config.eval_episodes, eval_seed);
                    const auto alphas = trainer.temps.alphas();
                    const TaskWeights w = sac.balance ? task_weights(trainer.temps) : uniform_weights(m);
                    metrics << env_steps;
                    for (double v : r.success_rate) metrics << "," << fmt_rate(v);
                    for (double v : alphas) metrics << "," << fmt_metric(v);
                    for (double v : w.w) metrics << "," << fmt_metric(v);
                    const double nan = std::numeric_limits<double>::quiet_NaN();
                    metrics << "," << fmt_metric(updates ? actor_sum / static_cast<double>(updates) : nan) << ","
                            << fmt_metric(updates ? critic_sum / static_cast<double>(updates) : nan) << "\n";
                    metrics.flush();
                    if (log) {
                        *log << config.method_label() << " seed " << seed << " step " << env_steps << " avg success "
                             << fmt_rate(r.average()) << "\n";
                        log->flush();
                    }
                    actor_sum = critic_sum = 0.0;
                    updates = 0;
                }
            }
        } catch (const TrainingError& e) {
            std::ofstream diag(dir / "diagnostic.txt", std::ios::trunc);
            diag << "seed " << seed << " aborted at env step " << env_steps << "\n" << e.what() << "\n";
            throw;
        }

        save_checkpoint((dir / "checkpoint.bin").string(), make_checkpoint(trainer));
        RunResult result;
        result.seed = seed;
        result.dir = dir.string();
        result.env_steps = env_steps;
        result.final_eval = evaluate_actions(eval_actions, suite, config.final_eval_episodes, eval_seed);
        write_eval_csv((dir / "eval.csv").string(), result.final_eval);
        results.push_back(std::move(result));
    }
    return results;
}

// ---- routing trace and trajectory dump --------------------------------------

std::size_t export_routing_trace(const Checkpoint& ckpt, const std::vector<TaskSpec>& suite, std::size_t episodes,
                                 std::uint64_t seed, const std::string& path) {
    if (ckpt.spec.kind != ArchKind::SoftModular) {
        throw ConfigError("routing trace needs a soft-modular checkpoint, got architecture " + to_string(ckpt.spec.kind));
    }
    check_suite_dims(ckpt.spec, suite);
    const SoftModularNet net(ckpt.spec.modular);
    const ParamSet& params = ckpt.section("policy");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path);

    Rng rng(seed);
    std::size_t records = 0;
    std::vector<std::size_t> index;
    for (const auto& spec : suite) {
        Episodes e = start_episodes(spec, episodes, rng);
        while (true) {
            const Tensor obs = active_observations(e, index);
            if (index.empty()) break;
            Graph g;
            Bound bound(g, params, false);
            RoutingVars routing;
            const std::vector<int> ids(index.size(), spec.task_id);
            Var raw = net.forward_with_routing(bound, g.constant(obs), g.constant(one_hot_batch(ids, suite.size())),
                                               &routing);
            const Matrix actions = split_head(raw, kActionDim).mean.value().mat().array().tanh().matrix();
            const RoutingProbabilities probs = routing.values(ckpt.spec.modular.modules);
            for (std::size_t r = 0; r < index.size(); ++r) {
                const std::size_t k = index[r];
                nlohmann::json rec;
                rec["task_id"] = spec.task_id;
                rec["episode"] = k;
                rec["t"] = e.states[k].t;
                rec["routing"] = flatten_routing(probs, r).to_vector();
                os << rec.dump() << "\n";
                ++records;
                const auto row = actions.row(static_cast<Eigen::Index>(r));
                StepResult s = step(e.states[k], spec, std::span<const double>(row.data(), kActionDim));
                e.states[k] = s.state;
                if (s.done) e.active[k] = false;
            }
        }
    }
    return records;
}

void dump_trajectories(const ActionSource& policy, const std::vector<TaskSpec>& suite, std::size_t episodes,
                       std::uint64_t seed, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path);
    Rng rng(seed);
    for (const auto& spec : suite) {
        for (std::size_t ep = 0; ep < episodes; ++ep) {
            EnvState s = reset(spec, rng);
            bool done = false;
            while (!done) {
                const Observation o = observe(s);
                Matrix obs(1, static_cast<Eigen::Index>(kObservationDim));
                for (std::size_t c = 0; c < kObservationDim; ++c) obs(0, static_cast<Eigen::Index>(c)) = o[c];
                const Tensor a = policy(Tensor(std::move(obs)), {spec.task_id});
                StepResult r = step(s, spec, a.values());
                nlohmann::json rec;
                rec["task_id"] = spec.task_id;
                rec["t"] = r.state.t;
                rec["obs"] = std::vector<double>(o.begin(), o.end());
                rec["action"] = a.to_vector();
                rec["reward"] = r.reward;
                rec["done"] = r.done;
                rec["success"] = r.success;
                os << rec.dump() << "\n";
                s = r.state;
                done = r.done;
            }
        }
    }
}

// ---- compare ----------------------------------------------------------------

Curve read_success_curve(const std::string& metrics_path) {
    std::ifstream is(metrics_path);
    if (!is) throw ConfigError("cannot read " + metrics_path);
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(metrics_path + " is empty");
    const auto header = split_csv_line(line);
    std::vector<std::size_t> success_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].rfind("success_", 0) == 0) success_cols.push_back(c);
    }
    if (header.empty() || header[0] != "step" || success_cols.empty()) {
        throw ConfigError(metrics_path + ": not a metrics file");
    }
    Curve curve;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw ConfigError(metrics_path + ": ragged row");
        double total = 0.0;
        for (std::size_t c : success_cols) total += std::stod(cells[c]);
        curve.steps.push_back(std::stod(cells[0]));
        curve.values.push_back(total / static_cast<double>(success_cols.size()));
    }
    return curve;
}

void compare(const std::vector<std::string>& run_dirs, const std::string& out_path, std::ostream* warn) {
    if (run_dirs.empty()) throw ConfigError("compare needs at least one run directory");
    std::vector<std::string> order;
    std::map<std::string, std::vector<Curve>> methods;
    auto label_of = [](const fs::path& dir) {
        for (fs::path p : {dir / "config.resolved", dir.parent_path() / "config.resolved"}) {
            if (!fs::exists(p)) continue;
            std::ifstream is(p);
            std::string line;
            std::string label, arch;
            while (std::getline(is, line)) {
                const auto eq = line.find('=');
                if (eq == std::string::npos) continue;
                const std::string k = trim(line.substr(0, eq));
                if (k == "label") label = trim(line.substr(eq + 1));
                if (k == "arch") arch = trim(line.substr(eq + 1));
            }
            return label.empty() ? arch : label;
        }
        return fs::path(dir).filename().string();
    };
    for (const auto& d : run_dirs) {
        const fs::path dir(d);
        std::vector<fs::path> metric_files;
        if (fs::exists(dir / "metrics.csv")) {
            metric_files.push_back(dir / "metrics.csv");
        } else if (fs::is_directory(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0 &&
                    fs::exists(entry.path() / "metrics.csv")) {
                    metric_files.push_back(entry.path() / "metrics.csv");
                }
            }
            std::sort(metric_files.begin(), metric_files.end());
        }
        if (metric_files.empty()) throw ConfigError("no metrics.csv under " + d);
        const std::string label = label_of(fs::exists(dir / "metrics.csv") ? dir : dir / "seed_x");
        if (!methods.count(label)) order.push_back(label);
        for (const auto& f : metric_files) methods[label].push_back(read_success_curve(f.string()));
    }

    // Coarsest grid: the run with the fewest evaluation points.
    const Curve* coarsest = nullptr;
    bool mismatched = false;
    for (const auto& label : order) {
        for (const auto& c : methods[label]) {
            if (coarsest && c.steps != coarsest->steps) mismatched = true;
            if (!coarsest || c.steps.size() < coarsest->steps.size()) coarsest = &c;
        }
    }
    if (mismatched && warn) *warn << "warning: evaluation grids differ; resampling to the coarsest grid\n";
    const std::vector<double> grid = coarsest->steps;

    std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + out_path);
    os << "step";
    for (const auto& label : order) os << "," << label << "_mean," << label << "_std";
    os << "\n";
    for (double step : grid) {
        os << static_cast<long long>(std::llround(step));
        for (const auto& label : order) {
            const auto& curves = methods[label];
            std::vector<double> v;
            for (const auto& c : curves) v.push_back(interpolate(c, step));
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
            os << "," << fmt_rate(mean) << "," << fmt_rate(sd);
        }
        os << "\n";
    }
}

}  // namespace softmod
