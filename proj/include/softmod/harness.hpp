#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softmod/checkpoint.hpp"
#include "softmod/sac.hpp"

namespace softmod {

// Fully resolved run configuration. Every key has a default; the config file
// and CLI overrides use the same flat `key = value` names (see README).
struct RunConfig {
    std::string label;                 // method name in compare output; defaults to arch
    std::string suite = "mt4-cond";
    std::uint64_t suite_seed = 0;      // seeds the fixed goals
    std::string arch = "shallow";      // shallow | deep | custom | mtsac | mtmh | moe
    std::size_t layers = 2;            // custom soft-modular only
    std::size_t modules = 2;           // custom soft-modular only
    std::size_t width = 0;             // module/embedding width; 0 = preset default
    std::size_t hidden_width = 400;    // baselines
    std::size_t hidden_layers = 3;
    std::size_t experts = 4;
    std::size_t gate_width = 256;
    std::vector<std::uint64_t> seeds{1};
    std::size_t steps = 300000;        // total environment steps across tasks
    std::size_t eval_interval = 10000;
    std::size_t eval_episodes = 20;    // per task, during training
    std::size_t final_eval_episodes = 100;
    std::size_t steps_per_task = 1;    // per collection round
    std::size_t updates_per_round = 1;
    SacConfig sac;
    std::string balance = "auto";      // auto | true | false (auto: on for soft-modular only)
    std::string shared_alpha = "auto"; // auto | true | false (auto: on for baselines only)
    std::string out = "runs/default";

    std::string method_label() const { return label.empty() ? arch : label; }
    // Deterministic `key = value` text, one key per line, fixed order.
    std::string serialize() const;
    ModelSpec model_spec(std::size_t tasks) const;
    SacConfig resolved_sac() const;
    void validate() const;
};

// Layered resolution: defaults < file (if non-empty path) < overrides.
// Overrides are `key=value` strings. Unknown keys, malformed values and
// missing files throw ConfigError naming the key or line.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {});
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

struct EvalReport {
    std::vector<double> success_rate;   // per task
    std::vector<std::size_t> successes;
    std::size_t episodes = 0;           // per task
    std::uint64_t seed = 0;
    std::vector<std::string> task_names;

    double average() const;
};

// Runs `episodes` episodes per task with `policy`; an episode succeeds if
// the success predicate fires at any step.
EvalReport evaluate_actions(const ActionSource& policy, const std::vector<TaskSpec>& suite, std::size_t episodes,
                            std::uint64_t seed);
// Deterministic (tanh of the mean) evaluation of a checkpoint's policy.
EvalReport evaluate(const Checkpoint& ckpt, const std::vector<TaskSpec>& suite, std::size_t episodes,
                    std::uint64_t seed);
ActionSource scripted_expert_policy(const std::vector<TaskSpec>& suite);

void write_eval_csv(const std::string& path, const EvalReport& report);
void print_eval_table(std::ostream& os, const EvalReport& report);

struct RunResult {
    std::uint64_t seed = 0;
    std::string dir;
    EvalReport final_eval;
    std::size_t env_steps = 0;
};

// Trains every configured seed; per seed writes <out>/seed_<s>/{metrics.csv,
// eval.csv, checkpoint.bin}, plus <out>/config.resolved. On a NaN abort a
// diagnostic.txt is written next to the metrics and TrainingError rethrown.
std::vector<RunResult> train_run(const RunConfig& config, std::ostream* log = nullptr);

// One JSON line per step: {"task_id", "episode", "t", "routing": [...]}.
std::size_t export_routing_trace(const Checkpoint& ckpt, const std::vector<TaskSpec>& suite, std::size_t episodes,
                                 std::uint64_t seed, const std::string& path);

// Optional per-step trajectory dump: {"task_id","t","obs","action","reward","done","success"}.
void dump_trajectories(const ActionSource& policy, const std::vector<TaskSpec>& suite, std::size_t episodes,
                       std::uint64_t seed, const std::string& path);

struct Curve {
    std::vector<double> steps;
    std::vector<double> values;
};

// Average-success curve from one metrics.csv.
Curve read_success_curve(const std::string& metrics_path);

// Aligns runs by step and writes step,<method>_mean,<method>_std,... to
// `out_path`. Arguments may be train output dirs (with seed_* subdirs) or
// seed dirs; runs sharing a method label are pooled as seeds.
void compare(const std::vector<std::string>& run_dirs, const std::string& out_path, std::ostream* warn = nullptr);

}  // namespace softmod
