#include <clocale>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "softmod/harness.hpp"

using namespace softmod;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string suite;
    std::string arch;
    std::optional<std::size_t> steps;
    std::string out;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "config file (key = value lines)");
    cmd->add_option("--seed", f.seed, "single seed; replaces the config's seed list");
    cmd->add_option("--suite", f.suite, "suite preset, e.g. mt4-cond, mt8-fixed");
    cmd->add_option("--arch", f.arch, "shallow | deep | custom | mtsac | mtmh | moe");
    cmd->add_option("--steps", f.steps, "total environment steps");
    cmd->add_option("--out", f.out, "output directory or file");
    cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

RunConfig resolve(const CommonFlags& f) {
    std::vector<std::string> overrides = f.sets;
    if (f.seed) overrides.push_back("seeds=" + std::to_string(*f.seed));
    if (!f.suite.empty()) overrides.push_back("suite=" + f.suite);
    if (!f.arch.empty()) overrides.push_back("arch=" + f.arch);
    if (f.steps) overrides.push_back("steps=" + std::to_string(*f.steps));
    if (!f.out.empty()) overrides.push_back("out=" + f.out);
    return parse_config(f.config, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");
    CLI::App app{"soft-modular multi-task SAC"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    auto* train = app.add_subcommand("train", "train every configured seed");
    add_common(train, train_flags);
    bool quiet = false;
    train->add_flag("--quiet", quiet, "no progress lines or summary table");

    CommonFlags eval_flags;
    std::string eval_ckpt;
    std::optional<std::size_t> eval_episodes;
    auto* eval = app.add_subcommand("eval", "deterministic evaluation of a checkpoint");
    add_common(eval, eval_flags);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint.bin")->required();
    eval->add_option("--episodes", eval_episodes, "episodes per task (default: final_eval_episodes)");

    CommonFlags trace_flags;
    std::string trace_ckpt;
    std::size_t trace_episodes = 5;
    auto* trace = app.add_subcommand("trace", "export per-step routing probabilities as JSON lines");
    add_common(trace, trace_flags);
    trace->add_option("--checkpoint", trace_ckpt, "soft-modular checkpoint.bin")->required();
    trace->add_option("--episodes", trace_episodes, "episodes per task");

    std::vector<std::string> compare_dirs;
    std::string compare_out = "compare.csv";
    auto* cmp = app.add_subcommand("compare", "mean and std of average success across runs");
    cmp->add_option("runs", compare_dirs, "train output or seed directories")->required();
    cmp->add_option("--out", compare_out, "summary CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const RunConfig cfg = resolve(train_flags);
            const auto results = train_run(cfg, quiet ? nullptr : &std::cout);
            for (const auto& r : results) {
                if (quiet) break;
                std::cout << "seed " << r.seed << " final evaluation (" << r.dir << ")\n";
                print_eval_table(std::cout, r.final_eval);
            }
        } else if (*eval) {
            const RunConfig cfg = resolve(eval_flags);
            const Checkpoint ckpt = load_checkpoint(eval_ckpt);
            const auto suite = make_suite(cfg.suite, cfg.suite_seed);
            const EvalReport report =
                evaluate(ckpt, suite, eval_episodes.value_or(cfg.final_eval_episodes), cfg.seeds.front());
            const std::string out = eval_flags.out.empty() ? "eval.csv" : eval_flags.out;
            write_eval_csv(out, report);
            print_eval_table(std::cout, report);
        } else if (*trace) {
            const RunConfig cfg = resolve(trace_flags);
            const Checkpoint ckpt = load_checkpoint(trace_ckpt);
            const auto suite = make_suite(cfg.suite, cfg.suite_seed);
            const std::string out = trace_flags.out.empty() ? "trace.jsonl" : trace_flags.out;
            const std::size_t n = export_routing_trace(ckpt, suite, trace_episodes, cfg.seeds.front(), out);
            std::cout << n << " records written to " << out << "\n";
        } else if (*cmp) {
            compare(compare_dirs, compare_out, &std::cerr);
            std::cout << "summary written to " << compare_out << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
