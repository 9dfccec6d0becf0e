#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "softmod/errors.hpp"
#include "softmod/harness.hpp"
#include "softmod/modular_net.hpp"

namespace py = pybind11;
using namespace softmod;

namespace {

std::vector<std::vector<double>> rows_of(const Tensor& t) {
    std::vector<std::vector<double>> out(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.cols(); ++c) out[r][c] = t.at(r, c);
    }
    return out;
}

py::dict state_dict(const EnvState& s) {
    py::dict d;
    d["agent"] = std::vector<double>{s.agent.x, s.agent.y};
    d["object"] = std::vector<double>{s.object.x, s.object.y};
    d["goal"] = std::vector<double>{s.goal.x, s.goal.y};
    d["held"] = s.held;
    d["t"] = s.t;
    return d;
}

py::dict report_dict(const EvalReport& r) {
    py::dict d;
    d["tasks"] = r.task_names;
    d["success_rate"] = r.success_rate;
    d["successes"] = r.successes;
    d["episodes"] = r.episodes;
    d["average"] = r.average();
    d["seed"] = r.seed;
    return d;
}

// Single-task environment handle owning its RNG.
class PyEnv {
public:
    PyEnv(const std::string& suite, std::size_t task_id, std::uint64_t seed, std::uint64_t suite_seed)
        : rng_(seed) {
        const auto tasks = make_suite(suite, suite_seed);
        if (task_id >= tasks.size()) throw ContractError("task id out of range for suite " + suite);
        env_ = std::make_unique<SuiteEnv>(tasks[task_id]);
    }

    std::vector<double> reset() { return env_->reset(rng_); }

    py::tuple step(const std::vector<double>& action) {
        const EnvStep s = env_->step(action);
        py::dict info;
        info["success"] = s.success;
        info["terminal"] = s.terminal;
        return py::make_tuple(s.observation, s.reward, s.done, info);
    }

    py::dict state() const { return state_dict(env_->state()); }
    std::string kind() const { return to_string(env_->spec().kind); }
    std::vector<double> expert_action() const {
        const auto a = scripted_expert(env_->state(), env_->spec());
        return {a.begin(), a.end()};
    }

private:
    Rng rng_;
    std::unique_ptr<SuiteEnv> env_;
};

// Soft-modular policy with randomly initialised or checkpointed weights.
class PyPolicy {
public:
    PyPolicy(std::size_t layers, std::size_t modules, std::size_t width, std::size_t tasks, std::uint64_t seed)
        : net_(NetworkConfig::custom(layers, modules, width, kObservationDim, kActionDim, tasks)) {
        Rng rng(seed);
        params_ = net_.init(rng);
    }

    static PyPolicy from_checkpoint(const std::string& path) {
        const Checkpoint ckpt = load_checkpoint(path);
        if (ckpt.spec.kind != ArchKind::SoftModular) {
            throw ConfigError("checkpoint architecture " + to_string(ckpt.spec.kind) + " is not soft-modular");
        }
        return PyPolicy(SoftModularNet(ckpt.spec.modular), ckpt.section("policy"));
    }

    py::dict forward(const std::vector<double>& state, std::size_t task_id) const {
        const PolicyForward f = policy_forward(net_, params_, Tensor::vector(state), task_id);
        py::dict d;
        d["mean"] = f.head.mean.to_vector();
        d["log_std"] = f.head.log_std.to_vector();
        d["routing"] = flatten_routing(f.routing).to_vector();
        std::vector<std::vector<std::vector<double>>> layers;
        for (std::size_t l = 0; l < f.routing.weights.size(); ++l) layers.push_back(rows_of(f.routing.layer(l)));
        d["routing_layers"] = layers;
        return d;
    }

    std::size_t param_count() const { return net_.param_count(); }
    std::vector<std::string> param_names() const { return params_.names(); }
    std::size_t layers() const { return net_.config().layers; }
    std::size_t modules() const { return net_.config().modules; }

private:
    PyPolicy(SoftModularNet net, ParamSet params) : net_(std::move(net)), params_(std::move(params)) {}

    SoftModularNet net_;
    ParamSet params_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Soft-modular multi-task SAC";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    m.attr("OBSERVATION_DIM") = kObservationDim;
    m.attr("ACTION_DIM") = kActionDim;
    m.attr("HORIZON") = kHorizon;

    m.def(
        "suite_tasks",
        [](const std::string& suite, std::uint64_t suite_seed) {
            std::vector<std::string> names;
            for (const auto& t : make_suite(suite, suite_seed)) names.push_back(to_string(t.kind));
            return names;
        },
        py::arg("suite"), py::arg("suite_seed") = 0);

    m.def(
        "task_weights", [](const std::vector<double>& alphas) { return task_weights(alphas).w; }, py::arg("alphas"));

    m.def(
        "resolve_config",
        [](const std::string& path, const std::vector<std::string>& overrides) {
            return parse_config(path, overrides).serialize();
        },
        py::arg("path") = "", py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "train",
        [](const std::vector<std::string>& overrides, const std::string& path) {
            const RunConfig cfg = parse_config(path, overrides);
            std::vector<RunResult> results;
            {
                py::gil_scoped_release release;
                results = train_run(cfg);
            }
            py::list out;
            for (const RunResult& r : results) {
                py::dict d;
                d["seed"] = r.seed;
                d["dir"] = r.dir;
                d["env_steps"] = r.env_steps;
                d["eval"] = report_dict(r.final_eval);
                out.append(d);
            }
            return out;
        },
        py::arg("overrides") = std::vector<std::string>{}, py::arg("config") = "");

    m.def(
        "evaluate",
        [](const std::string& checkpoint, const std::string& suite, std::size_t episodes, std::uint64_t seed,
           std::uint64_t suite_seed) {
            const Checkpoint ckpt = load_checkpoint(checkpoint);
            py::gil_scoped_release release;
            const EvalReport r = evaluate(ckpt, make_suite(suite, suite_seed), episodes, seed);
            py::gil_scoped_acquire acquire;
            return report_dict(r);
        },
        py::arg("checkpoint"), py::arg("suite") = "mt4-cond", py::arg("episodes") = 100, py::arg("seed") = 0,
        py::arg("suite_seed") = 0);

    m.def(
        "evaluate_expert",
        [](const std::string& suite, std::size_t episodes, std::uint64_t seed, std::uint64_t suite_seed) {
            const auto tasks = make_suite(suite, suite_seed);
            return report_dict(evaluate_actions(scripted_expert_policy(tasks), tasks, episodes, seed));
        },
        py::arg("suite") = "mt4-cond", py::arg("episodes") = 100, py::arg("seed") = 0, py::arg("suite_seed") = 0);

    m.def(
        "export_routing_trace",
        [](const std::string& checkpoint, const std::string& out, const std::string& suite, std::size_t episodes,
           std::uint64_t seed, std::uint64_t suite_seed) {
            return export_routing_trace(load_checkpoint(checkpoint), make_suite(suite, suite_seed), episodes, seed, out);
        },
        py::arg("checkpoint"), py::arg("out"), py::arg("suite") = "mt4-cond", py::arg("episodes") = 5,
        py::arg("seed") = 0, py::arg("suite_seed") = 0);

    m.def(
        "compare",
        [](const std::vector<std::string>& runs, const std::string& out) {
            std::ostringstream warn;
            compare(runs, out, &warn);
            return warn.str();
        },
        py::arg("runs"), py::arg("out"));

    py::class_<PyEnv>(m, "Env")
        .def(py::init<const std::string&, std::size_t, std::uint64_t, std::uint64_t>(), py::arg("suite"),
             py::arg("task_id"), py::arg("seed") = 0, py::arg("suite_seed") = 0)
        .def("reset", &PyEnv::reset)
        .def("step", &PyEnv::step, py::arg("action"))
        .def("expert_action", &PyEnv::expert_action)
        .def_property_readonly("state", &PyEnv::state)
        .def_property_readonly("kind", &PyEnv::kind);

    py::class_<PyPolicy>(m, "SoftModularPolicy")
        .def(py::init<std::size_t, std::size_t, std::size_t, std::size_t, std::uint64_t>(), py::arg("layers"),
             py::arg("modules"), py::arg("width"), py::arg("tasks"), py::arg("seed") = 0)
        .def_static("from_checkpoint", &PyPolicy::from_checkpoint, py::arg("path"))
        .def("forward", &PyPolicy::forward, py::arg("state"), py::arg("task_id"))
        .def_property_readonly("param_count", &PyPolicy::param_count)
        .def_property_readonly("param_names", &PyPolicy::param_names)
        .def_property_readonly("layers", &PyPolicy::layers)
        .def_property_readonly("modules", &PyPolicy::modules);
}
