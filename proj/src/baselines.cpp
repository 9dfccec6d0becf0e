#include "softmod/baselines.hpp"

namespace softmod {

namespace {

std::vector<std::size_t> stack(std::size_t in, std::size_t width, std::size_t hidden, std::size_t out) {
    std::vector<std::size_t> w{in};
    for (std::size_t i = 0; i < hidden; ++i) w.push_back(width);
    w.push_back(out);
    return w;
}

PolicyHead head_of(const Network& net, const ParamSet& params, const Tensor& state, std::size_t task_id) {
    if (state.cols() != net.input_dim()) {
        throw DimensionError("state " + state.shape_string() + " for input width " + std::to_string(net.input_dim()));
    }
    Graph g;
    Bound bound(g, params, false);
    Var raw = net.forward(bound, g.constant(state), g.constant(one_hot(task_id, net.task_count())));
    HeadVars h = split_head(raw, net.output_dim() / 2);
    return {h.mean.value(), h.log_std.value()};
}

}  // namespace

MtSacNet::MtSacNet(std::size_t input_dim, std::size_t output_dim, std::size_t tasks, BaselineConfig config)
    : input_dim_(input_dim),
      output_dim_(output_dim),
      tasks_(tasks),
      mlp_("mlp", stack(input_dim + tasks, config.hidden_width, config.hidden_layers, output_dim), 0) {}

ParamSet MtSacNet::init(Rng& rng) const {
    ParamSet p;
    mlp_.append_params(p, rng);
    return p;
}

Var MtSacNet::forward(Bound& params, Var x, Var tasks) const {
    require_one_hot(tasks.value(), tasks_);
    return mlp_.forward(params, concat_cols({x, tasks}));
}

MultiHeadNet::MultiHeadNet(std::size_t input_dim, std::size_t output_dim, std::size_t tasks, BaselineConfig config)
    : input_dim_(input_dim),
      output_dim_(output_dim),
      tasks_(tasks),
      trunk_width_(config.hidden_width) {
    if (config.hidden_layers < 2) throw ConfigError("multi-head baseline needs at least 2 layers");
    std::vector<std::size_t> widths{input_dim + tasks};
    for (std::size_t i = 0; i + 1 < config.hidden_layers; ++i) widths.push_back(config.hidden_width);
    // The trunk ends in a hidden layer; ReLU is applied in forward() before the heads.
    trunk_ = Mlp("trunk", widths, 0);
}

ParamSet MultiHeadNet::init(Rng& rng) const {
    ParamSet p;
    trunk_.append_params(p, rng);
    for (std::size_t k = 0; k < tasks_; ++k) {
        p.add("head/" + std::to_string(k) + "/w", uniform_fan_in(output_dim_, trunk_width_, rng));
        p.add("head/" + std::to_string(k) + "/b", Tensor::zeros_vector(output_dim_));
    }
    return p;
}

std::size_t MultiHeadNet::param_count() const {
    return trunk_.param_count() + tasks_ * (trunk_width_ * output_dim_ + output_dim_);
}

Var MultiHeadNet::forward(Bound& params, Var x, Var tasks) const {
    require_one_hot(tasks.value(), tasks_);
    Var h = relu(trunk_.forward(params, concat_cols({x, tasks})));
    Var out;
    for (std::size_t k = 0; k < tasks_; ++k) {
        // Rows not belonging to task k are masked, so head k only sees its own samples.
        Var mask = slice_cols(tasks, k, 1);
        if (mask.value().mat().sum() == 0.0) continue;
        Var head = scale_rows(affine(h, params[head_slot(k)], params[head_slot(k) + 1]), mask);
        out = out.valid() ? add(out, head) : head;
    }
    return out;
}

MixtureOfExpertsNet::MixtureOfExpertsNet(std::size_t input_dim, std::size_t output_dim, std::size_t tasks,
                                         BaselineConfig config)
    : input_dim_(input_dim), output_dim_(output_dim), tasks_(tasks) {
    if (config.experts < 1) throw ConfigError("mixture of experts needs at least one expert");
    std::size_t slot = 0;
    for (std::size_t e = 0; e < config.experts; ++e) {
        experts_.emplace_back("expert" + std::to_string(e),
                              stack(input_dim + tasks, config.hidden_width, config.hidden_layers, output_dim), slot);
        slot = experts_.back().end_slot();
    }
    gate_ = Mlp("gate", {input_dim + tasks, config.gate_width, config.experts}, slot);
}

ParamSet MixtureOfExpertsNet::init(Rng& rng) const {
    ParamSet p;
    for (const auto& e : experts_) e.append_params(p, rng);
    gate_.append_params(p, rng);
    return p;
}

std::size_t MixtureOfExpertsNet::param_count() const {
    std::size_t n = gate_.param_count();
    for (const auto& e : experts_) n += e.param_count();
    return n;
}

Var MixtureOfExpertsNet::gate(Bound& params, Var x, Var tasks) const {
    require_one_hot(tasks.value(), tasks_);
    return softmax_rows(gate_.forward(params, concat_cols({x, tasks})));
}

Var MixtureOfExpertsNet::expert(Bound& params, std::size_t e, Var x, Var tasks) const {
    return experts_.at(e).forward(params, concat_cols({x, tasks}));
}

Var MixtureOfExpertsNet::forward(Bound& params, Var x, Var tasks) const {
    Var weights = gate(params, x, tasks);
    Var xz = concat_cols({x, tasks});
    Var out;
    for (std::size_t e = 0; e < experts_.size(); ++e) {
        Var term = scale_rows(experts_[e].forward(params, xz), slice_cols(weights, e, 1));
        out = out.valid() ? add(out, term) : term;
    }
    return out;
}

std::unique_ptr<Network> make_policy_network(const ModelSpec& spec) {
    const auto& m = spec.modular;
    switch (spec.kind) {
        case ArchKind::SoftModular: return std::make_unique<SoftModularNet>(m);
        case ArchKind::MtSac: return std::make_unique<MtSacNet>(m.state_dim, 2 * m.action_dim, m.tasks, spec.baseline);
        case ArchKind::MultiHead:
            return std::make_unique<MultiHeadNet>(m.state_dim, 2 * m.action_dim, m.tasks, spec.baseline);
        case ArchKind::MixExpert:
            return std::make_unique<MixtureOfExpertsNet>(m.state_dim, 2 * m.action_dim, m.tasks, spec.baseline);
    }
    throw ConfigError("unknown architecture");
}

std::unique_ptr<Network> make_critic_network(const ModelSpec& spec) {
    const auto& m = spec.modular;
    const std::size_t in = m.state_dim + m.action_dim;
    switch (spec.kind) {
        case ArchKind::SoftModular: return std::make_unique<SoftModularNet>(m.critic());
        case ArchKind::MtSac: return std::make_unique<MtSacNet>(in, 1, m.tasks, spec.baseline);
        case ArchKind::MultiHead: return std::make_unique<MultiHeadNet>(in, 1, m.tasks, spec.baseline);
        case ArchKind::MixExpert: return std::make_unique<MixtureOfExpertsNet>(in, 1, m.tasks, spec.baseline);
    }
    throw ConfigError("unknown architecture");
}

PolicyHead mtsac_forward(const MtSacNet& net, const ParamSet& params, const Tensor& state, std::size_t task_id) {
    return head_of(net, params, state, task_id);
}

PolicyHead multihead_forward(const MultiHeadNet& net, const ParamSet& params, const Tensor& state,
                             std::size_t task_id) {
    return head_of(net, params, state, task_id);
}

PolicyHead moe_forward(const MixtureOfExpertsNet& net, const ParamSet& params, const Tensor& state,
                       std::size_t task_id) {
    return head_of(net, params, state, task_id);
}

}  // namespace softmod
