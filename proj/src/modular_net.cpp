#include "softmod/modular_net.hpp"

#include <string>

namespace softmod {

namespace {

std::string slot_name(const char* component, std::size_t layer, const char* suffix) {
    return std::string(component) + "/" + std::to_string(layer) + "/" + suffix;
}

}  // namespace

void NetworkConfig::validate() const {
    if (layers < 2) throw ConfigError("soft-modular network needs at least 2 module layers, got " + std::to_string(layers));
    if (modules < 1) throw ConfigError("soft-modular network needs at least 1 module per layer");
    if (module_width < 1 || embed_width < 1 || output_width < 1) throw ConfigError("network widths must be positive");
    if (tasks < 1) throw ConfigError("task count must be positive");
    if (state_dim < 1 || action_dim < 1) throw ConfigError("state and action dims must be positive");
}

NetworkConfig NetworkConfig::shallow(std::size_t state_dim, std::size_t action_dim, std::size_t tasks) {
    return custom(2, 2, 256, state_dim, action_dim, tasks);
}

NetworkConfig NetworkConfig::deep(std::size_t state_dim, std::size_t action_dim, std::size_t tasks) {
    return custom(4, 4, 128, state_dim, action_dim, tasks);
}

NetworkConfig NetworkConfig::custom(std::size_t layers, std::size_t modules, std::size_t width, std::size_t state_dim,
                                    std::size_t action_dim, std::size_t tasks) {
    NetworkConfig c;
    c.layers = layers;
    c.modules = modules;
    c.module_width = width;
    c.embed_width = width;
    c.output_width = 2 * action_dim;
    c.tasks = tasks;
    c.state_dim = state_dim;
    c.action_dim = action_dim;
    return c;
}

NetworkConfig NetworkConfig::critic() const {
    NetworkConfig c = *this;
    c.output_width = 1;
    c.state_action_input = true;
    return c;
}

Tensor RoutingProbabilities::layer(std::size_t layer, std::size_t sample) const {
    const Tensor& w = weights.at(layer);
    std::vector<double> vals(modules * modules);
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = w.at(sample, k);
    return Tensor::matrix(modules, modules, std::move(vals));
}

RoutingProbabilities RoutingVars::values(std::size_t modules) const {
    RoutingProbabilities out;
    out.modules = modules;
    for (Var v : logits) out.logits.push_back(v.value());
    for (Var v : weights) out.weights.push_back(v.value());
    return out;
}

SoftModularNet::SoftModularNet(NetworkConfig config) : config_(config) { config_.validate(); }

std::size_t SoftModularNet::routing_up_slot(std::size_t l) const {
    if (l < 1 || l + 2 > config_.layers) throw ContractError("routing_up layer out of range");
    return 6 + 2 * (l - 1);
}

std::size_t SoftModularNet::routing_down_slot(std::size_t l) const {
    if (l < 1 || l + 1 > config_.layers) throw ContractError("routing_down layer out of range");
    return 6 + 2 * (config_.layers - 2) + 2 * (l - 1);
}

std::size_t SoftModularNet::module_slot(std::size_t l, std::size_t j) const {
    if (l < 1 || l > config_.layers || j >= config_.modules) throw ContractError("module index out of range");
    const std::size_t base = 6 + 2 * (config_.layers - 2) + 2 * (config_.layers - 1);
    return base + 2 * ((l - 1) * config_.modules + j);
}

ParamSet SoftModularNet::init(Rng& rng) const {
    const auto& c = config_;
    const std::size_t n2 = c.modules * c.modules;
    ParamSet p;
    p.add("state_encoder/0/w", uniform_fan_in(c.embed_width, c.input_dim(), rng));
    p.add("state_encoder/0/b", Tensor::zeros_vector(c.embed_width));
    p.add("state_encoder/1/w", uniform_fan_in(c.embed_width, c.embed_width, rng));
    p.add("state_encoder/1/b", Tensor::zeros_vector(c.embed_width));
    p.add("task_encoder/0/w", uniform_fan_in(c.embed_width, c.tasks, rng));
    p.add("task_encoder/0/b", Tensor::zeros_vector(c.embed_width));
    for (std::size_t l = 1; l + 2 <= c.layers; ++l) {
        p.add(slot_name("routing_up", l, "w"), uniform_fan_in(c.embed_width, n2, rng));
        p.add(slot_name("routing_up", l, "b"), Tensor::zeros_vector(c.embed_width));
    }
    for (std::size_t l = 1; l + 1 <= c.layers; ++l) {
        p.add(slot_name("routing_down", l, "w"), uniform_fan_in(n2, c.embed_width, rng));
        p.add(slot_name("routing_down", l, "b"), Tensor::zeros_vector(n2));
    }
    for (std::size_t l = 1; l <= c.layers; ++l) {
        const std::size_t in = l == 1 ? c.embed_width : c.module_width;
        const std::size_t out = l == c.layers ? c.output_width : c.module_width;
        for (std::size_t j = 0; j < c.modules; ++j) {
            const std::string prefix = "module/" + std::to_string(l) + "/" + std::to_string(j);
            p.add(prefix + "/w", uniform_fan_in(out, in, rng));
            p.add(prefix + "/b", Tensor::zeros_vector(out));
        }
    }
    return p;
}

std::size_t SoftModularNet::param_count() const {
    const auto& c = config_;
    const std::size_t D = c.embed_width, d = c.module_width, n = c.modules, n2 = n * n, L = c.layers;
    const std::size_t encoders = (c.input_dim() * D + D) + (D * D + D) + (c.tasks * D + D);
    const std::size_t routing = (L - 2) * (n2 * D + D) + (L - 1) * (D * n2 + n2);
    const std::size_t modules = n * ((D * d + d) + (L - 2) * (d * d + d) + (d * c.output_width + c.output_width));
    return encoders + routing + modules;
}

Var SoftModularNet::encode_state(Bound& params, Var x) const {
    if (x.value().cols() != config_.input_dim()) {
        throw DimensionError("state encoder expects input width " + std::to_string(config_.input_dim()) + ", got " +
                             x.value().shape_string());
    }
    Var h = relu(affine(x, params[state_encoder_slot(0)], params[state_encoder_slot(0) + 1]));
    return relu(affine(h, params[state_encoder_slot(1)], params[state_encoder_slot(1) + 1]));
}

Var SoftModularNet::encode_task(Bound& params, Var tasks) const {
    require_one_hot(tasks.value(), config_.tasks);
    return affine(tasks, params[task_encoder_slot()], params[task_encoder_slot() + 1]);
}

RoutingVars SoftModularNet::routing_forward(Bound& params, Var state_embed, Var task_embed) const {
    const std::size_t n = config_.modules;
    const std::size_t batch = state_embed.value().rows();
    Var joint = hadamard(state_embed, task_embed);

    RoutingVars out;
    Var logits = affine(relu(joint), params[routing_down_slot(1)], params[routing_down_slot(1) + 1]);
    out.logits.push_back(logits);
    for (std::size_t l = 1; l + 2 <= config_.layers; ++l) {
        Var up = affine(logits, params[routing_up_slot(l)], params[routing_up_slot(l) + 1]);
        Var mixed = relu(hadamard(up, joint));
        logits = affine(mixed, params[routing_down_slot(l + 1)], params[routing_down_slot(l + 1) + 1]);
        out.logits.push_back(logits);
    }
    for (Var p : out.logits) {
        out.weights.push_back(reshape(softmax_rows(reshape(p, batch * n, n)), batch, n * n));
    }
    return out;
}

Var SoftModularNet::base_forward(Bound& params, Var state_embed, const RoutingVars& routing) const {
    const std::size_t n = config_.modules;
    const std::size_t L = config_.layers;
    if (routing.weights.size() != L - 1) throw ContractError("routing depth does not match module layers");

    std::vector<Var> inputs(n, state_embed);
    for (std::size_t l = 1; l < L; ++l) {
        std::vector<Var> outputs;
        outputs.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t slot = module_slot(l, j);
            outputs.push_back(relu(affine(inputs[j], params[slot], params[slot + 1])));
        }
        Var w = routing.weights[l - 1];
        for (std::size_t i = 0; i < n; ++i) {
            Var acc = scale_rows(outputs[0], slice_cols(w, i * n, 1));
            for (std::size_t j = 1; j < n; ++j) acc = add(acc, scale_rows(outputs[j], slice_cols(w, i * n + j, 1)));
            inputs[i] = acc;
        }
    }
    Var out = affine(inputs[0], params[module_slot(L, 0)], params[module_slot(L, 0) + 1]);
    for (std::size_t j = 1; j < n; ++j) {
        out = add(out, affine(inputs[j], params[module_slot(L, j)], params[module_slot(L, j) + 1]));
    }
    return out;
}

Var SoftModularNet::forward_with_routing(Bound& params, Var x, Var tasks, RoutingVars* routing) const {
    Var f = encode_state(params, x);
    Var h = encode_task(params, tasks);
    RoutingVars r = routing_forward(params, f, h);
    Var out = base_forward(params, f, r);
    if (routing != nullptr) *routing = std::move(r);
    return out;
}

Var SoftModularNet::forward(Bound& params, Var x, Var tasks) const {
    return forward_with_routing(params, x, tasks, nullptr);
}

Tensor flatten_routing(const RoutingProbabilities& routing, std::size_t sample) {
    std::vector<double> flat;
    for (const Tensor& w : routing.weights) {
        for (std::size_t k = 0; k < w.cols(); ++k) flat.push_back(w.at(sample, k));
    }
    return Tensor::vector(std::move(flat));
}

PolicyForward policy_forward(const SoftModularNet& net, const ParamSet& params, const Tensor& state,
                             std::size_t task_id) {
    if (net.config().state_action_input) throw ContractError("policy_forward on a critic network");
    Graph g;
    Bound bound(g, params, false);
    RoutingVars routing;
    Var raw = net.forward_with_routing(bound, g.constant(state), g.constant(one_hot(task_id, net.task_count())),
                                       &routing);
    HeadVars head = split_head(raw, net.config().action_dim);
    PolicyForward out;
    out.head = {head.mean.value(), head.log_std.value()};
    out.routing = routing.values(net.config().modules);
    return out;
}

double q_forward(const SoftModularNet& net, const ParamSet& params, const Tensor& state, const Tensor& action,
                 std::size_t task_id) {
    if (!net.config().state_action_input) throw ContractError("q_forward on a policy network");
    Graph g;
    Bound bound(g, params, false);
    Var x = concat_cols({g.constant(state), g.constant(action)});
    return net.forward(bound, x, g.constant(one_hot(task_id, net.task_count()))).value().item();
}

}  // namespace softmod
