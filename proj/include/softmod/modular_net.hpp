#pragma once

#include <cstddef>
#include <vector>

#include "softmod/network.hpp"

namespace softmod {

// Architecture hyperparameters of one soft-modularized network.
struct NetworkConfig {
    std::size_t layers = 2;          // L, module layers (>= 2)
    std::size_t modules = 2;         // n, modules per layer
    std::size_t module_width = 256;  // d
    std::size_t embed_width = 256;   // D, state/task embedding width
    std::size_t output_width = 2;    // o; 2 * action_dim for policies, 1 for critics
    std::size_t tasks = 1;           // M
    std::size_t state_dim = 1;
    std::size_t action_dim = 1;
    bool state_action_input = false;  // critics encode [state | action]

    std::size_t input_dim() const { return state_dim + (state_action_input ? action_dim : 0); }
    std::size_t routing_layers() const { return layers - 1; }
    std::size_t trace_length() const { return (layers - 1) * modules * modules; }
    void validate() const;

    // L=2, n=2, d=D=256.
    static NetworkConfig shallow(std::size_t state_dim, std::size_t action_dim, std::size_t tasks);
    // L=4, n=4, d=D=128.
    static NetworkConfig deep(std::size_t state_dim, std::size_t action_dim, std::size_t tasks);
    static NetworkConfig custom(std::size_t layers, std::size_t modules, std::size_t width, std::size_t state_dim,
                                std::size_t action_dim, std::size_t tasks);

    // Same topology with [state | action] input and a single output.
    NetworkConfig critic() const;

    bool operator==(const NetworkConfig&) const = default;
};

// Raw routing logits p^l and their row-softmax, one entry per routing layer.
// Each tensor is [B x n*n], row-major with the destination module as the
// major index: entry (i, j) weighs source module j of layer l into
// destination module i of layer l+1.
struct RoutingProbabilities {
    std::size_t modules = 0;
    std::vector<Tensor> logits;
    std::vector<Tensor> weights;

    std::size_t batch() const { return weights.empty() ? 0 : weights.front().rows(); }
    // Normalized weights of routing layer `layer` (0-based) for one sample, as [n x n].
    Tensor layer(std::size_t layer, std::size_t sample = 0) const;
};

struct RoutingVars {
    std::vector<Var> logits;
    std::vector<Var> weights;

    RoutingProbabilities values(std::size_t modules) const;
};

// Base network of L x n modules whose inter-layer connections are weighted by
// a routing network conditioned on the state and task embeddings.
//
// Parameters (in slot order):
//   state_encoder/0/{w,b}, state_encoder/1/{w,b}   input -> D -> D
//   task_encoder/0/{w,b}                           M -> D
//   routing_up/<l>/{w,b}     l = 1..L-2            n^2 -> D
//   routing_down/<l>/{w,b}   l = 1..L-1            D -> n^2
//   module/<l>/<j>/{w,b}     l = 1..L, j = 0..n-1  D->d, d->d, ..., d->o
class SoftModularNet final : public Network {
public:
    explicit SoftModularNet(NetworkConfig config);

    ArchKind kind() const override { return ArchKind::SoftModular; }
    std::size_t input_dim() const override { return config_.input_dim(); }
    std::size_t output_dim() const override { return config_.output_width; }
    std::size_t task_count() const override { return config_.tasks; }
    ParamSet init(Rng& rng) const override;
    std::size_t param_count() const override;
    Var forward(Bound& params, Var x, Var tasks) const override;

    const NetworkConfig& config() const { return config_; }

    // f(s): two affine+ReLU layers.
    Var encode_state(Bound& params, Var x) const;
    // h(z): one affine layer on a one-hot task embedding.
    Var encode_task(Bound& params, Var tasks) const;
    RoutingVars routing_forward(Bound& params, Var state_embed, Var task_embed) const;
    Var base_forward(Bound& params, Var state_embed, const RoutingVars& routing) const;
    Var forward_with_routing(Bound& params, Var x, Var tasks, RoutingVars* routing) const;

    // Slot indices, exposed for tests that build permuted or hand-set weights.
    std::size_t state_encoder_slot(std::size_t layer) const { return 2 * layer; }
    std::size_t task_encoder_slot() const { return 4; }
    std::size_t routing_up_slot(std::size_t l) const;    // l = 1..L-2
    std::size_t routing_down_slot(std::size_t l) const;  // l = 1..L-1
    std::size_t module_slot(std::size_t l, std::size_t j) const;  // l = 1..L

private:
    NetworkConfig config_;
};

// Concatenation of every normalized routing layer for sample `sample`;
// length (L-1) * n^2.
Tensor flatten_routing(const RoutingProbabilities& routing, std::size_t sample = 0);

struct PolicyForward {
    PolicyHead head;
    RoutingProbabilities routing;
};

// Single-sample evaluation: state [state_dim], task id in [0, M).
PolicyForward policy_forward(const SoftModularNet& net, const ParamSet& params, const Tensor& state,
                             std::size_t task_id);
double q_forward(const SoftModularNet& net, const ParamSet& params, const Tensor& state, const Tensor& action,
                 std::size_t task_id);

}  // namespace softmod
