#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "softmod/modular_net.hpp"

namespace softmod {

// Widths of the comparison architectures. Defaults follow the published
// MT-SAC setup (3 hidden layers of 400 units).
struct BaselineConfig {
    std::size_t hidden_width = 400;
    std::size_t hidden_layers = 3;  // MT-SAC depth; multi-head uses depth-1 trunk layers plus a head
    std::size_t experts = 4;
    std::size_t gate_width = 256;   // mixture-of-experts gate hidden units

    bool operator==(const BaselineConfig&) const = default;
};

// MLP on [x | z].
class MtSacNet final : public Network {
public:
    MtSacNet(std::size_t input_dim, std::size_t output_dim, std::size_t tasks, BaselineConfig config);

    ArchKind kind() const override { return ArchKind::MtSac; }
    std::size_t input_dim() const override { return input_dim_; }
    std::size_t output_dim() const override { return output_dim_; }
    std::size_t task_count() const override { return tasks_; }
    ParamSet init(Rng& rng) const override;
    std::size_t param_count() const override { return mlp_.param_count(); }
    Var forward(Bound& params, Var x, Var tasks) const override;

private:
    std::size_t input_dim_, output_dim_, tasks_;
    Mlp mlp_;
};

// Shared trunk on [x | z] followed by one linear output head per task.
class MultiHeadNet final : public Network {
public:
    MultiHeadNet(std::size_t input_dim, std::size_t output_dim, std::size_t tasks, BaselineConfig config);

    ArchKind kind() const override { return ArchKind::MultiHead; }
    std::size_t input_dim() const override { return input_dim_; }
    std::size_t output_dim() const override { return output_dim_; }
    std::size_t task_count() const override { return tasks_; }
    ParamSet init(Rng& rng) const override;
    std::size_t param_count() const override;
    Var forward(Bound& params, Var x, Var tasks) const override;

    std::size_t head_slot(std::size_t task) const { return trunk_.end_slot() + 2 * task; }
    std::size_t trunk_slots() const { return trunk_.slot_count(); }

private:
    std::size_t input_dim_, output_dim_, tasks_;
    Mlp trunk_;
    std::size_t trunk_width_;
};

// Experts shaped like MtSacNet, combined by a softmax gate on [x | z].
class MixtureOfExpertsNet final : public Network {
public:
    MixtureOfExpertsNet(std::size_t input_dim, std::size_t output_dim, std::size_t tasks, BaselineConfig config);

    ArchKind kind() const override { return ArchKind::MixExpert; }
    std::size_t input_dim() const override { return input_dim_; }
    std::size_t output_dim() const override { return output_dim_; }
    std::size_t task_count() const override { return tasks_; }
    ParamSet init(Rng& rng) const override;
    std::size_t param_count() const override;
    Var forward(Bound& params, Var x, Var tasks) const override;
    // Gate probabilities [B x experts].
    Var gate(Bound& params, Var x, Var tasks) const;
    Var expert(Bound& params, std::size_t e, Var x, Var tasks) const;

    std::size_t experts() const { return experts_.size(); }

private:
    std::size_t input_dim_, output_dim_, tasks_;
    std::vector<Mlp> experts_;
    Mlp gate_;
};

// Everything needed to rebuild a policy/critic pair for a task suite.
struct ModelSpec {
    ArchKind kind = ArchKind::SoftModular;
    NetworkConfig modular;      // soft-modular topology (policy form)
    BaselineConfig baseline;

    std::size_t state_dim() const { return modular.state_dim; }
    std::size_t action_dim() const { return modular.action_dim; }
    std::size_t tasks() const { return modular.tasks; }

    bool operator==(const ModelSpec&) const = default;
};

std::unique_ptr<Network> make_policy_network(const ModelSpec& spec);
std::unique_ptr<Network> make_critic_network(const ModelSpec& spec);

// Tensor-level single-sample entry points.
PolicyHead mtsac_forward(const MtSacNet& net, const ParamSet& params, const Tensor& state, std::size_t task_id);
PolicyHead multihead_forward(const MultiHeadNet& net, const ParamSet& params, const Tensor& state,
                             std::size_t task_id);
PolicyHead moe_forward(const MixtureOfExpertsNet& net, const ParamSet& params, const Tensor& state,
                       std::size_t task_id);

}  // namespace softmod
