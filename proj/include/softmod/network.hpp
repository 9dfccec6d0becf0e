#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "softmod/autodiff.hpp"

namespace softmod {

using Rng = std::mt19937_64;

enum class ArchKind { SoftModular, MtSac, MultiHead, MixExpert };

std::string to_string(ArchKind kind);
ArchKind arch_kind_from_string(const std::string& name);

// A function approximator conditioned on a task one-hot. Policies map
// states to [mean | log-std]; critics map [state | action] to one value.
// Inputs are batched row-wise: x is [B x input_dim], tasks is [B x M].
class Network {
public:
    virtual ~Network() = default;

    virtual ArchKind kind() const = 0;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t output_dim() const = 0;
    virtual std::size_t task_count() const = 0;

    virtual ParamSet init(Rng& rng) const = 0;
    // Closed-form count; tests compare it against init().scalar_count().
    virtual std::size_t param_count() const = 0;

    virtual Var forward(Bound& params, Var x, Var tasks) const = 0;
};

// Plain fully connected stack with ReLU between layers (none after the last).
// Parameters are named `<prefix>/<layer>/{w,b}` and occupy consecutive
// slots of the owning ParamSet starting at `first_slot`.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string prefix, std::vector<std::size_t> widths, std::size_t first_slot);

    void append_params(ParamSet& params, Rng& rng) const;
    Var forward(Bound& params, Var x) const;

    std::size_t param_count() const;
    std::size_t slot_count() const { return 2 * (widths_.size() - 1); }
    std::size_t end_slot() const { return first_slot_ + slot_count(); }
    const std::vector<std::size_t>& widths() const { return widths_; }

private:
    std::string prefix_;
    std::vector<std::size_t> widths_;
    std::size_t first_slot_ = 0;
};

// Weight in U(-sqrt(1/fan_in), sqrt(1/fan_in)), zero bias.
Tensor uniform_fan_in(std::size_t out, std::size_t in, Rng& rng);

// Rows of `tasks` must each be a one-hot of width M.
void require_one_hot(const Tensor& tasks, std::size_t task_count);
Tensor one_hot(std::size_t task_id, std::size_t task_count);
Tensor one_hot_batch(const std::vector<int>& task_ids, std::size_t task_count);

// ---- tanh-squashed Gaussian policy head ------------------------------------

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

struct PolicyHead {
    Tensor mean;     // [B x action_dim]
    Tensor log_std;  // clamped into [kLogStdMin, kLogStdMax]
};

struct HeadVars {
    Var mean;
    Var log_std;
};

// Splits raw [B x 2A] network output into mean and clamped log-std.
HeadVars split_head(Var raw, std::size_t action_dim);

struct SampleVars {
    Var action;    // [B x A], tanh(mean + std * noise)
    Var log_prob;  // [B x 1]
};

// Reparameterized sample; `noise` is a standard-normal draw of shape [B x A].
SampleVars sample_action(const HeadVars& head, const Tensor& noise);

struct PolicySample {
    Tensor action;
    Tensor log_prob;
};
PolicySample policy_sample(const PolicyHead& head, const Tensor& noise);

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace softmod
