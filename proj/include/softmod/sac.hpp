#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "softmod/adam.hpp"
#include "softmod/baselines.hpp"
#include "softmod/envs.hpp"

namespace softmod {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;  // true terminal only; horizon truncation bootstraps
    int task_id = 0;
};

// Thrown by sample_batch while some task buffer holds fewer than B/M transitions.
class WarmupIncomplete : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Batch {
    Tensor states;       // [B x S]
    Tensor actions;      // [B x A]
    Tensor rewards;      // [B x 1]
    Tensor next_states;  // [B x S]
    Tensor dones;        // [B x 1], 1.0 for terminal
    Tensor tasks;        // [B x M] one-hot
    std::vector<int> task_ids;

    std::size_t size() const { return task_ids.size(); }
};

// One FIFO ring buffer per task.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t tasks, std::size_t capacity_per_task, std::size_t state_dim, std::size_t action_dim);

    void add(const Transition& t);
    std::size_t size(std::size_t task) const { return rings_.at(task).size; }
    std::size_t tasks() const { return rings_.size(); }
    std::size_t capacity() const { return capacity_; }
    Transition get(std::size_t task, std::size_t index) const;

private:
    friend Batch sample_batch(const ReplayBuffer& buffer, std::size_t batch_size, Rng& rng);
    struct Ring {
        Matrix states, actions, next_states;
        std::vector<double> rewards;
        std::vector<char> dones;
        std::size_t cursor = 0;
        std::size_t size = 0;
    };
    std::size_t capacity_, state_dim_, action_dim_;
    std::vector<Ring> rings_;
};

// Stratified: exactly batch_size / M transitions per task, uniform with
// replacement within each task's filled region.
Batch sample_batch(const ReplayBuffer& buffer, std::size_t batch_size, Rng& rng);

// Per-task entropy temperatures, stored as log alpha so alpha > 0 always.
// With `shared`, one temperature serves every task.
class TemperatureSet {
public:
    TemperatureSet() = default;
    TemperatureSet(std::size_t tasks, double initial_alpha, double target_entropy, bool shared);

    std::size_t tasks() const { return tasks_; }
    bool shared() const { return shared_; }
    double alpha(std::size_t task) const;
    std::vector<double> alphas() const;
    double target_entropy() const { return target_entropy_; }
    std::size_t slot(std::size_t task) const { return shared_ ? 0 : task; }

    // One scalar parameter per temperature, named `temperature/<i>/log_alpha`.
    ParamSet& log_alpha() { return log_alpha_; }
    const ParamSet& log_alpha() const { return log_alpha_; }

private:
    std::size_t tasks_ = 0;
    double target_entropy_ = 0.0;
    bool shared_ = false;
    ParamSet log_alpha_;
};

// w_i = exp(-alpha_i) / sum_j exp(-alpha_j).
struct TaskWeights {
    std::vector<double> w;
    double operator[](std::size_t i) const { return w.at(i); }
};

TaskWeights task_weights(std::span<const double> alphas);
TaskWeights task_weights(const TemperatureSet& temps);
TaskWeights uniform_weights(std::size_t tasks);

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;
    std::size_t batch_size = 128;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    double initial_alpha = 0.2;
    bool twin_q = true;
    bool balance = true;        // temperature-derived task weights; uniform 1/M otherwise
    bool shared_alpha = false;  // a single temperature for every task
    std::size_t buffer_capacity = 100000;  // per task
    std::size_t warmup_steps = 1500;       // random-action steps per task
};

// Everything the multi-task SAC update owns.
class Trainer {
public:
    Trainer(ModelSpec spec, SacConfig config, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    const SacConfig& config() const { return config_; }
    const Network& policy_net() const { return *policy_net_; }
    const Network& critic_net() const { return *critic_net_; }
    std::size_t tasks() const { return spec_.tasks(); }
    std::size_t action_dim() const { return spec_.action_dim(); }
    std::size_t state_dim() const { return spec_.state_dim(); }

    ParamSet policy;
    ParamSet q1, q2;
    ParamSet q1_target, q2_target;
    TemperatureSet temps;
    AdamState policy_opt, q1_opt, q2_opt;
    std::vector<AdamState> alpha_opts;  // one per temperature
    std::int64_t steps = 0;

    void set_learning_rates(double actor, double critic, double alpha);

private:
    ModelSpec spec_;
    SacConfig config_;
    std::unique_ptr<Network> policy_net_;
    std::unique_ptr<Network> critic_net_;
};

// y = r + gamma (1 - done) (min_k Qtarget_k(s', a') - alpha_task log pi(a'|s')),
// a' drawn from the current policy with `next_noise` [B x A]. No gradient.
Tensor critic_target(const Batch& batch, const Trainer& trainer, const Tensor& next_noise);

// sum_b w_task(b) [ (Q1 - y)^2 + (Q2 - y)^2 ] / B, tracking q1 and q2.
Var critic_loss(Graph& g, const Batch& batch, const Trainer& trainer, const Tensor& targets, const TaskWeights& w);

struct ActorLoss {
    Var loss;
    Tensor log_probs;  // detached, [B x 1]
};
// mean_b w_task(b) (alpha_task log pi(a~|s) - min_k Q_k(s, a~)); critics frozen.
ActorLoss actor_loss(Graph& g, const Batch& batch, const Trainer& trainer, const TaskWeights& w,
                     const Tensor& noise);

struct TemperatureLoss {
    Var loss;
    std::vector<bool> active;  // temperature slots with samples in the batch
};
// sum_i mean_{b in task i} ( -alpha_i log pi - alpha_i H ), tracking log alpha.
TemperatureLoss temperature_loss(Graph& g, const Batch& batch, const Trainer& trainer, const Tensor& log_probs);

// target <- target + tau (online - target), for both critics.
void polyak_update(Trainer& trainer);

struct StepMetrics {
    std::int64_t step = 0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha_loss = 0.0;
    std::vector<double> alphas;
    std::vector<double> weights;
    double mean_q = 0.0;
};

// Sample -> weights -> critic update -> actor update -> temperature update -> polyak.
StepMetrics train_step(Trainer& trainer, const ReplayBuffer& buffer, Rng& rng);

// Chooses actions for a batch of observations [K x S] with tasks.
using ActionSource = std::function<Tensor(const Tensor& observations, const std::vector<int>& task_ids)>;

ActionSource stochastic_policy(const Trainer& trainer, Rng& rng);
ActionSource deterministic_policy(const Network& net, const ParamSet& params, std::size_t action_dim);
ActionSource uniform_random_policy(std::size_t action_dim, Rng& rng);

// Round-robin environment driver: one environment per task, persistent
// episodes across calls.
class Collector {
public:
    Collector(std::vector<std::unique_ptr<Environment>> envs, Rng& rng);

    // Each task advances `steps_per_task` steps; returns transitions appended.
    std::size_t collect(ReplayBuffer& buffer, std::size_t steps_per_task, const ActionSource& policy, Rng& rng);

    std::size_t tasks() const { return envs_.size(); }
    const Environment& env(std::size_t task) const { return *envs_.at(task); }

private:
    std::vector<std::unique_ptr<Environment>> envs_;
    std::vector<std::vector<double>> observations_;
};

}  // namespace softmod
