#include "softmod/sac.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace softmod {

namespace {

using Index = Eigen::Index;

Var critic_forward(const Network& net, Bound& params, Var states, Var actions, Var tasks) {
    return net.forward(params, concat_cols({states, actions}), tasks);
}

// Column of per-row values picked by task id.
Tensor per_row(const std::vector<int>& task_ids, const std::vector<double>& per_task) {
    Matrix col(static_cast<Index>(task_ids.size()), 1);
    for (std::size_t r = 0; r < task_ids.size(); ++r) col(static_cast<Index>(r), 0) = per_task.at(task_ids[r]);
    return Tensor(std::move(col));
}

std::string batch_diagnostics(const Batch& b, const Trainer& t) {
    std::ostringstream os;
    os << "batch size " << b.size() << ", reward mean " << b.rewards.mat().mean() << " min "
       << b.rewards.mat().minCoeff() << " max " << b.rewards.mat().maxCoeff() << ", |state| max "
       << b.states.mat().cwiseAbs().maxCoeff() << ", |action| max " << b.actions.mat().cwiseAbs().maxCoeff()
       << ", terminal fraction " << b.dones.mat().mean() << ", alphas";
    for (double a : t.temps.alphas()) os << " " << a;
    return os.str();
}

void require_finite_loss(double value, const char* what, const Batch& b, const Trainer& t) {
    if (!std::isfinite(value)) {
        throw TrainingError(std::string("non-finite ") + what + " at step " + std::to_string(t.steps) + ": " +
                            batch_diagnostics(b, t));
    }
}

}  // namespace

// ---- replay -----------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t tasks, std::size_t capacity_per_task, std::size_t state_dim,
                           std::size_t action_dim)
    : capacity_(capacity_per_task), state_dim_(state_dim), action_dim_(action_dim), rings_(tasks) {
    if (tasks == 0 || capacity_per_task == 0) throw ConfigError("replay buffer needs tasks and capacity");
    for (auto& r : rings_) {
        r.states = Matrix::Zero(static_cast<Index>(capacity_), static_cast<Index>(state_dim));
        r.next_states = Matrix::Zero(static_cast<Index>(capacity_), static_cast<Index>(state_dim));
        r.actions = Matrix::Zero(static_cast<Index>(capacity_), static_cast<Index>(action_dim));
        r.rewards.assign(capacity_, 0.0);
        r.dones.assign(capacity_, 0);
    }
}

void ReplayBuffer::add(const Transition& t) {
    if (t.task_id < 0 || static_cast<std::size_t>(t.task_id) >= rings_.size()) {
        throw ContractError("transition task id " + std::to_string(t.task_id) + " out of range");
    }
    if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim_) {
        throw DimensionError("transition dimensions do not match replay buffer");
    }
    Ring& r = rings_[static_cast<std::size_t>(t.task_id)];
    const auto row = static_cast<Index>(r.cursor);
    for (std::size_t k = 0; k < state_dim_; ++k) {
        r.states(row, static_cast<Index>(k)) = t.state[k];
        r.next_states(row, static_cast<Index>(k)) = t.next_state[k];
    }
    for (std::size_t k = 0; k < action_dim_; ++k) r.actions(row, static_cast<Index>(k)) = t.action[k];
    r.rewards[r.cursor] = t.reward;
    r.dones[r.cursor] = t.done ? 1 : 0;
    r.cursor = (r.cursor + 1) % capacity_;
    r.size = std::min(r.size + 1, capacity_);
}

Transition ReplayBuffer::get(std::size_t task, std::size_t index) const {
    const Ring& r = rings_.at(task);
    if (index >= r.size) throw ContractError("replay index out of range");
    const auto row = static_cast<Index>(index);
    Transition t;
    t.state.assign(r.states.row(row).data(), r.states.row(row).data() + state_dim_);
    t.next_state.assign(r.next_states.row(row).data(), r.next_states.row(row).data() + state_dim_);
    t.action.assign(r.actions.row(row).data(), r.actions.row(row).data() + action_dim_);
    t.reward = r.rewards[index];
    t.done = r.dones[index] != 0;
    t.task_id = static_cast<int>(task);
    return t;
}

Batch sample_batch(const ReplayBuffer& buffer, std::size_t batch_size, Rng& rng) {
    const std::size_t m = buffer.tasks();
    if (batch_size == 0 || batch_size % m != 0) {
        throw ConfigError("batch size " + std::to_string(batch_size) + " must be a positive multiple of the task count " +
                          std::to_string(m));
    }
    const std::size_t per_task = batch_size / m;
    for (std::size_t i = 0; i < m; ++i) {
        if (buffer.size(i) < per_task) {
            throw WarmupIncomplete("warmup incomplete: task " + std::to_string(i) + " holds " +
                                   std::to_string(buffer.size(i)) + " of " + std::to_string(per_task) +
                                   " transitions");
        }
    }
    const auto B = static_cast<Index>(batch_size);
    const auto S = static_cast<Index>(buffer.state_dim_);
    const auto A = static_cast<Index>(buffer.action_dim_);
    Matrix states(B, S), next_states(B, S), actions(B, A), rewards(B, 1), dones(B, 1);
    std::vector<int> ids;
    ids.reserve(batch_size);
    Index row = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& ring = buffer.rings_[i];
        std::uniform_int_distribution<std::size_t> pick(0, ring.size - 1);
        for (std::size_t k = 0; k < per_task; ++k, ++row) {
            const std::size_t idx = pick(rng);
            const auto src = static_cast<Index>(idx);
            states.row(row) = ring.states.row(src);
            next_states.row(row) = ring.next_states.row(src);
            actions.row(row) = ring.actions.row(src);
            rewards(row, 0) = ring.rewards[idx];
            dones(row, 0) = ring.dones[idx] ? 1.0 : 0.0;
            ids.push_back(static_cast<int>(i));
        }
    }
    Batch b;
    b.states = Tensor(std::move(states));
    b.next_states = Tensor(std::move(next_states));
    b.actions = Tensor(std::move(actions));
    b.rewards = Tensor(std::move(rewards));
    b.dones = Tensor(std::move(dones));
    b.tasks = one_hot_batch(ids, m);
    b.task_ids = std::move(ids);
    return b;
}

// ---- temperatures and weights ---------------------------------------------

TemperatureSet::TemperatureSet(std::size_t tasks, double initial_alpha, double target_entropy, bool shared)
    : tasks_(tasks), target_entropy_(target_entropy), shared_(shared) {
    if (tasks == 0) throw ConfigError("temperature set needs at least one task");
    if (!(initial_alpha > 0.0)) throw ConfigError("initial temperature must be positive");
    const std::size_t slots = shared ? 1 : tasks;
    for (std::size_t i = 0; i < slots; ++i) {
        log_alpha_.add("temperature/" + std::to_string(i) + "/log_alpha", Tensor::vector({std::log(initial_alpha)}));
    }
}

double TemperatureSet::alpha(std::size_t task) const {
    if (task >= tasks_) throw ContractError("temperature task out of range");
    return std::exp(log_alpha_[slot(task)][0]);
}

std::vector<double> TemperatureSet::alphas() const {
    std::vector<double> out(tasks_);
    for (std::size_t i = 0; i < tasks_; ++i) out[i] = alpha(i);
    return out;
}

TaskWeights task_weights(std::span<const double> alphas) {
    if (alphas.empty()) throw ContractError("task_weights of an empty temperature set");
    require_finite(alphas, "task_weights");
    const double lowest = *std::min_element(alphas.begin(), alphas.end());
    TaskWeights out;
    out.w.resize(alphas.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        out.w[i] = std::exp(-(alphas[i] - lowest));
        total += out.w[i];
    }
    for (double& v : out.w) v /= total;
    return out;
}

TaskWeights task_weights(const TemperatureSet& temps) {
    const auto a = temps.alphas();
    return task_weights(std::span<const double>(a));
}

TaskWeights uniform_weights(std::size_t tasks) {
    return {std::vector<double>(tasks, 1.0 / static_cast<double>(tasks))};
}

// ---- trainer ----------------------------------------------------------------

Trainer::Trainer(ModelSpec spec, SacConfig config, std::uint64_t seed)
    : spec_(std::move(spec)),
      config_(config),
      policy_net_(make_policy_network(spec_)),
      critic_net_(make_critic_network(spec_)) {
    if (!(config_.tau > 0.0 && config_.tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    Rng rng(seed);
    policy = policy_net_->init(rng);
    q1 = critic_net_->init(rng);
    q2 = critic_net_->init(rng);
    q1_target = q1;
    q2_target = q2;
    temps = TemperatureSet(spec_.tasks(), config_.initial_alpha, -static_cast<double>(spec_.action_dim()),
                           config_.shared_alpha);
    policy_opt = AdamState(policy, {config_.actor_lr});
    q1_opt = AdamState(q1, {config_.critic_lr});
    q2_opt = AdamState(q2, {config_.critic_lr});
    for (std::size_t i = 0; i < temps.log_alpha().size(); ++i) {
        ParamSet one;
        one.add(temps.log_alpha().name(i), temps.log_alpha()[i]);
        alpha_opts.emplace_back(one, AdamConfig{config_.alpha_lr});
    }
}

void Trainer::set_learning_rates(double actor, double critic, double alpha) {
    policy_opt.set_learning_rate(actor);
    q1_opt.set_learning_rate(critic);
    q2_opt.set_learning_rate(critic);
    for (auto& o : alpha_opts) o.set_learning_rate(alpha);
}

Tensor critic_target(const Batch& batch, const Trainer& trainer, const Tensor& next_noise) {
    Graph g;
    Bound policy(g, trainer.policy, false);
    Var s2 = g.constant(batch.next_states);
    Var tasks = g.constant(batch.tasks);
    HeadVars head = split_head(trainer.policy_net().forward(policy, s2, tasks), trainer.action_dim());
    SampleVars next = sample_action(head, next_noise);

    Bound t1(g, trainer.q1_target, false);
    Matrix q = critic_forward(trainer.critic_net(), t1, s2, next.action, tasks).value().mat();
    if (trainer.config().twin_q) {
        Bound t2(g, trainer.q2_target, false);
        q = q.cwiseMin(critic_forward(trainer.critic_net(), t2, s2, next.action, tasks).value().mat());
    }
    const Tensor alpha = per_row(batch.task_ids, trainer.temps.alphas());
    const Matrix soft = q.array() - alpha.mat().array() * next.log_prob.value().mat().array();
    Matrix y = batch.rewards.mat().array() +
               trainer.config().gamma * (1.0 - batch.dones.mat().array()) * soft.array();
    return Tensor(std::move(y));
}

Var critic_loss(Graph& g, const Batch& batch, const Trainer& trainer, const Tensor& targets, const TaskWeights& w) {
    if (targets.rows() != batch.size()) throw DimensionError("critic targets do not match batch size");
    Var s = g.constant(batch.states);
    Var a = g.constant(batch.actions);
    Var tasks = g.constant(batch.tasks);
    Var y = g.constant(targets);
    Var weights = g.constant(per_row(batch.task_ids, w.w));

    Bound b1(g, trainer.q1, true);
    Var err = square(sub(critic_forward(trainer.critic_net(), b1, s, a, tasks), y));
    if (trainer.config().twin_q) {
        Bound b2(g, trainer.q2, true);
        err = add(err, square(sub(critic_forward(trainer.critic_net(), b2, s, a, tasks), y)));
    }
    return scale(sum(hadamard(weights, err)), 1.0 / static_cast<double>(batch.size()));
}

ActorLoss actor_loss(Graph& g, const Batch& batch, const Trainer& trainer, const TaskWeights& w,
                     const Tensor& noise) {
    Var s = g.constant(batch.states);
    Var tasks = g.constant(batch.tasks);
    Bound policy(g, trainer.policy, true);
    HeadVars head = split_head(trainer.policy_net().forward(policy, s, tasks), trainer.action_dim());
    SampleVars sample = sample_action(head, noise);

    Bound c1(g, trainer.q1, false);
    Var q = critic_forward(trainer.critic_net(), c1, s, sample.action, tasks);
    if (trainer.config().twin_q) {
        Bound c2(g, trainer.q2, false);
        q = minimum(q, critic_forward(trainer.critic_net(), c2, s, sample.action, tasks));
    }
    Var alpha = g.constant(per_row(batch.task_ids, trainer.temps.alphas()));
    Var weights = g.constant(per_row(batch.task_ids, w.w));
    Var per_sample = sub(hadamard(alpha, sample.log_prob), q);
    Var loss = scale(sum(hadamard(weights, per_sample)), 1.0 / static_cast<double>(batch.size()));
    return {loss, sample.log_prob.value()};
}

TemperatureLoss temperature_loss(Graph& g, const Batch& batch, const Trainer& trainer, const Tensor& log_probs) {
    const TemperatureSet& temps = trainer.temps;
    const std::size_t slots = temps.log_alpha().size();
    std::vector<double> total(slots, 0.0);
    std::vector<std::size_t> count(slots, 0);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const std::size_t k = temps.slot(static_cast<std::size_t>(batch.task_ids[r]));
        total[k] += log_probs.at(r, 0) + temps.target_entropy();
        ++count[k];
    }
    Bound log_alpha(g, temps.log_alpha(), true);
    TemperatureLoss out;
    out.active.assign(slots, false);
    for (std::size_t k = 0; k < slots; ++k) {
        if (count[k] == 0) continue;
        out.active[k] = true;
        const double mean_term = total[k] / static_cast<double>(count[k]);
        Var term = scale(exp(log_alpha[k]), -mean_term);
        out.loss = out.loss.valid() ? add(out.loss, term) : term;
    }
    if (!out.loss.valid()) out.loss = g.constant(Tensor::scalar(0.0));
    return out;
}

void polyak_update(Trainer& trainer) {
    const double tau = trainer.config().tau;
    auto blend = [tau](ParamSet& target, const ParamSet& online) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            Matrix m = target[i].mat() + tau * (online[i].mat() - target[i].mat());
            target.set(i, Tensor(std::move(m), target[i].rank()));
        }
    };
    blend(trainer.q1_target, trainer.q1);
    blend(trainer.q2_target, trainer.q2);
}

StepMetrics train_step(Trainer& trainer, const ReplayBuffer& buffer, Rng& rng) {
    const SacConfig& cfg = trainer.config();
    const Batch batch = sample_batch(buffer, cfg.batch_size, rng);
    const TaskWeights w = cfg.balance ? task_weights(trainer.temps) : uniform_weights(trainer.tasks());

    StepMetrics m;
    m.alphas = trainer.temps.alphas();
    m.weights = w.w;

    const Tensor next_noise = standard_normal(batch.size(), trainer.action_dim(), rng);
    const Tensor targets = critic_target(batch, trainer, next_noise);
    {
        Graph g;
        Var loss = critic_loss(g, batch, trainer, targets, w);
        m.critic_loss = loss.value().item();
        require_finite_loss(m.critic_loss, "critic loss", batch, trainer);
        const Gradients grads = g.backward(loss);
        trainer.q1_opt.step(trainer.q1, grads.of(trainer.q1));
        if (cfg.twin_q) trainer.q2_opt.step(trainer.q2, grads.of(trainer.q2));
        m.mean_q = targets.mat().mean();
    }
    Tensor log_probs;
    {
        const Tensor noise = standard_normal(batch.size(), trainer.action_dim(), rng);
        Graph g;
        ActorLoss actor = actor_loss(g, batch, trainer, w, noise);
        m.actor_loss = actor.loss.value().item();
        require_finite_loss(m.actor_loss, "actor loss", batch, trainer);
        const Gradients grads = g.backward(actor.loss);
        trainer.policy_opt.step(trainer.policy, grads.of(trainer.policy));
        log_probs = std::move(actor.log_probs);
    }
    {
        Graph g;
        TemperatureLoss temp = temperature_loss(g, batch, trainer, log_probs);
        m.alpha_loss = temp.loss.value().item();
        const Gradients grads = g.backward(temp.loss);
        const auto all = grads.of(trainer.temps.log_alpha());
        ParamSet& log_alpha = trainer.temps.log_alpha();
        for (std::size_t k = 0; k < log_alpha.size(); ++k) {
            if (!temp.active[k]) continue;
            ParamSet one;
            one.add(log_alpha.name(k), log_alpha[k]);
            trainer.alpha_opts[k].step(one, std::span<const Tensor>(&all[k], 1));
            log_alpha.set(k, one[0]);
        }
    }
    polyak_update(trainer);
    m.step = ++trainer.steps;
    return m;
}

// ---- acting -----------------------------------------------------------------

ActionSource stochastic_policy(const Trainer& trainer, Rng& rng) {
    return [&trainer, &rng](const Tensor& obs, const std::vector<int>& task_ids) {
        Graph g;
        Bound params(g, trainer.policy, false);
        Var raw = trainer.policy_net().forward(params, g.constant(obs),
                                               g.constant(one_hot_batch(task_ids, trainer.tasks())));
        HeadVars head = split_head(raw, trainer.action_dim());
        const Tensor noise = standard_normal(obs.rows(), trainer.action_dim(), rng);
        return sample_action(head, noise).action.value();
    };
}

ActionSource deterministic_policy(const Network& net, const ParamSet& params, std::size_t action_dim) {
    return [&net, &params, action_dim](const Tensor& obs, const std::vector<int>& task_ids) {
        Graph g;
        Bound bound(g, params, false);
        Var raw = net.forward(bound, g.constant(obs), g.constant(one_hot_batch(task_ids, net.task_count())));
        return Tensor(split_head(raw, action_dim).mean.value().mat().array().tanh().matrix());
    };
}

ActionSource uniform_random_policy(std::size_t action_dim, Rng& rng) {
    return [action_dim, &rng](const Tensor& obs, const std::vector<int>&) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Matrix a(static_cast<Index>(obs.rows()), static_cast<Index>(action_dim));
        for (Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
        return Tensor(std::move(a));
    };
}

Collector::Collector(std::vector<std::unique_ptr<Environment>> envs, Rng& rng) : envs_(std::move(envs)) {
    if (envs_.empty()) throw ConfigError("collector needs at least one environment");
    for (auto& e : envs_) observations_.push_back(e->reset(rng));
}

std::size_t Collector::collect(ReplayBuffer& buffer, std::size_t steps_per_task, const ActionSource& policy,
                               Rng& rng) {
    const std::size_t m = envs_.size();
    const std::size_t obs_dim = envs_.front()->observation_dim();
    std::vector<int> ids(m);
    for (std::size_t i = 0; i < m; ++i) ids[i] = static_cast<int>(i);
    std::size_t appended = 0;
    for (std::size_t k = 0; k < steps_per_task; ++k) {
        Matrix obs(static_cast<Index>(m), static_cast<Index>(obs_dim));
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < obs_dim; ++c) obs(static_cast<Index>(i), static_cast<Index>(c)) = observations_[i][c];
        }
        const Tensor actions = policy(Tensor(std::move(obs)), ids);
        for (std::size_t i = 0; i < m; ++i) {
            const auto row = actions.mat().row(static_cast<Index>(i));
            std::vector<double> a(row.data(), row.data() + row.size());
            EnvStep s = envs_[i]->step(a);
            Transition t{observations_[i], a, s.reward, s.observation, s.terminal, static_cast<int>(i)};
            buffer.add(t);
            ++appended;
            observations_[i] = s.done ? envs_[i]->reset(rng) : std::move(s.observation);
        }
    }
    return appended;
}

}  // namespace softmod
