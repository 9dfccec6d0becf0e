#include "softmod/network.hpp"

#include <cmath>
#include <numbers>

namespace softmod {

std::string to_string(ArchKind kind) {
    switch (kind) {
        case ArchKind::SoftModular: return "soft_modular";
        case ArchKind::MtSac: return "mtsac";
        case ArchKind::MultiHead: return "mtmh";
        case ArchKind::MixExpert: return "moe";
    }
    return "unknown";
}

ArchKind arch_kind_from_string(const std::string& name) {
    if (name == "soft_modular") return ArchKind::SoftModular;
    if (name == "mtsac") return ArchKind::MtSac;
    if (name == "mtmh") return ArchKind::MultiHead;
    if (name == "moe") return ArchKind::MixExpert;
    throw ConfigError("unknown architecture kind '" + name + "'");
}

Tensor uniform_fan_in(std::size_t out, std::size_t in, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    return Tensor(std::move(w));
}

Mlp::Mlp(std::string prefix, std::vector<std::size_t> widths, std::size_t first_slot)
    : prefix_(std::move(prefix)), widths_(std::move(widths)), first_slot_(first_slot) {
    if (widths_.size() < 2) throw ContractError("Mlp needs at least input and output widths");
}

void Mlp::append_params(ParamSet& params, Rng& rng) const {
    if (params.size() != first_slot_) throw ContractError("Mlp " + prefix_ + ": parameter slots out of order");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        params.add(prefix_ + "/" + std::to_string(l) + "/w", uniform_fan_in(widths_[l + 1], widths_[l], rng));
        params.add(prefix_ + "/" + std::to_string(l) + "/b", Tensor::zeros_vector(widths_[l + 1]));
    }
}

Var Mlp::forward(Bound& params, Var x) const {
    Var h = x;
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        h = affine(h, params[first_slot_ + 2 * l], params[first_slot_ + 2 * l + 1]);
        if (l + 1 < layers) h = relu(h);
    }
    return h;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) n += widths_[l + 1] * widths_[l] + widths_[l + 1];
    return n;
}

void require_one_hot(const Tensor& tasks, std::size_t task_count) {
    if (tasks.cols() != task_count) {
        throw DimensionError("task embedding " + tasks.shape_string() + " for " + std::to_string(task_count) +
                             " tasks");
    }
    for (std::size_t r = 0; r < tasks.rows(); ++r) {
        int ones = 0;
        for (std::size_t c = 0; c < tasks.cols(); ++c) {
            const double v = tasks.at(r, c);
            if (v == 1.0) {
                ++ones;
            } else if (v != 0.0) {
                throw ContractError("task embedding row " + std::to_string(r) + " is not one-hot");
            }
        }
        if (ones != 1) throw ContractError("task embedding row " + std::to_string(r) + " is not one-hot");
    }
}

Tensor one_hot(std::size_t task_id, std::size_t task_count) {
    if (task_id >= task_count) {
        throw ContractError("task id " + std::to_string(task_id) + " out of range for " +
                            std::to_string(task_count) + " tasks");
    }
    Matrix z = Matrix::Zero(1, static_cast<Eigen::Index>(task_count));
    z(0, static_cast<Eigen::Index>(task_id)) = 1.0;
    return Tensor(std::move(z), 1);
}

Tensor one_hot_batch(const std::vector<int>& task_ids, std::size_t task_count) {
    Matrix z = Matrix::Zero(static_cast<Eigen::Index>(task_ids.size()), static_cast<Eigen::Index>(task_count));
    for (std::size_t r = 0; r < task_ids.size(); ++r) {
        if (task_ids[r] < 0 || static_cast<std::size_t>(task_ids[r]) >= task_count) {
            throw ContractError("task id " + std::to_string(task_ids[r]) + " out of range");
        }
        z(static_cast<Eigen::Index>(r), task_ids[r]) = 1.0;
    }
    return Tensor(std::move(z));
}

HeadVars split_head(Var raw, std::size_t action_dim) {
    if (raw.value().cols() != 2 * action_dim) {
        throw DimensionError("policy head expects " + std::to_string(2 * action_dim) + " outputs, got " +
                             raw.value().shape_string());
    }
    return {slice_cols(raw, 0, action_dim), clamp(slice_cols(raw, action_dim, action_dim), kLogStdMin, kLogStdMax)};
}

SampleVars sample_action(const HeadVars& head, const Tensor& noise) {
    Graph& g = *head.mean.graph;
    if (!noise.same_shape(head.mean.value())) {
        throw DimensionError("noise " + noise.shape_string() + " for mean " + head.mean.value().shape_string());
    }
    Var eps = g.constant(noise);
    Var pre = add(head.mean, hadamard(exp(head.log_std), eps));
    Var action = tanh(pre);
    // Gaussian log-density of pre at (mean, std) is -eps^2/2 - log std - log(2 pi)/2.
    const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
    Var gauss = sub(scale(g.constant(Tensor(noise.mat().array().square().matrix())), -0.5), head.log_std);
    gauss = add_scalar(gauss, -half_log_two_pi);
    Var correction = log(add_scalar(scale(square(action), -1.0), 1.0 + kSquashEps));
    Var log_prob = sum_cols(sub(gauss, correction));
    return {action, log_prob};
}

PolicySample policy_sample(const PolicyHead& head, const Tensor& noise) {
    Graph g;
    Var mean = g.constant(head.mean);
    Var log_std = clamp(g.constant(head.log_std), kLogStdMin, kLogStdMax);
    SampleVars s = sample_action({mean, log_std}, noise);
    return {s.action.value(), s.log_prob.value()};
}

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return Tensor(std::move(m));
}

}  // namespace softmod
