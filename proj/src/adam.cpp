#include "softmod/adam.hpp"

#include <cmath>

namespace softmod {

AdamState::AdamState(const ParamSet& params, AdamConfig config) : config_(config) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_.push_back(Matrix::Zero(params[i].mat().rows(), params[i].mat().cols()));
        v_.push_back(Matrix::Zero(params[i].mat().rows(), params[i].mat().cols()));
    }
}

void AdamState::step(ParamSet& params, std::span<const Tensor> grads) {
    if (grads.size() != params.size() || m_.size() != params.size()) {
        throw DimensionError("AdamState::step: parameter/gradient count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].same_shape(params[i])) {
            throw DimensionError("AdamState::step: gradient shape " + grads[i].shape_string() + " for " +
                                 params.name(i) + " " + params[i].shape_string());
        }
        if (!grads[i].mat().allFinite()) {
            throw TrainingError("non-finite gradient for parameter " + params.name(i));
        }
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& g = grads[i].mat();
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
        Matrix updated = params[i].mat().array() -
                         config_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
        params.set(i, Tensor(std::move(updated), params[i].rank()));
    }
}

}  // namespace softmod
