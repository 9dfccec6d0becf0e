#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "softmod/autodiff.hpp"

namespace softmod {

struct AdamConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment accumulators for one ParamSet, with bias correction.
class AdamState {
public:
    AdamState() = default;
    AdamState(const ParamSet& params, AdamConfig config);

    // Applies one update in place. Throws TrainingError naming the parameter
    // if any gradient is NaN or infinite; params are left untouched then.
    void step(ParamSet& params, std::span<const Tensor> grads);

    std::int64_t step_count() const { return step_; }
    const AdamConfig& config() const { return config_; }
    void set_learning_rate(double lr) { config_.learning_rate = lr; }
    const Matrix& first_moment(std::size_t i) const { return m_.at(i); }
    const Matrix& second_moment(std::size_t i) const { return v_.at(i); }

private:
    AdamConfig config_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::int64_t step_ = 0;
};

}  // namespace softmod
