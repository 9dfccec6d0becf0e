#pragma once

#include <stdexcept>
#include <string>

namespace softmod {

/// Tensor shapes that do not conform for an operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (non-scalar loss, bad one-hot, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Numerical failure during optimization (NaN gradient or loss).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad run configuration, unknown preset or mismatched checkpoint.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace softmod
