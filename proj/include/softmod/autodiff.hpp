#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "softmod/tensor.hpp"

namespace softmod {

// Ordered, named collection of learnable tensors. Names follow
// `component/layer/index` (for example `module/1/0/w`).
class ParamSet {
public:
    std::size_t add(std::string name, Tensor value);

    std::size_t size() const { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }
    const Tensor& operator[](std::size_t i) const { return values_.at(i); }
    void set(std::size_t i, Tensor value);

    std::size_t index_of(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::size_t scalar_count() const;

    // Same names and shapes.
    bool same_layout(const ParamSet& other) const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

class Graph;

struct Var {
    Graph* graph = nullptr;
    int id = -1;

    const Tensor& value() const;
    bool valid() const { return graph != nullptr && id >= 0; }
};

// Gradient map produced by Graph::backward, keyed by parameter set.
class Gradients {
public:
    // Gradient per parameter of `set`; untouched parameters get zeros.
    std::vector<Tensor> of(const ParamSet& set) const;
    bool touches(const ParamSet& set) const { return grads_.count(&set) != 0; }

private:
    friend class Graph;
    std::unordered_map<const ParamSet*, std::vector<Matrix>> grads_;
    std::unordered_map<const ParamSet*, std::vector<bool>> present_;
};

// Records one forward evaluation. Nodes are appended in topological order and
// backward visits them in reverse. A Graph lives for a single training step.
class Graph {
public:
    using Backprop = std::function<void(Graph&, const Matrix& upstream)>;

    Var constant(Tensor value);
    Var parameter(const ParamSet& set, std::size_t index);

    const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
    bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Loss must be a single value.
    Gradients backward(Var loss);

    // Kernel-facing API.
    Var record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop);
    Var record(Tensor value, std::span<const Var> inputs, Backprop backprop);
    void accumulate(Var target, const Matrix& grad);

private:
    struct Node {
        Tensor value;
        std::vector<int> inputs;
        Backprop backprop;
        Matrix grad;
        bool has_grad = false;
        bool requires_grad = false;
        const ParamSet* owner = nullptr;
        std::size_t param_index = 0;
    };
    std::vector<Node> nodes_;
};

// Lazily binds every parameter of a set into a graph, either as tracked
// leaves or as constants (frozen networks, target networks, rollouts).
class Bound {
public:
    Bound(Graph& graph, const ParamSet& params, bool track)
        : graph_(&graph), params_(&params), track_(track), cache_(params.size(), -1) {}

    Var operator[](std::size_t i);
    Graph& graph() const { return *graph_; }
    const ParamSet& params() const { return *params_; }

private:
    Graph* graph_;
    const ParamSet* params_;
    bool track_;
    std::vector<int> cache_;
};

// ---- differentiable kernels -------------------------------------------------

// x: [B x in] (or [in]), weight: [out x in], bias: [out]. Returns x W^T + b.
Var affine(Var x, Var weight, Var bias);
Var relu(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);
// Hard clamp; gradient is zero outside [lo, hi].
Var clamp(Var x, double lo, double hi);
// Row-wise softmax with per-row max shift.
Var softmax_rows(Var x);
Var hadamard(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
// Elementwise minimum; ties route the gradient to `a`.
Var minimum(Var a, Var b);
// a: [B x k], s: [B x 1]; row r of a multiplied by s[r].
Var scale_rows(Var a, Var s);
Var reshape(Var x, std::size_t rows, std::size_t cols);
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
// [B x k] -> [B x 1]
Var sum_cols(Var x);
// Scalar sum / mean over all entries.
Var sum(Var x);
Var mean(Var x);
// Value copy with no path back to `x`.
Var stop_gradient(Var x);

}  // namespace softmod
