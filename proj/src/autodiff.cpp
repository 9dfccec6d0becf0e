#include "softmod/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace softmod {

namespace {

using Index = Eigen::Index;

std::string shapes_msg(const char* op, const Tensor& a, const Tensor& b) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.shape_string() << " vs " << b.shape_string();
    return os.str();
}

Graph& graph_of(Var v) {
    if (!v.valid()) throw ContractError("operation on an unbound Var");
    return *v.graph;
}

Graph& common_graph(Var a, Var b) {
    if (&graph_of(a) != &graph_of(b)) throw ContractError("operands recorded on different graphs");
    return *a.graph;
}

const Matrix& mat(Var v) { return v.value().mat(); }

}  // namespace

// ---- ParamSet ---------------------------------------------------------------

std::size_t ParamSet::add(std::string name, Tensor value) {
    if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
    const std::size_t idx = values_.size();
    index_.emplace(name, idx);
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return idx;
}

void ParamSet::set(std::size_t i, Tensor value) {
    if (!values_.at(i).same_shape(value)) {
        throw DimensionError(shapes_msg(("ParamSet::set " + names_[i]).c_str(), values_[i], value));
    }
    values_[i] = std::move(value);
}

std::size_t ParamSet::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ContractError("unknown parameter " + std::string(name));
    return it->second;
}

bool ParamSet::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

bool ParamSet::same_layout(const ParamSet& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!values_[i].same_shape(other.values_[i])) return false;
    }
    return true;
}

// ---- Graph ------------------------------------------------------------------

const Tensor& Var::value() const { return graph_of(*this).value(*this); }

std::vector<Tensor> Gradients::of(const ParamSet& set) const {
    std::vector<Tensor> out;
    out.reserve(set.size());
    auto it = grads_.find(&set);
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (it != grads_.end() && present_.at(&set)[i]) {
            out.emplace_back(it->second[i], set[i].rank());
        } else {
            out.emplace_back(Matrix::Zero(static_cast<Index>(set[i].rows()), static_cast<Index>(set[i].cols())),
                             set[i].rank());
        }
    }
    return out;
}

Var Graph::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::parameter(const ParamSet& set, std::size_t index) {
    Node n;
    n.value = set[index];
    n.requires_grad = true;
    n.owner = &set;
    n.param_index = index;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backprop));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, Backprop backprop) {
    Node n;
    n.value = std::move(value);
    for (Var in : inputs) {
        if (in.graph != this) throw ContractError("input recorded on a different graph");
        n.inputs.push_back(in.id);
        n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(in.id)].requires_grad;
    }
    if (n.requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size() - 1)};
}

void Graph::accumulate(Var target, const Matrix& grad) {
    Node& n = nodes_[static_cast<std::size_t>(target.id)];
    if (!n.requires_grad) return;
    if (n.has_grad) {
        n.grad += grad;
    } else {
        n.grad = grad;
        n.has_grad = true;
    }
}

Gradients Graph::backward(Var loss) {
    if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
    if (value(loss).size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + value(loss).shape_string());
    }
    for (auto& n : nodes_) {
        n.has_grad = false;
    }
    Gradients out;
    Node& root = nodes_[static_cast<std::size_t>(loss.id)];
    if (root.requires_grad) {
        root.grad = Matrix::Ones(1, 1);
        root.has_grad = true;
    }
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.has_grad) continue;
        if (n.owner != nullptr) {
            auto& slot = out.grads_[n.owner];
            auto& present = out.present_[n.owner];
            if (slot.empty()) {
                slot.resize(n.owner->size());
                present.assign(n.owner->size(), false);
            }
            if (present[n.param_index]) {
                slot[n.param_index] += n.grad;
            } else {
                slot[n.param_index] = n.grad;
                present[n.param_index] = true;
            }
            continue;
        }
        if (n.backprop) n.backprop(*this, n.grad);
    }
    return out;
}

Var Bound::operator[](std::size_t i) {
    int& slot = cache_.at(i);
    if (slot < 0) {
        slot = track_ ? graph_->parameter(*params_, i).id : graph_->constant((*params_)[i]).id;
    }
    return {graph_, slot};
}

// ---- kernels ----------------------------------------------------------------

Var affine(Var x, Var weight, Var bias) {
    Graph& g = common_graph(x, weight);
    common_graph(x, bias);
    const Tensor& xt = x.value();
    const Tensor& wt = weight.value();
    const Tensor& bt = bias.value();
    if (xt.cols() != wt.cols() || bt.size() != wt.rows()) {
        std::ostringstream os;
        os << "affine: x " << xt.shape_string() << ", W " << wt.shape_string() << ", b " << bt.shape_string();
        throw DimensionError(os.str());
    }
    Matrix y(xt.mat().rows(), wt.mat().rows());
    y.noalias() = xt.mat() * wt.mat().transpose();
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bt.mat().data(), bt.mat().size());
    return g.record(Tensor(std::move(y), xt.rank()), {x, weight, bias}, [x, weight, bias](Graph& gr, const Matrix& up) {
        if (gr.requires_grad(x)) gr.accumulate(x, up * mat(weight));
        if (gr.requires_grad(weight)) gr.accumulate(weight, up.transpose() * mat(x));
        if (gr.requires_grad(bias)) {
            Matrix db = up.colwise().sum();
            if (db.rows() != mat(bias).rows()) db.resize(mat(bias).rows(), mat(bias).cols());
            gr.accumulate(bias, db);
        }
    });
}

Var relu(Var x) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).cwiseMax(0.0);
    return g.record(Tensor(std::move(y), x.value().rank()), {x}, [x](Graph& gr, const Matrix& up) {
        gr.accumulate(x, (mat(x).array() > 0.0).select(up, 0.0));
    });
}

Var tanh(Var x) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).array().tanh().matrix();
    Tensor yt(y, x.value().rank());
    return g.record(std::move(yt), {x}, [x, y = std::move(y)](Graph& gr, const Matrix& up) {
        gr.accumulate(x, (up.array() * (1.0 - y.array().square())).matrix());
    });
}

Var exp(Var x) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).array().exp().matrix();
    return g.record(Tensor(std::move(y), x.value().rank()), {x}, [x](Graph& gr, const Matrix& up) {
        gr.accumulate(x, (up.array() * mat(x).array().exp()).matrix());
    });
}

Var log(Var x) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).array().log().matrix();
    return g.record(Tensor(std::move(y), x.value().rank()), {x}, [x](Graph& gr, const Matrix& up) {
        gr.accumulate(x, (up.array() / mat(x).array()).matrix());
    });
}

Var square(Var x) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).array().square().matrix();
    return g.record(Tensor(std::move(y), x.value().rank()), {x}, [x](Graph& gr, const Matrix& up) {
        gr.accumulate(x, (2.0 * up.array() * mat(x).array()).matrix());
    });
}

Var clamp(Var x, double lo, double hi) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).cwiseMax(lo).cwiseMin(hi);
    return g.record(Tensor(std::move(y), x.value().rank()), {x}, [x, lo, hi](Graph& gr, const Matrix& up) {
        const auto& v = mat(x).array();
        gr.accumulate(x, ((v >= lo) && (v <= hi)).select(up, 0.0));
    });
}

Var softmax_rows(Var x) {
    Graph& g = graph_of(x);
    const Matrix& in = mat(x);
    Matrix y(in.rows(), in.cols());
    for (Index r = 0; r < in.rows(); ++r) {
        const double shift = in.row(r).maxCoeff();
        y.row(r) = (in.row(r).array() - shift).exp().matrix();
        y.row(r) /= y.row(r).sum();
    }
    Tensor yt(y, x.value().rank());
    // dx = y * (up - sum(up * y)) per row
    return g.record(std::move(yt), {x}, [x, y = std::move(y)](Graph& gr, const Matrix& up) {
        Matrix dx(y.rows(), y.cols());
        for (Index r = 0; r < y.rows(); ++r) {
            const double dot = up.row(r).dot(y.row(r));
            dx.row(r) = (y.row(r).array() * (up.row(r).array() - dot)).matrix();
        }
        gr.accumulate(x, dx);
    });
}

Var hadamard(Var a, Var b) {
    Graph& g = common_graph(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError(shapes_msg("hadamard", a.value(), b.value()));
    Matrix y = mat(a).cwiseProduct(mat(b));
    return g.record(Tensor(std::move(y), a.value().rank()), {a, b}, [a, b](Graph& gr, const Matrix& up) {
        if (gr.requires_grad(a)) gr.accumulate(a, up.cwiseProduct(mat(b)));
        if (gr.requires_grad(b)) gr.accumulate(b, up.cwiseProduct(mat(a)));
    });
}

Var add(Var a, Var b) {
    Graph& g = common_graph(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError(shapes_msg("add", a.value(), b.value()));
    Matrix y = mat(a) + mat(b);
    return g.record(Tensor(std::move(y), a.value().rank()), {a, b}, [a, b](Graph& gr, const Matrix& up) {
        gr.accumulate(a, up);
        gr.accumulate(b, up);
    });
}

Var sub(Var a, Var b) {
    Graph& g = common_graph(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError(shapes_msg("sub", a.value(), b.value()));
    Matrix y = mat(a) - mat(b);
    return g.record(Tensor(std::move(y), a.value().rank()), {a, b}, [a, b](Graph& gr, const Matrix& up) {
        gr.accumulate(a, up);
        if (gr.requires_grad(b)) gr.accumulate(b, -up);
    });
}

Var scale(Var x, double c) {
    Graph& g = graph_of(x);
    Matrix y = mat(x) * c;
    return g.record(Tensor(std::move(y), x.value().rank()), {x},
                    [x, c](Graph& gr, const Matrix& up) { gr.accumulate(x, up * c); });
}

Var add_scalar(Var x, double c) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).array() + c;
    return g.record(Tensor(std::move(y), x.value().rank()), {x},
                    [x](Graph& gr, const Matrix& up) { gr.accumulate(x, up); });
}

Var minimum(Var a, Var b) {
    Graph& g = common_graph(a, b);
    if (!a.value().same_shape(b.value())) throw DimensionError(shapes_msg("minimum", a.value(), b.value()));
    Matrix y = mat(a).cwiseMin(mat(b));
    return g.record(Tensor(std::move(y), a.value().rank()), {a, b}, [a, b](Graph& gr, const Matrix& up) {
        const auto take_a = (mat(a).array() <= mat(b).array());
        if (gr.requires_grad(a)) gr.accumulate(a, take_a.select(up, 0.0));
        if (gr.requires_grad(b)) gr.accumulate(b, take_a.select(Matrix::Zero(up.rows(), up.cols()), up));
    });
}

Var scale_rows(Var a, Var s) {
    Graph& g = common_graph(a, s);
    const Tensor& at = a.value();
    const Tensor& st = s.value();
    if (st.cols() != 1 || st.rows() != at.rows()) throw DimensionError(shapes_msg("scale_rows", at, st));
    Matrix y = at.mat().array().colwise() * st.mat().col(0).array();
    return g.record(Tensor(std::move(y), at.rank()), {a, s}, [a, s](Graph& gr, const Matrix& up) {
        if (gr.requires_grad(a)) {
            Matrix da = up.array().colwise() * mat(s).col(0).array();
            gr.accumulate(a, da);
        }
        if (gr.requires_grad(s)) {
            Matrix ds = up.cwiseProduct(mat(a)).rowwise().sum();
            gr.accumulate(s, ds);
        }
    });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
    Graph& g = graph_of(x);
    const Tensor& xt = x.value();
    if (rows * cols != xt.size()) {
        std::ostringstream os;
        os << "reshape: " << xt.shape_string() << " to [" << rows << "x" << cols << "]";
        throw DimensionError(os.str());
    }
    const Index r0 = xt.mat().rows();
    const Index c0 = xt.mat().cols();
    Matrix y = Eigen::Map<const Matrix>(xt.mat().data(), static_cast<Index>(rows), static_cast<Index>(cols));
    return g.record(Tensor(std::move(y)), {x}, [x, r0, c0](Graph& gr, const Matrix& up) {
        gr.accumulate(x, Eigen::Map<const Matrix>(up.data(), r0, c0));
    });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
    Graph& g = graph_of(x);
    const Tensor& xt = x.value();
    if (start + count > xt.cols() || count == 0) {
        std::ostringstream os;
        os << "slice_cols: [" << start << ", " << start + count << ") of " << xt.shape_string();
        throw DimensionError(os.str());
    }
    const auto s = static_cast<Index>(start);
    const auto c = static_cast<Index>(count);
    Matrix y = xt.mat().middleCols(s, c);
    return g.record(Tensor(std::move(y), xt.rank()), {x}, [x, s, c](Graph& gr, const Matrix& up) {
        Matrix dx = Matrix::Zero(mat(x).rows(), mat(x).cols());
        dx.middleCols(s, c) = up;
        gr.accumulate(x, dx);
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    Graph& g = graph_of(parts[0]);
    const Index rows = mat(parts[0]).rows();
    Index cols = 0;
    for (Var p : parts) {
        if (p.graph != &g) throw ContractError("concat_cols: operands on different graphs");
        if (mat(p).rows() != rows) throw DimensionError(shapes_msg("concat_cols", parts[0].value(), p.value()));
        cols += mat(p).cols();
    }
    Matrix y(rows, cols);
    Index offset = 0;
    for (Var p : parts) {
        y.middleCols(offset, mat(p).cols()) = mat(p);
        offset += mat(p).cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return g.record(Tensor(std::move(y), parts[0].value().rank()), parts, [inputs](Graph& gr, const Matrix& up) {
        Index off = 0;
        for (Var p : inputs) {
            const Index c = mat(p).cols();
            if (gr.requires_grad(p)) gr.accumulate(p, up.middleCols(off, c));
            off += c;
        }
    });
}

Var concat_cols(std::initializer_list<Var> parts) {
    return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var sum_cols(Var x) {
    Graph& g = graph_of(x);
    Matrix y = mat(x).rowwise().sum();
    return g.record(Tensor(std::move(y)), {x}, [x](Graph& gr, const Matrix& up) {
        Matrix dx = up.col(0).replicate(1, mat(x).cols());
        gr.accumulate(x, dx);
    });
}

Var sum(Var x) {
    Graph& g = graph_of(x);
    return g.record(Tensor::scalar(mat(x).sum()), {x}, [x](Graph& gr, const Matrix& up) {
        gr.accumulate(x, Matrix::Constant(mat(x).rows(), mat(x).cols(), up(0, 0)));
    });
}

Var mean(Var x) {
    const double n = static_cast<double>(x.value().size());
    return scale(sum(x), 1.0 / n);
}

Var stop_gradient(Var x) { return graph_of(x).constant(x.value()); }

}  // namespace softmod
