#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "softmod/autodiff.hpp"
#include "softmod/network.hpp"

namespace softmod::testing {

using Vec = std::vector<double>;

// Plain-loop reference kernels. They share no code with the library.
inline Vec ref_affine(const Tensor& w, const Tensor& b, const Vec& x) {
    Vec y(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double acc = b[r];
        for (std::size_t c = 0; c < w.cols(); ++c) acc += w.at(r, c) * x[c];
        y[r] = acc;
    }
    return y;
}

inline Vec ref_relu(Vec x) {
    for (double& v : x) v = v > 0.0 ? v : 0.0;
    return x;
}

inline Vec ref_add(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec ref_mul(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
    return a;
}

inline Vec ref_scale(Vec a, double s) {
    for (double& v : a) v *= s;
    return a;
}

inline Vec ref_softmax(const Vec& x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    Vec e(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(x[i] - mx);
        s += e[i];
    }
    for (double& v : e) v /= s;
    return e;
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(rows * cols);
    for (double& x : v) x = u(rng);
    return Tensor::matrix(rows, cols, std::move(v));
}

inline Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vec v(n);
    for (double& x : v) x = u(rng);
    return v;
}

// Every entry, biases included, redrawn uniformly in [-scale, scale].
inline ParamSet randomized(const ParamSet& p, Rng& rng, double scale = 0.5) {
    ParamSet out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Tensor& t = p[i];
        Tensor r = random_tensor(t.rows(), t.cols(), rng, scale);
        out.add(p.name(i), t.rank() == 1 ? Tensor::vector(r.to_vector()) : r);
    }
    return out;
}

inline Tensor with_entry(const Tensor& t, std::size_t k, double value) {
    std::vector<double> v = t.to_vector();
    v[k] = value;
    return t.rank() == 1 ? Tensor::vector(std::move(v)) : Tensor::matrix(t.rows(), t.cols(), std::move(v));
}

inline Tensor net_output(const Network& net, const ParamSet& params, const Tensor& x, const std::vector<int>& ids) {
    Graph g;
    Bound b(g, params, false);
    return net.forward(b, g.constant(x), g.constant(one_hot_batch(ids, net.task_count()))).value();
}

inline void set_named(ParamSet& p, const std::string& name, Tensor value) { p.set(p.index_of(name), std::move(value)); }

inline Tensor zeros_like(const Tensor& t) {
    return t.rank() == 1 ? Tensor::zeros_vector(t.size()) : Tensor::zeros(t.rows(), t.cols());
}

inline Tensor row_tensor(const Vec& v) { return Tensor::matrix(1, v.size(), v); }

// Step-by-step soft-modular forward for a single sample, reading weights by
// parameter name. Routing matrices are n x n with row = destination module.
struct RefModular {
    Vec output;
    std::vector<std::vector<Vec>> logits;   // [layer][row i] -> n values
    std::vector<std::vector<Vec>> weights;  // row-softmax of logits
};

inline RefModular ref_modular(const ParamSet& p, std::size_t layers, std::size_t n, const Vec& x, std::size_t task,
                              std::size_t tasks) {
    auto W = [&](const std::string& name) -> const Tensor& { return p[p.index_of(name + "/w")]; };
    auto B = [&](const std::string& name) -> const Tensor& { return p[p.index_of(name + "/b")]; };
    auto lin = [&](const std::string& name, const Vec& v) { return ref_affine(W(name), B(name), v); };

    const Vec f = ref_relu(lin("state_encoder/1", ref_relu(lin("state_encoder/0", x))));
    Vec z(tasks, 0.0);
    z[task] = 1.0;
    const Vec h = lin("task_encoder/0", z);
    const Vec fh = ref_mul(f, h);

    RefModular out;
    Vec flat = lin("routing_down/1", ref_relu(fh));
    for (std::size_t l = 1; l < layers; ++l) {
        if (l > 1) {
            const Vec up = lin("routing_up/" + std::to_string(l - 1), flat);
            flat = lin("routing_down/" + std::to_string(l), ref_relu(ref_mul(up, fh)));
        }
        std::vector<Vec> rows, probs;
        for (std::size_t i = 0; i < n; ++i) {
            Vec row(flat.begin() + static_cast<long>(i * n), flat.begin() + static_cast<long>((i + 1) * n));
            probs.push_back(ref_softmax(row));
            rows.push_back(std::move(row));
        }
        out.logits.push_back(std::move(rows));
        out.weights.push_back(std::move(probs));
    }

    std::vector<Vec> g(n, f);
    for (std::size_t l = 1; l < layers; ++l) {
        std::vector<Vec> act(n);
        for (std::size_t j = 0; j < n; ++j) {
            act[j] = ref_relu(lin("module/" + std::to_string(l) + "/" + std::to_string(j), g[j]));
        }
        std::vector<Vec> next(n, Vec(act[0].size(), 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) next[i] = ref_add(next[i], ref_scale(act[j], out.weights[l - 1][i][j]));
        }
        g = std::move(next);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const Vec y = lin("module/" + std::to_string(layers) + "/" + std::to_string(j), g[j]);
        out.output = out.output.empty() ? y : ref_add(out.output, y);
    }
    return out;
}

// Plain perceptron: ReLU after every layer but the last.
inline Vec ref_mlp(const std::vector<std::pair<Tensor, Tensor>>& layers, Vec x) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
        x = ref_affine(layers[k].first, layers[k].second, x);
        if (k + 1 < layers.size()) x = ref_relu(std::move(x));
    }
    return x;
}

struct FdReport {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
    std::string worst;
};

// Central differences over every scalar of `params`, compared with
// `analytic` (one tensor per parameter). Relative error uses a floor of
// 1e-6 in the denominator so coordinates with vanishing gradient compare
// absolutely.
inline FdReport finite_difference_check(ParamSet params, const std::function<double(const ParamSet&)>& loss,
                                        const std::vector<Tensor>& analytic, double h = 1e-5) {
    FdReport rep;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor base = params[i];
        for (std::size_t k = 0; k < base.size(); ++k) {
            params.set(i, with_entry(base, k, base[k] + h));
            const double up = loss(params);
            params.set(i, with_entry(base, k, base[k] - h));
            const double down = loss(params);
            params.set(i, base);
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[i][k];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst = params.name(i) + "[" + std::to_string(k) + "]";
            }
            ++rep.coordinates;
        }
    }
    return rep;
}

}  // namespace softmod::testing
