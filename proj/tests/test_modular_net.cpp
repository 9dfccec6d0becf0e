#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "softmod/modular_net.hpp"
#include "support.hpp"

using namespace softmod;
using namespace softmod::testing;

namespace {

NetworkConfig small(std::size_t layers, std::size_t modules, std::size_t tasks = 3) {
    NetworkConfig c = NetworkConfig::custom(layers, modules, 6, 5, 2, tasks);
    c.embed_width = 7;
    return c;
}

ParamSet random_params(const SoftModularNet& net, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    return randomized(net.init(rng), rng, scale);
}

RoutingProbabilities routing_of(const SoftModularNet& net, const ParamSet& p, const Tensor& x,
                                const std::vector<int>& ids) {
    Graph g;
    Bound b(g, p, false);
    RoutingVars r;
    net.forward_with_routing(b, g.constant(x), g.constant(one_hot_batch(ids, net.task_count())), &r);
    return r.values(net.config().modules);
}

}  // namespace

TEST(EncodeState, ZeroWeightsGiveZero) {
    SoftModularNet net(small(2, 2));
    Rng rng(1);
    ParamSet p = net.init(rng);
    for (std::size_t s = 0; s < 4; ++s) p.set(s, zeros_like(p[s]));
    Graph g;
    Bound b(g, p, false);
    Var f = net.encode_state(b, g.constant(row_tensor({1, -2, 3, 0.5, 9})));
    EXPECT_EQ(f.value().to_vector(), Vec(7, 0.0));
}

TEST(EncodeState, IdentityWeightsPassNonNegativeInput) {
    NetworkConfig c = small(2, 2);
    c.state_dim = 4;
    c.embed_width = 4;
    SoftModularNet net(c);
    Rng rng(1);
    ParamSet p = net.init(rng);
    const Tensor eye = Tensor(Matrix::Identity(4, 4));
    p.set(0, eye);
    p.set(2, eye);
    Graph g;
    Bound b(g, p, false);
    const Vec s{0.5, 0.0, 2.0, 1.25};
    EXPECT_EQ(net.encode_state(b, g.constant(row_tensor(s))).value().to_vector(), s);
}

TEST(EncodeState, MatchesCompositionOracle) {
    SoftModularNet net(small(2, 2));
    const ParamSet p = random_params(net, 2);
    Rng rng(9);
    const Vec s = random_vec(5, rng);
    Graph g;
    Bound b(g, p, false);
    const Vec got = net.encode_state(b, g.constant(row_tensor(s))).value().to_vector();
    const Vec expect = ref_relu(ref_affine(p[2], p[3], ref_relu(ref_affine(p[0], p[1], s))));
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
}

TEST(EncodeState, WrongWidthIsDimensionError) {
    SoftModularNet net(small(2, 2));
    const ParamSet p = random_params(net, 2);
    Graph g;
    Bound b(g, p, false);
    EXPECT_THROW(net.encode_state(b, g.constant(row_tensor({1, 2, 3}))), DimensionError);
}

TEST(EncodeTask, SelectsColumnPlusBias) {
    SoftModularNet net(small(2, 2));
    const ParamSet p = random_params(net, 3);
    const Tensor& w = p[net.task_encoder_slot()];
    const Tensor& bias = p[net.task_encoder_slot() + 1];
    Graph g;
    Bound b(g, p, false);
    const Vec e0 = net.encode_task(b, g.constant(one_hot(0, 3))).value().to_vector();
    const Vec e1 = net.encode_task(b, g.constant(one_hot(1, 3))).value().to_vector();
    for (std::size_t r = 0; r < 7; ++r) EXPECT_DOUBLE_EQ(e0[r], w.at(r, 0) + bias[r]);
    EXPECT_NE(e0, e1);
}

TEST(EncodeTask, ZeroParamsAndContract) {
    SoftModularNet net(small(2, 2));
    ParamSet p = random_params(net, 3);
    p.set(net.task_encoder_slot(), zeros_like(p[net.task_encoder_slot()]));
    p.set(net.task_encoder_slot() + 1, zeros_like(p[net.task_encoder_slot() + 1]));
    Graph g;
    Bound b(g, p, false);
    EXPECT_EQ(net.encode_task(b, g.constant(one_hot(2, 3))).value().to_vector(), Vec(7, 0.0));
    EXPECT_THROW(net.encode_task(b, g.constant(row_tensor({1, 1, 0}))), ContractError);
    EXPECT_THROW(net.encode_task(b, g.constant(row_tensor({0.5, 0, 0}))), ContractError);
}

TEST(Routing, SingleModuleIsAlwaysOne) {
    for (std::size_t L : {2u, 3u, 4u}) {
        SoftModularNet net(small(L, 1));
        const ParamSet p = random_params(net, 4, 2.0);
        const auto r = routing_of(net, p, row_tensor({1, 2, 3, 4, 5}), {1});
        ASSERT_EQ(r.weights.size(), L - 1);
        for (const auto& w : r.weights) EXPECT_EQ(w.to_vector(), Vec{1.0});
    }
}

TEST(Routing, ZeroRoutingWeightsAreUniform) {
    SoftModularNet net(small(4, 3));
    ParamSet p = random_params(net, 5);
    for (std::size_t l = 1; l <= 3; ++l) {
        p.set(net.routing_down_slot(l), zeros_like(p[net.routing_down_slot(l)]));
        p.set(net.routing_down_slot(l) + 1, zeros_like(p[net.routing_down_slot(l) + 1]));
    }
    const auto r = routing_of(net, p, row_tensor({0.1, 0.2, 0.3, 0.4, 0.5}), {0});
    for (const auto& w : r.weights) {
        for (double v : w.to_vector()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }
}

TEST(Routing, SecondLayerMatchesStepByStepOracle) {
    SoftModularNet net(small(3, 2));
    const ParamSet p = random_params(net, 6);
    Rng rng(60);
    const Vec x = random_vec(5, rng);
    const auto r = routing_of(net, p, row_tensor(x), {2});
    const RefModular ref = ref_modular(p, 3, 2, x, 2, 3);
    for (std::size_t l = 0; l < 2; ++l) {
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                EXPECT_NEAR(r.logits[l].at(0, i * 2 + j), ref.logits[l][i][j], 1e-12);
                EXPECT_NEAR(r.weights[l].at(0, i * 2 + j), ref.weights[l][i][j], 1e-12);
            }
        }
    }
    EXPECT_EQ(r.layer(1).shape(), (std::vector<std::size_t>{2, 2}));
}

TEST(Routing, RowsAreStochasticAcrossConfigs) {
    Rng rng(7);
    for (std::size_t n : {1u, 2u, 4u}) {
        for (std::size_t L : {2u, 3u, 4u}) {
            SoftModularNet net(small(L, n));
            const ParamSet p = random_params(net, 100 + 10 * n + L, 1.5);
            const auto r = routing_of(net, p, random_tensor(6, 5, rng, 3.0), {0, 1, 2, 0, 1, 2});
            for (const auto& w : r.weights) {
                for (std::size_t b = 0; b < 6; ++b) {
                    for (std::size_t i = 0; i < n; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += w.at(b, i * n + j);
                        EXPECT_NEAR(s, 1.0, 1e-9);
                    }
                }
            }
        }
    }
}

TEST(Routing, NearUniformAtInitialisation) {
    NetworkConfig c = NetworkConfig::shallow(7, 3, 4);
    SoftModularNet net(c);
    Rng rng(8);
    const ParamSet p = net.init(rng);
    std::vector<int> ids;
    for (int k = 0; k < 100; ++k) ids.push_back(k % 4);
    const auto r = routing_of(net, p, random_tensor(100, 7, rng), ids);
    double worst = 0.0;
    for (const auto& w : r.weights) worst = std::max(worst, (w.mat().array() - 0.5).abs().maxCoeff());
    EXPECT_LT(worst, 0.2);
}

TEST(Routing, DistinctTaskColumnsGiveDistinctLogits) {
    SoftModularNet net(small(3, 2));
    const ParamSet p = random_params(net, 9);
    Rng rng(90);
    bool differs = false;
    for (int trial = 0; trial < 10 && !differs; ++trial) {
        const Tensor x = row_tensor(random_vec(5, rng));
        const auto a = routing_of(net, p, x, {0});
        const auto b = routing_of(net, p, x, {1});
        differs = a.logits[0].to_vector() != b.logits[0].to_vector();
    }
    EXPECT_TRUE(differs);
}

TEST(BaseForward, SingleModuleIsPlainPerceptron) {
    SoftModularNet net(small(2, 1));
    const ParamSet p = random_params(net, 10);
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec x = random_vec(5, rng, 2.0);
        const Vec got = net_output(net, p, row_tensor(x), {1}).to_vector();
        const Vec expect = ref_mlp({{p[0], p[1]}, {p[2], p[3]}, {p[net.module_slot(1, 0)], p[net.module_slot(1, 0) + 1]},
                                    {p[net.module_slot(2, 0)], p[net.module_slot(2, 0) + 1]}},
                                   x);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
    }
}

TEST(BaseForward, HardPathSelectsChain) {
    SoftModularNet net(small(3, 2));
    const ParamSet p = random_params(net, 12);
    Rng rng(13);
    const Vec f = ref_relu(random_vec(7, rng));
    Graph g;
    Bound b(g, p, false);
    // Layer-2 module 0 reads layer-1 module 1; layer-2 module 1 reads layer-1 module 0.
    // Layer-3 module 0 reads layer-2 module 1; layer-3 module 1 reads layer-2 module 1.
    RoutingVars r;
    r.weights.push_back(g.constant(row_tensor({0, 1, 1, 0})));
    r.weights.push_back(g.constant(row_tensor({0, 1, 0, 1})));
    const Vec got = net.base_forward(b, g.constant(row_tensor(f)), r).value().to_vector();

    auto mod = [&](std::size_t l, std::size_t j) {
        const std::size_t s = net.module_slot(l, j);
        return std::make_pair(p[s], p[s + 1]);
    };
    const Vec l1_m0 = ref_relu(ref_affine(mod(1, 0).first, mod(1, 0).second, f));
    const Vec l2_m1 = ref_relu(ref_affine(mod(2, 1).first, mod(2, 1).second, l1_m0));
    const Vec expect = ref_add(ref_affine(mod(3, 0).first, mod(3, 0).second, l2_m1),
                               ref_affine(mod(3, 1).first, mod(3, 1).second, l2_m1));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
}

TEST(BaseForward, UniformRoutingWithTiedModulesEqualsSingleModule) {
    NetworkConfig c2 = small(3, 2);
    NetworkConfig c1 = small(3, 1);
    SoftModularNet net2(c2), net1(c1);
    ParamSet p1 = random_params(net1, 14);
    Rng rng(15);
    ParamSet p2 = randomized(net2.init(rng), rng);
    for (std::size_t s = 0; s < 6; ++s) p2.set(s, p1[s]);
    for (std::size_t l = 1; l <= 2; ++l) {
        p2.set(net2.routing_down_slot(l), zeros_like(p2[net2.routing_down_slot(l)]));
        p2.set(net2.routing_down_slot(l) + 1, zeros_like(p2[net2.routing_down_slot(l) + 1]));
    }
    for (std::size_t l = 1; l <= 3; ++l) {
        for (std::size_t j = 0; j < 2; ++j) {
            p2.set(net2.module_slot(l, j), p1[net1.module_slot(l, 0)]);
            p2.set(net2.module_slot(l, j) + 1, p1[net1.module_slot(l, 0) + 1]);
        }
    }
    const Tensor x = row_tensor(random_vec(5, rng));
    const Vec a = net_output(net1, p1, x, {0}).to_vector();
    const Vec b = net_output(net2, p2, x, {0}).to_vector();
    // The last layer sums two identical modules.
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2.0 * a[i], 1e-12);
}

TEST(BaseForward, ModulePermutationIsEquivariant) {
    SoftModularNet net(small(3, 2));
    const ParamSet p = random_params(net, 16);
    ParamSet q = p;
    const std::size_t n = 2;
    auto perm = [](std::size_t k) { return 1 - k; };
    // Swap the two layer-2 modules.
    q.set(net.module_slot(2, 0), p[net.module_slot(2, 1)]);
    q.set(net.module_slot(2, 0) + 1, p[net.module_slot(2, 1) + 1]);
    q.set(net.module_slot(2, 1), p[net.module_slot(2, 0)]);
    q.set(net.module_slot(2, 1) + 1, p[net.module_slot(2, 0) + 1]);
    // p^1 destinations, the matching routing_up inputs, p^2 sources.
    Matrix d1 = p[net.routing_down_slot(1)].mat(), d1b = p[net.routing_down_slot(1) + 1].mat();
    Matrix u1 = p[net.routing_up_slot(1)].mat();
    Matrix d2 = p[net.routing_down_slot(2)].mat(), d2b = p[net.routing_down_slot(2) + 1].mat();
    Matrix nd1 = d1, nd1b = d1b, nu1 = u1, nd2 = d2, nd2b = d2b;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto old_k = static_cast<Eigen::Index>(i * n + j);
            const auto dst_k = static_cast<Eigen::Index>(perm(i) * n + j);
            const auto src_k = static_cast<Eigen::Index>(i * n + perm(j));
            nd1.row(dst_k) = d1.row(old_k);
            nd1b(0, dst_k) = d1b(0, old_k);
            nu1.col(dst_k) = u1.col(old_k);
            nd2.row(src_k) = d2.row(old_k);
            nd2b(0, src_k) = d2b(0, old_k);
        }
    }
    q.set(net.routing_down_slot(1), Tensor(nd1));
    q.set(net.routing_down_slot(1) + 1, Tensor(nd1b, 1));
    q.set(net.routing_up_slot(1), Tensor(nu1));
    q.set(net.routing_down_slot(2), Tensor(nd2));
    q.set(net.routing_down_slot(2) + 1, Tensor(nd2b, 1));

    Rng rng(17);
    const Tensor x = random_tensor(4, 5, rng);
    const Tensor a = net_output(net, p, x, {0, 1, 2, 0});
    const Tensor b = net_output(net, q, x, {0, 1, 2, 0});
    EXPECT_LT((a.mat() - b.mat()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ModularNet, FullForwardMatchesOracle) {
    SoftModularNet net(small(4, 3));
    const ParamSet p = random_params(net, 18);
    Rng rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        const Vec x = random_vec(5, rng);
        const int task = trial % 3;
        const Vec got = net_output(net, p, row_tensor(x), {task}).to_vector();
        const Vec expect = ref_modular(p, 4, 3, x, static_cast<std::size_t>(task), 3).output;
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
    }
}

TEST(ModularNet, GradientsMatchFiniteDifferences) {
    for (bool critic : {false, true}) {
        NetworkConfig c = NetworkConfig::custom(3, 2, 8, 4, 2, 3);
        if (critic) c = c.critic();
        SoftModularNet net(c);
        const ParamSet p = random_params(net, 20);
        Rng rng(21);
        const Tensor x = random_tensor(3, c.input_dim(), rng);
        const Tensor w = random_tensor(3, c.output_width, rng);
        const Tensor tasks = one_hot_batch({0, 2, 1}, 3);
        auto build = [&](Bound& b) {
            Graph& g = b.graph();
            return sum(hadamard(net.forward(b, g.constant(x), g.constant(tasks)), g.constant(w)));
        };
        Graph g;
        Bound b(g, p, true);
        const auto analytic = g.backward(build(b)).of(p);
        const FdReport rep = finite_difference_check(
            p,
            [&](const ParamSet& q) {
                Graph g2;
                Bound b2(g2, q, false);
                return build(b2).value().item();
            },
            analytic);
        EXPECT_LT(rep.max_rel_error, 1e-4) << (critic ? "critic " : "policy ") << rep.worst;
        EXPECT_EQ(rep.coordinates, net.param_count());
    }
}

TEST(ModularNet, ParamCountIsClosedForm) {
    for (std::size_t L : {2u, 3u, 5u}) {
        for (std::size_t n : {1u, 2u, 4u}) {
            SoftModularNet net(small(L, n));
            Rng rng(1);
            EXPECT_EQ(net.init(rng).scalar_count(), net.param_count());
            SoftModularNet q(small(L, n).critic());
            EXPECT_EQ(q.init(rng).scalar_count(), q.param_count());
        }
    }
    SoftModularNet shallow(NetworkConfig::shallow(7, 3, 4));
    // encoders 7*256+256 + 256*256+256 + 4*256+256; routing 256*4+4;
    // modules 2 * ((256*256+256) + (256*6+6)).
    const std::size_t expect = (7 * 256 + 256) + (256 * 256 + 256) + (4 * 256 + 256) + (256 * 4 + 4) +
                               2 * ((256 * 256 + 256) + (256 * 6 + 6));
    EXPECT_EQ(shallow.param_count(), expect);
}

TEST(ModularNet, ParameterNamesFollowConvention) {
    SoftModularNet net(small(3, 2));
    Rng rng(1);
    const ParamSet p = net.init(rng);
    EXPECT_EQ(p.name(net.routing_up_slot(1)), "routing_up/1/w");
    EXPECT_EQ(p.name(net.routing_down_slot(2) + 1), "routing_down/2/b");
    EXPECT_EQ(p.name(net.module_slot(3, 1)), "module/3/1/w");
    EXPECT_THROW(net.routing_up_slot(2), ContractError);
}

TEST(PolicyForward, DeterministicAndSplit) {
    NetworkConfig c = small(3, 2);
    SoftModularNet net(c);
    const ParamSet p = random_params(net, 22);
    const Tensor s = Tensor::vector({0.1, -0.2, 0.3, 0.4, -0.5});
    const PolicyForward a = policy_forward(net, p, s, 1);
    const PolicyForward b = policy_forward(net, p, s, 1);
    EXPECT_EQ(a.head.mean.to_vector(), b.head.mean.to_vector());
    EXPECT_EQ(a.head.log_std.to_vector(), b.head.log_std.to_vector());
    const Vec raw = net_output(net, p, row_tensor(s.to_vector()), {1}).to_vector();
    Vec joined = a.head.mean.to_vector();
    for (double v : a.head.log_std.to_vector()) joined.push_back(v);
    EXPECT_EQ(joined, raw);
}

TEST(PolicyForward, LogStdIsClamped) {
    SoftModularNet net(small(2, 2));
    ParamSet p = random_params(net, 23);
    for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> bias{0.0, 0.0, 50.0, -50.0};
        p.set(net.module_slot(2, j) + 1, Tensor::vector(bias));
    }
    const PolicyForward f = policy_forward(net, p, Tensor::vector({0, 0, 0, 0, 0}), 0);
    EXPECT_EQ(f.head.log_std.to_vector(), (Vec{kLogStdMax, kLogStdMin}));
}

TEST(PolicyForward, SingleTaskIgnoresId) {
    SoftModularNet net(small(3, 2, 1));
    const ParamSet p = random_params(net, 24);
    const Tensor s = Tensor::vector({1, 2, 3, 4, 5});
    EXPECT_EQ(policy_forward(net, p, s, 0).head.mean.to_vector(), policy_forward(net, p, s, 0).head.mean.to_vector());
    EXPECT_THROW(policy_forward(net, p, s, 1), ContractError);
}

TEST(QForward, ZeroLastLayerGivesBiasSum) {
    SoftModularNet q(small(3, 2).critic());
    ParamSet p = random_params(q, 25);
    for (std::size_t j = 0; j < 2; ++j) p.set(q.module_slot(3, j), zeros_like(p[q.module_slot(3, j)]));
    const double expect = p[q.module_slot(3, 0) + 1][0] + p[q.module_slot(3, 1) + 1][0];
    EXPECT_DOUBLE_EQ(q_forward(q, p, Tensor::vector({1, 2, 3, 4, 5}), Tensor::vector({0.1, 0.2}), 2), expect);
}

TEST(QForward, ActionGradientMatchesFiniteDifferences) {
    SoftModularNet q(small(3, 2).critic());
    const ParamSet p = random_params(q, 26);
    const Tensor s = Tensor::vector({0.3, -0.1, 0.8, 0.0, 0.5});
    ParamSet act;
    act.add("a", Tensor::vector({0.2, -0.4}));
    Graph g;
    Bound qb(g, p, false);
    Bound ab(g, act, true);
    Var out = q.forward(qb, concat_cols({g.constant(s), ab[0]}), g.constant(one_hot(1, 3)));
    const auto analytic = g.backward(sum(out)).of(act);
    const FdReport rep = finite_difference_check(
        act, [&](const ParamSet& a) { return q_forward(q, p, s, a[0], 1); }, analytic);
    EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(QForward, PolicyParamsDoNotAffectCritic) {
    SoftModularNet pi(small(3, 2));
    SoftModularNet q(small(3, 2).critic());
    ParamSet pp = random_params(pi, 27);
    const ParamSet qp = random_params(q, 28);
    const Tensor s = Tensor::vector({0.3, -0.1, 0.8, 0.0, 0.5});
    const Tensor a = Tensor::vector({0.2, -0.4});
    const double before = q_forward(q, qp, s, a, 0);
    pp.set(0, zeros_like(pp[0]));
    EXPECT_EQ(q_forward(q, qp, s, a, 0), before);
    EXPECT_THROW(q_forward(pi, pp, s, a, 0), ContractError);
}

TEST(PolicySample, ClosedFormAtZeroNoise) {
    const PolicySample s = policy_sample({Tensor::vector({0.0}), Tensor::vector({0.0})}, Tensor::vector({0.0}));
    EXPECT_EQ(s.action.to_vector(), Vec{0.0});
    EXPECT_NEAR(s.log_prob.item(), -0.5 * std::log(2 * std::numbers::pi) - std::log(1 + 1e-6), 1e-12);
    EXPECT_NEAR(s.log_prob.item(), -0.918940, 1e-6);
}

TEST(PolicySample, TinyStdGivesTanhMean) {
    const PolicySample s =
        policy_sample({Tensor::vector({0.7, -1.2}), Tensor::vector({-20.0, -20.0})}, Tensor::vector({0.0, 0.0}));
    EXPECT_NEAR(s.action[0], std::tanh(0.7), 1e-15);
    EXPECT_NEAR(s.action[1], std::tanh(-1.2), 1e-15);
}

TEST(PolicySample, DensityIntegratesToOne) {
    const double mu = 0.3, log_std = std::log(0.8);
    const int N = 20001;
    const double lo = -10.0, hi = 10.0, dx = (hi - lo) / (N - 1);
    double total = 0.0;
    for (int k = 0; k < N; ++k) {
        const double x = lo + k * dx;
        const double noise = (x - mu) / std::exp(log_std);
        const PolicySample s = policy_sample({Tensor::vector({mu}), Tensor::vector({log_std})}, Tensor::vector({noise}));
        const double t = std::tanh(x);
        // da = (1 - tanh^2) dx
        const double integrand = std::exp(s.log_prob.item()) * (1.0 - t * t);
        total += (k == 0 || k == N - 1 ? 0.5 : 1.0) * integrand * dx;
    }
    EXPECT_NEAR(total, 1.0, 1e-3);
}

TEST(PolicySample, GraphMatchesTensorPath) {
    ParamSet p;
    p.add("mean", Tensor::matrix({{0.1, -0.3}, {0.9, 0.0}}));
    p.add("log_std", Tensor::matrix({{-0.5, 0.2}, {-3.0, 1.0}}));
    const Tensor noise = Tensor::matrix({{0.4, -1.1}, {0.0, 2.0}});
    Graph g;
    Bound b(g, p, false);
    const SampleVars sv = sample_action({b[0], b[1]}, noise);
    const PolicySample ps = policy_sample({p[0], p[1]}, noise);
    EXPECT_EQ(sv.action.value().to_vector(), ps.action.to_vector());
    EXPECT_EQ(sv.log_prob.value().to_vector(), ps.log_prob.to_vector());
    EXPECT_EQ(ps.log_prob.shape(), (std::vector<std::size_t>{2, 1}));
}

TEST(FlattenRouting, LengthsAndRowSums) {
    SoftModularNet deep(NetworkConfig::deep(7, 3, 4));
    SoftModularNet shallow(NetworkConfig::shallow(7, 3, 4));
    Rng rng(29);
    const ParamSet dp = deep.init(rng);
    const ParamSet sp = shallow.init(rng);
    const Tensor s = Tensor::vector({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.0});
    const Tensor fd = flatten_routing(policy_forward(deep, dp, s, 2).routing);
    const Tensor fs = flatten_routing(policy_forward(shallow, sp, s, 2).routing);
    EXPECT_EQ(fd.size(), 48u);
    EXPECT_EQ(fs.size(), 4u);
    EXPECT_EQ(deep.config().trace_length(), 48u);
    double total = 0.0;
    for (double v : fd.values()) total += v;
    EXPECT_NEAR(total, 3.0 * 4.0, 1e-12);
}
