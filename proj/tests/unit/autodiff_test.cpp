// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "wmattr/autodiff/gradcheck.hpp"
#include "wmattr/autodiff/graph.hpp"
#include "wmattr/autodiff/loss.hpp"
#include "wmattr/autodiff/optimizer.hpp"
#include "wmattr/error.hpp"
#include "wmattr/random.hpp"

namespace wmattr::ad {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

TEST(Graph, SigmoidAtZero) {
  Graph g;
  Var y = g.sigmoid(g.constant(Tensor({1}, {0.0})));
  EXPECT_EQ(g.value(y)[0], 0.5);
}

TEST(Graph, MatmulIdentity) {
  Rng rng(1);
  Graph g;
  Tensor a = random_tensor({3, 3}, rng);
  Var y = g.matmul(g.constant(Tensor::identity(3)), g.constant(a));
  EXPECT_EQ(g.value(y), a);
}

TEST(Graph, ConcatLastAxis) {
  Graph g;
  Var y = g.concat(g.constant(Tensor({2}, {1, 2})), g.constant(Tensor({1}, {3})));
  EXPECT_EQ(g.value(y), Tensor({3}, {1, 2, 3}));
}

TEST(Graph, ShapeMismatchNamesPrimitiveAndShapes) {
  Graph g;
  Var a = g.constant(Tensor::zeros({2, 3}));
  Var b = g.constant(Tensor::zeros({2, 3}));
  try {
    g.matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
  }
  EXPECT_THROW(g.add(a, g.constant(Tensor::zeros({3, 2}))), ShapeError);
  EXPECT_THROW(g.concat(a, g.constant(Tensor::zeros({3, 1}))), ShapeError);
}

TEST(Graph, NonFiniteInputRejected) {
  Graph g;
  EXPECT_THROW(g.constant(Tensor({1}, {std::nan("")})), NumericError);
  Parameter p{"p", Tensor({1}, {INFINITY}), {}, false};
  EXPECT_THROW(g.parameter(p), NumericError);
}

TEST(Graph, SaturatedActivationsStayInsideOpenRange) {
  Graph g;
  Var x = g.constant(Tensor({4}, {-800.0, -40.0, 40.0, 800.0}));
  const Tensor s = g.value(g.sigmoid(x));
  const Tensor t = g.value(g.tanh(x));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GT(s[i], 0.0);
    EXPECT_LT(s[i], 1.0);
    EXPECT_GT(t[i], -1.0);
    EXPECT_LT(t[i], 1.0);
  }
}

TEST(Loss, PerfectPrediction) {
  Graph g;
  Var l = bce_loss(g, g.constant(Tensor({1}, {1.0})), Tensor({1}, {1.0}));
  EXPECT_LE(g.value(l).item(), 1e-6);
  EXPECT_GE(g.value(l).item(), 0.0);
}

TEST(Loss, HandEvaluatedValues) {
  Graph g;
  Var l1 = bce_loss(g, g.constant(Tensor({2}, {0.5, 0.5})), Tensor({2}, {1, 0}));
  EXPECT_NEAR(g.value(l1).item(), std::numbers::ln2, 1e-12);
  // (-ln 0.9 - ln 0.8) / 2
  Var l2 = bce_loss(g, g.constant(Tensor({2}, {0.9, 0.2})), Tensor({2}, {1, 0}));
  EXPECT_NEAR(g.value(l2).item(), 0.164252033486018, 1e-12);
}

TEST(Loss, Errors) {
  Graph g;
  Var p = g.constant(Tensor({2}, {0.5, 0.5}));
  EXPECT_THROW(bce_loss(g, p, Tensor({3}, {1, 0, 1})), ShapeError);
  EXPECT_THROW(bce_loss(g, p, Tensor({2}, {1, 2})), DataError);
}

TEST(Loss, MaskedIgnoresMaskedEntries) {
  Graph g;
  Var p = g.constant(Tensor({3}, {0.5, 0.5, 0.01}));
  std::vector<double> mask{1, 1, 0};
  Var l = masked_bce_loss(g, p, Tensor({3}, {1, 0, -1}), mask);
  EXPECT_NEAR(g.value(l).item(), std::numbers::ln2, 1e-12);
  std::vector<double> none{0, 0, 0};
  EXPECT_EQ(g.value(masked_bce_loss(g, p, Tensor({3}, {0, 0, 0}), none)).item(), 0.0);
}

TEST(Loss, NonNegativeOnRandomInputs) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Graph g;
    Tensor p = random_tensor({5}, rng, 0.0, 1.0);
    Tensor y({5});
    for (double& v : y.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    EXPECT_GE(g.value(bce_loss(g, g.constant(p), y)).item(), 0.0);
  }
}

TEST(Backward, SigmoidDerivativeAtZero) {
  Graph g;
  Parameter x{"x", Tensor({1}, {0.0}), {}, false};
  g.backward(g.sum(g.sigmoid(g.parameter(x))));
  EXPECT_DOUBLE_EQ(x.grad[0], 0.25);
}

TEST(Backward, UnusedParameterGetsZeros) {
  Graph g;
  Parameter used{"used", Tensor({2}, {1.0, 2.0}), {}, false};
  Parameter unused{"unused", Tensor({3}, {1.0, 2.0, 3.0}), {}, false};
  Var u = g.parameter(used);
  g.parameter(unused);
  g.backward(g.sum(g.mul(u, u)));
  EXPECT_EQ(unused.grad, Tensor::zeros({3}));
  EXPECT_EQ(used.grad, Tensor({2}, {2.0, 4.0}));
}

TEST(Backward, NonScalarLossRejected) {
  Graph g;
  Parameter p{"p", Tensor({2}, {1.0, 2.0}), {}, false};
  EXPECT_THROW(g.backward(g.sigmoid(g.parameter(p))), ShapeError);
  Graph off(GradMode::kDisabled);
  EXPECT_THROW(off.backward(off.sum(off.constant(Tensor({1}, {1.0})))), Error);
}

TEST(Backward, RepeatedBackwardIsIdentical) {
  Rng rng(3);
  Parameter w{"w", random_tensor({4, 3}, rng), {}, false};
  Graph g;
  Var x = g.constant(random_tensor({5, 4}, rng));
  Var loss = g.mean(g.tanh(g.matmul(x, g.parameter(w))));
  g.backward(loss);
  Tensor first = w.grad;
  g.backward(loss);
  EXPECT_EQ(w.grad, first);
}

// Plain-loop logistic loss used as an oracle independent of the graph.
double logistic_loss(const std::vector<double>& w, const std::vector<std::vector<double>>& xs,
                     const std::vector<double>& ys) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * xs[i][j];
    const double p = 1.0 / (1.0 + std::exp(-z));
    total += -(ys[i] * std::log(p) + (1 - ys[i]) * std::log(1 - p));
  }
  return total / static_cast<double>(xs.size());
}

TEST(Backward, LogisticLossMatchesCentralDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 6;
    const std::size_t d = 10;
    std::vector<std::vector<double>> xs(n, std::vector<double>(d));
    std::vector<double> ys(n);
    Tensor x({n, d});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = xs[i][j] = rng.uniform(-1, 1);
      ys[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    Parameter w{"w", random_tensor({d, 1}, rng), {}, false};
    Graph g;
    Var p = g.sigmoid(g.matmul(g.constant(x), g.parameter(w)));
    g.backward(bce_loss(g, p, Tensor({n}, std::vector<double>(ys))));

    std::vector<double> wv(w.value.values().begin(), w.value.values().end());
    const double h = 1e-5;
    for (std::size_t j = 0; j < d; ++j) {
      auto up = wv;
      auto down = wv;
      up[j] += h;
      down[j] -= h;
      const double numeric = (logistic_loss(up, xs, ys) - logistic_loss(down, xs, ys)) / (2 * h);
      const double analytic = w.grad[j];
      EXPECT_LE(std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)), 1e-5);
    }
  }
}

// Every primitive: d/dinputs of sum(op(inputs) * R) against central
// differences, at least 100 probed coordinates per primitive.
TEST(Backward, EveryPrimitiveMatchesFiniteDifferences) {
  using Builder = std::function<Var(Graph&, std::vector<Var>&)>;
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    Builder build;
    double lo = -1.0;
    double hi = 1.0;
  };
  const std::vector<Case> cases = {
      {"matmul", {{3, 4}, {4, 2}}, [](Graph& g, auto& v) { return g.matmul(v[0], v[1]); }},
      {"add", {{3, 4}, {3, 4}}, [](Graph& g, auto& v) { return g.add(v[0], v[1]); }},
      {"add_bcast", {{3, 4}, {4}}, [](Graph& g, auto& v) { return g.add(v[0], v[1]); }},
      {"sub", {{3, 4}, {1, 4}}, [](Graph& g, auto& v) { return g.sub(v[0], v[1]); }},
      {"mul", {{3, 4}, {3, 4}}, [](Graph& g, auto& v) { return g.mul(v[0], v[1]); }},
      {"mul_bcast", {{3, 4}, {4}}, [](Graph& g, auto& v) { return g.mul(v[0], v[1]); }},
      {"concat", {{3, 2}, {3, 3}}, [](Graph& g, auto& v) { return g.concat(v[0], v[1]); }},
      {"concat_rows", {{2, 3}, {4, 3}},
       [](Graph& g, auto& v) { return g.concat_rows(std::span<const Var>(v)); }},
      {"sigmoid", {{3, 4}}, [](Graph& g, auto& v) { return g.sigmoid(v[0]); }, -3, 3},
      {"tanh", {{3, 4}}, [](Graph& g, auto& v) { return g.tanh(v[0]); }, -3, 3},
      {"relu", {{3, 4}}, [](Graph& g, auto& v) { return g.relu(v[0]); }},
      {"mean", {{3, 4}}, [](Graph& g, auto& v) { return g.mean(v[0]); }},
      {"sum", {{3, 4}}, [](Graph& g, auto& v) { return g.sum(v[0]); }},
      {"log", {{3, 4}}, [](Graph& g, auto& v) { return g.log(v[0]); }, 0.5, 2.0},
      {"negate", {{3, 4}}, [](Graph& g, auto& v) { return g.negate(v[0]); }},
      {"slice", {{3, 5}}, [](Graph& g, auto& v) { return g.slice(v[0], 1, 3); }},
      {"slice_rows", {{5, 3}}, [](Graph& g, auto& v) { return g.slice_rows(v[0], 1, 3); }},
      {"scale", {{3, 4}}, [](Graph& g, auto& v) { return g.scale(v[0], -2.5); }},
      {"clamp", {{3, 4}}, [](Graph& g, auto& v) { return g.clamp(v[0], -0.5, 0.5); }},
      {"normalize_columns", {{6, 3}},
       [](Graph& g, auto& v) { return g.normalize_columns(v[0], 1e-3); }},
  };
  Rng rng(2024);
  for (const Case& c : cases) {
    std::size_t probes = 0;
    double worst = 0.0;
    while (probes < 100) {
      std::vector<Parameter> params;
      for (std::size_t k = 0; k < c.shapes.size(); ++k) {
        params.push_back({"in" + std::to_string(k), random_tensor(c.shapes[k], rng, c.lo, c.hi), {},
                          false});
      }
      Tensor weights;
      auto loss = [&](bool with_grad) {
        Graph g;
        std::vector<Var> vars;
        for (auto& p : params) vars.push_back(g.parameter(p));
        Var out = c.build(g, vars);
        if (weights.empty()) weights = random_tensor(g.value(out).shape(), rng);
        Var l = g.sum(g.mul(out, g.constant(weights)));
        if (with_grad) g.backward(l);
        return g.value(l).item();
      };
      std::vector<Parameter*> ptrs;
      for (auto& p : params) ptrs.push_back(&p);
      GradCheckReport r = finite_diff_check(loss, ptrs, 1e-5);
      probes += r.coordinates;
      worst = std::max(worst, r.max_error);
    }
    EXPECT_LE(worst, 1e-5) << c.name;
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Parameter p{"p", Tensor({3}, {1.0, -2.0, 3.0}), Tensor::zeros({3}), false};
  Tensor before = p.value;
  Adam adam;
  std::vector<Parameter*> params{&p};
  adam.step(params);
  EXPECT_EQ(p.value, before);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Parameter p{"p", Tensor({3}, {1.0, -2.0, 3.0}), Tensor({3}, {0.7, -3.0, 1e-3}), false};
  Tensor before = p.value;
  Adam adam;
  std::vector<Parameter*> params{&p};
  adam.step(params);
  for (std::size_t i = 0; i < 3; ++i) {
    const double g = p.grad[i];
    const double sign = g > 0 ? 1.0 : -1.0;
    // Bias-corrected moments are g and g^2 after one step.
    EXPECT_NEAR(p.value[i] - before[i], -1e-3 * g / (std::abs(g) + 1e-8), 1e-15);
    EXPECT_NEAR(p.value[i] - before[i], -1e-3 * sign, 1e-7);
  }
}

TEST(Adam, Bookkeeping) {
  Parameter p{"p", Tensor({2}, {1.0, 1.0}), Tensor({2}, {0.5, -0.5}), false};
  Parameter frozen{"f", Tensor({2}, {1.0, 1.0}), Tensor({2}, {0.5, -0.5}), true};
  Adam adam;
  std::vector<Parameter*> params{&p, &frozen};
  adam.step(params);
  adam.step(params);
  EXPECT_EQ(adam.step_count(), 2u);
  for (double v : adam.second_moment(0).values()) EXPECT_GT(v, 0.0);
  EXPECT_TRUE(adam.second_moment(1).empty());
  EXPECT_EQ(frozen.value, Tensor({2}, {1.0, 1.0}));
}

TEST(Adam, Errors) {
  Parameter p{"p", Tensor({2}, {1.0, 1.0}), Tensor({3}, {0.5, -0.5, 1.0}), false};
  Adam adam;
  std::vector<Parameter*> params{&p};
  EXPECT_THROW(adam.step(params), ShapeError);
  p.grad = Tensor({2}, {NAN, 0.0});
  EXPECT_THROW(adam.step(params), NumericError);
  EXPECT_THROW(Adam(AdamConfig{.learning_rate = 0.0}), ConfigError);
}

TEST(GradCheck, QuadraticIsExact) {
  Rng rng(5);
  Parameter w{"w", random_tensor({7}, rng, -3, 3), {}, false};
  std::vector<Parameter*> params{&w};
  auto loss = [&](bool with_grad) {
    Graph g;
    Var v = g.parameter(w);
    Var l = g.scale(g.sum(g.mul(v, v)), 0.5);
    if (with_grad) g.backward(l);
    return g.value(l).item();
  };
  EXPECT_LE(finite_diff_check(loss, params, 1e-5).max_error, 1e-9);
}

TEST(GradCheck, LogisticDenseLayer) {
  Rng rng(9);
  Parameter w{"w", random_tensor({5, 1}, rng), {}, false};
  Parameter b{"b", random_tensor({1}, rng), {}, false};
  Tensor x = random_tensor({8, 5}, rng);
  Tensor y({8});
  for (double& v : y.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  std::vector<Parameter*> params{&w, &b};
  auto loss = [&](bool with_grad) {
    Graph g;
    Var p = g.sigmoid(g.add(g.matmul(g.constant(x), g.parameter(w)), g.parameter(b)));
    Var l = bce_loss(g, p, y);
    if (with_grad) g.backward(l);
    return g.value(l).item();
  };
  EXPECT_LE(finite_diff_check(loss, params, 1e-5).max_error, 1e-5);
}

TEST(GradCheck, NonFiniteProbeRejected) {
  Parameter w{"w", Tensor({1}, {1e-6}), {}, false};
  std::vector<Parameter*> params{&w};
  auto loss = [&](bool with_grad) {
    const double v = w.value[0];
    if (with_grad) w.grad = Tensor({1}, {1.0 / v});
    return v > 0 ? std::log(v) : std::log(v);  // log of a negative probe is NaN
  };
  EXPECT_THROW(finite_diff_check(loss, params, 1e-5), NumericError);
}

}  // namespace
}  // namespace wmattr::ad
