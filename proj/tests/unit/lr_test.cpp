// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <gtest/gtest.h>

#include <cmath>

#include "wmattr/baseline/logistic.hpp"
#include "wmattr/error.hpp"
#include "wmattr/random.hpp"

namespace wmattr::baseline {
namespace {

// Overlapping classes: labels drawn from a logistic model with noise.
void noisy_problem(std::uint64_t seed, std::size_t n, std::size_t d, Matrix& x, Vector& y) {
  Rng rng(seed);
  x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double z = -0.3;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = rng.normal();
      z += (j % 2 == 0 ? 0.8 : -0.5) * x(i, j);
    }
    y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1.0 : 0.0;
  }
}

// Newton iterations on the same objective.
Vector newton_solution(const Matrix& x, const Vector& y, double lambda) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix a(n, d + 1);
  a.col(0).setOnes();
  a.rightCols(d) = x;
  Vector w = Vector::Zero(d + 1);
  for (int it = 0; it < 100; ++it) {
    Vector prob(n);
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = 1.0 / (1.0 + std::exp(-(a.row(i).dot(w))));
    Vector g = a.transpose() * (prob - y) / static_cast<double>(n);
    Eigen::MatrixXd h = a.transpose() * (prob.array() * (1.0 - prob.array())).matrix().asDiagonal() * a /
                        static_cast<double>(n);
    for (Eigen::Index j = 1; j <= d; ++j) {
      g[j] += lambda * w[j];
      h(j, j) += lambda;
    }
    const Vector step = h.ldlt().solve(g);
    w -= step;
    if (step.norm() < 1e-14) break;
  }
  return w;
}

TEST(Aggregate, HandExamples) {
  const std::size_t width = data::temporal_width(1);
  // Three buckets: visit column 0 set only in the first, BMI 98 and 96 where present.
  std::vector<double> v(3 * width, 0.0);
  v[0] = 1.0;
  v[data::kBmiColumn] = 98.0;
  v[data::kBmiPresentColumn] = 1.0;
  v[2 * width + data::kBmiColumn] = 96.0;
  v[2 * width + data::kBmiPresentColumn] = 1.0;
  v[2 * width + data::kDiagnosisColumn] = 1.0;
  const auto a = aggregate_temporal(v, 3, width);
  EXPECT_DOUBLE_EQ(a[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(a[data::kBmiColumn], 97.0);
  EXPECT_DOUBLE_EQ(a[data::kBmiPresentColumn], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a[data::kDiagnosisColumn], 1.0 / 3.0);

  std::vector<double> same;
  for (int t = 0; t < 4; ++t) same.insert(same.end(), {0.0, 1.0, 0.0, 0.0, 0.5, 1.0, 1.0});
  const auto s = aggregate_temporal(same, 4, width);
  EXPECT_EQ(s, std::vector<double>(same.begin(), same.begin() + static_cast<long>(width)));

  EXPECT_EQ(aggregate_temporal(std::vector<double>(2 * width, 0.0), 2, width)[data::kBmiColumn], 0.0);
  EXPECT_THROW(aggregate_temporal(std::vector<double>(5, 0.0), 2, width), ShapeError);
  EXPECT_THROW(aggregate_temporal(std::vector<double>{}, 0, width), DataError);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  Matrix x;
  Vector y;
  noisy_problem(1, 50, 6, x, y);
  Rng rng(2);
  for (int draw = 0; draw < 10; ++draw) {
    Vector w(7);
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = rng.normal();
    Vector g;
    lr_objective(x, y, 0.3, w, &g);
    Vector fd(7);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      Vector a = w, b = w;
      a[j] += h;
      b[j] -= h;
      fd[j] = (lr_objective(x, y, 0.3, a, nullptr) - lr_objective(x, y, 0.3, b, nullptr)) / (2 * h);
    }
    EXPECT_LE((g - fd).norm() / std::max(1.0, fd.norm()), 1e-7);
  }
}

TEST(Solver, ConvergesToNewtonOptimumOnOverlappingClasses) {
  for (std::uint64_t seed : {3, 4, 5}) {
    Matrix x;
    Vector y;
    noisy_problem(seed, 400, 8, x, y);
    const double lambda = lambda_for(1.0, 400);
    const LrModel m = train_logistic(x, y, lambda);
    EXPECT_TRUE(m.converged);
    EXPECT_LE(m.gradient_norm, 1e-6);
    Vector g;
    lr_objective(x, y, lambda, m.weights, &g);
    EXPECT_LE(g.norm(), 1e-6);
    const Vector w = newton_solution(x, y, lambda);
    EXPECT_NEAR(m.objective, lr_objective(x, y, lambda, w, nullptr), 1e-10);
    EXPECT_LE((m.weights - w).norm(), 1e-4);
  }
}

TEST(Solver, StartingPointDoesNotChangeTheOptimum) {
  Matrix x;
  Vector y;
  noisy_problem(6, 300, 5, x, y);
  const double lambda = 0.01;
  const LrModel a = train_logistic(x, y, lambda);
  Vector start(6);
  start << 3, -2, 1, 4, -5, 2;
  const LrModel b = train_logistic(x, y, lambda, {}, start);
  EXPECT_NEAR(a.objective, b.objective, 1e-8);
}

TEST(Solver, SeparableDataIsClassifiedPerfectly) {
  Matrix x(40, 2);
  Vector y(40);
  Rng rng(7);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const bool positive = i % 2 == 0;
    x(i, 0) = (positive ? 1.0 : -1.0) * (0.5 + rng.uniform());
    x(i, 1) = rng.normal();
    y[i] = positive ? 1.0 : 0.0;
  }
  for (double lambda : {0.01, lambda_for(1.0, 40)}) {
    const LrModel m = train_logistic(x, y, lambda);
    const Vector p = predict_logistic(m, x);
    for (Eigen::Index i = 0; i < 40; ++i) EXPECT_EQ(p[i] >= 0.5 ? 1.0 : 0.0, y[i]) << lambda;
  }
}

TEST(Solver, StrongPenaltyShrinksWeights) {
  Matrix x;
  Vector y;
  noisy_problem(8, 200, 4, x, y);
  const LrModel m = train_logistic(x, y, 1e6);
  EXPECT_LE(m.weights.tail(4).norm(), 1e-3);
  // The intercept is unpenalized and tracks the prevalence.
  EXPECT_NEAR(1.0 / (1.0 + std::exp(-m.weights[0])), y.mean(), 1e-3);
}

TEST(Solver, Errors) {
  Matrix x(3, 1);
  x << 1, 2, 3;
  EXPECT_THROW(train_logistic(x, Vector::Ones(3), 0.1), DataError);
  EXPECT_THROW(train_logistic(x, Vector::Zero(3), 0.1), DataError);
  Vector y(3);
  y << 0, 1, 0;
  EXPECT_THROW(train_logistic(x.topRows(1), y.head(1), 0.1), DataError);
  EXPECT_THROW(train_logistic(x, y, -1.0), ConfigError);
  Vector bad(3);
  bad << 0, 2, 1;
  EXPECT_THROW(train_logistic(x, bad, 0.1), DataError);
  x(1, 0) = NAN;
  EXPECT_THROW(train_logistic(x, y, 0.1), NumericError);
  EXPECT_THROW(lambda_for(0.0, 10), ConfigError);
}

TEST(Predict, HandExamplesAndMonotonicity) {
  LrModel zero;
  zero.weights = Vector::Zero(3);
  EXPECT_EQ(predict_logistic(zero, std::vector<double>{5.0, -2.0}), 0.5);
  LrModel m;
  m.weights = Vector(2);
  m.weights << 0.0, 1.0;
  EXPECT_EQ(predict_logistic(m, std::vector<double>{0.0}), 0.5);
  double last = 0.0;
  for (double v = -5.0; v <= 5.0; v += 0.5) {
    const double p = predict_logistic(m, std::vector<double>{v});
    EXPECT_GT(p, last);
    EXPECT_LT(p, 1.0);
    last = p;
  }
  EXPECT_THROW(predict_logistic(m, std::vector<double>{1.0, 2.0}), ShapeError);
  EXPECT_THROW(predict_logistic(m, Matrix(2, 3)), ShapeError);
}

TEST(Serialization, JsonRoundTrip) {
  Matrix x;
  Vector y;
  noisy_problem(9, 100, 3, x, y);
  const LrModel m = train_logistic(x, y, 0.05);
  const LrModel back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.converged, m.converged);
  EXPECT_EQ(back.iterations, m.iterations);
  EXPECT_THROW(model_from_json(nlohmann::json::object()), DataError);
}

}  // namespace
}  // namespace wmattr::baseline
