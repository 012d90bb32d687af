// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/baseline/logistic.hpp"

#include <cmath>
#include <deque>
#include <string>

#include "wmattr/error.hpp"

namespace wmattr::baseline {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Evaluator {
  const Matrix& x;
  const Vector& y;
  double lambda;
  std::size_t calls = 0;

  double operator()(const Vector& w, Vector& g) {
    ++calls;
    return lr_objective(x, y, lambda, w, &g);
  }
};

struct LineResult {
  double step = 0.0;
  double f = 0.0;
  bool ok = false;
};

// Strong-Wolfe search along p with a bisection zoom.
LineResult wolfe_search(Evaluator& eval, const Vector& w, double f0, const Vector& g0, const Vector& p,
                        double initial_step, Vector& w_out, Vector& g_out) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  const double d0 = g0.dot(p);
  if (!(d0 < 0)) return {};
  auto phi = [&](double a, double& d) {
    w_out = w + a * p;
    const double f = eval(w_out, g_out);
    d = g_out.dot(p);
    return f;
  };
  auto zoom = [&](double lo, double f_lo, double hi) -> LineResult {
    for (int it = 0; it < 60; ++it) {
      const double a = 0.5 * (lo + hi);
      double d = 0.0;
      const double f = phi(a, d);
      if (f > f0 + c1 * a * d0 || f >= f_lo) {
        hi = a;
      } else {
        if (std::abs(d) <= -c2 * d0) return {a, f, true};
        if (d * (hi - lo) >= 0) hi = lo;
        lo = a;
        f_lo = f;
      }
      if (std::abs(hi - lo) < 1e-16 * std::max(1.0, lo)) break;
    }
    // Accept the best sufficient-decrease point found.
    if (lo > 0) {
      double d = 0.0;
      const double f = phi(lo, d);
      return {lo, f, f < f0};
    }
    return {};
  };

  double prev = 0.0;
  double f_prev = f0;
  double a = initial_step;
  for (int it = 0; it < 40; ++it) {
    double d = 0.0;
    const double f = phi(a, d);
    if (!std::isfinite(f)) {
      a *= 0.5;
      continue;
    }
    if (f > f0 + c1 * a * d0 || (it > 0 && f >= f_prev)) return zoom(prev, f_prev, a);
    if (std::abs(d) <= -c2 * d0) return {a, f, true};
    if (d >= 0) return zoom(a, f, prev);
    prev = a;
    f_prev = f;
    a *= 2.0;
  }
  return {};
}

}  // namespace

std::vector<double> aggregate_temporal(std::span<const double> values, std::size_t steps, std::size_t width) {
  if (steps == 0) throw DataError("aggregate_temporal: no buckets");
  if (values.size() != steps * width) throw ShapeError("aggregate_temporal: values do not match steps x width");
  std::vector<double> out(width, 0.0);
  double present = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double* row = values.data() + t * width;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == data::kBmiColumn) continue;
      out[c] += row[c];
    }
    if (width > data::kBmiPresentColumn && row[data::kBmiPresentColumn] != 0.0) {
      out[data::kBmiColumn] += row[data::kBmiColumn];
      present += 1.0;
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    if (c == data::kBmiColumn) continue;
    out[c] /= static_cast<double>(steps);
  }
  if (width > data::kBmiColumn) out[data::kBmiColumn] = present > 0 ? out[data::kBmiColumn] / present : 0.0;
  return out;
}

std::vector<double> aggregate_temporal(const data::TemporalSequence& seq) {
  return aggregate_temporal(seq.values, seq.buckets, seq.width);
}

std::vector<double> flatten_sample(const data::WindowedSample& sample, std::size_t steps, std::size_t width) {
  std::vector<double> out = sample.static_features;
  const auto agg = aggregate_temporal(sample.temporal, steps, width);
  out.insert(out.end(), agg.begin(), agg.end());
  return out;
}

Matrix design_matrix(const data::Dataset& dataset) {
  const std::size_t d = dataset.static_width + dataset.temporal_width;
  Matrix x(dataset.samples.size(), d);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto row = flatten_sample(dataset.samples[i], dataset.steps, dataset.temporal_width);
    for (std::size_t c = 0; c < d; ++c) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
  }
  return x;
}

double lr_objective(const Matrix& x, const Vector& y, double lambda, const Vector& w, Vector* gradient) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (w.size() != d + 1) throw ShapeError("lr_objective: weight length does not match feature width + 1");
  const Vector z = (x * w.tail(d)).array() + w[0];
  double loss = 0.0;
  Vector residual(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += softplus(z[i]) - y[i] * z[i];
    residual[i] = sigmoid(z[i]) - y[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double penalty = 0.5 * lambda * w.tail(d).squaredNorm();
  if (gradient != nullptr) {
    gradient->resize(d + 1);
    (*gradient)[0] = residual.sum() * inv_n;
    gradient->tail(d) = (x.transpose() * residual) * inv_n + lambda * w.tail(d);
  }
  return loss * inv_n + penalty;
}

LrModel train_logistic(const Matrix& x, const Vector& y, double lambda, const LbfgsOptions& options,
                       const std::optional<Vector>& initial) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw DataError("train_logistic: need at least 2 samples");
  if (y.size() != n) throw ShapeError("train_logistic: label count does not match rows");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("train_logistic: lambda must be finite and >= 0");
  if (options.memory == 0) throw ConfigError("train_logistic: memory must be at least 1");
  double positives = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw DataError("train_logistic: labels must be 0 or 1");
    positives += y[i];
  }
  if (positives == 0.0 || positives == static_cast<double>(n)) {
    throw DataError("train_logistic: training labels contain a single class");
  }
  if (!x.allFinite()) throw NumericError("train_logistic: non-finite feature value");

  Evaluator eval{x, y, lambda};
  LrModel model;
  model.lambda = lambda;
  Vector w = initial ? *initial : Vector::Zero(d + 1);
  if (w.size() != d + 1) throw ShapeError("train_logistic: initial weights have the wrong length");
  Vector g;
  double f = eval(w, g);
  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<double> rho_hist;
  Vector w_next(d + 1);
  Vector g_next(d + 1);
  bool restarted = false;
  std::size_t it = 0;
  for (; it < options.max_iterations && g.norm() > options.gradient_tolerance; ++it) {
    // Two-loop recursion.
    Vector q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Vector r = gamma * q;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(r);
      r += (alpha[k] - beta) * s_hist[k];
    }
    Vector p = -r;
    if (!(p.dot(g) < 0)) {
      p = -g;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    const double step0 = s_hist.empty() ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-300)) : 1.0;
    const LineResult ls = wolfe_search(eval, w, f, g, p, step0, w_next, g_next);
    if (!ls.ok) {
      if (restarted || s_hist.empty()) break;
      // Drop the curvature memory and retry along the gradient.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      restarted = true;
      continue;
    }
    restarted = false;
    Vector s = w_next - w;
    Vector yv = g_next - g;
    const double sy = s.dot(yv);
    w = w_next;
    g = g_next;
    f = ls.f;
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
  model.weights = w;
  model.iterations = it;
  model.gradient_norm = g.norm();
  model.objective = f;
  model.converged = model.gradient_norm <= options.gradient_tolerance;
  return model;
}

double predict_logistic(const LrModel& model, std::span<const double> x) {
  if (x.size() != model.feature_width()) {
    throw ShapeError("predict_logistic: input width " + std::to_string(x.size()) + " != model width " +
                     std::to_string(model.feature_width()));
  }
  double z = model.weights[0];
  for (std::size_t i = 0; i < x.size(); ++i) z += model.weights[static_cast<Eigen::Index>(i + 1)] * x[i];
  return sigmoid(z);
}

Vector predict_logistic(const LrModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.feature_width()) {
    throw ShapeError("predict_logistic: input width " + std::to_string(x.cols()) + " != model width " +
                     std::to_string(model.feature_width()));
  }
  const Vector z = (x * model.weights.tail(x.cols())).array() + model.weights[0];
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

double lambda_for(double inverse_strength, std::size_t n) {
  if (!(inverse_strength > 0.0)) throw ConfigError("lr: inverse regularization strength must be positive");
  if (n == 0) throw DataError("lr: empty training set");
  return 1.0 / (inverse_strength * static_cast<double>(n));
}

WindowBaseline fit_window(const data::WindowData& window, double inverse_strength, const LbfgsOptions& options) {
  const data::Dataset& train = window.of(data::Split::kTrain);
  if (train.samples.empty()) throw DataError("lr: empty training split for window " + window.window.label());
  const Matrix x = design_matrix(train);
  const Eigen::Index n = x.rows();
  WindowBaseline out;
  out.window = window.window;
  Vector ya(n);
  for (Eigen::Index i = 0; i < n; ++i) ya[i] = train.samples[static_cast<std::size_t>(i)].attrition;
  out.attrition = train_logistic(x, ya, lambda_for(inverse_strength, train.samples.size()), options);

  std::vector<Eigen::Index> defined;
  double positives = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int o = train.samples[static_cast<std::size_t>(i)].outcome;
    if (o < 0) continue;
    defined.push_back(i);
    positives += o;
  }
  if (defined.size() >= 2 && positives > 0 && positives < static_cast<double>(defined.size())) {
    Matrix xo(static_cast<Eigen::Index>(defined.size()), x.cols());
    Vector yo(static_cast<Eigen::Index>(defined.size()));
    for (std::size_t k = 0; k < defined.size(); ++k) {
      xo.row(static_cast<Eigen::Index>(k)) = x.row(defined[k]);
      yo[static_cast<Eigen::Index>(k)] = train.samples[static_cast<std::size_t>(defined[k])].outcome;
    }
    out.outcome = train_logistic(xo, yo, lambda_for(inverse_strength, defined.size()), options);
  }
  return out;
}

nlohmann::json model_to_json(const LrModel& m) {
  return {{"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())},
          {"lambda", m.lambda},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"gradient_norm", m.gradient_norm},
          {"objective", m.objective}};
}

LrModel model_from_json(const nlohmann::json& j) {
  LrModel m;
  try {
    const auto w = j.at("weights").get<std::vector<double>>();
    m.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.lambda = j.at("lambda").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<std::size_t>();
    m.gradient_norm = j.at("gradient_norm").get<double>();
    m.objective = j.at("objective").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("lr model: ") + e.what());
  }
  return m;
}

}  // namespace wmattr::baseline
