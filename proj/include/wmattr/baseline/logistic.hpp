// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wmattr/data/pipeline.hpp"

namespace wmattr::baseline {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Per-column mean over buckets of a bucket-major [steps, width] sequence. The
/// BMI column averages only buckets whose presence flag is set (0 when none).
std::vector<double> aggregate_temporal(std::span<const double> values, std::size_t steps, std::size_t width);
std::vector<double> aggregate_temporal(const data::TemporalSequence& seq);

/// Static features followed by the aggregated temporal features.
std::vector<double> flatten_sample(const data::WindowedSample& sample, std::size_t steps, std::size_t width);
Matrix design_matrix(const data::Dataset& dataset);

struct LrModel {
  Vector weights;  // [intercept, w_1 .. w_d]
  double lambda = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;

  std::size_t feature_width() const { return weights.size() == 0 ? 0 : static_cast<std::size_t>(weights.size() - 1); }
};

struct LbfgsOptions {
  std::size_t memory = 10;
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-6;
};

/// Mean BCE + (lambda / 2) * ||w without intercept||^2 and its gradient.
double lr_objective(const Matrix& x, const Vector& y, double lambda, const Vector& w, Vector* gradient);

/// Limited-memory quasi-Newton with a strong-Wolfe line search. Starts from
/// `initial` (zeros when empty). Non-convergence returns the best iterate with
/// converged == false.
LrModel train_logistic(const Matrix& x, const Vector& y, double lambda, const LbfgsOptions& options = {},
                       const std::optional<Vector>& initial = std::nullopt);

double predict_logistic(const LrModel& model, std::span<const double> x);
Vector predict_logistic(const LrModel& model, const Matrix& x);

/// Inverse regularization strength C as in common library defaults; the mean
/// objective then uses lambda = 1 / (C * n).
inline constexpr double kDefaultInverseStrength = 1.0;
double lambda_for(double inverse_strength, std::size_t n);

struct WindowBaseline {
  data::WindowConfig window;
  LrModel attrition;
  std::optional<LrModel> outcome;  // absent when the training split lacks both outcome classes
};

/// Fits both tasks on the training split of one window. The outcome model
/// uses only samples with a defined label.
WindowBaseline fit_window(const data::WindowData& window, double inverse_strength = kDefaultInverseStrength,
                          const LbfgsOptions& options = {});

nlohmann::json model_to_json(const LrModel& model);
LrModel model_from_json(const nlohmann::json& j);

}  // namespace wmattr::baseline
