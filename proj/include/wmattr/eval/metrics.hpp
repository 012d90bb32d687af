// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmattr/data/pipeline.hpp"

namespace wmattr::eval {

inline constexpr double kDefaultThreshold = 0.5;

struct ConfusionMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  bool precision_undefined = false;  // nothing predicted positive; precision reported as 0
  bool recall_undefined = false;     // no positive labels; recall reported as 0
};

/// score >= threshold is a positive prediction.
ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold = kDefaultThreshold);

/// Mann-Whitney estimate with ties counted one half. Empty when only one class
/// is present.
std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision. Equal scores form one threshold group: the group's
/// positives share the precision at the group's end.
double auprc(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under the PR curve through the same group end points,
/// starting at (recall 0, precision of the first group).
double trapezoid_auprc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of positive labels.
double baseline_auprc(std::span<const int> labels);

struct MetricsRow {
  std::string model = "multitask";
  std::string task;  // "attrition" or "outcome"
  data::WindowConfig window;
  std::size_t n = 0;
  double prevalence = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  std::optional<double> auroc;
  std::optional<double> auprc;
  double baseline_auprc = 0.0;
  std::vector<std::string> flags;
};

MetricsRow evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                           std::string task, const data::WindowConfig& window,
                           double threshold = kDefaultThreshold);

/// Fixed-point text, round half away from zero.
std::string format_fixed(double value, int decimals);
/// Months with at most one decimal: 1 -> "1", 13.5 -> "13.5".
std::string format_months(double months);

/// Header plus one line per row whose task matches, in input order. Missing
/// values print as "NA".
std::string results_table(std::span<const MetricsRow> rows, const std::string& task,
                          char delimiter = ',');

nlohmann::json rows_to_json(std::span<const MetricsRow> rows);
std::vector<MetricsRow> rows_from_json(const nlohmann::json& j);

}  // namespace wmattr::eval
