// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "wmattr/error.hpp"

namespace wmattr::eval {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.empty()) throw DataError(std::string(what) + ": empty scored set");
  if (scores.size() != labels.size()) {
    throw DataError(std::string(what) + ": " + std::to_string(scores.size()) + " scores but " +
                    std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError(std::string(what) + ": non-finite score");
    if (labels[i] != 0 && labels[i] != 1) throw DataError(std::string(what) + ": labels must be 0 or 1");
  }
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

struct GroupEnd {
  std::size_t tp;
  std::size_t fp;
  std::size_t positives;  // positives inside the group
};

std::vector<GroupEnd> group_ends(std::span<const double> scores, std::span<const int> labels) {
  const auto order = descending(scores);
  std::vector<GroupEnd> out;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      pos += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    tp += pos;
    fp += (j - i) - pos;
    out.push_back({tp, fp, pos});
    i = j;
  }
  return out;
}

std::size_t count_positive(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

}  // namespace

ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold) {
  check_inputs(scores, labels, "confusion_metrics");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("confusion_metrics: threshold must be in (0,1)");
  ConfusionMetrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      ++(predicted ? m.tp : m.fn);
    } else {
      ++(predicted ? m.fp : m.tn);
    }
  }
  m.precision_undefined = m.tp + m.fp == 0;
  m.recall_undefined = m.tp + m.fn == 0;
  m.precision = m.precision_undefined ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  m.recall = m.recall_undefined ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(scores.size());
  return m;
}

std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auroc");
  const std::size_t pos = count_positive(labels);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the midrank sum keeps everything integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_pos += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    twice_rank_sum += group_pos * (i + 1 + j);  // midrank (i+1+j)/2 for 1-based ranks i+1..j
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - pos * (pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auprc");
  const std::size_t total = count_positive(labels);
  if (total == 0) throw DataError("auprc: no positive labels");
  double ap = 0.0;
  for (const GroupEnd& g : group_ends(scores, labels)) {
    if (g.positives == 0) continue;
    const double precision = static_cast<double>(g.tp) / static_cast<double>(g.tp + g.fp);
    ap += precision * static_cast<double>(g.positives) / static_cast<double>(total);
  }
  return ap;
}

double trapezoid_auprc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "trapezoid_auprc");
  const std::size_t total = count_positive(labels);
  if (total == 0) throw DataError("trapezoid_auprc: no positive labels");
  double area = 0.0;
  double prev_recall = 0.0;
  std::optional<double> prev_precision;
  for (const GroupEnd& g : group_ends(scores, labels)) {
    if (g.positives == 0) continue;
    const double precision = static_cast<double>(g.tp) / static_cast<double>(g.tp + g.fp);
    const double recall = static_cast<double>(g.tp) / static_cast<double>(total);
    const double left = prev_precision.value_or(precision);
    area += 0.5 * (left + precision) * (recall - prev_recall);
    prev_recall = recall;
    prev_precision = precision;
  }
  return area;
}

double baseline_auprc(std::span<const int> labels) {
  if (labels.empty()) throw DataError("baseline_auprc: empty label set");
  return static_cast<double>(count_positive(labels)) / static_cast<double>(labels.size());
}

MetricsRow evaluate_scores(std::span<const double> scores, std::span<const int> labels,
                           std::string task, const data::WindowConfig& window, double threshold) {
  MetricsRow row;
  row.task = std::move(task);
  row.window = window;
  const ConfusionMetrics c = confusion_metrics(scores, labels, threshold);
  row.n = scores.size();
  row.prevalence = baseline_auprc(labels);
  row.baseline_auprc = row.prevalence;
  row.precision = c.precision;
  row.recall = c.recall;
  row.accuracy = c.accuracy;
  if (c.precision_undefined) row.flags.emplace_back("no_predicted_positives");
  row.auroc = auroc(scores, labels);
  if (!row.auroc) row.flags.emplace_back("single_class");
  if (c.tp + c.fn > 0) row.auprc = auprc(scores, labels);
  return row;
}

std::string format_fixed(double value, int decimals) {
  if (!std::isfinite(value)) return "NA";
  const double scale = std::pow(10.0, decimals);
  // Snap away binary noise first so decimal ties such as 0.755 round up.
  const double scaled = std::round(value * scale * 1e9) / 1e9;
  const double rounded = std::round(scaled) / scale;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, rounded == 0.0 ? 0.0 : rounded);
  return buf;
}

std::string format_months(double months) {
  char buf[32];
  if (months == std::floor(months)) {
    std::snprintf(buf, sizeof(buf), "%.0f", months);
  } else {
    std::snprintf(buf, sizeof(buf), "%g", months);
  }
  return buf;
}

std::string results_table(std::span<const MetricsRow> rows, const std::string& task, char delimiter) {
  std::ostringstream out;
  const char d = delimiter;
  out << "Observation" << d << "Prediction" << d << "Precision" << d << "Recall" << d << "AUROC" << d
      << "AUPRC" << d << "B.AUPRC\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_fixed(*v, 2) : std::string("NA"); };
  for (const MetricsRow& r : rows) {
    if (r.task != task) continue;
    out << format_months(r.window.observation_months) << d << format_months(r.window.prediction_months) << d
        << format_fixed(r.precision, 2) << d << format_fixed(r.recall, 2) << d << opt(r.auroc) << d
        << opt(r.auprc) << d << format_fixed(r.baseline_auprc, 2) << '\n';
  }
  return out.str();
}

nlohmann::json rows_to_json(std::span<const MetricsRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (const MetricsRow& r : rows) {
    out.push_back({{"model", r.model},
                   {"task", r.task},
                   {"observation_months", r.window.observation_months},
                   {"prediction_months", r.window.prediction_months},
                   {"n", r.n},
                   {"prevalence", r.prevalence},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"accuracy", r.accuracy},
                   {"auroc", opt(r.auroc)},
                   {"auprc", opt(r.auprc)},
                   {"baseline_auprc", r.baseline_auprc},
                   {"flags", r.flags}});
  }
  return out;
}

std::vector<MetricsRow> rows_from_json(const nlohmann::json& j) {
  std::vector<MetricsRow> rows;
  try {
    for (const auto& item : j) {
      MetricsRow r;
      r.model = item.at("model").get<std::string>();
      r.task = item.at("task").get<std::string>();
      r.window = {item.at("observation_months").get<double>(), item.at("prediction_months").get<double>()};
      r.n = item.at("n").get<std::size_t>();
      r.prevalence = item.at("prevalence").get<double>();
      r.precision = item.at("precision").get<double>();
      r.recall = item.at("recall").get<double>();
      r.accuracy = item.at("accuracy").get<double>();
      if (!item.at("auroc").is_null()) r.auroc = item.at("auroc").get<double>();
      if (!item.at("auprc").is_null()) r.auprc = item.at("auprc").get<double>();
      r.baseline_auprc = item.at("baseline_auprc").get<double>();
      r.flags = item.at("flags").get<std::vector<std::string>>();
      rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics document: ") + e.what());
  }
  return rows;
}

}  // namespace wmattr::eval
