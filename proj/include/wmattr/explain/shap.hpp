// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wmattr/data/pipeline.hpp"
#include "wmattr/nn/model.hpp"

namespace wmattr::explain {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Largest player count exact_shap enumerates.
inline constexpr std::size_t kExactLimit = 15;

/// Bit i set: player i is present.
using Coalition = std::uint64_t;

class CoalitionGame {
 public:
  virtual ~CoalitionGame() = default;
  virtual std::size_t players() const = 0;
  virtual std::size_t outputs() const { return 1; }
  /// Row-major [coalitions, outputs].
  virtual std::vector<double> values(std::span<const Coalition> coalitions) = 0;
};

struct Attribution {
  std::vector<double> phi;
  double base = 0.0;        // value of the empty coalition
  double prediction = 0.0;  // value of the full coalition
};

/// Shapley values by full enumeration, one Attribution per game output.
std::vector<Attribution> exact_shap(CoalitionGame& game);

struct KernelOptions {
  /// Coalitions evaluated besides the empty and the full one; at least
  /// 2d + 2, capped at 2^d - 2 (full enumeration).
  std::size_t budget = 512;
  std::uint64_t seed = 0;
};

/// Shapley-kernel weighted least squares with the attributions constrained to
/// sum to prediction - base. Subset sizes are enumerated completely while the
/// budget allows, the rest is sampled in complementary pairs.
std::vector<Attribution> kernel_shap(CoalitionGame& game, const KernelOptions& options);

/// Absent groups take background values; the value is the mean model output
/// over the background rows.
class MarginalGame : public CoalitionGame {
 public:
  /// Maps rows [n, width] to outputs [n, outputs] (row-major).
  using Model = std::function<std::vector<double>(const Matrix&)>;

  MarginalGame(Model model, std::size_t outputs, std::vector<double> instance, Matrix background,
               std::vector<std::vector<std::size_t>> groups);

  std::size_t players() const override { return groups_.size(); }
  std::size_t outputs() const override { return outputs_; }
  std::vector<double> values(std::span<const Coalition> coalitions) override;

 private:
  Model model_;
  std::size_t outputs_;
  std::vector<double> instance_;
  Matrix background_;
  std::vector<std::vector<std::size_t>> groups_;
};

/// Named partition of the network inputs. A group owns static columns and/or
/// temporal channels; a channel covers every bucket.
struct FeatureGroups {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> static_columns;
  std::vector<std::vector<std::size_t>> temporal_channels;

  std::size_t size() const { return names.size(); }
  /// Throws ConfigError unless the groups partition both inputs.
  void validate(std::size_t static_width, std::size_t temporal_width) const;
};

/// Static groups by field ("Age", "Sex", ..., "Visits int."), then "BMI %"
/// (value and presence) and "Diagnoses". "Visits int." also owns the four
/// visit-type channels.
FeatureGroups default_groups(std::size_t vocab_size);
/// One group per static column and per temporal channel.
FeatureGroups per_feature_groups(std::span<const std::string> vocab);

/// Marginal game on the network. Outputs are (attrition, outcome). Encoder
/// outputs are cached per present subset of static and temporal groups.
class NetworkGame : public CoalitionGame {
 public:
  NetworkGame(nn::MultiTaskModel& model, const data::Dataset& layout, const data::WindowedSample& instance,
              std::vector<const data::WindowedSample*> background, const FeatureGroups& groups);

  std::size_t players() const override { return groups_.size(); }
  std::size_t outputs() const override { return 2; }
  std::vector<double> values(std::span<const Coalition> coalitions) override;

 private:
  const ad::Tensor& static_encoding(Coalition key);
  const ad::Tensor& temporal_encoding(Coalition key);

  nn::MultiTaskModel& model_;
  std::size_t steps_;
  std::size_t static_width_;
  std::size_t temporal_width_;
  const data::WindowedSample& instance_;
  std::vector<const data::WindowedSample*> background_;
  FeatureGroups groups_;
  std::vector<std::size_t> static_owner_;    // column -> group
  std::vector<std::size_t> temporal_owner_;  // channel -> group
  Coalition static_groups_ = 0;
  Coalition temporal_groups_ = 0;
  std::map<Coalition, ad::Tensor> static_cache_;
  std::map<Coalition, ad::Tensor> temporal_cache_;
};

enum class Estimator : std::uint8_t { kExact, kKernel };

struct ReportOptions {
  Estimator estimator = Estimator::kExact;
  std::size_t budget = 512;
  std::size_t background = 100;
  std::size_t max_instances = 100;  // 0: every test instance
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct GroupValue {
  std::string group;
  double value = 0.0;
};

struct WindowAttribution {
  data::WindowConfig window;
  std::string task;  // "attrition" or "outcome"
  std::size_t instances = 0;
  std::vector<GroupValue> mean_abs;  // group order
  std::vector<GroupValue> top;       // descending, at most 5
  /// Largest |sum(phi) - (prediction - base)| over the instances.
  double max_additivity_error = 0.0;
};

struct AttributionReport {
  std::vector<WindowAttribution> entries;
};

/// Mean |phi| per group and the top five, descending (ties keep group order).
WindowAttribution summarize(const data::WindowConfig& window, const std::string& task,
                            std::span<const std::string> names, std::span<const Attribution> attributions);

/// Test-split attributions for every trained window. The background is
/// drawn from the training split.
AttributionReport attribution_report(std::span<std::pair<data::WindowConfig, nn::MultiTaskModel>> models,
                                     std::span<const data::WindowData> windows, const FeatureGroups& groups,
                                     const ReportOptions& options);

/// Windows as columns, ranks as rows, cells "Group(0.041)".
std::string attribution_table(const AttributionReport& report, const std::string& task, char delimiter = ',');
nlohmann::json report_to_json(const AttributionReport& report);

}  // namespace wmattr::explain
