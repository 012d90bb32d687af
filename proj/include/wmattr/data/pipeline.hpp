// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmattr/data/record.hpp"

namespace wmattr::data {

inline constexpr double kDaysPerMonth = 30.4;
inline constexpr int kBucketDays = 15;

/// Observation window [0, observation_days()] from the first visit, then the
/// prediction window (observation_days(), prediction_end_day()].
struct WindowConfig {
  double observation_months = 1.0;
  double prediction_months = 1.5;

  int observation_days() const;
  int prediction_end_day() const;
  /// Buckets covering the observation window, ceil((observation_days() + 1) / 15).
  std::size_t bucket_count() const;
  /// "obs/pred", e.g. "1/1.5".
  std::string label() const;

  friend bool operator==(const WindowConfig&, const WindowConfig&) = default;
};

std::vector<WindowConfig> default_window_grid();
WindowConfig parse_window(std::string_view text);
/// Comma-separated list of "obs/pred" pairs.
std::vector<WindowConfig> parse_window_list(std::string_view text);

// Temporal bucket columns.
inline constexpr std::size_t kBmiColumn = kVisitTypeCount;
inline constexpr std::size_t kBmiPresentColumn = kVisitTypeCount + 1;
inline constexpr std::size_t kDiagnosisColumn = kVisitTypeCount + 2;
inline std::size_t temporal_width(std::size_t vocab_size) { return kDiagnosisColumn + vocab_size; }
std::vector<std::string> temporal_feature_names(std::span<const std::string> vocab);

/// Buckets in bucket-major order: values[b * width + c].
struct TemporalSequence {
  std::size_t buckets = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double& at(std::size_t b, std::size_t c) { return values[b * width + c]; }
  double at(std::size_t b, std::size_t c) const { return values[b * width + c]; }
  friend bool operator==(const TemporalSequence&, const TemporalSequence&) = default;
};

/// Raw (unscaled) 15-day buckets over days [0, horizon_days). Visit-type
/// columns and diagnosis columns are 0/1 indicators; the BMI column holds the
/// bucket mean and the presence column is 1 when any BMI was measured.
TemporalSequence bucketize(const PatientRecord& record, std::span<const std::string> vocab,
                           int horizon_days);

/// Codes seen in at least `threshold` of patients, sorted.
std::vector<std::string> filter_rare_codes(std::span<const PatientRecord> cohort, double threshold);

struct CategoricalField {
  std::string group;
  std::vector<std::string> categories;
};
/// Order of the one-hot blocks in the static vector.
const std::vector<CategoricalField>& categorical_fields();

enum NumericFeature : std::size_t { kAge = 0, kLifestyle, kPsc17, kVisitInterval, kNumericCount };
inline constexpr std::array<std::string_view, kNumericCount> kNumericGroups = {
    "Age", "Lifestyle score", "PSC-17", "Visits int."};

std::size_t static_width();
std::vector<std::string> static_feature_names();
/// Attribution group of every static column ("Sex", "Race", ..., "Visits int.").
std::vector<std::string> static_feature_groups();

/// Per-feature min/max fitted on the training split: the numeric static
/// features followed by temporal BMI.
struct ScalerParams {
  std::array<double, kNumericCount + 1> min{};
  std::array<double, kNumericCount + 1> max{};

  static constexpr std::size_t kBmi = kNumericCount;
  double apply(std::size_t feature, double value) const;
  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

/// Observation-period data and the labeling reference points of one window.
struct WindowExtract {
  WindowConfig window;
  PatientRecord observed;  // visits with day <= observation_days()
  int last_visit_day = 0;
  bool visit_at_or_after_end = false;
  std::optional<double> baseline_bmi;
  std::optional<double> reference_bmi;  // last BMI in (observation end, prediction end]
};

WindowExtract extract_window(const PatientRecord& record, const WindowConfig& window);

/// Mean gap in days between consecutive distinct visit days; 0 with fewer
/// than two visit days.
double mean_visit_interval(const PatientRecord& record);

/// Unscaled numeric static features of the observation period.
std::array<double, kNumericCount> raw_numeric(const PatientRecord& observed);

struct Labels {
  int attrition = 0;
  std::optional<int> outcome;
  friend bool operator==(const Labels&, const Labels&) = default;
};

Labels label_sample(const PatientRecord& record, const WindowConfig& window);

struct EncodedFeatures {
  std::vector<double> static_features;
  TemporalSequence temporal;
};

EncodedFeatures encode_features(const PatientRecord& record, std::span<const std::string> vocab,
                                const ScalerParams& scaler, const WindowConfig& window);

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };
std::string_view split_name(Split s) noexcept;

/// Patient-level partition, fixed once and reused for every window.
struct SplitManifest {
  std::uint64_t seed = 0;
  std::array<std::vector<std::string>, 3> members;

  const std::vector<std::string>& of(Split s) const { return members[static_cast<std::size_t>(s)]; }
};

SplitManifest split_patients(std::span<const PatientRecord> cohort, std::uint64_t seed,
                             double train_fraction = 0.70, double validation_fraction = 0.15);

struct WindowedSample {
  std::string patient_id;
  std::vector<double> static_features;
  std::vector<double> temporal;  // bucket-major [steps, temporal_width]
  int attrition = 0;
  int outcome = -1;  // -1 when undefined
  double visit_interval_days = 0.0;
};

struct SplitStats {
  std::size_t n = 0;
  std::size_t attrition_positive = 0;
  std::size_t outcome_defined = 0;
  std::size_t outcome_positive = 0;

  double attrition_prevalence() const;
  double outcome_prevalence() const;
};

struct Dataset {
  std::size_t steps = 0;
  std::size_t static_width = 0;
  std::size_t temporal_width = 0;
  std::vector<WindowedSample> samples;

  SplitStats stats() const;
};

struct WindowData {
  WindowConfig window;
  ScalerParams scaler;
  std::array<Dataset, 3> splits;
  /// Non-fatal findings such as a split without positives.
  std::vector<std::string> warnings;

  const Dataset& of(Split s) const { return splits[static_cast<std::size_t>(s)]; }
};

ScalerParams fit_scaler(std::span<const PatientRecord> train, const WindowConfig& window);

/// Windows, labels, scales and splits the cohort. Every patient must appear in
/// the manifest. `jobs` > 1 encodes patients in parallel with identical output.
WindowData assemble_dataset(std::span<const PatientRecord> cohort,
                            std::span<const std::string> vocab, const WindowConfig& window,
                            const SplitManifest& manifest, std::size_t jobs = 1);

nlohmann::json manifest_to_json(const SplitManifest& manifest, std::span<const std::string> vocab,
                                std::span<const WindowData> windows);

}  // namespace wmattr::data
