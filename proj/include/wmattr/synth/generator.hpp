// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmattr/data/record.hpp"

namespace wmattr::synth {

using data::PatientRecord;

/// Category weights; the remainder up to 1 is emitted as unknown.
struct CategoricalSpec {
  std::vector<std::string> categories;
  std::vector<double> probabilities;
};

/// Log-odds contributions to the per-visit dropout hazard and to the
/// per-visit BMI drift.
struct SignalSpec {
  // Attrition hazard shift: gap * m + age * z_age + bmi_slope * drift + insurance * [Medicaid].
  // m > 0 is the patient's inter-visit gap multiplier.
  double gap = 2.0;
  double age = 0.3;
  double bmi_slope = 1.0;
  double insurance = 0.4;
  // BMI drift in percentile points per visit.
  double drift_base = -0.25;
  double drift_age = 0.15;
  double drift_gap = 0.25;
  double drift_insurance = 0.15;
  double drift_sd = 0.25;

  static SignalSpec null();
};

struct GeneratorConfig {
  std::size_t size = 4550;
  std::uint64_t seed = 0;

  // Marginal targets.
  double baseline_bmi_mean = 98.0;
  double baseline_bmi_sd = 0.8;
  double mean_gap_weeks = 7.0;
  double single_visit_fraction = 0.28;
  double many_visit_fraction = 0.15;  // more than ten visits

  CategoricalSpec sex{{"Male", "Female"}, {0.4664, 0.5336}};
  CategoricalSpec race{{"Asian", "White", "Black", "Other"}, {0.0125, 0.3884, 0.2679, 0.3213}};
  CategoricalSpec ethnicity{{"Hispanic", "Non-Hispanic"}, {0.3692, 0.6251}};
  CategoricalSpec insurance{{"Medicaid", "Private"}, {0.4391, 0.3451}};
  CategoricalSpec food_insecurity_1{{"Often or sometimes true", "Never true"}, {0.142, 0.858}};
  CategoricalSpec food_insecurity_2{{"Often or sometimes true", "Never true"}, {0.094, 0.906}};
  // Follow-up visit types (the first visit is always medical).
  std::vector<double> visit_type_weights{0.195, 0.588, 0.079, 0.138};
  double age_mean = 10.5;
  double age_sd = 3.5;
  double lifestyle_mean = 39.0;
  double lifestyle_sd = 5.0;
  double psc17_mean = 9.0;
  double bmi_measured_probability = 0.85;
  double bmi_noise_sd = 0.6;
  double gap_heterogeneity_sd = 0.5;  // log-scale sd of the per-patient gap multiplier
  double gap_noise_sd = 0.3;          // log-scale sd of each gap around the patient mean
  int min_gap_days = 7;
  int max_follow_up_days = 1826;
  std::size_t diagnosis_codes = 24;
  double diagnosis_rate_min = 0.004;
  double diagnosis_rate_max = 0.25;

  SignalSpec signal;

  /// When true, hazard intercepts and the base gap are solved so the targets
  /// above are met; otherwise the explicit values below are used.
  bool calibrate = true;
  double first_intercept = -3.0;
  double later_intercept = -3.5;
  double base_gap_days = 49.0;

  // Test hooks.
  std::optional<double> forced_first_hazard;
  std::optional<double> forced_drift;
};

/// Hazard intercepts and gap scale actually used for generation.
struct ProcessParams {
  double first_intercept = 0.0;
  double later_intercept = 0.0;
  double base_gap_days = 49.0;
};

ProcessParams calibrate(const GeneratorConfig& config);

struct GroundTruth {
  std::string id;
  int latent_attrition_day = 0;  // day of the first visit that did not happen
  double bmi_drift = 0.0;        // outcome propensity, percentile points per visit
  double gap_multiplier = 1.0;
  double hazard_shift = 0.0;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Cohort {
  std::vector<PatientRecord> patients;
  std::vector<GroundTruth> truth;
  ProcessParams params;
};

/// Validates the config, calibrates if requested, and samples every patient
/// from its own counter-derived stream; `jobs` does not change the output.
Cohort generate_cohort(const GeneratorConfig& config, std::size_t jobs = 1);

std::pair<PatientRecord, GroundTruth> sample_patient(const GeneratorConfig& config,
                                                     const ProcessParams& params,
                                                     std::size_t index);

std::vector<std::string> diagnosis_code_names(std::size_t count);
std::vector<double> diagnosis_rates(const GeneratorConfig& config);

void write_ground_truth(std::ostream& out, std::span<const GroundTruth> truth);
std::vector<GroundTruth> read_ground_truth(std::istream& in);

struct CohortSummary {
  std::size_t patients = 0;
  std::size_t visits = 0;
  std::map<std::string, std::map<std::string, std::size_t>> categories;  // field -> value -> count
  double age_mean = 0, age_min = 0, age_max = 0;
  double lifestyle_mean = 0, lifestyle_min = 0, lifestyle_max = 0;
  double psc17_mean = 0, psc17_min = 0, psc17_max = 0;
  double baseline_bmi_mean = 0;
  std::size_t baseline_bmi_count = 0;
  double mean_gap_weeks = 0;  // pooled over all consecutive visit pairs
  std::size_t gap_count = 0;
  std::map<std::string, std::size_t> visit_types;
  double single_visit_fraction = 0;
  double many_visit_fraction = 0;
  std::map<int, std::size_t> visit_count_histogram;
  std::map<int, std::size_t> months_enrolled_histogram;
};

CohortSummary cohort_summary(std::span<const PatientRecord> cohort);
nlohmann::json summary_to_json(const CohortSummary& summary);

}  // namespace wmattr::synth
