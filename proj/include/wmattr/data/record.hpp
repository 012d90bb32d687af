// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wmattr::data {

enum class VisitType { kNutrition = 0, kMedical = 1, kPsychology = 2, kExercise = 3 };
inline constexpr std::size_t kVisitTypeCount = 4;

std::string_view visit_type_name(VisitType t) noexcept;
VisitType parse_visit_type(std::string_view name);

/// One program visit. `day` counts days since the patient's first visit.
struct Visit {
  int day = 0;
  VisitType type = VisitType::kMedical;
  std::optional<double> bmi_percentile;
  std::vector<std::string> diagnoses;

  friend bool operator==(const Visit&, const Visit&) = default;
};

inline constexpr double kLifestyleMin = 12;
inline constexpr double kLifestyleMax = 48;
inline constexpr double kPsc17Min = 0;
inline constexpr double kPsc17Max = 34;

/// Categorical fields hold the category text; an empty string means unknown.
struct PatientRecord {
  std::string id;
  std::string sex;
  std::string race;
  std::string ethnicity;
  std::string insurance;
  std::array<std::string, 2> food_insecurity;
  double age = 0.0;
  int lifestyle = 0;
  int psc17 = 0;
  std::chrono::sys_days start_date{};
  std::vector<Visit> visits;

  /// BMI percentile measured at the day-0 visit, if any.
  std::optional<double> baseline_bmi() const;

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

/// Throws DataError naming the patient and the violated rule: visits must be
/// non-empty, sorted, start at day 0; BMI in [0,100]; scores in range.
void validate(const PatientRecord& record);

std::string format_date(std::chrono::sys_days day);
std::chrono::sys_days parse_date(std::string_view text);

/// Line-delimited JSON, one patient per line. Schema in docs/cohort_format.md.
void write_cohort(std::ostream& out, std::span<const PatientRecord> cohort);
std::vector<PatientRecord> read_cohort(std::istream& in);
void save_cohort(const std::string& path, std::span<const PatientRecord> cohort);
std::vector<PatientRecord> load_cohort(const std::string& path);

}  // namespace wmattr::data
