// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "wmattr/data/pipeline.hpp"
#include "wmattr/error.hpp"
#include "wmattr/synth/generator.hpp"

namespace wmattr::synth {
namespace {

std::string serialize(const std::vector<PatientRecord>& cohort) {
  std::ostringstream out;
  data::write_cohort(out, cohort);
  return out.str();
}

double attrition_prevalence(const std::vector<PatientRecord>& cohort, const data::WindowConfig& w) {
  double positives = 0;
  for (const auto& r : cohort) positives += data::label_sample(r, w).attrition;
  return positives / static_cast<double>(cohort.size());
}

// Pearson chi-square statistic of a category-by-label contingency table.
double chi_square(const std::vector<PatientRecord>& cohort, const data::WindowConfig& w,
                  std::string PatientRecord::*field) {
  std::map<std::string, std::array<double, 2>> table;
  for (const auto& r : cohort) table[r.*field][data::label_sample(r, w).attrition] += 1.0;
  const double n = static_cast<double>(cohort.size());
  std::array<double, 2> col{};
  for (const auto& [k, row] : table) {
    col[0] += row[0];
    col[1] += row[1];
  }
  double stat = 0.0;
  for (const auto& [k, row] : table) {
    const double total = row[0] + row[1];
    for (int c = 0; c < 2; ++c) {
      const double expected = total * col[c] / n;
      stat += (row[c] - expected) * (row[c] - expected) / expected;
    }
  }
  return stat;
}

TEST(Generator, SameSeedIsByteIdentical) {
  GeneratorConfig config;
  config.size = 300;
  config.seed = 11;
  const Cohort a = generate_cohort(config);
  const Cohort b = generate_cohort(config);
  EXPECT_EQ(serialize(a.patients), serialize(b.patients));
  EXPECT_EQ(a.truth, b.truth);
  config.seed = 12;
  EXPECT_NE(serialize(generate_cohort(config).patients), serialize(a.patients));
}

TEST(Generator, ParallelOutputMatchesSerial) {
  GeneratorConfig config;
  config.size = 257;
  config.seed = 3;
  EXPECT_EQ(serialize(generate_cohort(config, 1).patients), serialize(generate_cohort(config, 4).patients));
}

TEST(Generator, DefaultCohortHitsMarginalTargets) {
  GeneratorConfig config;
  config.seed = 2026;
  ASSERT_EQ(config.size, 4550u);
  const Cohort cohort = generate_cohort(config);
  const CohortSummary s = cohort_summary(cohort.patients);
  EXPECT_EQ(s.patients, 4550u);
  EXPECT_NEAR(s.baseline_bmi_mean, 98.0, 0.5);
  EXPECT_NEAR(s.single_visit_fraction, 0.28, 0.03);
  EXPECT_NEAR(s.mean_gap_weeks, 7.0, 0.5);
  EXPECT_NEAR(s.many_visit_fraction, 0.15, 0.03);
  EXPECT_NEAR(s.age_mean, 10.5, 0.3);
  EXPECT_NEAR(s.categories.at("sex").at("Female") / 4550.0, 0.5336, 0.03);
  EXPECT_NEAR(s.categories.at("insurance").at("unknown") / 4550.0, 1 - 0.4391 - 0.3451, 0.03);
}

TEST(Generator, NullSignalLabelsIndependentOfFeatures) {
  GeneratorConfig config;
  config.size = 5000;
  config.seed = 8;
  config.signal = SignalSpec::null();
  const Cohort cohort = generate_cohort(config);
  const data::WindowConfig w{3, 4.5};
  // Critical values at p = 0.01.
  EXPECT_LT(chi_square(cohort.patients, w, &PatientRecord::sex), 9.210);       // df 2 (with unknown)
  EXPECT_LT(chi_square(cohort.patients, w, &PatientRecord::race), 13.277);     // df 4
  EXPECT_LT(chi_square(cohort.patients, w, &PatientRecord::insurance), 9.210); // df 2
  EXPECT_LT(chi_square(cohort.patients, w, &PatientRecord::ethnicity), 9.210); // df 2

  // Age split at the median, df 1.
  std::vector<PatientRecord> relabeled = cohort.patients;
  for (auto& r : relabeled) r.sex = r.age < config.age_mean ? "young" : "old";
  EXPECT_LT(chi_square(relabeled, w, &PatientRecord::sex), 6.635);
}

TEST(Generator, PlantedSignalIsDetectable) {
  GeneratorConfig config;
  config.size = 5000;
  config.seed = 8;
  const Cohort cohort = generate_cohort(config);
  EXPECT_GT(chi_square(cohort.patients, {3, 4.5}, &PatientRecord::insurance), 9.210);
}

TEST(Generator, ForcedFirstHazardGivesSingleVisit) {
  GeneratorConfig config;
  config.size = 50;
  config.forced_first_hazard = 1.0;
  const Cohort cohort = generate_cohort(config);
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    EXPECT_EQ(cohort.patients[i].visits.size(), 1u);
    EXPECT_GT(cohort.truth[i].latent_attrition_day, 0);
  }
}

TEST(Generator, NegativeDriftGivesOutcomeZero) {
  GeneratorConfig config;
  config.size = 20;
  config.calibrate = false;
  config.first_intercept = config.later_intercept = -40.0;
  config.base_gap_days = 14.0;
  config.gap_heterogeneity_sd = 0.0;
  config.gap_noise_sd = 0.0;
  config.bmi_noise_sd = 0.0;
  config.bmi_measured_probability = 1.0;
  config.forced_drift = -0.5;
  const Cohort cohort = generate_cohort(config);
  for (const auto& r : cohort.patients) {
    ASSERT_GE(r.visits.size(), 11u);
    EXPECT_NEAR(*r.visits[10].bmi_percentile, std::max(0.0, *r.baseline_bmi() - 5.0), 1e-9);
    EXPECT_LT(*r.visits[10].bmi_percentile, *r.baseline_bmi());
    EXPECT_EQ(data::label_sample(r, {3, 4.5}).outcome, 0);
  }
}

TEST(Generator, BmiStaysInRangeAndTruthConsistent) {
  GeneratorConfig config;
  config.size = 1000;
  config.seed = 17;
  config.bmi_noise_sd = 8.0;
  config.signal.drift_sd = 3.0;
  const Cohort cohort = generate_cohort(config);
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    const auto& r = cohort.patients[i];
    EXPECT_EQ(cohort.truth[i].id, r.id);
    EXPECT_GE(cohort.truth[i].latent_attrition_day, r.visits.back().day);
    EXPECT_NO_THROW(data::validate(r));
    for (const auto& v : r.visits) {
      if (!v.bmi_percentile) continue;
      EXPECT_GE(*v.bmi_percentile, 0.0);
      EXPECT_LE(*v.bmi_percentile, 100.0);
    }
  }
}

TEST(Generator, AttritionIncreasesWithGapCoefficient) {
  GeneratorConfig config;
  config.size = 5000;
  config.seed = 9;
  config.calibrate = false;
  for (const auto& w : data::default_window_grid()) {
    double previous = -1.0;
    for (double coefficient : {0.5, 1.5, 3.0}) {
      config.signal.gap = coefficient;
      const double p = attrition_prevalence(generate_cohort(config).patients, w);
      EXPECT_GT(p, previous) << w.label() << " coefficient " << coefficient;
      previous = p;
    }
  }
}

TEST(Generator, InfeasibleTargetsNameTheTarget) {
  GeneratorConfig config;
  config.size = 10;
  config.single_visit_fraction = 0.9;
  config.many_visit_fraction = 0.2;
  try {
    generate_cohort(config);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("many_visit_fraction"), std::string::npos);
  }
  config = GeneratorConfig{};
  config.mean_gap_weeks = 0.5;
  try {
    generate_cohort(config);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("mean_gap_weeks"), std::string::npos);
  }
}

TEST(Generator, InvalidConfigRejected) {
  GeneratorConfig config;
  config.size = 0;
  EXPECT_THROW(generate_cohort(config), ConfigError);
  config = GeneratorConfig{};
  config.sex.probabilities = {0.7, 0.7};
  EXPECT_THROW(generate_cohort(config), ConfigError);
  config = GeneratorConfig{};
  config.signal.age = std::numeric_limits<double>::infinity();
  EXPECT_THROW(generate_cohort(config), ConfigError);
}

TEST(Generator, DiagnosisRatesStraddleThreshold) {
  const auto rates = diagnosis_rates(GeneratorConfig{});
  ASSERT_EQ(rates.size(), 24u);
  std::size_t below = 0;
  for (double r : rates) below += r < 0.02 ? 1 : 0;
  EXPECT_GT(below, 0u);
  EXPECT_LT(below, rates.size());
  EXPECT_EQ(diagnosis_code_names(24).back(), "DX24");
}

TEST(Summary, SinglePatientHistogram) {
  PatientRecord r;
  r.id = "only";
  r.sex = "Male";
  r.visits = {{0, data::VisitType::kMedical, 98.0, {}},
              {14, data::VisitType::kNutrition, std::nullopt, {}},
              {70, data::VisitType::kExercise, 97.5, {}}};
  const std::vector<PatientRecord> cohort{r};
  const CohortSummary s = cohort_summary(cohort);
  EXPECT_EQ(s.visit_count_histogram, (std::map<int, std::size_t>{{3, 1}}));
  EXPECT_EQ(s.months_enrolled_histogram, (std::map<int, std::size_t>{{2, 1}}));
  EXPECT_DOUBLE_EQ(s.mean_gap_weeks, 5.0);
  EXPECT_EQ(s.categories.at("race").at("Asian"), 0u);
  EXPECT_EQ(s.categories.at("race").at("unknown"), 1u);
  EXPECT_EQ(s.categories.at("sex").at("Male"), 1u);
  EXPECT_EQ(s.visit_types.at("psychology"), 0u);
  const auto j = summary_to_json(s);
  EXPECT_EQ(j["visit_count_histogram"]["3"], 1);
  EXPECT_DOUBLE_EQ(s.single_visit_fraction, 0.0);
  EXPECT_THROW(cohort_summary(std::vector<PatientRecord>{}), DataError);
}

TEST(Summary, SingleVisitPatientHasNoGaps) {
  PatientRecord r;
  r.id = "one";
  r.visits = {{0, data::VisitType::kMedical, std::nullopt, {}}};
  const std::vector<PatientRecord> cohort{r};
  const CohortSummary s = cohort_summary(cohort);
  EXPECT_EQ(s.gap_count, 0u);
  EXPECT_EQ(s.mean_gap_weeks, 0.0);
  EXPECT_EQ(s.baseline_bmi_mean, 0.0);
}

TEST(GroundTruthIo, RoundTrip) {
  GeneratorConfig config;
  config.size = 40;
  const Cohort cohort = generate_cohort(config);
  std::stringstream buffer;
  write_ground_truth(buffer, cohort.truth);
  const auto back = read_ground_truth(buffer);
  ASSERT_EQ(back.size(), cohort.truth.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, cohort.truth[i].id);
    EXPECT_EQ(back[i].latent_attrition_day, cohort.truth[i].latent_attrition_day);
    EXPECT_DOUBLE_EQ(back[i].bmi_drift, cohort.truth[i].bmi_drift);
  }
  std::stringstream bad("{\"id\":1}\n");
  EXPECT_THROW(read_ground_truth(bad), DataError);
}

}  // namespace
}  // namespace wmattr::synth
