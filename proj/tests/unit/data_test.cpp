// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "wmattr/data/pipeline.hpp"
#include "wmattr/data/record.hpp"
#include "wmattr/error.hpp"
#include "wmattr/random.hpp"
#include "wmattr/synth/generator.hpp"

namespace wmattr::data {
namespace {

Visit visit(int day, VisitType type = VisitType::kMedical, std::optional<double> bmi = std::nullopt,
            std::vector<std::string> dx = {}) {
  return Visit{day, type, bmi, std::move(dx)};
}

PatientRecord patient(std::string id, std::vector<Visit> visits) {
  PatientRecord r;
  r.id = std::move(id);
  r.sex = "Female";
  r.race = "White";
  r.ethnicity = "Hispanic";
  r.insurance = "Medicaid";
  r.food_insecurity = {"Never true", "Often or sometimes true"};
  r.age = 10.0;
  r.lifestyle = 40;
  r.psc17 = 9;
  r.start_date = parse_date("2015-06-01");
  r.visits = std::move(visits);
  return r;
}

PatientRecord random_patient(Rng& rng, std::size_t index, std::span<const std::string> codes) {
  std::vector<Visit> visits;
  int day = 0;
  const std::size_t n = 1 + rng.below(12);
  for (std::size_t k = 0; k < n; ++k) {
    Visit v = visit(day, static_cast<VisitType>(rng.below(4)));
    if (rng.bernoulli(0.8)) v.bmi_percentile = rng.uniform(90.0, 100.0);
    for (const auto& c : codes) {
      if (rng.bernoulli(0.2)) v.diagnoses.push_back(c);
    }
    visits.push_back(std::move(v));
    day += 1 + static_cast<int>(rng.below(60));
  }
  PatientRecord r = patient("R" + std::to_string(index), std::move(visits));
  r.age = rng.uniform(2.0, 18.0);
  r.lifestyle = 12 + static_cast<int>(rng.below(37));
  r.psc17 = static_cast<int>(rng.below(35));
  return r;
}

TEST(Window, DayArithmeticAndBucketCounts) {
  const auto grid = default_window_grid();
  ASSERT_EQ(grid.size(), 6u);
  const std::vector<std::size_t> buckets = {3, 5, 7, 9, 13, 19};
  const std::vector<int> ends = {76, 152, 228, 304, 456, 684};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(grid[i].bucket_count(), buckets[i]) << grid[i].label();
    EXPECT_EQ(grid[i].prediction_end_day(), ends[i]) << grid[i].label();
    // Matches ceil(30.4 * obs / 15).
    EXPECT_EQ(grid[i].bucket_count(),
              static_cast<std::size_t>(std::ceil(kDaysPerMonth * grid[i].observation_months / 15)));
  }
  EXPECT_EQ(grid[0].observation_days(), 30);
  EXPECT_EQ(grid[5].label(), "9/13.5");
}

TEST(Window, ParseList) {
  const auto w = parse_window_list("1/1.5, 9/13.5");
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1], (WindowConfig{9, 13.5}));
  EXPECT_THROW(parse_window_list("1-1.5"), ConfigError);
  EXPECT_THROW(parse_window_list("0/1"), ConfigError);
  EXPECT_THROW(parse_window_list(""), ConfigError);
}

TEST(Bucketize, SingleVisitHandConstruction) {
  const PatientRecord r = patient("a", {visit(0, VisitType::kMedical, 98.0)});
  const TemporalSequence seq = bucketize(r, {}, 30);
  ASSERT_EQ(seq.buckets, 2u);
  EXPECT_EQ(seq.at(0, static_cast<std::size_t>(VisitType::kMedical)), 1.0);
  EXPECT_EQ(seq.at(0, kBmiColumn), 98.0);
  EXPECT_EQ(seq.at(0, kBmiPresentColumn), 1.0);
  for (std::size_t c = 0; c < seq.width; ++c) EXPECT_EQ(seq.at(1, c), 0.0);
}

TEST(Bucketize, MeasurementsAveragedWithinBucket) {
  const PatientRecord r = patient("a", {visit(0), visit(3, VisitType::kNutrition, 98.0),
                                        visit(9, VisitType::kExercise, 96.0)});
  const TemporalSequence seq = bucketize(r, {}, 45);
  EXPECT_EQ(seq.at(0, kBmiColumn), 97.0);
  EXPECT_EQ(seq.at(0, static_cast<std::size_t>(VisitType::kNutrition)), 1.0);
  EXPECT_EQ(seq.at(0, static_cast<std::size_t>(VisitType::kPsychology)), 0.0);
}

TEST(Bucketize, DiagnosisIndicatorsAndEmptyBuckets) {
  const std::vector<std::string> vocab = {"A", "B"};
  const PatientRecord r = patient("a", {visit(0, VisitType::kMedical, std::nullopt, {"B", "Z"}),
                                        visit(40, VisitType::kMedical, std::nullopt, {"B", "B"})});
  const TemporalSequence seq = bucketize(r, vocab, 60);
  ASSERT_EQ(seq.width, temporal_width(2));
  EXPECT_EQ(seq.at(0, kDiagnosisColumn), 0.0);
  EXPECT_EQ(seq.at(0, kDiagnosisColumn + 1), 1.0);
  EXPECT_EQ(seq.at(0, kBmiPresentColumn), 0.0);
  for (std::size_t c = 0; c < seq.width; ++c) EXPECT_EQ(seq.at(1, c), 0.0);
  EXPECT_EQ(seq.at(2, kDiagnosisColumn + 1), 1.0);
}

TEST(Bucketize, Errors) {
  EXPECT_THROW(bucketize(patient("a", {}), {}, 30), DataError);
  EXPECT_THROW(bucketize(patient("a", {visit(0)}), {}, 14), ConfigError);
  const std::vector<std::string> unsorted = {"B", "A"};
  EXPECT_THROW(bucketize(patient("a", {visit(0)}), unsorted, 30), DataError);
}

TEST(Bucketize, IdempotentAndConservesVisitDays) {
  Rng rng(21);
  const std::vector<std::string> vocab = {"C1", "C2", "C3"};
  for (int trial = 0; trial < 200; ++trial) {
    const PatientRecord r = random_patient(rng, trial, vocab);
    const int horizon = 15 + static_cast<int>(rng.below(300));
    const TemporalSequence seq = bucketize(r, vocab, horizon);
    // Truncating to the horizon and re-bucketing over the covered span gives the same buckets.
    PatientRecord truncated = r;
    std::erase_if(truncated.visits, [&](const Visit& v) { return v.day >= horizon; });
    const TemporalSequence again =
        bucketize(truncated, vocab, static_cast<int>(seq.buckets) * kBucketDays);
    EXPECT_EQ(seq, again);
    for (const Visit& v : truncated.visits) {
      const auto b = static_cast<std::size_t>(v.day / kBucketDays);
      double marked = 0.0;
      for (std::size_t t = 0; t < kVisitTypeCount; ++t) marked += seq.at(b, t);
      EXPECT_GE(marked, 1.0);
    }
    for (double x : seq.values) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(RareCodes, ThresholdBoundary) {
  std::vector<PatientRecord> cohort;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> dx;
    if (i < 1) dx.push_back("ONE");
    if (i < 2) dx.push_back("TWO");
    if (i < 50) dx.push_back("HALF");
    cohort.push_back(patient("p" + std::to_string(i), {visit(0, VisitType::kMedical, 98.0, dx)}));
  }
  EXPECT_EQ(filter_rare_codes(cohort, 0.02), (std::vector<std::string>{"HALF", "TWO"}));
  EXPECT_THROW(filter_rare_codes({}, 0.02), DataError);
  EXPECT_THROW(filter_rare_codes(cohort, 0.0), ConfigError);
}

TEST(RareCodes, MatchesBruteForceCount) {
  synth::GeneratorConfig config;
  config.size = 600;
  config.seed = 4;
  const auto cohort = synth::generate_cohort(config).patients;
  for (double threshold : {0.01, 0.02, 0.05}) {
    std::set<std::string> expected;
    for (const auto& code : synth::diagnosis_code_names(config.diagnosis_codes)) {
      std::size_t holders = 0;
      for (const auto& r : cohort) {
        bool has = false;
        for (const auto& v : r.visits) has = has || std::count(v.diagnoses.begin(), v.diagnoses.end(), code) > 0;
        holders += has ? 1 : 0;
      }
      if (holders * 1000 >= static_cast<std::size_t>(threshold * 1000) * cohort.size()) expected.insert(code);
    }
    const auto got = filter_rare_codes(cohort, threshold);
    EXPECT_EQ(std::set<std::string>(got.begin(), got.end()), expected) << threshold;
    EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
  }
}

ScalerParams fixed_scaler() {
  ScalerParams s;
  s.min = {2.0, 12.0, 0.0, 0.0, 90.0};
  s.max = {18.0, 48.0, 34.0, 60.0, 100.0};
  return s;
}

TEST(Encode, OneHotAndScaling) {
  const WindowConfig w{1, 1.5};
  PatientRecord r = patient("a", {visit(0, VisitType::kMedical, 95.0)});
  r.age = 2.0;
  const auto names = static_feature_names();
  const EncodedFeatures f = encode_features(r, {}, fixed_scaler(), w);
  ASSERT_EQ(f.static_features.size(), static_width());
  ASSERT_EQ(names.size(), static_width());
  auto column = [&](const std::string& name) {
    return f.static_features[std::find(names.begin(), names.end(), name) - names.begin()];
  };
  EXPECT_EQ(column("sex=Male"), 0.0);
  EXPECT_EQ(column("sex=Female"), 1.0);
  EXPECT_EQ(column("age"), 0.0);
  EXPECT_EQ(f.temporal.at(0, kBmiColumn), 0.5);

  r.age = 25.0;
  r.sex = "";
  r.race = "Martian";
  const EncodedFeatures g = encode_features(r, {}, fixed_scaler(), w);
  EXPECT_EQ(g.static_features[std::find(names.begin(), names.end(), "age") - names.begin()], 1.0);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(g.static_features[k], 0.0);
}

TEST(Encode, OneHotBlocksAndScaledTrainingValuesInRange) {
  Rng rng(22);
  std::vector<PatientRecord> cohort;
  for (int i = 0; i < 50; ++i) cohort.push_back(random_patient(rng, i, {}));
  const WindowConfig w{3, 4.5};
  const ScalerParams s = fit_scaler(cohort, w);
  for (const auto& r : cohort) {
    const EncodedFeatures f = encode_features(r, {}, s, w);
    std::size_t col = 0;
    for (const auto& field : categorical_fields()) {
      double total = 0.0;
      for (std::size_t k = 0; k < field.categories.size(); ++k) total += f.static_features[col++];
      EXPECT_LE(total, 1.0);
    }
    for (double v : f.static_features) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (double v : f.temporal.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Extract, ObservationTruncation) {
  const PatientRecord r = patient("a", {visit(0, VisitType::kMedical, 98.0), visit(10), visit(25),
                                        visit(200, VisitType::kMedical, 97.0)});
  const WindowExtract one = extract_window(r, {1, 1.5});
  EXPECT_EQ(one.observed.visits.size(), 3u);
  EXPECT_EQ(encode_features(r, {}, fixed_scaler(), {1, 1.5}).temporal.buckets, 3u);
  const EncodedFeatures nine = encode_features(r, {}, fixed_scaler(), {9, 13.5});
  EXPECT_EQ(nine.temporal.buckets, 19u);
  for (std::size_t b = 2; b < nine.temporal.buckets; ++b) {
    if (b == 200 / 15) continue;
    for (std::size_t c = 0; c < nine.temporal.width; ++c) EXPECT_EQ(nine.temporal.at(b, c), 0.0);
  }
  const PatientRecord single = patient("s", {visit(0, VisitType::kMedical, 98.0)});
  const WindowExtract ex = extract_window(single, {1, 1.5});
  EXPECT_EQ(ex.observed.visits.size(), 1u);
  EXPECT_THROW(extract_window(patient("e", {}), {1, 1.5}), DataError);
}

TEST(Labels, AttritionRule) {
  const WindowConfig w{1, 1.5};  // prediction ends at day 76 (2.5 months)
  EXPECT_EQ(label_sample(patient("a", {visit(0), visit(28)}), w).attrition, 1);
  EXPECT_EQ(label_sample(patient("b", {visit(0), visit(28), visit(91)}), w).attrition, 0);
  EXPECT_EQ(label_sample(patient("c", {visit(0), visit(76)}), w).attrition, 0);
  EXPECT_EQ(label_sample(patient("d", {visit(0), visit(75)}), w).attrition, 1);
}

TEST(Labels, OutcomeRule) {
  const WindowConfig w{1, 1.5};
  auto outcome = [&](std::vector<Visit> v) { return label_sample(patient("x", std::move(v)), w).outcome; };
  EXPECT_EQ(outcome({visit(0, VisitType::kMedical, 98.0), visit(50, VisitType::kMedical, 97.0)}), 0);
  EXPECT_EQ(outcome({visit(0, VisitType::kMedical, 98.0), visit(50, VisitType::kMedical, 98.0)}), 1);
  EXPECT_EQ(outcome({visit(0, VisitType::kMedical, 98.0), visit(50, VisitType::kMedical, 99.0)}), 1);
  // Last measurement inside the prediction window is the reference.
  EXPECT_EQ(outcome({visit(0, VisitType::kMedical, 98.0), visit(40, VisitType::kMedical, 99.0),
                     visit(70, VisitType::kMedical, 96.0), visit(90, VisitType::kMedical, 99.0)}),
            0);
  // Nothing measured in (30, 76].
  EXPECT_EQ(outcome({visit(0, VisitType::kMedical, 98.0), visit(20, VisitType::kMedical, 90.0),
                     visit(50)}),
            std::nullopt);
  EXPECT_EQ(outcome({visit(0), visit(50, VisitType::kMedical, 97.0)}), std::nullopt);
}

TEST(Leakage, PostObservationMutationsLeaveFeaturesUnchanged) {
  Rng rng(23);
  const std::vector<std::string> vocab = {"C1", "C2", "C3"};
  const ScalerParams s = fixed_scaler();
  for (int trial = 0; trial < 100; ++trial) {
    const PatientRecord r = random_patient(rng, trial, vocab);
    const WindowConfig w = default_window_grid()[rng.below(6)];
    PatientRecord m = r;
    const int obs = w.observation_days();
    for (Visit& v : m.visits) {
      if (v.day <= obs) continue;
      v.bmi_percentile = rng.uniform(0, 100);
      v.type = static_cast<VisitType>(rng.below(4));
      v.diagnoses = {"C1", "C2"};
    }
    const int last = m.visits.back().day;
    m.visits.push_back(visit(std::max(last, obs) + 1 + static_cast<int>(rng.below(400)),
                             VisitType::kPsychology, 50.0, {"C3"}));
    const EncodedFeatures a = encode_features(r, vocab, s, w);
    const EncodedFeatures b = encode_features(m, vocab, s, w);
    EXPECT_EQ(a.static_features, b.static_features);
    EXPECT_EQ(a.temporal, b.temporal);
    EXPECT_EQ(fit_scaler(std::span(&r, 1), w), fit_scaler(std::span(&m, 1), w));
  }
}

TEST(Split, PartitionAndDeterminism) {
  synth::GeneratorConfig config;
  config.size = 301;
  config.seed = 5;
  const auto cohort = synth::generate_cohort(config).patients;
  const SplitManifest a = split_patients(cohort, 9);
  const SplitManifest b = split_patients(cohort, 9);
  EXPECT_EQ(a.members, b.members);
  EXPECT_NE(split_patients(cohort, 10).members, a.members);
  std::multiset<std::string> all;
  for (const auto& m : a.members) all.insert(m.begin(), m.end());
  EXPECT_EQ(all.size(), cohort.size());
  for (const auto& r : cohort) EXPECT_EQ(all.count(r.id), 1u);
  EXPECT_EQ(a.of(Split::kTrain).size(), 211u);
  EXPECT_EQ(a.of(Split::kValidation).size(), 45u);
}

TEST(Assemble, PrevalenceMatchesRecountAndJobsInvariant) {
  synth::GeneratorConfig config;
  config.size = 400;
  config.seed = 6;
  const auto cohort = synth::generate_cohort(config).patients;
  const auto vocab = filter_rare_codes(cohort, 0.02);
  const SplitManifest manifest = split_patients(cohort, 1);
  const WindowConfig w{3, 4.5};
  const WindowData d = assemble_dataset(cohort, vocab, w, manifest);
  const WindowData p = assemble_dataset(cohort, vocab, w, manifest, 4);
  std::set<std::string> train(manifest.of(Split::kTrain).begin(), manifest.of(Split::kTrain).end());
  std::size_t positives = 0;
  for (const auto& r : cohort) {
    if (train.count(r.id)) positives += label_sample(r, w).attrition;
  }
  EXPECT_EQ(d.of(Split::kTrain).stats().attrition_positive, positives);
  EXPECT_EQ(d.of(Split::kTrain).samples.size(), train.size());
  for (std::size_t s = 0; s < 3; ++s) {
    ASSERT_EQ(d.splits[s].samples.size(), p.splits[s].samples.size());
    for (std::size_t i = 0; i < d.splits[s].samples.size(); ++i) {
      EXPECT_EQ(d.splits[s].samples[i].static_features, p.splits[s].samples[i].static_features);
      EXPECT_EQ(d.splits[s].samples[i].temporal, p.splits[s].samples[i].temporal);
    }
  }
  std::vector<PatientRecord> train_records;
  for (const auto& r : cohort) {
    if (train.count(r.id)) train_records.push_back(r);
  }
  EXPECT_EQ(d.scaler, fit_scaler(train_records, w));
  const auto& sample = d.of(Split::kTest).samples.front();
  EXPECT_EQ(sample.static_features.size(), static_width());
  EXPECT_EQ(sample.temporal.size(), w.bucket_count() * temporal_width(vocab.size()));

  SplitManifest partial = manifest;
  partial.members[0].pop_back();
  EXPECT_THROW(assemble_dataset(cohort, vocab, w, partial), DataError);
}

TEST(Assemble, SplitWithoutPositivesIsReported) {
  std::vector<PatientRecord> cohort;
  for (int i = 0; i < 20; ++i) {
    cohort.push_back(patient("p" + std::to_string(i), {visit(0, VisitType::kMedical, 98.0), visit(400)}));
  }
  const WindowData d = assemble_dataset(cohort, {}, {1, 1.5}, split_patients(cohort, 2));
  EXPECT_FALSE(d.warnings.empty());
  EXPECT_NE(d.warnings.front().find("no attrition positives"), std::string::npos);
}

TEST(CohortIo, RoundTrip) {
  synth::GeneratorConfig config;
  config.size = 50;
  config.seed = 7;
  const auto cohort = synth::generate_cohort(config).patients;
  std::stringstream buffer;
  write_cohort(buffer, cohort);
  const auto back = read_cohort(buffer);
  EXPECT_EQ(back, cohort);
}

TEST(CohortIo, Errors) {
  EXPECT_EQ(format_date(parse_date("2020-02-29")), "2020-02-29");
  EXPECT_THROW(parse_date("2021-02-29"), DataError);
  EXPECT_THROW(parse_date("2021/02/01"), DataError);
  std::stringstream bad(R"({"id":"x","visits":[]})");
  EXPECT_THROW(read_cohort(bad), DataError);
  std::stringstream unsorted(
      R"({"id":"x","sex":null,"race":null,"ethnicity":null,"insurance":null,"food_insecurity":[null,null],)"
      R"("age":5,"lifestyle":30,"psc17":3,"visits":[{"date":"2020-01-05","type":"medical"},)"
      R"({"date":"2020-01-01","type":"medical"}]})");
  EXPECT_THROW(read_cohort(unsorted), DataError);
}

}  // namespace
}  // namespace wmattr::data
