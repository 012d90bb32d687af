// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/data/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "wmattr/error.hpp"
#include "wmattr/parallel.hpp"
#include "wmattr/random.hpp"

namespace wmattr::data {

namespace {

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_number(std::string_view text, std::string_view context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    throw ConfigError("bad number '" + std::string(text) + "' in " + std::string(context));
  }
  return v;
}

void check_vocab(std::span<const std::string> vocab) {
  for (std::size_t i = 1; i < vocab.size(); ++i) {
    if (!(vocab[i - 1] < vocab[i])) {
      throw DataError("vocabulary mismatch: codes must be sorted and unique ('" + vocab[i - 1] +
                      "' precedes '" + vocab[i] + "')");
    }
  }
}

std::size_t code_index(std::span<const std::string> vocab, const std::string& code) {
  auto it = std::lower_bound(vocab.begin(), vocab.end(), code);
  if (it == vocab.end() || *it != code) return vocab.size();
  return static_cast<std::size_t>(it - vocab.begin());
}

const std::string& field_value(const PatientRecord& r, std::size_t field) {
  switch (field) {
    case 0: return r.sex;
    case 1: return r.race;
    case 2: return r.ethnicity;
    case 3: return r.insurance;
    case 4: return r.food_insecurity[0];
    default: return r.food_insecurity[1];
  }
}

}  // namespace

int WindowConfig::observation_days() const {
  return static_cast<int>(std::lround(kDaysPerMonth * observation_months));
}

int WindowConfig::prediction_end_day() const {
  return static_cast<int>(std::lround(kDaysPerMonth * (observation_months + prediction_months)));
}

std::size_t WindowConfig::bucket_count() const {
  const auto horizon = static_cast<std::size_t>(observation_days() + 1);
  return (horizon + kBucketDays - 1) / kBucketDays;
}

std::string WindowConfig::label() const {
  return shortest(observation_months) + "/" + shortest(prediction_months);
}

std::vector<WindowConfig> default_window_grid() {
  return {{1, 1.5}, {2, 3}, {3, 4.5}, {4, 6}, {6, 9}, {9, 13.5}};
}

WindowConfig parse_window(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw ConfigError("window '" + std::string(text) + "' must look like obs/pred");
  }
  WindowConfig w{parse_number(text.substr(0, slash), "window"),
                 parse_number(text.substr(slash + 1), "window")};
  if (!(w.observation_months > 0 && w.prediction_months > 0) ||
      w.observation_days() < 1 || w.prediction_end_day() <= w.observation_days()) {
    throw ConfigError("window '" + std::string(text) + "' needs positive lengths");
  }
  return w;
}

std::vector<WindowConfig> parse_window_list(std::string_view text) {
  std::vector<WindowConfig> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    const auto part = text.substr(start, comma - start);
    if (!part.empty()) out.push_back(parse_window(part));
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("window list is empty");
  return out;
}

std::vector<std::string> temporal_feature_names(std::span<const std::string> vocab) {
  std::vector<std::string> names;
  for (std::size_t t = 0; t < kVisitTypeCount; ++t) {
    names.push_back("visit_" + std::string(visit_type_name(static_cast<VisitType>(t))));
  }
  names.emplace_back("bmi_percentile");
  names.emplace_back("bmi_present");
  for (const auto& code : vocab) names.push_back("dx_" + code);
  return names;
}

TemporalSequence bucketize(const PatientRecord& record, std::span<const std::string> vocab,
                           int horizon_days) {
  if (record.visits.empty()) throw DataError("bucketize: patient '" + record.id + "' has no visits");
  if (horizon_days < kBucketDays) {
    throw ConfigError("bucketize: horizon " + std::to_string(horizon_days) +
                      " days is shorter than one bucket");
  }
  check_vocab(vocab);
  TemporalSequence seq;
  seq.buckets = static_cast<std::size_t>((horizon_days + kBucketDays - 1) / kBucketDays);
  seq.width = temporal_width(vocab.size());
  seq.values.assign(seq.buckets * seq.width, 0.0);
  std::vector<int> bmi_count(seq.buckets, 0);
  for (const Visit& v : record.visits) {
    if (v.day < 0 || v.day >= horizon_days) continue;
    const auto b = static_cast<std::size_t>(v.day / kBucketDays);
    seq.at(b, static_cast<std::size_t>(v.type)) = 1.0;
    if (v.bmi_percentile) {
      seq.at(b, kBmiColumn) += *v.bmi_percentile;
      ++bmi_count[b];
    }
    for (const auto& code : v.diagnoses) {
      const std::size_t k = code_index(vocab, code);
      if (k < vocab.size()) seq.at(b, kDiagnosisColumn + k) = 1.0;
    }
  }
  for (std::size_t b = 0; b < seq.buckets; ++b) {
    if (bmi_count[b] > 0) {
      seq.at(b, kBmiColumn) /= bmi_count[b];
      seq.at(b, kBmiPresentColumn) = 1.0;
    }
  }
  return seq;
}

std::vector<std::string> filter_rare_codes(std::span<const PatientRecord> cohort, double threshold) {
  if (cohort.empty()) throw DataError("filter_rare_codes: empty cohort");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("filter_rare_codes: threshold must be in (0,1)");
  }
  std::map<std::string, std::size_t> patients_with;
  for (const PatientRecord& r : cohort) {
    std::set<std::string> seen;
    for (const Visit& v : r.visits) seen.insert(v.diagnoses.begin(), v.diagnoses.end());
    for (const auto& code : seen) ++patients_with[code];
  }
  const double needed = threshold * static_cast<double>(cohort.size());
  std::vector<std::string> vocab;
  for (const auto& [code, count] : patients_with) {
    // Relative slack so that exactly-at-threshold counts survive rounding.
    if (static_cast<double>(count) >= needed * (1.0 - 1e-12)) vocab.push_back(code);
  }
  return vocab;
}

const std::vector<CategoricalField>& categorical_fields() {
  static const std::vector<CategoricalField> fields = {
      {"Sex", {"Male", "Female"}},
      {"Race", {"Asian", "White", "Black", "Other"}},
      {"Ethnicity", {"Hispanic", "Non-Hispanic"}},
      {"Insurance", {"Medicaid", "Private"}},
      {"Food ins.", {"Often or sometimes true", "Never true"}},
      {"Food ins.", {"Often or sometimes true", "Never true"}},
  };
  return fields;
}

std::size_t static_width() {
  std::size_t w = kNumericCount;
  for (const auto& f : categorical_fields()) w += f.categories.size();
  return w;
}

std::vector<std::string> static_feature_names() {
  static const std::array<std::string_view, 6> prefixes = {
      "sex", "race", "ethnicity", "insurance", "food_insecurity_1", "food_insecurity_2"};
  std::vector<std::string> names;
  const auto& fields = categorical_fields();
  for (std::size_t f = 0; f < fields.size(); ++f) {
    for (const auto& c : fields[f].categories) names.push_back(std::string(prefixes[f]) + "=" + c);
  }
  for (auto n : {"age", "lifestyle", "psc17", "visit_interval"}) names.emplace_back(n);
  return names;
}

std::vector<std::string> static_feature_groups() {
  std::vector<std::string> groups;
  for (const auto& f : categorical_fields()) groups.insert(groups.end(), f.categories.size(), f.group);
  for (auto g : kNumericGroups) groups.emplace_back(g);
  return groups;
}

double ScalerParams::apply(std::size_t feature, double value) const {
  const double lo = min[feature];
  const double hi = max[feature];
  if (!(hi > lo)) return 0.0;
  return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

double mean_visit_interval(const PatientRecord& record) {
  std::vector<int> days;
  for (const Visit& v : record.visits) {
    if (days.empty() || days.back() != v.day) days.push_back(v.day);
  }
  if (days.size() < 2) return 0.0;
  return static_cast<double>(days.back() - days.front()) / static_cast<double>(days.size() - 1);
}

std::array<double, kNumericCount> raw_numeric(const PatientRecord& observed) {
  return {observed.age, static_cast<double>(observed.lifestyle), static_cast<double>(observed.psc17),
          mean_visit_interval(observed)};
}

WindowExtract extract_window(const PatientRecord& record, const WindowConfig& window) {
  if (record.visits.empty()) {
    throw DataError("patient '" + record.id + "' is ineligible: no visits");
  }
  const int obs_end = window.observation_days();
  const int pred_end = window.prediction_end_day();
  WindowExtract ex;
  ex.window = window;
  ex.observed = record;
  ex.observed.visits.clear();
  for (const Visit& v : record.visits) {
    if (v.day <= obs_end) ex.observed.visits.push_back(v);
    if (v.bmi_percentile && v.day > obs_end && v.day <= pred_end) ex.reference_bmi = v.bmi_percentile;
  }
  ex.last_visit_day = record.visits.back().day;
  ex.visit_at_or_after_end = ex.last_visit_day >= pred_end;
  ex.baseline_bmi = record.baseline_bmi();
  return ex;
}

Labels label_sample(const PatientRecord& record, const WindowConfig& window) {
  const WindowExtract ex = extract_window(record, window);
  Labels labels;
  labels.attrition = ex.visit_at_or_after_end ? 0 : 1;
  if (ex.baseline_bmi && ex.reference_bmi) {
    labels.outcome = *ex.reference_bmi >= *ex.baseline_bmi ? 1 : 0;
  }
  return labels;
}

namespace {

EncodedFeatures encode_observed(const PatientRecord& observed, std::span<const std::string> vocab,
                                const ScalerParams& scaler, const WindowConfig& window) {
  EncodedFeatures out;
  out.static_features.reserve(static_width());
  const auto& fields = categorical_fields();
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const std::string& value = field_value(observed, f);
    for (const auto& c : fields[f].categories) out.static_features.push_back(value == c ? 1.0 : 0.0);
  }
  const auto numeric = raw_numeric(observed);
  for (std::size_t k = 0; k < kNumericCount; ++k) out.static_features.push_back(scaler.apply(k, numeric[k]));
  out.temporal = bucketize(observed, vocab, window.observation_days() + 1);
  for (std::size_t b = 0; b < out.temporal.buckets; ++b) {
    if (out.temporal.at(b, kBmiPresentColumn) != 0.0) {
      out.temporal.at(b, kBmiColumn) = scaler.apply(ScalerParams::kBmi, out.temporal.at(b, kBmiColumn));
    }
  }
  return out;
}

}  // namespace

EncodedFeatures encode_features(const PatientRecord& record, std::span<const std::string> vocab,
                                const ScalerParams& scaler, const WindowConfig& window) {
  check_vocab(vocab);
  return encode_observed(extract_window(record, window).observed, vocab, scaler, window);
}

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

SplitManifest split_patients(std::span<const PatientRecord> cohort, std::uint64_t seed,
                             double train_fraction, double validation_fraction) {
  if (cohort.empty()) throw DataError("split: empty cohort");
  if (!(train_fraction > 0 && validation_fraction >= 0 && train_fraction + validation_fraction < 1)) {
    throw ConfigError("split: fractions must be positive and leave room for a test split");
  }
  std::set<std::string> ids;
  for (const auto& r : cohort) {
    if (!ids.insert(r.id).second) throw DataError("split: duplicate patient id '" + r.id + "'");
  }
  const std::size_t n = cohort.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5b11u, 0));
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  std::vector<Split> assignment(n, Split::kTest);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < n_train) {
      assignment[order[k]] = Split::kTrain;
    } else if (k < n_train + n_val) {
      assignment[order[k]] = Split::kValidation;
    }
  }
  SplitManifest m;
  m.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    m.members[static_cast<std::size_t>(assignment[i])].push_back(cohort[i].id);
  }
  return m;
}

double SplitStats::attrition_prevalence() const {
  return n == 0 ? 0.0 : static_cast<double>(attrition_positive) / static_cast<double>(n);
}

double SplitStats::outcome_prevalence() const {
  return outcome_defined == 0 ? 0.0
                              : static_cast<double>(outcome_positive) / static_cast<double>(outcome_defined);
}

SplitStats Dataset::stats() const {
  SplitStats s;
  s.n = samples.size();
  for (const auto& x : samples) {
    s.attrition_positive += x.attrition == 1 ? 1 : 0;
    s.outcome_defined += x.outcome >= 0 ? 1 : 0;
    s.outcome_positive += x.outcome == 1 ? 1 : 0;
  }
  return s;
}

ScalerParams fit_scaler(std::span<const PatientRecord> train, const WindowConfig& window) {
  ScalerParams s;
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  auto see = [&](std::size_t k, double v) {
    s.min[k] = std::min(s.min[k], v);
    s.max[k] = std::max(s.max[k], v);
  };
  for (const PatientRecord& r : train) {
    const WindowExtract ex = extract_window(r, window);
    const auto numeric = raw_numeric(ex.observed);
    for (std::size_t k = 0; k < kNumericCount; ++k) see(k, numeric[k]);
    for (const Visit& v : ex.observed.visits) {
      if (v.bmi_percentile) see(ScalerParams::kBmi, *v.bmi_percentile);
    }
  }
  for (std::size_t k = 0; k < s.min.size(); ++k) {
    if (s.min[k] > s.max[k]) s.min[k] = s.max[k] = 0.0;
  }
  return s;
}

WindowData assemble_dataset(std::span<const PatientRecord> cohort,
                            std::span<const std::string> vocab, const WindowConfig& window,
                            const SplitManifest& manifest, std::size_t jobs) {
  check_vocab(vocab);
  std::unordered_map<std::string, Split> membership;
  for (std::size_t s = 0; s < 3; ++s) {
    for (const auto& id : manifest.members[s]) membership.emplace(id, static_cast<Split>(s));
  }
  std::vector<Split> where(cohort.size());
  std::vector<PatientRecord> train;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    auto it = membership.find(cohort[i].id);
    if (it == membership.end()) {
      throw DataError("split manifest missing patient '" + cohort[i].id + "'");
    }
    where[i] = it->second;
    if (it->second == Split::kTrain) train.push_back(cohort[i]);
  }

  WindowData data;
  data.window = window;
  data.scaler = fit_scaler(train, window);

  std::vector<WindowedSample> samples(cohort.size());
  parallel_for(cohort.size(), jobs, [&](std::size_t i) {
    const PatientRecord& r = cohort[i];
    const WindowExtract ex = extract_window(r, window);
    EncodedFeatures f = encode_observed(ex.observed, vocab, data.scaler, window);
    const Labels labels = label_sample(r, window);
    WindowedSample& s = samples[i];
    s.patient_id = r.id;
    s.static_features = std::move(f.static_features);
    s.temporal = std::move(f.temporal.values);
    s.attrition = labels.attrition;
    s.outcome = labels.outcome ? *labels.outcome : -1;
    s.visit_interval_days = mean_visit_interval(ex.observed);
  });

  for (auto& d : data.splits) {
    d.steps = window.bucket_count();
    d.static_width = static_width();
    d.temporal_width = temporal_width(vocab.size());
  }
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    data.splits[static_cast<std::size_t>(where[i])].samples.push_back(std::move(samples[i]));
  }
  for (std::size_t s = 0; s < 3; ++s) {
    const SplitStats st = data.splits[s].stats();
    const std::string prefix = "window " + window.label() + ": " +
                               std::string(split_name(static_cast<Split>(s))) + " split ";
    if (st.n == 0) {
      data.warnings.push_back(prefix + "is empty");
      continue;
    }
    if (st.attrition_positive == 0) data.warnings.push_back(prefix + "has no attrition positives");
    if (st.outcome_positive == 0) data.warnings.push_back(prefix + "has no outcome positives");
  }
  return data;
}

nlohmann::json manifest_to_json(const SplitManifest& manifest, std::span<const std::string> vocab,
                                std::span<const WindowData> windows) {
  nlohmann::json j;
  j["seed"] = manifest.seed;
  for (std::size_t s = 0; s < 3; ++s) {
    j["splits"][std::string(split_name(static_cast<Split>(s)))] = manifest.members[s];
  }
  j["vocabulary"] = std::vector<std::string>(vocab.begin(), vocab.end());
  j["windows"] = nlohmann::json::array();
  std::vector<std::string> scaler_names(kNumericGroups.begin(), kNumericGroups.end());
  scaler_names.emplace_back("BMI %");
  for (const WindowData& w : windows) {
    nlohmann::json entry;
    entry["window"] = w.window.label();
    entry["observation_days"] = w.window.observation_days();
    entry["prediction_end_day"] = w.window.prediction_end_day();
    entry["buckets"] = w.window.bucket_count();
    entry["scaler"] = {{"features", scaler_names},
                       {"min", std::vector<double>(w.scaler.min.begin(), w.scaler.min.end())},
                       {"max", std::vector<double>(w.scaler.max.begin(), w.scaler.max.end())}};
    for (std::size_t s = 0; s < 3; ++s) {
      const SplitStats st = w.splits[s].stats();
      entry["prevalence"][std::string(split_name(static_cast<Split>(s)))] = {
          {"n", st.n},
          {"attrition_positive", st.attrition_positive},
          {"outcome_defined", st.outcome_defined},
          {"outcome_positive", st.outcome_positive}};
    }
    entry["warnings"] = w.warnings;
    j["windows"].push_back(std::move(entry));
  }
  return j;
}

}  // namespace wmattr::data
