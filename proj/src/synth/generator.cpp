// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

#include "wmattr/data/pipeline.hpp"
#include "wmattr/error.hpp"
#include "wmattr/parallel.hpp"
#include "wmattr/random.hpp"

namespace wmattr::synth {

namespace {

using data::Visit;
using data::VisitType;

enum Stream : std::uint64_t { kPatient = 0, kStatic = 1, kDrop = 2, kGap = 3, kVisit = 4 };

constexpr std::uint64_t kCalibrationSeed = 0x6a09e667f3bcc908ULL;
constexpr std::size_t kCalibrationSize = 20000;
constexpr int kManyVisits = 10;
// Visits are spread over 2007-2020.
constexpr int kFirstStartDay = 13514;  // 2007-01-01
constexpr int kStartSpan = 5113;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double round_to(double v, double step) { return std::round(v / step) * step; }

std::string pick(Rng& rng, const CategoricalSpec& spec) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.categories.size(); ++k) {
    acc += spec.probabilities[k];
    if (u < acc) return spec.categories[k];
  }
  return {};
}

void check_spec(const CategoricalSpec& spec, const char* name) {
  if (spec.categories.size() != spec.probabilities.size() || spec.categories.empty()) {
    throw ConfigError(std::string("generator: ") + name + " needs one probability per category");
  }
  double total = 0.0;
  for (double p : spec.probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("generator: ") + name + " probability outside [0,1]");
    total += p;
  }
  if (total > 1.0 + 1e-9) throw ConfigError(std::string("generator: ") + name + " probabilities exceed 1");
}

void check_config(const GeneratorConfig& c) {
  if (c.size == 0) throw ConfigError("generator: cohort size must be at least 1");
  check_spec(c.sex, "sex");
  check_spec(c.race, "race");
  check_spec(c.ethnicity, "ethnicity");
  check_spec(c.insurance, "insurance");
  check_spec(c.food_insecurity_1, "food_insecurity_1");
  check_spec(c.food_insecurity_2, "food_insecurity_2");
  if (c.visit_type_weights.size() != data::kVisitTypeCount) {
    throw ConfigError("generator: visit_type_weights needs 4 entries");
  }
  for (double p : {c.bmi_measured_probability, c.diagnosis_rate_min, c.diagnosis_rate_max}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("generator: probability outside [0,1]");
  }
  for (double p : {c.single_visit_fraction, c.many_visit_fraction}) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("generator: visit-count fractions must be in (0,1)");
  }
  const SignalSpec& s = c.signal;
  for (double v : {s.gap, s.age, s.bmi_slope, s.insurance, s.drift_base, s.drift_age, s.drift_gap,
                   s.drift_insurance, s.drift_sd, c.first_intercept, c.later_intercept}) {
    if (!std::isfinite(v)) throw ConfigError("generator: signal coefficients must be finite");
  }
  if (!(c.base_gap_days > 0) || c.min_gap_days < 1 || c.max_follow_up_days < c.min_gap_days) {
    throw ConfigError("generator: gap settings must be positive");
  }
  if (c.forced_first_hazard && !(*c.forced_first_hazard >= 0 && *c.forced_first_hazard <= 1)) {
    throw ConfigError("generator: forced_first_hazard outside [0,1]");
  }
}

// Everything about a patient that does not depend on the hazard intercepts.
struct Latent {
  PatientRecord record;  // statics only, no visits
  double baseline_bmi = 0.0;
  double gap_multiplier = 1.0;
  double drift = 0.0;
  double shift = 0.0;
  std::vector<std::size_t> codes;  // indices of diagnoses the patient carries
};

Latent sample_latent(const GeneratorConfig& c, std::uint64_t patient_seed, std::size_t index,
                     std::span<const double> rates) {
  Rng rng(derive_seed(patient_seed, kStatic, 0));
  Latent l;
  PatientRecord& r = l.record;
  char id[24];
  std::snprintf(id, sizeof(id), "P%06zu", index + 1);
  r.id = id;
  r.sex = pick(rng, c.sex);
  r.race = pick(rng, c.race);
  r.ethnicity = pick(rng, c.ethnicity);
  r.insurance = pick(rng, c.insurance);
  r.food_insecurity[0] = pick(rng, c.food_insecurity_1);
  r.food_insecurity[1] = pick(rng, c.food_insecurity_2);
  r.age = round_to(std::clamp(rng.normal(c.age_mean, c.age_sd), 1.0, 19.0), 0.1);
  r.lifestyle = static_cast<int>(std::clamp(std::round(rng.normal(c.lifestyle_mean, c.lifestyle_sd)),
                                            data::kLifestyleMin, data::kLifestyleMax));
  const double psc_p = std::clamp(c.psc17_mean / data::kPsc17Max, 0.0, 1.0);
  int psc = 0;
  for (int k = 0; k < static_cast<int>(data::kPsc17Max); ++k) psc += rng.bernoulli(psc_p) ? 1 : 0;
  r.psc17 = psc;
  r.start_date = std::chrono::sys_days(std::chrono::days(kFirstStartDay + static_cast<int>(rng.below(kStartSpan))));
  l.baseline_bmi = round_to(std::clamp(rng.normal(c.baseline_bmi_mean, c.baseline_bmi_sd), 95.0, 99.9), 0.1);
  const double h = c.gap_heterogeneity_sd;
  l.gap_multiplier = std::exp(h * rng.normal() - 0.5 * h * h);
  const double z_age = (r.age - c.age_mean) / c.age_sd;
  const double medicaid = r.insurance == "Medicaid" ? 1.0 : 0.0;
  const SignalSpec& s = c.signal;
  const double drift_noise = rng.normal();
  l.drift = c.forced_drift ? *c.forced_drift
                           : s.drift_base + s.drift_age * z_age + s.drift_gap * (l.gap_multiplier - 1.0) +
                                 s.drift_insurance * medicaid + s.drift_sd * drift_noise;
  l.shift = s.gap * l.gap_multiplier + s.age * z_age + s.bmi_slope * l.drift + s.insurance * medicaid;
  for (std::size_t j = 0; j < rates.size(); ++j) {
    if (rng.bernoulli(rates[j])) l.codes.push_back(j);
  }
  return l;
}

// Gap multiplier noise of step k, mean one on the linear scale.
double gap_noise(const GeneratorConfig& c, std::uint64_t patient_seed, std::size_t k) {
  Rng rng(derive_seed(patient_seed, kGap, k));
  const double sd = c.gap_noise_sd;
  return std::exp(sd * rng.normal() - 0.5 * sd * sd);
}

int gap_days(const GeneratorConfig& c, double base_gap, double multiplier, double noise) {
  return std::max(c.min_gap_days, static_cast<int>(std::lround(base_gap * multiplier * noise)));
}

double step_hazard(const GeneratorConfig& c, const ProcessParams& p, double shift, std::size_t k) {
  if (k == 0 && c.forced_first_hazard) return *c.forced_first_hazard;
  return logistic((k == 0 ? p.first_intercept : p.later_intercept) + shift);
}

template <typename F>
double bisect(F&& f, double target, const char* what) {
  double lo = -40.0;
  double hi = 40.0;
  const double flo = f(lo);
  const double fhi = f(hi);
  if (!((flo - target) * (fhi - target) <= 0.0)) {
    throw DataError(std::string("generator: infeasible target ") + what + "=" +
                    std::to_string(target) + " (reachable range " + std::to_string(std::min(flo, fhi)) +
                    " to " + std::to_string(std::max(flo, fhi)) + ")");
  }
  const bool increasing = fhi > flo;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) < target) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SignalSpec SignalSpec::null() {
  SignalSpec s;
  s.gap = s.age = s.bmi_slope = s.insurance = 0.0;
  s.drift_age = s.drift_gap = s.drift_insurance = 0.0;
  return s;
}

std::vector<std::string> diagnosis_code_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < count; ++j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "DX%02zu", j + 1);
    names.emplace_back(buf);
  }
  return names;
}

std::vector<double> diagnosis_rates(const GeneratorConfig& c) {
  std::vector<double> rates(c.diagnosis_codes);
  for (std::size_t j = 0; j < rates.size(); ++j) {
    const double t = rates.size() == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(rates.size() - 1);
    rates[j] = c.diagnosis_rate_max * std::pow(c.diagnosis_rate_min / c.diagnosis_rate_max, t);
  }
  return rates;
}

ProcessParams calibrate(const GeneratorConfig& config) {
  check_config(config);
  const double target_gap = config.mean_gap_weeks * 7.0;
  if (!(target_gap > config.min_gap_days)) {
    throw DataError("generator: infeasible target mean_gap_weeks=" + std::to_string(config.mean_gap_weeks) +
                    " (gaps are at least " + std::to_string(config.min_gap_days) + " days)");
  }
  if (config.many_visit_fraction >= 1.0 - config.single_visit_fraction) {
    throw DataError("generator: infeasible target many_visit_fraction=" +
                    std::to_string(config.many_visit_fraction) + " with single_visit_fraction=" +
                    std::to_string(config.single_visit_fraction));
  }
  const auto rates = diagnosis_rates(config);
  struct Draw {
    double shift;
    double multiplier;
    std::uint64_t seed;
  };
  std::vector<Draw> sample(kCalibrationSize);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const std::uint64_t ps = derive_seed(kCalibrationSeed, kPatient, i);
    const Latent l = sample_latent(config, ps, i, rates);
    sample[i] = {l.shift, l.gap_multiplier, ps};
  }

  ProcessParams p;
  p.first_intercept = bisect(
      [&](double a) {
        double total = 0.0;
        for (const Draw& d : sample) total += logistic(a + d.shift);
        return total / static_cast<double>(sample.size());
      },
      config.single_visit_fraction, "single_visit_fraction");

  // Noise of the first ten gaps, reused across the alternating solves below.
  std::vector<double> early_noise(sample.size() * kManyVisits);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    for (int k = 0; k < kManyVisits; ++k) early_noise[i * kManyVisits + k] = gap_noise(config, sample[i].seed, k);
  }

  p.base_gap_days = target_gap;
  for (int round = 0; round < 6; ++round) {
    std::vector<double> reaches(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
      int day = 0;
      for (int k = 0; k < kManyVisits; ++k) {
        day += gap_days(config, p.base_gap_days, sample[i].multiplier, early_noise[i * kManyVisits + k]);
      }
      reaches[i] = day <= config.max_follow_up_days ? 1.0 : 0.0;
    }
    p.later_intercept = bisect(
        [&](double a) {
          double total = 0.0;
          for (std::size_t i = 0; i < sample.size(); ++i) {
            const double survive_first = 1.0 - logistic(p.first_intercept + sample[i].shift);
            total += reaches[i] * survive_first * std::pow(1.0 - logistic(a + sample[i].shift), kManyVisits - 1);
          }
          return total / static_cast<double>(sample.size());
        },
        config.many_visit_fraction, "many_visit_fraction");

    // Expected pooled mean gap over realized consecutive visit pairs.
    double weighted = 0.0;
    double weight = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      double survive = 1.0 - logistic(p.first_intercept + sample[i].shift);
      const double later = 1.0 - logistic(p.later_intercept + sample[i].shift);
      int day = 0;
      for (std::size_t k = 0; survive > 1e-9; ++k) {
        const double noise = k < kManyVisits ? early_noise[i * kManyVisits + k] : gap_noise(config, sample[i].seed, k);
        const int gap = gap_days(config, p.base_gap_days, sample[i].multiplier, noise);
        day += gap;
        if (day > config.max_follow_up_days) break;
        weighted += survive * gap;
        weight += survive;
        survive *= later;
      }
    }
    const double pooled = weight > 0 ? weighted / weight : target_gap;
    if (std::abs(pooled - target_gap) < 1e-3) break;
    p.base_gap_days *= target_gap / pooled;
  }
  return p;
}

std::pair<PatientRecord, GroundTruth> sample_patient(const GeneratorConfig& c,
                                                     const ProcessParams& p, std::size_t index) {
  const std::uint64_t ps = derive_seed(c.seed, kPatient, index);
  const auto rates = diagnosis_rates(c);
  const auto code_names = diagnosis_code_names(c.diagnosis_codes);
  Latent l = sample_latent(c, ps, index, rates);
  PatientRecord r = std::move(l.record);
  GroundTruth truth{r.id, 0, l.drift, l.gap_multiplier, l.shift};

  auto add_codes = [&](Visit& v, Rng& rng) {
    for (std::size_t j : l.codes) {
      if (rng.bernoulli(0.5)) v.diagnoses.push_back(code_names[j]);
    }
  };

  Visit first;
  first.day = 0;
  first.type = VisitType::kMedical;
  first.bmi_percentile = l.baseline_bmi;
  {
    Rng vr(derive_seed(ps, kVisit, 0));
    add_codes(first, vr);
  }
  r.visits.push_back(std::move(first));

  double bmi = l.baseline_bmi;
  int day = 0;
  for (std::size_t k = 0;; ++k) {
    const double hazard = step_hazard(c, p, l.shift, k);
    const double u = Rng(derive_seed(ps, kDrop, k)).uniform();
    const int next = day + gap_days(c, p.base_gap_days, l.gap_multiplier, gap_noise(c, ps, k));
    if (u < hazard || next > c.max_follow_up_days) {
      truth.latent_attrition_day = next;
      break;
    }
    day = next;
    Rng vr(derive_seed(ps, kVisit, k + 1));
    Visit v;
    v.day = day;
    const double t = vr.uniform();
    double acc = 0.0;
    v.type = VisitType::kExercise;
    for (std::size_t j = 0; j < data::kVisitTypeCount; ++j) {
      acc += c.visit_type_weights[j];
      if (t < acc) {
        v.type = static_cast<VisitType>(j);
        break;
      }
    }
    bmi = std::clamp(bmi + l.drift + c.bmi_noise_sd * vr.normal(), 0.0, 100.0);
    if (vr.bernoulli(c.bmi_measured_probability)) v.bmi_percentile = std::clamp(round_to(bmi, 0.1), 0.0, 100.0);
    add_codes(v, vr);
    r.visits.push_back(std::move(v));
  }
  return {std::move(r), std::move(truth)};
}

Cohort generate_cohort(const GeneratorConfig& config, std::size_t jobs) {
  check_config(config);
  Cohort cohort;
  if (config.calibrate) {
    cohort.params = calibrate(config);
  } else {
    cohort.params = {config.first_intercept, config.later_intercept, config.base_gap_days};
  }
  cohort.patients.resize(config.size);
  cohort.truth.resize(config.size);
  parallel_for(config.size, jobs, [&](std::size_t i) {
    auto [record, truth] = sample_patient(config, cohort.params, i);
    cohort.patients[i] = std::move(record);
    cohort.truth[i] = std::move(truth);
  });
  return cohort;
}

void write_ground_truth(std::ostream& out, std::span<const GroundTruth> truth) {
  for (const GroundTruth& t : truth) {
    nlohmann::json j = {{"id", t.id},
                        {"latent_attrition_day", t.latent_attrition_day},
                        {"bmi_drift", t.bmi_drift},
                        {"gap_multiplier", t.gap_multiplier},
                        {"hazard_shift", t.hazard_shift}};
    out << j.dump() << '\n';
  }
}

std::vector<GroundTruth> read_ground_truth(std::istream& in) {
  std::vector<GroundTruth> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("latent_attrition_day").get<int>(),
                     j.at("bmi_drift").get<double>(), j.at("gap_multiplier").get<double>(),
                     j.at("hazard_shift").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("ground truth line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

CohortSummary cohort_summary(std::span<const PatientRecord> cohort) {
  if (cohort.empty()) throw DataError("cohort_summary: empty cohort");
  CohortSummary s;
  s.patients = cohort.size();
  const GeneratorConfig defaults;
  auto seed_categories = [&](const std::string& field, const CategoricalSpec& spec) {
    for (const auto& c : spec.categories) s.categories[field][c] = 0;
    s.categories[field]["unknown"] = 0;
  };
  seed_categories("sex", defaults.sex);
  seed_categories("race", defaults.race);
  seed_categories("ethnicity", defaults.ethnicity);
  seed_categories("insurance", defaults.insurance);
  seed_categories("food_insecurity_1", defaults.food_insecurity_1);
  seed_categories("food_insecurity_2", defaults.food_insecurity_2);
  for (std::size_t t = 0; t < data::kVisitTypeCount; ++t) {
    s.visit_types[std::string(data::visit_type_name(static_cast<VisitType>(t)))] = 0;
  }

  auto count = [&](const std::string& field, const std::string& value) {
    ++s.categories[field][value.empty() ? "unknown" : value];
  };
  s.age_min = s.lifestyle_min = s.psc17_min = std::numeric_limits<double>::infinity();
  s.age_max = s.lifestyle_max = s.psc17_max = -std::numeric_limits<double>::infinity();
  double gap_total = 0.0;
  double bmi_total = 0.0;
  std::size_t single = 0;
  std::size_t many = 0;
  for (const PatientRecord& r : cohort) {
    count("sex", r.sex);
    count("race", r.race);
    count("ethnicity", r.ethnicity);
    count("insurance", r.insurance);
    count("food_insecurity_1", r.food_insecurity[0]);
    count("food_insecurity_2", r.food_insecurity[1]);
    s.age_mean += r.age;
    s.age_min = std::min(s.age_min, r.age);
    s.age_max = std::max(s.age_max, r.age);
    s.lifestyle_mean += r.lifestyle;
    s.lifestyle_min = std::min<double>(s.lifestyle_min, r.lifestyle);
    s.lifestyle_max = std::max<double>(s.lifestyle_max, r.lifestyle);
    s.psc17_mean += r.psc17;
    s.psc17_min = std::min<double>(s.psc17_min, r.psc17);
    s.psc17_max = std::max<double>(s.psc17_max, r.psc17);
    if (auto b = r.baseline_bmi()) {
      bmi_total += *b;
      ++s.baseline_bmi_count;
    }
    s.visits += r.visits.size();
    for (std::size_t k = 0; k < r.visits.size(); ++k) {
      ++s.visit_types[std::string(data::visit_type_name(r.visits[k].type))];
      if (k > 0) {
        gap_total += r.visits[k].day - r.visits[k - 1].day;
        ++s.gap_count;
      }
    }
    single += r.visits.size() == 1 ? 1 : 0;
    many += r.visits.size() > static_cast<std::size_t>(kManyVisits) ? 1 : 0;
    ++s.visit_count_histogram[static_cast<int>(r.visits.size())];
    const int last = r.visits.empty() ? 0 : r.visits.back().day;
    ++s.months_enrolled_histogram[static_cast<int>(std::floor(last / data::kDaysPerMonth))];
  }
  const double n = static_cast<double>(cohort.size());
  s.age_mean /= n;
  s.lifestyle_mean /= n;
  s.psc17_mean /= n;
  s.baseline_bmi_mean = s.baseline_bmi_count ? bmi_total / static_cast<double>(s.baseline_bmi_count) : 0.0;
  s.mean_gap_weeks = s.gap_count ? gap_total / static_cast<double>(s.gap_count) / 7.0 : 0.0;
  s.single_visit_fraction = static_cast<double>(single) / n;
  s.many_visit_fraction = static_cast<double>(many) / n;
  return s;
}

nlohmann::json summary_to_json(const CohortSummary& s) {
  nlohmann::json j;
  j["patients"] = s.patients;
  j["visits"] = s.visits;
  j["categories"] = s.categories;
  j["age"] = {{"mean", s.age_mean}, {"min", s.age_min}, {"max", s.age_max}};
  j["lifestyle"] = {{"mean", s.lifestyle_mean}, {"min", s.lifestyle_min}, {"max", s.lifestyle_max}};
  j["psc17"] = {{"mean", s.psc17_mean}, {"min", s.psc17_min}, {"max", s.psc17_max}};
  j["baseline_bmi_mean"] = s.baseline_bmi_mean;
  j["mean_gap_weeks"] = s.mean_gap_weeks;
  j["visit_types"] = s.visit_types;
  j["single_visit_fraction"] = s.single_visit_fraction;
  j["many_visit_fraction"] = s.many_visit_fraction;
  nlohmann::json visits = nlohmann::json::object();
  for (auto [k, v] : s.visit_count_histogram) visits[std::to_string(k)] = v;
  nlohmann::json months = nlohmann::json::object();
  for (auto [k, v] : s.months_enrolled_histogram) months[std::to_string(k)] = v;
  j["visit_count_histogram"] = visits;
  j["months_enrolled_histogram"] = months;
  return j;
}

}  // namespace wmattr::synth
