// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/data/record.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "wmattr/error.hpp"

namespace wmattr::data {

namespace {
constexpr std::array<std::string_view, kVisitTypeCount> kVisitNames = {"nutrition", "medical",
                                                                       "psychology", "exercise"};

nlohmann::json category(const std::string& value) {
  return value.empty() ? nlohmann::json(nullptr) : nlohmann::json(value);
}

std::string category_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).get<std::string>();
}
}  // namespace

std::string_view visit_type_name(VisitType t) noexcept {
  return kVisitNames[static_cast<std::size_t>(t)];
}

VisitType parse_visit_type(std::string_view name) {
  for (std::size_t i = 0; i < kVisitNames.size(); ++i) {
    if (kVisitNames[i] == name) return static_cast<VisitType>(i);
  }
  throw DataError("unknown visit type '" + std::string(name) + "'");
}

std::optional<double> PatientRecord::baseline_bmi() const {
  if (visits.empty() || visits.front().day != 0) return std::nullopt;
  return visits.front().bmi_percentile;
}

void validate(const PatientRecord& r) {
  auto fail = [&](const std::string& what) {
    throw DataError("patient '" + r.id + "': " + what);
  };
  if (r.visits.empty()) fail("record has no visits");
  if (r.visits.front().day != 0) fail("first visit must be on day 0");
  for (std::size_t i = 1; i < r.visits.size(); ++i) {
    if (r.visits[i].day < r.visits[i - 1].day) fail("visits are not sorted by date");
  }
  for (const Visit& v : r.visits) {
    if (v.bmi_percentile && !(*v.bmi_percentile >= 0.0 && *v.bmi_percentile <= 100.0)) {
      fail("BMI percentile " + std::to_string(*v.bmi_percentile) + " outside [0,100]");
    }
  }
  if (r.lifestyle < kLifestyleMin || r.lifestyle > kLifestyleMax) {
    fail("lifestyle score " + std::to_string(r.lifestyle) + " outside [12,48]");
  }
  if (r.psc17 < kPsc17Min || r.psc17 > kPsc17Max) {
    fail("PSC-17 score " + std::to_string(r.psc17) + " outside [0,34]");
  }
  if (!(r.age >= 0.0 && r.age <= 25.0)) fail("age " + std::to_string(r.age) + " implausible");
}

std::string format_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::chrono::sys_days parse_date(std::string_view text) {
  auto number = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc() || ptr != text.data() + pos + len) {
      throw DataError("bad ISO-8601 date '" + std::string(text) + "'");
    }
    return v;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("bad ISO-8601 date '" + std::string(text) + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year(number(0, 4)),
                                        std::chrono::month(number(5, 2)),
                                        std::chrono::day(number(8, 2))};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
  return std::chrono::sys_days(ymd);
}

void write_cohort(std::ostream& out, std::span<const PatientRecord> cohort) {
  for (const PatientRecord& r : cohort) {
    nlohmann::json visits = nlohmann::json::array();
    for (const Visit& v : r.visits) {
      nlohmann::json e = {{"date", format_date(r.start_date + std::chrono::days(v.day))},
                          {"type", visit_type_name(v.type)}};
      e["bmi"] = v.bmi_percentile ? nlohmann::json(*v.bmi_percentile) : nlohmann::json(nullptr);
      e["diagnoses"] = v.diagnoses;
      visits.push_back(std::move(e));
    }
    nlohmann::json j = {
        {"id", r.id},
        {"sex", category(r.sex)},
        {"race", category(r.race)},
        {"ethnicity", category(r.ethnicity)},
        {"insurance", category(r.insurance)},
        {"food_insecurity", {category(r.food_insecurity[0]), category(r.food_insecurity[1])}},
        {"age", r.age},
        {"lifestyle", r.lifestyle},
        {"psc17", r.psc17},
        {"visits", std::move(visits)},
    };
    out << j.dump() << '\n';
  }
  if (!out) throw Error("cohort: write failed");
}

std::vector<PatientRecord> read_cohort(std::istream& in) {
  std::vector<PatientRecord> cohort;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    PatientRecord r;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      r.id = j.at("id").get<std::string>();
      r.sex = category_from(j, "sex");
      r.race = category_from(j, "race");
      r.ethnicity = category_from(j, "ethnicity");
      r.insurance = category_from(j, "insurance");
      const auto& food = j.at("food_insecurity");
      if (!food.is_array() || food.size() != 2) throw DataError("food_insecurity needs 2 items");
      for (std::size_t k = 0; k < 2; ++k) {
        r.food_insecurity[k] = food[k].is_null() ? std::string() : food[k].get<std::string>();
      }
      r.age = j.at("age").get<double>();
      r.lifestyle = j.at("lifestyle").get<int>();
      r.psc17 = j.at("psc17").get<int>();
      const auto& visits = j.at("visits");
      if (!visits.is_array() || visits.empty()) throw DataError("record has no visits");
      r.start_date = parse_date(visits.front().at("date").get<std::string>());
      for (const auto& e : visits) {
        Visit v;
        v.day = static_cast<int>(
            (parse_date(e.at("date").get<std::string>()) - r.start_date).count());
        v.type = parse_visit_type(e.at("type").get<std::string>());
        if (e.contains("bmi") && !e.at("bmi").is_null()) v.bmi_percentile = e.at("bmi").get<double>();
        if (e.contains("diagnoses")) v.diagnoses = e.at("diagnoses").get<std::vector<std::string>>();
        r.visits.push_back(std::move(v));
      }
      validate(r);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("cohort line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("cohort line " + std::to_string(line_no) + ": " + e.what());
    }
    cohort.push_back(std::move(r));
  }
  return cohort;
}

void save_cohort(const std::string& path, std::span<const PatientRecord> cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_cohort(out, cohort);
}

std::vector<PatientRecord> load_cohort(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open cohort file " + path);
  return read_cohort(in);
}

}  // namespace wmattr::data
