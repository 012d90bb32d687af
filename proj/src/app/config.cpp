// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "wmattr/app/run.hpp"
#include "wmattr/error.hpp"

namespace wmattr::app {
namespace {

using nlohmann::json;

enum class Kind { kUint, kNumber, kBool, kString, kUintList };

struct Key {
  std::string name;
  Kind kind;
  bool nullable;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::kUint: return "a non-negative integer";
    case Kind::kNumber: return "a number";
    case Kind::kBool: return "a boolean";
    case Kind::kString: return "a string";
    case Kind::kUintList: return "a list of positive integers";
  }
  return "";
}

bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

bool matches(Kind k, const json& v) {
  switch (k) {
    case Kind::kUint: return non_negative_integer(v);
    case Kind::kNumber: return v.is_number();
    case Kind::kBool: return v.is_boolean();
    case Kind::kString: return v.is_string();
    case Kind::kUintList:
      if (!v.is_array() || v.empty()) return false;
      for (const json& x : v) {
        if (!non_negative_integer(x) || x.get<std::uint64_t>() == 0) return false;
      }
      return true;
  }
  return false;
}

std::string windows_text(const std::vector<data::WindowConfig>& windows) {
  std::string out;
  for (const auto& w : windows) out += (out.empty() ? "" : ",") + w.label();
  return out;
}

std::string ablate_text(const train::TrainConfig& t) {
  if (t.multitask && t.transfer) return "none";
  if (!t.multitask && !t.transfer) return "no-multitask,no-transfer";
  return t.multitask ? "no-transfer" : "no-multitask";
}

void set_ablate(train::TrainConfig& t, const std::string& text) {
  t.multitask = true;
  t.transfer = true;
  if (text == "none" || text.empty()) return;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string part = text.substr(start, comma - start);
    if (part == "no-multitask") {
      t.multitask = false;
    } else if (part == "no-transfer") {
      t.transfer = false;
    } else {
      throw ConfigError("config key 'ablate': unknown ablation '" + part +
                        "' (expected no-multitask, no-transfer or none)");
    }
    start = comma + 1;
  }
}

template <class T>
Key uint_key(std::string name, T RunConfig::*group, std::size_t T::*field) {
  return {name, Kind::kUint, false, [=](const RunConfig& c) { return json((c.*group).*field); },
          [=](RunConfig& c, const json& v) { (c.*group).*field = v.get<std::size_t>(); }};
}

template <class T>
Key number_key(std::string name, T RunConfig::*group, double T::*field) {
  return {name, Kind::kNumber, false, [=](const RunConfig& c) { return json((c.*group).*field); },
          [=](RunConfig& c, const json& v) { (c.*group).*field = v.get<double>(); }};
}

Key signal_key(std::string name, double synth::SignalSpec::*field) {
  return {name, Kind::kNumber, false, [=](const RunConfig& c) { return json(c.generator.signal.*field); },
          [=](RunConfig& c, const json& v) { c.generator.signal.*field = v.get<double>(); }};
}

Key widths_key(std::string name, std::vector<std::size_t> nn::ModelConfig::*field) {
  return {name, Kind::kUintList, false, [=](const RunConfig& c) { return json(c.train.model.*field); },
          [=](RunConfig& c, const json& v) { c.train.model.*field = v.get<std::vector<std::size_t>>(); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"seed", Kind::kUint, true,
                 [](const RunConfig& c) { return c.seed ? json(*c.seed) : json(nullptr); },
                 [](RunConfig& c, const json& v) {
                   if (v.is_null()) {
                     c.seed.reset();
                   } else {
                     c.seed = v.get<std::uint64_t>();
                   }
                 }});
    k.push_back({"out", Kind::kString, false, [](const RunConfig& c) { return json(c.out.string()); },
                 [](RunConfig& c, const json& v) { c.out = v.get<std::string>(); }});
    k.push_back({"cohort", Kind::kString, true,
                 [](const RunConfig& c) { return c.cohort ? json(c.cohort->string()) : json(nullptr); },
                 [](RunConfig& c, const json& v) {
                   if (v.is_null()) {
                     c.cohort.reset();
                   } else {
                     c.cohort = v.get<std::string>();
                   }
                 }});
    k.push_back({"jobs", Kind::kUint, false, [](const RunConfig& c) { return json(c.jobs); },
                 [](RunConfig& c, const json& v) { c.jobs = v.get<std::size_t>(); }});
    // Generator.
    k.push_back(uint_key("cohort_size", &RunConfig::generator, &synth::GeneratorConfig::size));
    k.push_back(number_key("baseline_bmi_mean", &RunConfig::generator, &synth::GeneratorConfig::baseline_bmi_mean));
    k.push_back(number_key("mean_gap_weeks", &RunConfig::generator, &synth::GeneratorConfig::mean_gap_weeks));
    k.push_back(
        number_key("single_visit_fraction", &RunConfig::generator, &synth::GeneratorConfig::single_visit_fraction));
    k.push_back(
        number_key("many_visit_fraction", &RunConfig::generator, &synth::GeneratorConfig::many_visit_fraction));
    k.push_back(signal_key("signal_gap", &synth::SignalSpec::gap));
    k.push_back(signal_key("signal_age", &synth::SignalSpec::age));
    k.push_back(signal_key("signal_bmi_slope", &synth::SignalSpec::bmi_slope));
    k.push_back(signal_key("signal_insurance", &synth::SignalSpec::insurance));
    // Preprocessing.
    k.push_back({"rare_code_threshold", Kind::kNumber, false,
                 [](const RunConfig& c) { return json(c.rare_code_threshold); },
                 [](RunConfig& c, const json& v) { c.rare_code_threshold = v.get<double>(); }});
    k.push_back({"windows", Kind::kString, false, [](const RunConfig& c) { return json(windows_text(c.train.windows)); },
                 [](RunConfig& c, const json& v) { c.train.windows = data::parse_window_list(v.get<std::string>()); }});
    // Training.
    k.push_back(uint_key("pretrain_epochs", &RunConfig::train, &train::TrainConfig::pretrain_epochs));
    k.push_back(uint_key("finetune_epochs", &RunConfig::train, &train::TrainConfig::finetune_epochs));
    k.push_back(uint_key("batch_size", &RunConfig::train, &train::TrainConfig::batch_size));
    k.push_back(uint_key("patience", &RunConfig::train, &train::TrainConfig::patience));
    k.push_back({"learning_rate", Kind::kNumber, false,
                 [](const RunConfig& c) { return json(c.train.optimizer.learning_rate); },
                 [](RunConfig& c, const json& v) { c.train.optimizer.learning_rate = v.get<double>(); }});
    k.push_back({"dropout", Kind::kNumber, false, [](const RunConfig& c) { return json(c.train.model.dropout); },
                 [](RunConfig& c, const json& v) { c.train.model.dropout = v.get<double>(); }});
    k.push_back({"batch_norm", Kind::kBool, false, [](const RunConfig& c) { return json(c.train.model.batch_norm); },
                 [](RunConfig& c, const json& v) { c.train.model.batch_norm = v.get<bool>(); }});
    k.push_back(widths_key("static_hidden", &nn::ModelConfig::static_hidden));
    k.push_back(widths_key("lstm_hidden", &nn::ModelConfig::lstm_hidden));
    k.push_back(widths_key("head_hidden", &nn::ModelConfig::head_hidden));
    k.push_back({"attrition_weight", Kind::kNumber, false,
                 [](const RunConfig& c) { return json(c.train.weights.attrition); },
                 [](RunConfig& c, const json& v) { c.train.weights.attrition = v.get<double>(); }});
    k.push_back({"outcome_weight", Kind::kNumber, false,
                 [](const RunConfig& c) { return json(c.train.weights.outcome); },
                 [](RunConfig& c, const json& v) { c.train.weights.outcome = v.get<double>(); }});
    k.push_back({"ablate", Kind::kString, false, [](const RunConfig& c) { return json(ablate_text(c.train)); },
                 [](RunConfig& c, const json& v) { set_ablate(c.train, v.get<std::string>()); }});
    // Evaluation and baseline.
    k.push_back({"threshold", Kind::kNumber, false, [](const RunConfig& c) { return json(c.threshold); },
                 [](RunConfig& c, const json& v) { c.threshold = v.get<double>(); }});
    k.push_back({"lr_inverse_strength", Kind::kNumber, false,
                 [](const RunConfig& c) { return json(c.lr_inverse_strength); },
                 [](RunConfig& c, const json& v) { c.lr_inverse_strength = v.get<double>(); }});
    // Attribution.
    k.push_back({"shap_estimator", Kind::kString, false,
                 [](const RunConfig& c) {
                   return json(c.shap.estimator == explain::Estimator::kExact ? "exact" : "kernel");
                 },
                 [](RunConfig& c, const json& v) {
                   const auto s = v.get<std::string>();
                   if (s == "exact") {
                     c.shap.estimator = explain::Estimator::kExact;
                   } else if (s == "kernel") {
                     c.shap.estimator = explain::Estimator::kKernel;
                   } else {
                     throw ConfigError("config key 'shap_estimator': expected exact or kernel, got '" + s + "'");
                   }
                 }});
    k.push_back({"shap_groups", Kind::kString, false, [](const RunConfig& c) { return json(c.shap_groups); },
                 [](RunConfig& c, const json& v) {
                   const auto s = v.get<std::string>();
                   if (s != "default" && s != "per-feature") {
                     throw ConfigError("config key 'shap_groups': expected default or per-feature, got '" + s + "'");
                   }
                   c.shap_groups = s;
                 }});
    k.push_back(uint_key("shap_budget", &RunConfig::shap, &explain::ReportOptions::budget));
    k.push_back(uint_key("shap_background", &RunConfig::shap, &explain::ReportOptions::background));
    k.push_back(uint_key("shap_instances", &RunConfig::shap, &explain::ReportOptions::max_instances));
    return k;
  }();
  return table;
}

void apply(RunConfig& config, const json& doc, const std::string& source) {
  if (!doc.is_object()) throw ConfigError(source + ": expected a flat key-value object");
  for (const auto& [name, value] : doc.items()) {
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == name; });
    if (it == table.end()) throw ConfigError("unknown config key '" + name + "'");
    if (!(matches(it->kind, value) || (it->nullable && value.is_null()))) {
      throw ConfigError("config key '" + name + "' expects " + std::string(kind_name(it->kind)) + ", got " +
                        value.dump());
    }
    it->set(config, value);
  }
}

void check(const RunConfig& c) {
  if (c.jobs == 0) throw ConfigError("config key 'jobs' must be at least 1");
  if (c.generator.size == 0) throw ConfigError("config key 'cohort_size' must be at least 1");
  if (!(c.rare_code_threshold >= 0.0 && c.rare_code_threshold <= 1.0)) {
    throw ConfigError("config key 'rare_code_threshold' must be in [0, 1]");
  }
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw ConfigError("config key 'threshold' must be in (0, 1)");
  if (!(c.lr_inverse_strength > 0.0)) throw ConfigError("config key 'lr_inverse_strength' must be positive");
  if (!(c.train.model.dropout >= 0.0 && c.train.model.dropout < 1.0)) {
    throw ConfigError("config key 'dropout' must be in [0, 1)");
  }
  if (c.shap.background == 0) throw ConfigError("config key 'shap_background' must be at least 1");
  c.train.validate();
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : keys()) out.push_back(k.name);
  return out;
}

RunConfig load_config(const json& file, const json& overrides) {
  RunConfig config;
  apply(config, file, "config");
  apply(config, overrides, "overrides");
  config.train.seed = config.seed.value_or(0);
  config.train.model.seed = 0;
  config.generator.seed = config.seed.value_or(0);
  config.shap.seed = config.seed.value_or(0);
  config.shap.jobs = config.jobs;
  check(config);
  return config;
}

RunConfig load_config_file(const std::filesystem::path& path, const json& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  json doc = json::object();
  if (text.str().find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      doc = json::parse(text.str());
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + path.string() + ": " + e.what());
    }
  }
  return load_config(doc, overrides);
}

json config_to_json(const RunConfig& config) {
  json out = json::object();
  for (const Key& k : keys()) out[k.name] = k.get(config);
  return out;
}

}  // namespace wmattr::app
