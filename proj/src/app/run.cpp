// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wmattr/app/run.hpp"
#include "wmattr/baseline/logistic.hpp"
#include "wmattr/error.hpp"
#include "wmattr/eval/metrics.hpp"

namespace wmattr::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kCommandNames[] = {"generate", "preprocess", "train", "evaluate",
                                              "baseline", "explain",    "report"};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

struct Prepared {
  std::vector<data::PatientRecord> cohort;
  std::vector<std::string> vocab;
  data::SplitManifest manifest;
  std::vector<data::WindowData> windows;
};

class Runner {
 public:
  Runner(const RunConfig& config, std::ostream* progress)
      : config_(config), dir_(run_directory(config)), progress_(progress) {
    fs::create_directories(dir_);
    log_.open(dir_ / "run.log", std::ios::app | std::ios::binary);
    if (!log_) throw Error("cannot open " + (dir_ / "run.log").string());
  }

  const fs::path& dir() const { return dir_; }

  void log(json event) {
    log_ << event.dump() << '\n';
    log_.flush();
  }

  void run(Command c) {
    const auto start = std::chrono::steady_clock::now();
    if (progress_) *progress_ << "[" << command_name(c) << "] " << dir_.string() << '\n';
    switch (c) {
      case Command::kGenerate: generate(); break;
      case Command::kPreprocess: preprocess(); break;
      case Command::kTrain: train(); break;
      case Command::kEvaluate: evaluate(); break;
      case Command::kBaseline: baseline(); break;
      case Command::kExplain: explain(); break;
      case Command::kReport: report(); break;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log({{"event", "stage"}, {"stage", command_name(c)}, {"seconds", seconds}});
  }

 private:
  fs::path stage_dir(Command c) const { return dir_ / std::string(command_name(c)); }

  fs::path begin(Command c) const {
    const fs::path d = stage_dir(c);
    fs::create_directories(d);
    fs::remove(d / "config.json");
    return d;
  }

  // config.json is written last and marks the stage complete.
  void finish(const fs::path& d) const { write_text(d / "config.json", config_to_json(config_).dump(2) + "\n"); }

  void ensure(Command c) {
    if (!fs::exists(stage_dir(c) / "config.json")) run(c);
  }

  void warn(const std::string& message) {
    log({{"event", "warning"}, {"message", message}});
    if (progress_) *progress_ << "warning: " << message << '\n';
  }

  void generate() {
    if (config_.cohort) throw ConfigError("generate cannot be combined with an external cohort file");
    const fs::path d = begin(Command::kGenerate);
    const synth::Cohort c = synth::generate_cohort(config_.generator, config_.jobs);
    data::save_cohort((d / "cohort.jsonl").string(), c.patients);
    std::ostringstream truth;
    synth::write_ground_truth(truth, c.truth);
    write_text(d / "ground_truth.jsonl", truth.str());
    json summary = synth::summary_to_json(synth::cohort_summary(c.patients));
    summary["calibrated"] = {{"first_intercept", c.params.first_intercept},
                             {"later_intercept", c.params.later_intercept},
                             {"base_gap_days", c.params.base_gap_days}};
    write_text(d / "summary.json", summary.dump(2) + "\n");
    finish(d);
  }

  std::vector<data::PatientRecord> cohort() {
    if (config_.cohort) return data::load_cohort(config_.cohort->string());
    ensure(Command::kGenerate);
    return data::load_cohort((stage_dir(Command::kGenerate) / "cohort.jsonl").string());
  }

  void preprocess() {
    const auto records = cohort();
    const fs::path d = begin(Command::kPreprocess);
    Prepared p;
    p.vocab = data::filter_rare_codes(records, config_.rare_code_threshold);
    p.manifest = data::split_patients(records, *config_.seed);
    for (const auto& w : config_.train.windows) {
      p.windows.push_back(data::assemble_dataset(records, p.vocab, w, p.manifest, config_.jobs));
      for (const auto& message : p.windows.back().warnings) warn(w.label() + ": " + message);
    }
    write_text(d / "manifest.json", data::manifest_to_json(p.manifest, p.vocab, p.windows).dump(2) + "\n");
    finish(d);
  }

  Prepared prepared() {
    Prepared p;
    p.cohort = cohort();
    ensure(Command::kPreprocess);
    const json m = read_json(stage_dir(Command::kPreprocess) / "manifest.json");
    try {
      p.vocab = m.at("vocabulary").get<std::vector<std::string>>();
      p.manifest.seed = m.at("seed").get<std::uint64_t>();
      for (std::size_t s = 0; s < 3; ++s) {
        p.manifest.members[s] =
            m.at("splits").at(std::string(data::split_name(static_cast<data::Split>(s)))).get<std::vector<std::string>>();
      }
    } catch (const json::exception& e) {
      throw DataError("manifest.json: " + std::string(e.what()));
    }
    for (const auto& w : config_.train.windows) {
      p.windows.push_back(data::assemble_dataset(p.cohort, p.vocab, w, p.manifest, config_.jobs));
    }
    return p;
  }

  void train() {
    const Prepared p = prepared();
    const fs::path d = begin(Command::kTrain);
    const train::TrainedModelSet set = train::train_window_sequence(p.windows, config_.train);
    for (const auto& s : set.skipped) warn(s);
    train::save_model_set(d, set);
    log({{"event", "checksum_chain"}, {"chain", train::checksum_chain(set)}});
    finish(d);
  }

  std::vector<std::pair<data::WindowConfig, nn::MultiTaskModel>> models() {
    ensure(Command::kTrain);
    return train::load_model_set(stage_dir(Command::kTrain));
  }

  static const data::WindowData& window_of(const Prepared& p, const data::WindowConfig& w) {
    for (const auto& d : p.windows) {
      if (d.window == w) return d;
    }
    throw DataError("no prepared data for window " + w.label());
  }

  eval::MetricsRow task_row(const std::string& model, const std::string& task, const data::WindowConfig& w,
                            std::span<const double> scores, std::span<const int> labels) const {
    eval::MetricsRow row;
    if (labels.empty()) {
      row.task = task;
      row.window = w;
      row.flags.emplace_back("no_labels");
    } else {
      row = eval::evaluate_scores(scores, labels, task, w, config_.threshold);
    }
    row.model = model;
    return row;
  }

  void write_rows(const fs::path& d, const std::vector<eval::MetricsRow>& rows) const {
    write_text(d / "attrition.csv", eval::results_table(rows, "attrition"));
    write_text(d / "outcome.csv", eval::results_table(rows, "outcome"));
    write_text(d / "rows.json", eval::rows_to_json(rows).dump(2) + "\n");
  }

  void evaluate() {
    const Prepared p = prepared();
    auto trained = models();
    const fs::path d = begin(Command::kEvaluate);
    std::vector<eval::MetricsRow> rows;
    for (const std::string task : {"attrition", "outcome"}) {
      for (auto& [w, model] : trained) {
        const data::Dataset& test = window_of(p, w).of(data::Split::kTest);
        const auto pred = train::predict_dataset(model, test);
        std::vector<double> scores;
        std::vector<int> labels;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const int y = task == "attrition" ? test.samples[i].attrition : test.samples[i].outcome;
          if (y < 0) continue;
          scores.push_back(task == "attrition" ? pred[i].first : pred[i].second);
          labels.push_back(y);
        }
        rows.push_back(task_row("multitask", task, w, scores, labels));
      }
    }
    write_rows(d, rows);
    finish(d);
  }

  void baseline() {
    const Prepared p = prepared();
    const fs::path d = begin(Command::kBaseline);
    std::vector<eval::MetricsRow> rows;
    json saved = json::array();
    std::vector<baseline::WindowBaseline> fits;
    for (const auto& w : p.windows) {
      fits.push_back(baseline::fit_window(w, config_.lr_inverse_strength));
      const auto& f = fits.back();
      if (!f.attrition.converged) warn(w.window.label() + ": attrition baseline did not converge");
      saved.push_back({{"observation_months", w.window.observation_months},
                       {"prediction_months", w.window.prediction_months},
                       {"attrition", baseline::model_to_json(f.attrition)},
                       {"outcome", f.outcome ? baseline::model_to_json(*f.outcome) : json(nullptr)}});
    }
    for (const std::string task : {"attrition", "outcome"}) {
      for (std::size_t k = 0; k < p.windows.size(); ++k) {
        const data::Dataset& test = p.windows[k].of(data::Split::kTest);
        const baseline::LrModel* m = task == "attrition" ? &fits[k].attrition
                                                         : (fits[k].outcome ? &*fits[k].outcome : nullptr);
        std::vector<double> scores;
        std::vector<int> labels;
        if (m != nullptr && !test.samples.empty()) {
          const baseline::Vector pred = baseline::predict_logistic(*m, baseline::design_matrix(test));
          for (std::size_t i = 0; i < test.samples.size(); ++i) {
            const int y = task == "attrition" ? test.samples[i].attrition : test.samples[i].outcome;
            if (y < 0) continue;
            scores.push_back(pred[static_cast<Eigen::Index>(i)]);
            labels.push_back(y);
          }
        }
        eval::MetricsRow row = task_row("lr", task, p.windows[k].window, scores, labels);
        if (m == nullptr) row.flags.emplace_back("no_model");
        rows.push_back(std::move(row));
      }
    }
    write_text(d / "models.json", saved.dump(2) + "\n");
    write_rows(d, rows);
    finish(d);
  }

  void explain() {
    const Prepared p = prepared();
    auto trained = models();
    const explain::FeatureGroups groups =
        config_.shap_groups == "default" ? explain::default_groups(p.vocab.size()) : explain::per_feature_groups(p.vocab);
    const explain::AttributionReport r = explain::attribution_report(trained, p.windows, groups, config_.shap);
    const fs::path d = begin(Command::kExplain);
    write_text(d / "attrition.csv", explain::attribution_table(r, "attrition"));
    write_text(d / "outcome.csv", explain::attribution_table(r, "outcome"));
    write_text(d / "attribution.json", explain::report_to_json(r).dump(2) + "\n");
    finish(d);
  }

  void report() {
    for (Command c : {Command::kEvaluate, Command::kBaseline, Command::kExplain}) ensure(c);
    const fs::path d = begin(Command::kReport);
    std::vector<eval::MetricsRow> rows = eval::rows_from_json(read_json(stage_dir(Command::kEvaluate) / "rows.json"));
    const auto lr = eval::rows_from_json(read_json(stage_dir(Command::kBaseline) / "rows.json"));
    rows.insert(rows.end(), lr.begin(), lr.end());
    std::ostringstream md;
    md << "# Run " << run_id(config_) << "\n";
    for (const std::string task : {"attrition", "outcome"}) {
      std::string combined;
      for (const std::string model : {"multitask", "lr"}) {
        std::vector<eval::MetricsRow> subset;
        for (const auto& r : rows) {
          if (r.model == model) subset.push_back(r);
        }
        std::istringstream table(eval::results_table(subset, task));
        std::string line;
        bool header = true;
        while (std::getline(table, line)) {
          if (header) {
            if (combined.empty()) combined = "Model," + line + "\n";
            header = false;
            continue;
          }
          combined += model + "," + line + "\n";
        }
      }
      write_text(d / (task + ".csv"), combined);
      const std::string attribution = read_text(stage_dir(Command::kExplain) / (task + ".csv"));
      write_text(d / ("attribution_" + task + ".csv"), attribution);
      md << "\n## " << task << "\n\n```\n" << combined << "```\n\nTop features\n\n```\n" << attribution << "```\n";
    }
    write_text(d / "report.md", md.str());
    finish(d);
  }

  RunConfig config_;
  fs::path dir_;
  std::ostream* progress_;
  std::ofstream log_;
};

}  // namespace

std::string_view command_name(Command c) noexcept { return kCommandNames[static_cast<std::size_t>(c)]; }

Command parse_command(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kCommandNames); ++i) {
    if (kCommandNames[i] == name) return static_cast<Command>(i);
  }
  throw ConfigError("unknown subcommand '" + std::string(name) + "'");
}

std::string run_id(const RunConfig& config) {
  json j = config_to_json(config);
  j.erase("out");
  j.erase("jobs");
  std::uint64_t h = fnv1a(j.dump());
  if (config.cohort) h = fnv1a(read_text(*config.cohort), h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path run_directory(const RunConfig& config) { return config.out / run_id(config); }

fs::path run_command(Command command, const RunConfig& config, std::ostream* progress) {
  if (!config.seed) throw ConfigError("seed is required (--seed or config key 'seed')");
  if (config.shap.estimator == explain::Estimator::kExact && config.shap_groups == "per-feature" &&
      (command == Command::kExplain || command == Command::kReport)) {
    // Fail before training.
    if (data::static_width() > explain::kExactLimit) {
      throw Error("exact attribution enumerates at most " + std::to_string(explain::kExactLimit) +
                  " feature groups; per-feature grouping has " + std::to_string(data::static_width()) +
                  " static groups alone");
    }
  }
  Runner runner(config, progress);
  runner.log({{"event", "start"},
              {"command", command_name(command)},
              {"run_id", run_id(config)},
              {"config", config_to_json(config)}});
  runner.run(command);
  runner.log({{"event", "done"}, {"command", command_name(command)}});
  return runner.dir();
}

int exit_code_for(const std::exception& e) noexcept {
  return dynamic_cast<const ConfigError*>(&e) != nullptr ? 2 : 1;
}

}  // namespace wmattr::app
