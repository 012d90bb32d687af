// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wmattr/app/run.hpp"
#include "wmattr/error.hpp"

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> windows;
  std::optional<std::string> ablate;
  std::optional<std::string> cohort;
  std::optional<std::size_t> jobs;
  std::vector<std::string> set;
};

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "Flat JSON config file");
  cmd.add_option("--seed", f.seed, "Seed for generation, splitting and training");
  cmd.add_option("--out", f.out, "Output root; artifacts go to <out>/<run-id>");
  cmd.add_option("--windows", f.windows, "Window pairs, e.g. 1/1.5,2/3");
  cmd.add_option("--ablate", f.ablate, "no-multitask, no-transfer, both comma separated, or none");
  cmd.add_option("--cohort", f.cohort, "Cohort file to use instead of generating one");
  cmd.add_option("--jobs", f.jobs, "Worker threads");
  cmd.add_option("--set", f.set, "Override any config key: key=value (value parsed as JSON if possible)");
}

json overrides(const Flags& f) {
  json o = json::object();
  for (const std::string& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw wmattr::ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string value = kv.substr(eq + 1);
    o[kv.substr(0, eq)] = json::accept(value) ? json::parse(value) : json(value);
  }
  if (f.seed) o["seed"] = *f.seed;
  if (f.out) o["out"] = *f.out;
  if (f.windows) o["windows"] = *f.windows;
  if (f.ablate) o["ablate"] = *f.ablate;
  if (f.cohort) o["cohort"] = *f.cohort;
  if (f.jobs) o["jobs"] = *f.jobs;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attrition and weight-outcome prediction on longitudinal program cohorts"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "Generate a synthetic cohort"},
      {"preprocess", "Window the cohort, split patients and build the vocabulary"},
      {"train", "Pretrain and fine-tune across the window grid"},
      {"evaluate", "Test-split metrics of the trained models"},
      {"baseline", "Fit and evaluate the logistic regression baseline"},
      {"explain", "Shapley attribution tables"},
      {"report", "Run every stage and write the combined tables"}};
  for (const auto& [name, help] : commands) add_common(*app.add_subcommand(name, help), flags);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    const auto command = wmattr::app::parse_command(app.get_subcommands().front()->get_name());
    const json extra = overrides(flags);
    const wmattr::app::RunConfig config = flags.config.empty() ? wmattr::app::load_config(json::object(), extra)
                                                               : wmattr::app::load_config_file(flags.config, extra);
    const auto dir = wmattr::app::run_command(command, config, &std::cerr);
    std::cout << dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return wmattr::app::exit_code_for(e);
  }
}
