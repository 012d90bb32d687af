// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmattr/explain/shap.hpp"
#include "wmattr/synth/generator.hpp"
#include "wmattr/train/trainer.hpp"

namespace wmattr::app {

enum class Command : std::uint8_t { kGenerate, kPreprocess, kTrain, kEvaluate, kBaseline, kExplain, kReport };

std::string_view command_name(Command c) noexcept;
/// Throws ConfigError for an unknown name.
Command parse_command(std::string_view name);

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "runs";
  std::optional<std::filesystem::path> cohort;  // external cohort instead of generate
  std::size_t jobs = 1;
  synth::GeneratorConfig generator;
  double rare_code_threshold = 0.02;
  train::TrainConfig train;
  double lr_inverse_strength = 1.0;
  double threshold = 0.5;
  std::string shap_groups = "default";  // or "per-feature"
  explain::ReportOptions shap;
};

/// Flat key-value document. Unknown keys and type mismatches throw
/// ConfigError naming the key; keys in `overrides` win over `file`.
RunConfig load_config(const nlohmann::json& file, const nlohmann::json& overrides = nlohmann::json::object());
RunConfig load_config_file(const std::filesystem::path& path,
                           const nlohmann::json& overrides = nlohmann::json::object());
/// Every key, including defaults.
nlohmann::json config_to_json(const RunConfig& config);
/// Keys accepted by load_config, in document order.
std::vector<std::string> config_keys();

/// Hex hash of the resolved config (without out and jobs) and, for an
/// external cohort, the cohort file contents.
std::string run_id(const RunConfig& config);
std::filesystem::path run_directory(const RunConfig& config);

/// Runs one subcommand. Missing prerequisite stages in the run directory are
/// run first; a requested stage is always rerun. Appends JSON lines to
/// run.log. Returns the run directory.
std::filesystem::path run_command(Command command, const RunConfig& config, std::ostream* progress = nullptr);

/// Exit code convention: 0 success, 1 runtime failure, 2 config error.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace wmattr::app
