// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "wmattr/nn/model.hpp"

namespace wmattr::nn {

/// Checkpoint container version written by save_checkpoint(). The byte layout
/// is described in docs/checkpoint_format.md.
inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

void write_checkpoint(std::ostream& out, const MultiTaskModel& model);
MultiTaskModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const MultiTaskModel& model);
MultiTaskModel load_checkpoint(const std::filesystem::path& path);

}  // namespace wmattr::nn
