// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmattr/autodiff/loss.hpp"
#include "wmattr/autodiff/optimizer.hpp"
#include "wmattr/data/pipeline.hpp"
#include "wmattr/nn/model.hpp"

namespace wmattr::train {

using data::Dataset;
using data::WindowConfig;
using data::WindowData;
using nn::MultiTaskModel;

struct TaskWeights {
  double attrition = 1.0;
  double outcome = 1.0;
};

struct TrainConfig {
  std::vector<WindowConfig> windows = data::default_window_grid();
  std::size_t pretrain_epochs = 30;
  std::size_t finetune_epochs = 20;
  std::size_t batch_size = 64;
  std::size_t patience = 5;
  ad::AdamConfig optimizer;
  TaskWeights weights;
  /// Layer widths, dropout and batch norm; input widths and seed are filled
  /// in from the data and `seed`.
  nn::ModelConfig model;
  std::uint64_t seed = 0;
  // Ablations.
  bool multitask = true;  // false: the outcome loss term is dropped
  bool transfer = true;   // false: every pair starts from a fresh random model

  /// Effective task weights after the multitask switch.
  TaskWeights effective_weights() const;
  void validate() const;
};

/// weights.attrition * BCE(p_A, y_A) + weights.outcome * BCE over rows with
/// mask 1. Terms with zero weight, and the outcome term under an empty mask,
/// are left out of the graph.
ad::Var multitask_loss(ad::Graph& graph, ad::Var p_attrition, const ad::Tensor& y_attrition,
                       ad::Var p_outcome, const ad::Tensor& y_outcome, std::span<const double> mask,
                       const TaskWeights& weights);
/// Value-only form.
double multitask_loss(std::span<const double> p_attrition, std::span<const double> y_attrition,
                      std::span<const double> p_outcome, std::span<const double> y_outcome,
                      std::span<const double> mask, const TaskWeights& weights);

struct Batch {
  nn::ModelInput input;
  ad::Tensor attrition;     // [B, 1]
  ad::Tensor outcome;       // [B, 1], 0 where undefined
  std::vector<double> mask; // 1 where the outcome label is defined
};

/// Gathers samples into a time-major batch.
Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices);

/// Inference-mode (attrition, outcome) probabilities for every sample.
std::vector<std::pair<double, double>> predict_dataset(MultiTaskModel& model, const Dataset& dataset,
                                                       std::size_t chunk = 512);

struct LossBreakdown {
  double total = 0.0;
  double attrition = 0.0;
  double outcome = 0.0;  // 0 when no outcome label is defined
};

LossBreakdown evaluate_loss(MultiTaskModel& model, const Dataset& dataset, const TaskWeights& weights);

struct EpochRecord {
  std::string window;
  std::string phase;  // "pretrain" or "finetune"
  std::size_t epoch = 0;
  LossBreakdown train;
  LossBreakdown validation;
  bool improved = false;
};

struct PhaseResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch improved on the starting state
  double best_validation_loss = 0.0;
};

/// One training phase with early stopping on validation loss. Frozen
/// components stay untouched. On return the model holds the state with the
/// lowest validation loss seen, including the starting state.
/// `stream` separates the shuffling and dropout randomness of phases.
PhaseResult train_phase(MultiTaskModel& model, const Dataset& train, const Dataset& validation,
                        std::size_t epochs, const TrainConfig& config, std::uint64_t stream,
                        const std::string& window_label, const std::string& phase);

/// Freezes the shared encoders and trains the heads. When the encoders are
/// frozen their outputs are fixed, so they are computed once per dataset.
PhaseResult fine_tune(MultiTaskModel& model, const Dataset& train, const Dataset& validation,
                      const TrainConfig& config, std::uint64_t stream = 0,
                      const std::string& window_label = "");

struct TrainedWindow {
  WindowConfig window;
  MultiTaskModel model;
  std::uint64_t pretrain_start_checksum = 0;
  std::uint64_t pretrain_end_checksum = 0;
  std::uint64_t branch_shared_checksum = 0;  // shared encoders of the pretrained state
  std::vector<EpochRecord> history;
};

struct TrainedModelSet {
  std::vector<TrainedWindow> entries;
  std::vector<std::string> skipped;  // reasons for pairs without a model
  TrainConfig config;
};

nn::ModelConfig resolve_model_config(const TrainConfig& config, const WindowData& window,
                                     std::uint64_t pair_index);

/// Pretrain with weight carry-over, then freeze the encoders of a copy and
/// fine-tune its heads, for every window pair in order.
TrainedModelSet train_window_sequence(std::span<const WindowData> windows, const TrainConfig& config);

/// Windows the cohort under one fixed patient split and trains.
TrainedModelSet train_window_sequence(std::span<const data::PatientRecord> cohort,
                                      std::span<const std::string> vocab,
                                      const data::SplitManifest& manifest, const TrainConfig& config,
                                      std::size_t jobs = 1);

nlohmann::json config_to_json(const TrainConfig& config);
void write_history(std::ostream& out, std::span<const EpochRecord> history);
/// Per pair: start, end and branch checksums, as 16-digit hex.
nlohmann::json checksum_chain(const TrainedModelSet& set);

/// Writes one checkpoint per window plus models.json, history.jsonl and
/// chain.json into `dir`.
void save_model_set(const std::filesystem::path& dir, const TrainedModelSet& set);
/// Reads back the checkpoints listed in models.json.
std::vector<std::pair<WindowConfig, MultiTaskModel>> load_model_set(const std::filesystem::path& dir);

std::string checksum_hex(std::uint64_t value);

}  // namespace wmattr::train
