// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "wmattr/nn/layers.hpp"

namespace wmattr::nn {

struct ModelConfig {
  std::size_t static_width = 0;
  std::size_t temporal_width = 0;
  std::vector<std::size_t> static_hidden{16, 8};
  std::vector<std::size_t> lstm_hidden{16, 16};
  std::vector<std::size_t> head_hidden{32, 16};
  double dropout = 0.2;
  bool batch_norm = true;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-3;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// The four parameter groups: static encoder (W^S), temporal encoder (W^T),
/// attrition head (W^A), outcome head (W^O).
enum class Component : std::uint8_t {
  kStaticEncoder = 0,
  kTemporalEncoder = 1,
  kAttritionHead = 2,
  kOutcomeHead = 3,
};
inline constexpr std::array<Component, 4> kAllComponents{
    Component::kStaticEncoder, Component::kTemporalEncoder, Component::kAttritionHead,
    Component::kOutcomeHead};
std::string_view component_name(Component c) noexcept;

/// A batch of model inputs. `temporal` is time-major: row t*B + b is bucket t
/// of sample b.
struct ModelInput {
  Tensor static_features;  // [B, static_width]
  Tensor temporal;         // [T*B, temporal_width]
  std::size_t steps = 0;

  std::size_t batch() const noexcept { return static_features.rows(); }
};

struct ModelOutput {
  Var attrition;  // [B, 1]
  Var outcome;    // [B, 1]
};

/// Static + temporal encoders shared by two task heads (hard parameter
/// sharing). Every hidden layer is followed by batch norm and dropout.
///
/// A frozen component is run in inference mode: its parameters receive no
/// gradient, its batch-norm running statistics are not updated and dropout is
/// disabled inside it.
class MultiTaskModel {
 public:
  MultiTaskModel() = default;

  /// Parameters are drawn from config.seed; equal configs give bit-identical
  /// models.
  static MultiTaskModel build(const ModelConfig& config);

  ModelOutput forward(Graph& graph, const ModelInput& input, const ForwardContext& ctx);

  Var encode_static(Graph& graph, Var static_x, const ForwardContext& ctx);
  /// Final concatenated Bi-LSTM state: forward direction at t = T-1 and
  /// backward direction at t = 0. Shape [B, 2H].
  Var encode_temporal(Graph& graph, Var sequence, std::size_t steps, const ForwardContext& ctx);
  /// Concatenation of the two encoder outputs, the input of both heads.
  Var shared_features(Graph& graph, const ModelInput& input, const ForwardContext& ctx);
  Var head(Graph& graph, Component which, Var shared, const ForwardContext& ctx);

  /// Inference-mode probabilities (attrition, outcome) for every row of `input`.
  std::vector<std::pair<double, double>> predict(const ModelInput& input);

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> parameters(Component c);
  /// Parameters plus batch-norm running statistics, in a fixed order, for
  /// serialization.
  std::vector<std::pair<std::string, Tensor*>> state();
  std::vector<std::pair<std::string, const Tensor*>> state() const;

  void set_frozen(Component c, bool frozen);
  bool frozen(Component c) const noexcept { return frozen_[index(c)]; }
  /// Freezes the static and temporal encoders.
  void freeze_shared();

  /// Checksum over the parameters and running statistics of one component.
  std::uint64_t checksum(Component c) const;
  std::uint64_t shared_checksum() const;
  std::uint64_t checksum() const;

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t static_output_width() const;
  std::size_t temporal_output_width() const;
  std::size_t shared_width() const { return static_output_width() + temporal_output_width(); }

 private:
  struct DenseBlock {
    std::vector<DenseLayer> layers;
    std::vector<BatchNorm> norms;
  };

  static std::size_t index(Component c) noexcept { return static_cast<std::size_t>(c); }
  ForwardContext context_for(Component c, const ForwardContext& ctx) const;
  Var run_dense(Graph& graph, DenseBlock& block, Var x, const ForwardContext& ctx,
                bool last_is_output);

  ModelConfig config_;
  DenseBlock static_block_;
  std::vector<BiLstmLayer> lstm_layers_;
  std::vector<BatchNorm> lstm_norms_;
  DenseBlock attrition_block_;
  DenseBlock outcome_block_;
  std::array<bool, 4> frozen_{};
};

}  // namespace wmattr::nn
