// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wmattr/autodiff/graph.hpp"
#include "wmattr/random.hpp"

namespace wmattr::nn {

using ad::Graph;
using ad::Parameter;
using ad::Tensor;
using ad::Var;

enum class Activation { kNone, kSigmoid, kTanh, kRelu };
enum class Mode { kTrain, kInference };

/// Per-call forward settings. `rng` supplies dropout masks and is only read in
/// train mode.
struct ForwardContext {
  Mode mode = Mode::kInference;
  Rng* rng = nullptr;
  bool update_running_stats = true;
};

/// Uniform on +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

Var activate(Graph& graph, Var x, Activation activation);

/// y = activation(x W + b). W is stored [in, out] so a batch multiplies on the
/// left.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, std::size_t in, std::size_t out, Activation activation,
             Rng& rng);

  Var forward(Graph& graph, Var x);

  std::size_t input_width() const noexcept { return weight.value.shape()[0]; }
  std::size_t output_width() const noexcept { return weight.value.shape()[1]; }

  Parameter weight;
  Parameter bias;
  Activation activation = Activation::kNone;
};

/// Batch normalization with learned scale/shift and running statistics.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, std::size_t width, double momentum, double epsilon);

  /// Train mode normalizes with batch statistics and (optionally) folds them
  /// into the running estimates; inference mode uses the running estimates only.
  Var forward(Graph& graph, Var x, const ForwardContext& ctx);

  std::size_t width() const noexcept { return gamma.value.size(); }

  Parameter gamma;
  Parameter beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double epsilon = 1e-3;
};

/// Inverted dropout: kept units are scaled by 1/(1-rate). Identity outside
/// train mode or when rate is zero.
Var dropout(Graph& graph, Var x, double rate, const ForwardContext& ctx);

/// The post-layer block used throughout the model: batch norm (when given)
/// followed by dropout.
Var regularization_forward(Graph& graph, Var x, double dropout_rate, BatchNorm* norm,
                           const ForwardContext& ctx);

/// One direction of an LSTM layer. Gates are packed [input, forget, candidate,
/// output] along the last axis of the weight matrices.
struct LstmCellParams {
  Parameter input_weight;      // [F, 4H]
  Parameter recurrent_weight;  // [H, 4H]
  Parameter bias;              // [4H]
};

/// Bidirectional LSTM over time-major batches.
///
/// Input rows are ordered (t, b): row t*B + b holds step t of sequence b. The
/// output has the same row order and 2H columns; the first H are the forward
/// direction over t = 0..T-1, the last H the backward direction over
/// t = T-1..0, both aligned to position t.
class BiLstmLayer {
 public:
  BiLstmLayer() = default;
  BiLstmLayer(const std::string& name, std::size_t input_width, std::size_t hidden, Rng& rng);

  Var forward(Graph& graph, Var sequence, std::size_t steps);

  std::size_t input_width() const noexcept { return forward_cell.input_weight.value.shape()[0]; }
  std::size_t hidden() const noexcept { return forward_cell.recurrent_weight.value.shape()[0]; }
  std::size_t output_width() const noexcept { return 2 * hidden(); }

  LstmCellParams forward_cell;
  LstmCellParams backward_cell;

 private:
  std::vector<Var> run_direction(Graph& graph, LstmCellParams& cell, Var sequence,
                                 std::size_t steps, std::size_t batch, bool reverse);
};

}  // namespace wmattr::nn
