// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/nn/layers.hpp"

#include <cmath>

#include "wmattr/error.hpp"

namespace wmattr::nn {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

Var activate(Graph& graph, Var x, Activation activation) {
  switch (activation) {
    case Activation::kSigmoid: return graph.sigmoid(x);
    case Activation::kTanh: return graph.tanh(x);
    case Activation::kRelu: return graph.relu(x);
    case Activation::kNone: break;
  }
  return x;
}

DenseLayer::DenseLayer(const std::string& name, std::size_t in, std::size_t out,
                       Activation act, Rng& rng)
    : activation(act) {
  if (in == 0 || out == 0) throw ShapeError("dense layer '" + name + "': widths must be positive");
  weight = Parameter{name + ".weight", glorot_uniform(in, out, rng), {}, false};
  bias = Parameter{name + ".bias", Tensor::zeros({out}), {}, false};
}

Var DenseLayer::forward(Graph& graph, Var x) {
  const Tensor& in = graph.value(x);
  if (in.rank() != 2 || in.cols() != input_width()) {
    throw ShapeError("dense layer '" + weight.name + "': expected input width " +
                     std::to_string(input_width()) + ", got shape " +
                     ad::shape_to_string(in.shape()));
  }
  Var z = graph.add(graph.matmul(x, graph.parameter(weight)), graph.parameter(bias));
  return activate(graph, z, activation);
}

BatchNorm::BatchNorm(const std::string& name, std::size_t width, double momentum_,
                     double epsilon_)
    : gamma{name + ".gamma", Tensor::filled({width}, 1.0), {}, false},
      beta{name + ".beta", Tensor::zeros({width}), {}, false},
      running_mean(Tensor::zeros({width})),
      running_var(Tensor::filled({width}, 1.0)),
      momentum(momentum_),
      epsilon(epsilon_) {}

Var BatchNorm::forward(Graph& graph, Var x, const ForwardContext& ctx) {
  const Tensor& in = graph.value(x);
  if (in.rank() != 2 || in.cols() != width()) {
    throw ShapeError("batch norm '" + gamma.name + "': expected width " +
                     std::to_string(width()) + ", got shape " + ad::shape_to_string(in.shape()));
  }
  Var normalized;
  if (ctx.mode == Mode::kTrain) {
    if (ctx.update_running_stats) {
      const std::size_t m = in.rows();
      for (std::size_t c = 0; c < width(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m; ++r) mean += in(r, c);
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t r = 0; r < m; ++r) var += (in(r, c) - mean) * (in(r, c) - mean);
        var /= static_cast<double>(m);
        running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean;
        running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var;
      }
    }
    normalized = graph.normalize_columns(x, epsilon);
  } else if (graph.mode() == ad::GradMode::kDisabled) {
    Tensor scale({width()});
    Tensor shift({width()});
    for (std::size_t c = 0; c < width(); ++c) {
      scale[c] = gamma.value[c] / std::sqrt(running_var[c] + epsilon);
      shift[c] = beta.value[c] - running_mean[c] * scale[c];
    }
    return graph.add(graph.mul(x, graph.constant(std::move(scale))), graph.constant(std::move(shift)));
  } else {
    Tensor shift({width()});
    Tensor inv_std({width()});
    for (std::size_t c = 0; c < width(); ++c) {
      shift[c] = -running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(running_var[c] + epsilon);
    }
    normalized = graph.mul(graph.add(x, graph.constant(std::move(shift))),
                           graph.constant(std::move(inv_std)));
  }
  return graph.add(graph.mul(normalized, graph.parameter(gamma)), graph.parameter(beta));
}

Var dropout(Graph& graph, Var x, double rate, const ForwardContext& ctx) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (ctx.mode != Mode::kTrain || rate == 0.0) return x;
  if (ctx.rng == nullptr) throw Error("dropout: train mode requires a random generator");
  const double keep = 1.0 - rate;
  Tensor mask(graph.value(x).shape());
  for (double& m : mask.values()) m = ctx.rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return graph.mul(x, graph.constant(std::move(mask)));
}

Var regularization_forward(Graph& graph, Var x, double dropout_rate, BatchNorm* norm,
                           const ForwardContext& ctx) {
  Var y = norm != nullptr ? norm->forward(graph, x, ctx) : x;
  return dropout(graph, y, dropout_rate, ctx);
}

namespace {
LstmCellParams make_cell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
  LstmCellParams cell;
  cell.input_weight = Parameter{name + ".input_weight", glorot_uniform(in, 4 * hidden, rng), {}, false};
  cell.recurrent_weight =
      Parameter{name + ".recurrent_weight", glorot_uniform(hidden, 4 * hidden, rng), {}, false};
  Tensor bias = Tensor::zeros({4 * hidden});
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;  // forget gate
  cell.bias = Parameter{name + ".bias", std::move(bias), {}, false};
  return cell;
}
}  // namespace

BiLstmLayer::BiLstmLayer(const std::string& name, std::size_t input_width, std::size_t hidden,
                         Rng& rng) {
  if (input_width == 0 || hidden == 0) {
    throw ShapeError("bi-lstm '" + name + "': widths must be positive");
  }
  forward_cell = make_cell(name + ".fwd", input_width, hidden, rng);
  backward_cell = make_cell(name + ".bwd", input_width, hidden, rng);
}

std::vector<Var> BiLstmLayer::run_direction(Graph& graph, LstmCellParams& cell, Var sequence,
                                            std::size_t steps, std::size_t batch, bool reverse) {
  const std::size_t h = hidden();
  // Input projections for every step at once: [T*B, 4H].
  Var projected = graph.add(graph.matmul(sequence, graph.parameter(cell.input_weight)),
                            graph.parameter(cell.bias));
  Var recurrent = graph.parameter(cell.recurrent_weight);
  std::vector<Var> outputs(steps);
  Var hidden_state;
  Var cell_state;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    Var z = graph.slice_rows(projected, t * batch, batch);
    if (hidden_state.valid()) z = graph.add(z, graph.matmul(hidden_state, recurrent));
    Var in_gate = graph.sigmoid(graph.slice(z, 0, h));
    Var forget_gate = graph.sigmoid(graph.slice(z, h, h));
    Var candidate = graph.tanh(graph.slice(z, 2 * h, h));
    Var out_gate = graph.sigmoid(graph.slice(z, 3 * h, h));
    Var update = graph.mul(in_gate, candidate);
    cell_state = cell_state.valid() ? graph.add(graph.mul(forget_gate, cell_state), update) : update;
    hidden_state = graph.mul(out_gate, graph.tanh(cell_state));
    outputs[t] = hidden_state;
  }
  return outputs;
}

Var BiLstmLayer::forward(Graph& graph, Var sequence, std::size_t steps) {
  const Tensor& in = graph.value(sequence);
  if (steps == 0) throw ShapeError("bi-lstm: empty sequence");
  if (in.rank() != 2 || in.cols() != input_width() || in.rows() % steps != 0) {
    throw ShapeError("bi-lstm '" + forward_cell.input_weight.name + "': expected [T*B, " +
                     std::to_string(input_width()) + "] with T=" + std::to_string(steps) +
                     ", got " + ad::shape_to_string(in.shape()));
  }
  const std::size_t batch = in.rows() / steps;
  std::vector<Var> fwd = run_direction(graph, forward_cell, sequence, steps, batch, false);
  std::vector<Var> bwd = run_direction(graph, backward_cell, sequence, steps, batch, true);
  std::vector<Var> rows(steps);
  for (std::size_t t = 0; t < steps; ++t) rows[t] = graph.concat(fwd[t], bwd[t]);
  return graph.concat_rows(rows);
}

}  // namespace wmattr::nn
