// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/nn/model.hpp"

#include <string>

#include "wmattr/error.hpp"

namespace wmattr::nn {

std::string_view component_name(Component c) noexcept {
  switch (c) {
    case Component::kStaticEncoder: return "static_encoder";
    case Component::kTemporalEncoder: return "temporal_encoder";
    case Component::kAttritionHead: return "attrition_head";
    case Component::kOutcomeHead: return "outcome_head";
  }
  return "unknown";
}

namespace {

void check_config(const ModelConfig& c) {
  auto positive = [](const std::vector<std::size_t>& widths, const char* what) {
    if (widths.empty()) throw ShapeError(std::string("model config: ") + what + " is empty");
    for (auto w : widths) {
      if (w == 0) throw ShapeError(std::string("model config: ") + what + " has a zero width");
    }
  };
  if (c.static_width == 0 || c.temporal_width == 0) {
    throw ShapeError("model config: static and temporal input widths must be positive");
  }
  positive(c.static_hidden, "static_hidden");
  positive(c.lstm_hidden, "lstm_hidden");
  if (!c.head_hidden.empty()) positive(c.head_hidden, "head_hidden");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    throw ConfigError("model config: dropout must be in [0, 1)");
  }
}

void append(std::vector<Parameter*>& out, DenseLayer& layer) {
  out.push_back(&layer.weight);
  out.push_back(&layer.bias);
}
void append(std::vector<Parameter*>& out, BatchNorm& norm) {
  out.push_back(&norm.gamma);
  out.push_back(&norm.beta);
}
void append(std::vector<Parameter*>& out, LstmCellParams& cell) {
  out.push_back(&cell.input_weight);
  out.push_back(&cell.recurrent_weight);
  out.push_back(&cell.bias);
}

}  // namespace

MultiTaskModel MultiTaskModel::build(const ModelConfig& config) {
  check_config(config);
  MultiTaskModel m;
  m.config_ = config;
  Rng rng(config.seed);
  auto norm = [&](const std::string& name, std::size_t width) {
    return BatchNorm(name, width, config.bn_momentum, config.bn_epsilon);
  };

  std::size_t width = config.static_width;
  for (std::size_t i = 0; i < config.static_hidden.size(); ++i) {
    const std::string name = "static." + std::to_string(i);
    m.static_block_.layers.emplace_back(name, width, config.static_hidden[i], Activation::kRelu, rng);
    if (config.batch_norm) m.static_block_.norms.push_back(norm(name + ".bn", config.static_hidden[i]));
    width = config.static_hidden[i];
  }

  width = config.temporal_width;
  for (std::size_t i = 0; i < config.lstm_hidden.size(); ++i) {
    const std::string name = "temporal." + std::to_string(i);
    m.lstm_layers_.emplace_back(name, width, config.lstm_hidden[i], rng);
    width = 2 * config.lstm_hidden[i];
    if (config.batch_norm) m.lstm_norms_.push_back(norm(name + ".bn", width));
  }

  const std::size_t shared = m.shared_width();
  for (auto* block : {&m.attrition_block_, &m.outcome_block_}) {
    const std::string prefix = block == &m.attrition_block_ ? "attrition." : "outcome.";
    width = shared;
    for (std::size_t i = 0; i < config.head_hidden.size(); ++i) {
      const std::string name = prefix + std::to_string(i);
      block->layers.emplace_back(name, width, config.head_hidden[i], Activation::kRelu, rng);
      if (config.batch_norm) block->norms.push_back(norm(name + ".bn", config.head_hidden[i]));
      width = config.head_hidden[i];
    }
    block->layers.emplace_back(prefix + "out", width, 1, Activation::kSigmoid, rng);
  }
  return m;
}

std::size_t MultiTaskModel::static_output_width() const {
  return config_.static_hidden.empty() ? 0 : config_.static_hidden.back();
}

std::size_t MultiTaskModel::temporal_output_width() const {
  return config_.lstm_hidden.empty() ? 0 : 2 * config_.lstm_hidden.back();
}

ForwardContext MultiTaskModel::context_for(Component c, const ForwardContext& ctx) const {
  if (!frozen(c)) return ctx;
  ForwardContext frozen_ctx = ctx;
  frozen_ctx.mode = Mode::kInference;
  frozen_ctx.update_running_stats = false;
  return frozen_ctx;
}

Var MultiTaskModel::run_dense(Graph& graph, DenseBlock& block, Var x, const ForwardContext& ctx,
                              bool last_is_output) {
  for (std::size_t i = 0; i < block.layers.size(); ++i) {
    x = block.layers[i].forward(graph, x);
    if (last_is_output && i + 1 == block.layers.size()) break;
    BatchNorm* bn = block.norms.empty() ? nullptr : &block.norms[i];
    x = regularization_forward(graph, x, config_.dropout, bn, ctx);
  }
  return x;
}

Var MultiTaskModel::encode_static(Graph& graph, Var static_x, const ForwardContext& ctx) {
  return run_dense(graph, static_block_, static_x, context_for(Component::kStaticEncoder, ctx),
                   false);
}

Var MultiTaskModel::encode_temporal(Graph& graph, Var sequence, std::size_t steps,
                                    const ForwardContext& ctx) {
  const ForwardContext local = context_for(Component::kTemporalEncoder, ctx);
  Var x = sequence;
  for (std::size_t i = 0; i < lstm_layers_.size(); ++i) {
    x = lstm_layers_[i].forward(graph, x, steps);
    BatchNorm* bn = lstm_norms_.empty() ? nullptr : &lstm_norms_[i];
    x = regularization_forward(graph, x, config_.dropout, bn, local);
  }
  const std::size_t batch = graph.value(x).rows() / steps;
  const std::size_t h = config_.lstm_hidden.back();
  Var last_forward = graph.slice(graph.slice_rows(x, (steps - 1) * batch, batch), 0, h);
  Var first_backward = graph.slice(graph.slice_rows(x, 0, batch), h, h);
  return graph.concat(last_forward, first_backward);
}

Var MultiTaskModel::shared_features(Graph& graph, const ModelInput& input,
                                    const ForwardContext& ctx) {
  if (input.static_features.rank() != 2 || input.static_features.cols() != config_.static_width) {
    throw ShapeError("model: static input must be [B, " + std::to_string(config_.static_width) +
                     "], got " + ad::shape_to_string(input.static_features.shape()));
  }
  if (input.steps == 0 || input.temporal.rank() != 2 ||
      input.temporal.cols() != config_.temporal_width ||
      input.temporal.rows() != input.steps * input.batch()) {
    throw ShapeError("model: temporal input must be [T*B, " +
                     std::to_string(config_.temporal_width) + "] with T=" +
                     std::to_string(input.steps) + ", B=" + std::to_string(input.batch()) +
                     ", got " + ad::shape_to_string(input.temporal.shape()));
  }
  Var s = encode_static(graph, graph.constant(input.static_features), ctx);
  Var t = encode_temporal(graph, graph.constant(input.temporal), input.steps, ctx);
  return graph.concat(s, t);
}

Var MultiTaskModel::head(Graph& graph, Component which, Var shared, const ForwardContext& ctx) {
  if (which != Component::kAttritionHead && which != Component::kOutcomeHead) {
    throw Error("model: head() needs a head component");
  }
  if (graph.value(shared).cols() != shared_width()) {
    throw ShapeError("model: head input width " + std::to_string(graph.value(shared).cols()) +
                     " != " + std::to_string(shared_width()));
  }
  DenseBlock& block = which == Component::kAttritionHead ? attrition_block_ : outcome_block_;
  return run_dense(graph, block, shared, context_for(which, ctx), true);
}

ModelOutput MultiTaskModel::forward(Graph& graph, const ModelInput& input,
                                    const ForwardContext& ctx) {
  Var shared = shared_features(graph, input, ctx);
  ModelOutput out;
  out.attrition = head(graph, Component::kAttritionHead, shared, ctx);
  out.outcome = head(graph, Component::kOutcomeHead, shared, ctx);
  return out;
}

std::vector<std::pair<double, double>> MultiTaskModel::predict(const ModelInput& input) {
  Graph graph(ad::GradMode::kDisabled);
  ForwardContext ctx;
  ctx.mode = Mode::kInference;
  ModelOutput out = forward(graph, input, ctx);
  const Tensor& a = graph.value(out.attrition);
  const Tensor& o = graph.value(out.outcome);
  std::vector<std::pair<double, double>> result(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) result[i] = {a[i], o[i]};
  return result;
}

std::vector<Parameter*> MultiTaskModel::parameters(Component c) {
  std::vector<Parameter*> out;
  auto dense = [&](DenseBlock& block) {
    for (auto& l : block.layers) append(out, l);
    for (auto& n : block.norms) append(out, n);
  };
  switch (c) {
    case Component::kStaticEncoder: dense(static_block_); break;
    case Component::kTemporalEncoder:
      for (auto& l : lstm_layers_) {
        append(out, l.forward_cell);
        append(out, l.backward_cell);
      }
      for (auto& n : lstm_norms_) append(out, n);
      break;
    case Component::kAttritionHead: dense(attrition_block_); break;
    case Component::kOutcomeHead: dense(outcome_block_); break;
  }
  return out;
}

std::vector<Parameter*> MultiTaskModel::parameters() {
  std::vector<Parameter*> out;
  for (Component c : kAllComponents) {
    auto part = parameters(c);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> MultiTaskModel::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (Parameter* p : parameters()) out.emplace_back(p->name, &p->value);
  auto stats = [&](std::vector<BatchNorm>& norms) {
    for (auto& n : norms) {
      const std::string base = n.gamma.name.substr(0, n.gamma.name.size() - 6);  // strip ".gamma"
      out.emplace_back(base + ".running_mean", &n.running_mean);
      out.emplace_back(base + ".running_var", &n.running_var);
    }
  };
  stats(static_block_.norms);
  stats(lstm_norms_);
  stats(attrition_block_.norms);
  stats(outcome_block_.norms);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> MultiTaskModel::state() const {
  auto mutable_state = const_cast<MultiTaskModel*>(this)->state();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_state.size());
  for (auto& [name, t] : mutable_state) out.emplace_back(name, t);
  return out;
}

void MultiTaskModel::set_frozen(Component c, bool value) {
  frozen_[index(c)] = value;
  for (Parameter* p : parameters(c)) {
    p->frozen = value;
    if (value) p->grad = Tensor();
  }
}

void MultiTaskModel::freeze_shared() {
  set_frozen(Component::kStaticEncoder, true);
  set_frozen(Component::kTemporalEncoder, true);
}

std::uint64_t MultiTaskModel::checksum(Component c) const {
  auto* self = const_cast<MultiTaskModel*>(this);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Parameter* p : self->parameters(c)) h = ad::checksum(p->value.values(), h);
  auto stats = [&](const std::vector<BatchNorm>& norms) {
    for (const auto& n : norms) {
      h = ad::checksum(n.running_mean.values(), h);
      h = ad::checksum(n.running_var.values(), h);
    }
  };
  switch (c) {
    case Component::kStaticEncoder: stats(static_block_.norms); break;
    case Component::kTemporalEncoder: stats(lstm_norms_); break;
    case Component::kAttritionHead: stats(attrition_block_.norms); break;
    case Component::kOutcomeHead: stats(outcome_block_.norms); break;
  }
  return h;
}

std::uint64_t MultiTaskModel::shared_checksum() const {
  return mix64(checksum(Component::kStaticEncoder) ^ mix64(checksum(Component::kTemporalEncoder)));
}

std::uint64_t MultiTaskModel::checksum() const {
  std::uint64_t h = 0;
  for (Component c : kAllComponents) h = mix64(h ^ checksum(c));
  return h;
}

}  // namespace wmattr::nn
