// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "wmattr/error.hpp"
#include "wmattr/nn/checkpoint.hpp"
#include "wmattr/random.hpp"

namespace wmattr::train {

namespace {

using ad::Graph;
using ad::Tensor;
using ad::Var;
using nn::Component;
using nn::ForwardContext;
using nn::Mode;

enum Stream : std::uint64_t { kInit = 0x1417, kShuffle = 0x5f3e, kDropout = 0xd409 };

double clamp_probability(double p) { return std::clamp(p, ad::kProbabilityClamp, 1.0 - ad::kProbabilityClamp); }

double bce_term(double p, double y) {
  const double q = clamp_probability(p);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

std::vector<ad::Parameter*> trainable(MultiTaskModel& model) {
  std::vector<ad::Parameter*> out;
  for (ad::Parameter* p : model.parameters()) {
    if (!p->frozen) out.push_back(p);
  }
  return out;
}

// Rows of `source` selected by `indices`.
Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices) {
  const std::size_t cols = source.cols();
  Tensor out({indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(source.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  return out;
}

void check_shared_frozen(const MultiTaskModel& model) {
  if (!model.frozen(Component::kStaticEncoder) || !model.frozen(Component::kTemporalEncoder)) {
    throw Error("trainer: cached trunk requires frozen encoders");
  }
}

// Shared encoder outputs of every sample in inference mode.
Tensor shared_outputs(MultiTaskModel& model, const Dataset& dataset, std::size_t chunk) {
  Tensor out({dataset.samples.size(), model.shared_width()});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.samples.size(); start += chunk) {
    const std::size_t end = std::min(dataset.samples.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch b = make_batch(dataset, idx);
    Graph graph(ad::GradMode::kDisabled);
    const ForwardContext ctx;
    const Tensor& v = graph.value(model.shared_features(graph, b.input, ctx));
    std::copy(v.values().begin(), v.values().end(), out.data() + start * out.cols());
  }
  return out;
}

struct Labels {
  Tensor attrition;
  Tensor outcome;
  std::vector<double> mask;
};

Labels gather_labels(const Dataset& dataset, std::span<const std::size_t> indices) {
  Labels l{Tensor({indices.size(), 1}), Tensor({indices.size(), 1}), std::vector<double>(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const data::WindowedSample& s = dataset.samples[indices[i]];
    l.attrition[i] = s.attrition;
    l.outcome[i] = s.outcome == 1 ? 1.0 : 0.0;
    l.mask[i] = s.outcome >= 0 ? 1.0 : 0.0;
  }
  return l;
}

LossBreakdown breakdown(std::span<const std::pair<double, double>> p, const Dataset& dataset,
                        const TaskWeights& w) {
  LossBreakdown out;
  double n_outcome = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const data::WindowedSample& s = dataset.samples[i];
    out.attrition += bce_term(p[i].first, s.attrition);
    if (s.outcome >= 0) {
      out.outcome += bce_term(p[i].second, s.outcome);
      n_outcome += 1.0;
    }
  }
  out.attrition /= static_cast<double>(p.size());
  out.outcome = n_outcome > 0 ? out.outcome / n_outcome : 0.0;
  out.total = (w.attrition > 0 ? w.attrition * out.attrition : 0.0) +
              (w.outcome > 0 && n_outcome > 0 ? w.outcome * out.outcome : 0.0);
  return out;
}

// Head probabilities from cached shared features, inference mode.
std::vector<std::pair<double, double>> predict_heads(MultiTaskModel& model, const Tensor& shared,
                                                     std::size_t chunk) {
  std::vector<std::pair<double, double>> out(shared.rows());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < shared.rows(); start += chunk) {
    const std::size_t end = std::min<std::size_t>(shared.rows(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Graph graph(ad::GradMode::kDisabled);
    const ForwardContext ctx;
    Var x = graph.constant(gather_rows(shared, idx));
    const Tensor& a = graph.value(model.head(graph, Component::kAttritionHead, x, ctx));
    const Tensor& o = graph.value(model.head(graph, Component::kOutcomeHead, x, ctx));
    for (std::size_t i = 0; i < idx.size(); ++i) out[start + i] = {a[i], o[i]};
  }
  return out;
}

PhaseResult run_phase(MultiTaskModel& model, const Dataset& train, const Dataset& validation,
                      std::size_t epochs, const TrainConfig& config, std::uint64_t stream,
                      const std::string& window_label, const std::string& phase, bool cache_trunk) {
  if (train.samples.empty()) throw DataError("trainer: empty training set for window " + window_label);
  if (validation.samples.empty()) throw DataError("trainer: empty validation set for window " + window_label);
  const TaskWeights weights = config.effective_weights();
  std::optional<Tensor> train_shared;
  std::optional<Tensor> validation_shared;
  if (cache_trunk) {
    check_shared_frozen(model);
    train_shared = shared_outputs(model, train, 512);
    validation_shared = shared_outputs(model, validation, 512);
  }
  auto validation_loss = [&] {
    if (cache_trunk) return breakdown(predict_heads(model, *validation_shared, 512), validation, weights);
    return evaluate_loss(model, validation, weights);
  };

  PhaseResult result;
  result.best_validation_loss = validation_loss().total;
  MultiTaskModel best = model;
  std::size_t stale = 0;
  const std::vector<ad::Parameter*> params = trainable(model);
  ad::Adam adam(config.optimizer);
  Rng dropout_rng(derive_seed(config.seed, kDropout, stream));
  ForwardContext ctx;
  ctx.mode = Mode::kTrain;
  ctx.rng = &dropout_rng;

  std::vector<std::size_t> order(train.samples.size());
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, kShuffle, stream * 100003 + epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    EpochRecord record{window_label, phase, epoch, {}, {}, false};
    double outcome_rows = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const std::string where = "window " + window_label + " " + phase + " epoch " + std::to_string(epoch) +
                                " batch " + std::to_string(batch_index);
      const Labels labels = gather_labels(train, idx);
      Graph graph;
      Var pa;
      Var po;
      Var loss;
      try {
        if (cache_trunk) {
          Var x = graph.constant(gather_rows(*train_shared, idx));
          pa = model.head(graph, Component::kAttritionHead, x, ctx);
          po = model.head(graph, Component::kOutcomeHead, x, ctx);
        } else {
          const Batch b = make_batch(train, idx);
          const nn::ModelOutput out = model.forward(graph, b.input, ctx);
          pa = out.attrition;
          po = out.outcome;
        }
        loss = multitask_loss(graph, pa, labels.attrition, po, labels.outcome, labels.mask, weights);
      } catch (const NumericError& e) {
        throw NumericError("trainer: " + std::string(e.what()) + " in " + where);
      }
      const double value = graph.value(loss).item();
      if (!std::isfinite(value)) throw NumericError("trainer: non-finite loss in " + where);
      const double rows = static_cast<double>(idx.size());
      record.train.total += value * rows;
      const Tensor& a = graph.value(pa);
      const Tensor& o = graph.value(po);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        record.train.attrition += bce_term(a[i], labels.attrition[i]);
        if (labels.mask[i] != 0.0) {
          record.train.outcome += bce_term(o[i], labels.outcome[i]);
          outcome_rows += 1.0;
        }
      }
      if (graph.requires_grad(loss)) {
        graph.backward(loss);
        adam.step(params);
      }
    }
    const double n = static_cast<double>(order.size());
    record.train.total /= n;
    record.train.attrition /= n;
    record.train.outcome = outcome_rows > 0 ? record.train.outcome / outcome_rows : 0.0;

    record.validation = validation_loss();
    if (!std::isfinite(record.validation.total)) {
      throw NumericError("trainer: non-finite validation loss in window " + window_label + " " + phase +
                         " epoch " + std::to_string(epoch));
    }
    if (record.validation.total < result.best_validation_loss) {
      record.improved = true;
      result.best_validation_loss = record.validation.total;
      result.best_epoch = epoch;
      best = model;
      stale = 0;
    } else {
      ++stale;
    }
    result.history.push_back(record);
    if (stale >= config.patience) break;
  }
  if (epochs > 0) model = std::move(best);
  return result;
}

}  // namespace

TaskWeights TrainConfig::effective_weights() const {
  TaskWeights w = weights;
  if (!multitask) w.outcome = 0.0;
  return w;
}

void TrainConfig::validate() const {
  if (windows.empty()) throw ConfigError("train: window list is empty");
  if (batch_size == 0) throw ConfigError("train: batch_size must be at least 1");
  for (double w : {weights.attrition, weights.outcome}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("train: task weights must be finite and >= 0");
  }
  const TaskWeights e = effective_weights();
  if (e.attrition == 0.0 && e.outcome == 0.0) throw ConfigError("train: task weights are both zero");
  if (!(optimizer.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must be in [0,1)");
  }
}

Var multitask_loss(Graph& graph, Var p_attrition, const Tensor& y_attrition, Var p_outcome,
                   const Tensor& y_outcome, std::span<const double> mask, const TaskWeights& weights) {
  const std::size_t n = graph.value(p_attrition).size();
  if (graph.value(p_outcome).size() != n || y_attrition.size() != n || y_outcome.size() != n ||
      mask.size() != n) {
    throw ShapeError("multitask_loss: batch length mismatch");
  }
  std::vector<Var> terms;
  if (weights.attrition > 0.0) {
    terms.push_back(graph.scale(ad::bce_loss(graph, p_attrition, y_attrition), weights.attrition));
  }
  const bool any_outcome = std::any_of(mask.begin(), mask.end(), [](double m) { return m != 0.0; });
  if (weights.outcome > 0.0 && any_outcome) {
    terms.push_back(graph.scale(ad::masked_bce_loss(graph, p_outcome, y_outcome, mask), weights.outcome));
  }
  if (terms.empty()) return graph.constant(Tensor::scalar(0.0));
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = graph.add(total, terms[i]);
  return total;
}

double multitask_loss(std::span<const double> p_attrition, std::span<const double> y_attrition,
                      std::span<const double> p_outcome, std::span<const double> y_outcome,
                      std::span<const double> mask, const TaskWeights& weights) {
  Graph graph(ad::GradMode::kDisabled);
  const std::size_t n = p_attrition.size();
  auto column = [](std::span<const double> v) {
    return Tensor({v.size(), 1}, std::vector<double>(v.begin(), v.end()));
  };
  if (p_outcome.size() != n || y_attrition.size() != n || y_outcome.size() != n || mask.size() != n) {
    throw ShapeError("multitask_loss: batch length mismatch");
  }
  Var pa = graph.constant(column(p_attrition));
  Var po = graph.constant(column(p_outcome));
  return graph.value(multitask_loss(graph, pa, column(y_attrition), po, column(y_outcome), mask, weights)).item();
}

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("make_batch: no samples");
  const std::size_t batch = indices.size();
  const std::size_t steps = dataset.steps;
  const std::size_t tw = dataset.temporal_width;
  const std::size_t sw = dataset.static_width;
  Batch b;
  b.input.steps = steps;
  b.input.static_features = Tensor({batch, sw});
  b.input.temporal = Tensor({steps * batch, tw});
  b.attrition = Tensor({batch, 1});
  b.outcome = Tensor({batch, 1});
  b.mask.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const data::WindowedSample& s = dataset.samples.at(indices[i]);
    if (s.static_features.size() != sw || s.temporal.size() != steps * tw) {
      throw ShapeError("make_batch: sample " + s.patient_id + " does not match the dataset widths");
    }
    std::copy(s.static_features.begin(), s.static_features.end(), b.input.static_features.data() + i * sw);
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy_n(s.temporal.data() + t * tw, tw, b.input.temporal.data() + (t * batch + i) * tw);
    }
    b.attrition[i] = s.attrition;
    b.outcome[i] = s.outcome == 1 ? 1.0 : 0.0;
    b.mask[i] = s.outcome >= 0 ? 1.0 : 0.0;
  }
  return b;
}

std::vector<std::pair<double, double>> predict_dataset(MultiTaskModel& model, const Dataset& dataset,
                                                       std::size_t chunk) {
  std::vector<std::pair<double, double>> out;
  out.reserve(dataset.samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.samples.size(); start += chunk) {
    const std::size_t end = std::min(dataset.samples.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto p = model.predict(make_batch(dataset, idx).input);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

LossBreakdown evaluate_loss(MultiTaskModel& model, const Dataset& dataset, const TaskWeights& weights) {
  if (dataset.samples.empty()) throw DataError("evaluate_loss: empty dataset");
  return breakdown(predict_dataset(model, dataset), dataset, weights);
}

PhaseResult train_phase(MultiTaskModel& model, const Dataset& train, const Dataset& validation,
                        std::size_t epochs, const TrainConfig& config, std::uint64_t stream,
                        const std::string& window_label, const std::string& phase) {
  return run_phase(model, train, validation, epochs, config, stream, window_label, phase, false);
}

PhaseResult fine_tune(MultiTaskModel& model, const Dataset& train, const Dataset& validation,
                      const TrainConfig& config, std::uint64_t stream, const std::string& window_label) {
  model.freeze_shared();
  return run_phase(model, train, validation, config.finetune_epochs, config, stream, window_label, "finetune",
                   true);
}

nn::ModelConfig resolve_model_config(const TrainConfig& config, const WindowData& window,
                                     std::uint64_t pair_index) {
  nn::ModelConfig m = config.model;
  const Dataset& train = window.of(data::Split::kTrain);
  m.static_width = train.static_width;
  m.temporal_width = train.temporal_width;
  m.seed = derive_seed(config.seed, kInit, config.transfer ? 0 : pair_index);
  return m;
}

TrainedModelSet train_window_sequence(std::span<const WindowData> windows, const TrainConfig& config) {
  config.validate();
  TrainedModelSet set;
  set.config = config;
  std::optional<MultiTaskModel> pretrained;
  for (std::size_t j = 0; j < windows.size(); ++j) {
    const WindowData& wd = windows[j];
    const std::string label = wd.window.label();
    const Dataset& train = wd.of(data::Split::kTrain);
    const Dataset& validation = wd.of(data::Split::kValidation);
    if (train.samples.empty() || validation.samples.empty()) {
      set.skipped.push_back(label + ": empty " + (train.samples.empty() ? "training" : "validation") + " split");
      continue;
    }
    const nn::ModelConfig model_config = resolve_model_config(config, wd, j);
    if (!config.transfer || !pretrained) {
      pretrained = MultiTaskModel::build(model_config);
    } else if (pretrained->config().static_width != model_config.static_width ||
               pretrained->config().temporal_width != model_config.temporal_width) {
      throw ShapeError("trainer: window " + label + " changes the input widths");
    }
    TrainedWindow entry;
    entry.window = wd.window;
    entry.pretrain_start_checksum = pretrained->checksum();
    PhaseResult pre = train_phase(*pretrained, train, validation, config.pretrain_epochs, config, 2 * j, label,
                                  "pretrain");
    entry.pretrain_end_checksum = pretrained->checksum();
    entry.branch_shared_checksum = pretrained->shared_checksum();
    MultiTaskModel model = *pretrained;
    PhaseResult ft = fine_tune(model, train, validation, config, 2 * j + 1, label);
    entry.history = std::move(pre.history);
    entry.history.insert(entry.history.end(), ft.history.begin(), ft.history.end());
    entry.model = std::move(model);
    set.entries.push_back(std::move(entry));
  }
  return set;
}

TrainedModelSet train_window_sequence(std::span<const data::PatientRecord> cohort,
                                      std::span<const std::string> vocab, const data::SplitManifest& manifest,
                                      const TrainConfig& config, std::size_t jobs) {
  config.validate();
  std::vector<WindowData> windows;
  for (const WindowConfig& w : config.windows) windows.push_back(data::assemble_dataset(cohort, vocab, w, manifest, jobs));
  return train_window_sequence(windows, config);
}

nlohmann::json config_to_json(const TrainConfig& c) {
  std::vector<std::string> windows;
  for (const auto& w : c.windows) windows.push_back(w.label());
  return {{"windows", windows},
          {"pretrain_epochs", c.pretrain_epochs},
          {"finetune_epochs", c.finetune_epochs},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"learning_rate", c.optimizer.learning_rate},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"adam_epsilon", c.optimizer.epsilon},
          {"attrition_weight", c.weights.attrition},
          {"outcome_weight", c.weights.outcome},
          {"model", nn::config_to_json(c.model)},
          {"seed", c.seed},
          {"multitask", c.multitask},
          {"transfer", c.transfer}};
}

void write_history(std::ostream& out, std::span<const EpochRecord> history) {
  for (const EpochRecord& r : history) {
    const nlohmann::json j = {{"window", r.window},
                              {"phase", r.phase},
                              {"epoch", r.epoch},
                              {"train_loss", r.train.total},
                              {"train_attrition_loss", r.train.attrition},
                              {"train_outcome_loss", r.train.outcome},
                              {"validation_loss", r.validation.total},
                              {"validation_attrition_loss", r.validation.attrition},
                              {"validation_outcome_loss", r.validation.outcome},
                              {"improved", r.improved}};
    out << j.dump() << '\n';
  }
}

std::string checksum_hex(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

nlohmann::json checksum_chain(const TrainedModelSet& set) {
  nlohmann::json chain = nlohmann::json::array();
  for (const TrainedWindow& e : set.entries) {
    chain.push_back({{"window", e.window.label()},
                     {"pretrain_start", checksum_hex(e.pretrain_start_checksum)},
                     {"pretrain_end", checksum_hex(e.pretrain_end_checksum)},
                     {"branch_shared", checksum_hex(e.branch_shared_checksum)},
                     {"model_shared", checksum_hex(e.model.shared_checksum())}});
  }
  return chain;
}

namespace {
std::string checkpoint_name(const WindowConfig& w) {
  std::string label = w.label();
  std::replace(label.begin(), label.end(), '/', '_');
  return "window_" + label + ".ckpt";
}
}  // namespace

void save_model_set(const std::filesystem::path& dir, const TrainedModelSet& set) {
  std::filesystem::create_directories(dir);
  nlohmann::json models = nlohmann::json::array();
  std::vector<EpochRecord> history;
  for (const TrainedWindow& e : set.entries) {
    const std::string file = checkpoint_name(e.window);
    nn::save_checkpoint(dir / file, e.model);
    models.push_back({{"observation_months", e.window.observation_months},
                      {"prediction_months", e.window.prediction_months},
                      {"checkpoint", file}});
    history.insert(history.end(), e.history.begin(), e.history.end());
  }
  const nlohmann::json index = {{"models", models}, {"skipped", set.skipped}, {"config", config_to_json(set.config)}};
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot open " + (dir / name).string() + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + (dir / name).string());
  };
  write("models.json", index.dump(2) + "\n");
  write("chain.json", checksum_chain(set).dump(2) + "\n");
  std::ostringstream hist;
  write_history(hist, history);
  write("history.jsonl", hist.str());
}

std::vector<std::pair<WindowConfig, MultiTaskModel>> load_model_set(const std::filesystem::path& dir) {
  std::ifstream in(dir / "models.json");
  if (!in) throw Error("cannot open " + (dir / "models.json").string());
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("models.json: " + std::string(e.what()));
  }
  std::vector<std::pair<WindowConfig, MultiTaskModel>> out;
  try {
    for (const auto& m : index.at("models")) {
      const WindowConfig w{m.at("observation_months").get<double>(), m.at("prediction_months").get<double>()};
      out.emplace_back(w, nn::load_checkpoint(dir / m.at("checkpoint").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("models.json: " + std::string(e.what()));
  }
  return out;
}

}  // namespace wmattr::train
