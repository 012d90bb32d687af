// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/explain/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "wmattr/error.hpp"
#include "wmattr/eval/metrics.hpp"
#include "wmattr/parallel.hpp"
#include "wmattr/random.hpp"

namespace wmattr::explain {

namespace {

using ad::Graph;
using ad::Tensor;
using ad::Var;

enum Stream : std::uint64_t { kKernelDraws = 0x6b73, kBackground = 0xb6d1, kInstances = 0x1a57 };

Coalition full_mask(std::size_t d) { return d == 64 ? ~Coalition{0} : (Coalition{1} << d) - 1; }

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

void check_players(const CoalitionGame& game, std::size_t limit, const char* what) {
  const std::size_t d = game.players();
  if (d == 0) throw ConfigError(std::string(what) + ": game has no players");
  if (d > limit) {
    throw ConfigError(std::string(what) + ": " + std::to_string(d) + " feature groups exceed the limit of " +
                      std::to_string(limit));
  }
  if (game.outputs() == 0) throw ConfigError(std::string(what) + ": game has no outputs");
}

std::vector<double> checked_values(CoalitionGame& game, std::span<const Coalition> masks) {
  std::vector<double> v = game.values(masks);
  if (v.size() != masks.size() * game.outputs()) throw ShapeError("coalition game returned the wrong value count");
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("coalition game returned a non-finite value");
  }
  return v;
}

struct Design {
  std::vector<Coalition> masks;
  std::vector<double> weights;
};

// Coalition design of the kernel estimator.
Design kernel_design(std::size_t d, std::size_t budget, Rng& rng) {
  Design out;
  std::unordered_map<Coalition, std::size_t> index;
  auto add = [&](Coalition m, double w) {
    auto [it, inserted] = index.emplace(m, out.masks.size());
    if (inserted) {
      out.masks.push_back(m);
      out.weights.push_back(w);
    } else {
      out.weights[it->second] += w;
    }
    return inserted;
  };

  const std::size_t num_sizes = d / 2;  // ceil((d - 1) / 2)
  const std::size_t paired_sizes = (d - 1) / 2;
  std::vector<double> weight(num_sizes);
  for (std::size_t i = 0; i < num_sizes; ++i) {
    const double s = static_cast<double>(i + 1);
    weight[i] = static_cast<double>(d - 1) / (s * (static_cast<double>(d) - s));
    if (i < paired_sizes) weight[i] *= 2.0;
  }
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  for (double& w : weight) w /= total;

  // Whole subset sizes while the budget covers them.
  std::vector<double> remaining = weight;
  double left = static_cast<double>(budget);
  std::size_t full_sizes = 0;
  for (std::size_t i = 0; i < num_sizes; ++i) {
    const std::size_t s = i + 1;
    const bool paired = i < paired_sizes;
    double count = binomial(d, s);
    if (paired) count *= 2.0;
    if (!(left * remaining[i] / count >= 1.0 - 1e-8)) break;
    ++full_sizes;
    left -= count;
    if (remaining[i] < 1.0) {
      const double scale = 1.0 - remaining[i];
      for (double& r : remaining) r /= scale;
    }
    double w = weight[i] / binomial(d, s);
    if (paired) w /= 2.0;
    // Enumerate subsets of size s.
    std::vector<bool> pick(d, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(s), true);
    do {
      Coalition m = 0;
      for (std::size_t j = 0; j < d; ++j) {
        if (pick[j]) m |= Coalition{1} << j;
      }
      add(m, w);
      if (paired) add(full_mask(d) & ~m, w);
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  const std::size_t fixed = out.masks.size();

  if (full_sizes < num_sizes) {
    std::vector<double> probs(weight.begin() + static_cast<long>(full_sizes), weight.end());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (full_sizes + i < paired_sizes) probs[i] /= 2.0;
    }
    const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (double& p : probs) p /= sum;
    std::size_t samples_left = budget - fixed;
    std::vector<std::size_t> order(d);
    for (std::size_t draw = 0; samples_left > 0 && draw < 1000 * budget; ++draw) {
      double u = rng.uniform();
      std::size_t k = 0;
      while (k + 1 < probs.size() && u >= probs[k]) u -= probs[k++];
      const std::size_t s = full_sizes + k + 1;
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<std::size_t>(order));
      Coalition m = 0;
      for (std::size_t j = 0; j < s; ++j) m |= Coalition{1} << order[j];
      if (add(m, 1.0)) --samples_left;
      if (samples_left > 0 && s - 1 < paired_sizes) {
        if (add(full_mask(d) & ~m, 1.0)) --samples_left;
      }
    }
    // The sampled part carries the weight of the sizes not enumerated.
    const double weight_left = std::accumulate(weight.begin() + static_cast<long>(full_sizes), weight.end(), 0.0);
    const double sampled = std::accumulate(out.weights.begin() + static_cast<long>(fixed), out.weights.end(), 0.0);
    if (sampled > 0) {
      for (std::size_t i = fixed; i < out.weights.size(); ++i) out.weights[i] *= weight_left / sampled;
    }
  }
  return out;
}

// Constrained WLS with the last player eliminated. Returns false when the
// design does not have full column rank.
bool solve_kernel(std::size_t d, const Design& design, std::span<const double> v, double base, double prediction,
                  std::vector<double>& phi) {
  phi.assign(d, 0.0);
  const double delta = prediction - base;
  if (d == 1) {
    phi[0] = delta;
    return true;
  }
  const auto n = static_cast<Eigen::Index>(design.masks.size());
  const auto k = static_cast<Eigen::Index>(d - 1);
  Eigen::MatrixXd a(n, k);
  Eigen::VectorXd b(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Coalition m = design.masks[static_cast<std::size_t>(r)];
    const double last = (m >> (d - 1)) & 1 ? 1.0 : 0.0;
    const double sw = std::sqrt(design.weights[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < k; ++c) a(r, c) = sw * (((m >> c) & 1 ? 1.0 : 0.0) - last);
    b[r] = sw * (v[static_cast<std::size_t>(r)] - base - last * delta);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) return false;
  const Eigen::VectorXd x = qr.solve(b);
  double sum = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    phi[static_cast<std::size_t>(c)] = x[c];
    sum += x[c];
  }
  phi[d - 1] = delta - sum;
  return true;
}

}  // namespace

std::vector<Attribution> exact_shap(CoalitionGame& game) {
  check_players(game, kExactLimit, "exact_shap");
  const std::size_t d = game.players();
  const std::size_t k = game.outputs();
  const std::size_t count = std::size_t{1} << d;
  std::vector<Coalition> masks(count);
  std::iota(masks.begin(), masks.end(), Coalition{0});
  const std::vector<double> v = checked_values(game, masks);

  // weight[s] = s! (d - s - 1)! / d!
  std::vector<double> weight(d);
  for (std::size_t s = 0; s < d; ++s) weight[s] = 1.0 / (static_cast<double>(d) * binomial(d - 1, s));

  std::vector<Attribution> out(k);
  for (std::size_t o = 0; o < k; ++o) {
    Attribution& a = out[o];
    a.phi.assign(d, 0.0);
    a.base = v[o];
    a.prediction = v[(count - 1) * k + o];
    for (std::size_t i = 0; i < d; ++i) {
      const Coalition bit = Coalition{1} << i;
      double phi = 0.0;
      for (Coalition m = 0; m < count; ++m) {
        if (m & bit) continue;
        phi += weight[static_cast<std::size_t>(std::popcount(m))] * (v[(m | bit) * k + o] - v[m * k + o]);
      }
      a.phi[i] = phi;
    }
  }
  return out;
}

std::vector<Attribution> kernel_shap(CoalitionGame& game, const KernelOptions& options) {
  check_players(game, 62, "kernel_shap");
  const std::size_t d = game.players();
  const std::size_t k = game.outputs();
  if (options.budget < 2 * d + 2) {
    throw ConfigError("kernel_shap: budget " + std::to_string(options.budget) + " is below 2d + 2 = " +
                      std::to_string(2 * d + 2));
  }
  const double enumerable = std::ldexp(1.0, static_cast<int>(d)) - 2.0;
  const std::size_t budget =
      static_cast<double>(options.budget) >= enumerable ? static_cast<std::size_t>(enumerable) : options.budget;

  const std::vector<Coalition> ends{0, full_mask(d)};
  const std::vector<double> end_values = checked_values(game, ends);

  for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
    Rng rng(derive_seed(options.seed, kKernelDraws, attempt));
    const Design design = d == 1 ? Design{} : kernel_design(d, budget, rng);
    const std::vector<double> v = design.masks.empty() ? std::vector<double>{} : checked_values(game, design.masks);
    std::vector<Attribution> out(k);
    bool ok = true;
    for (std::size_t o = 0; o < k && ok; ++o) {
      out[o].base = end_values[o];
      out[o].prediction = end_values[k + o];
      std::vector<double> column(design.masks.size());
      for (std::size_t r = 0; r < column.size(); ++r) column[r] = v[r * k + o];
      ok = solve_kernel(d, design, column, out[o].base, out[o].prediction, out[o].phi);
    }
    if (ok) return out;
  }
  throw NumericError("kernel_shap: degenerate coalition design after resampling");
}

MarginalGame::MarginalGame(Model model, std::size_t outputs, std::vector<double> instance, Matrix background,
                           std::vector<std::vector<std::size_t>> groups)
    : model_(std::move(model)),
      outputs_(outputs),
      instance_(std::move(instance)),
      background_(std::move(background)),
      groups_(std::move(groups)) {
  if (background_.rows() == 0) throw DataError("MarginalGame: background set is empty");
  if (static_cast<std::size_t>(background_.cols()) != instance_.size()) {
    throw ShapeError("MarginalGame: background width does not match the instance");
  }
  std::vector<int> seen(instance_.size(), 0);
  for (const auto& g : groups_) {
    for (std::size_t c : g) {
      if (c >= instance_.size()) throw ConfigError("MarginalGame: group column out of range");
      ++seen[c];
    }
  }
  if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; })) {
    throw ConfigError("MarginalGame: groups must partition the features");
  }
}

std::vector<double> MarginalGame::values(std::span<const Coalition> coalitions) {
  const Eigen::Index b = background_.rows();
  std::vector<double> out(coalitions.size() * outputs_, 0.0);
  Matrix rows(b, background_.cols());
  for (std::size_t i = 0; i < coalitions.size(); ++i) {
    rows = background_;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (!((coalitions[i] >> g) & 1)) continue;
      for (std::size_t c : groups_[g]) rows.col(static_cast<Eigen::Index>(c)).setConstant(instance_[c]);
    }
    const std::vector<double> y = model_(rows);
    if (y.size() != static_cast<std::size_t>(b) * outputs_) throw ShapeError("MarginalGame: model output size");
    for (Eigen::Index r = 0; r < b; ++r) {
      for (std::size_t o = 0; o < outputs_; ++o) out[i * outputs_ + o] += y[static_cast<std::size_t>(r) * outputs_ + o];
    }
    for (std::size_t o = 0; o < outputs_; ++o) out[i * outputs_ + o] /= static_cast<double>(b);
  }
  return out;
}

void FeatureGroups::validate(std::size_t static_width, std::size_t temporal_width) const {
  if (names.empty()) throw ConfigError("feature groups: empty");
  if (static_columns.size() != names.size() || temporal_channels.size() != names.size()) {
    throw ConfigError("feature groups: inconsistent sizes");
  }
  auto check = [&](const std::vector<std::vector<std::size_t>>& parts, std::size_t width, const char* what) {
    std::vector<int> seen(width, 0);
    for (const auto& p : parts) {
      for (std::size_t c : p) {
        if (c >= width) throw ConfigError(std::string("feature groups: ") + what + " column out of range");
        ++seen[c];
      }
    }
    for (std::size_t c = 0; c < width; ++c) {
      if (seen[c] != 1) {
        throw ConfigError(std::string("feature groups: ") + what + " column " + std::to_string(c) +
                          " is not covered exactly once");
      }
    }
  };
  check(static_columns, static_width, "static");
  check(temporal_channels, temporal_width, "temporal");
  for (std::size_t g = 0; g < names.size(); ++g) {
    if (static_columns[g].empty() && temporal_channels[g].empty()) {
      throw ConfigError("feature groups: group " + names[g] + " is empty");
    }
  }
}

FeatureGroups default_groups(std::size_t vocab_size) {
  FeatureGroups out;
  const auto groups = data::static_feature_groups();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto it = std::find(out.names.begin(), out.names.end(), groups[c]);
    if (it == out.names.end()) {
      out.names.push_back(groups[c]);
      out.static_columns.emplace_back();
      out.temporal_channels.emplace_back();
      it = out.names.end() - 1;
    }
    out.static_columns[static_cast<std::size_t>(it - out.names.begin())].push_back(c);
  }
  auto temporal = [&](const std::string& name, std::vector<std::size_t> channels) {
    out.names.push_back(name);
    out.static_columns.emplace_back();
    out.temporal_channels.push_back(std::move(channels));
  };
  // Visit timing: the mean gap scalar and the per-bucket visit channels.
  const auto interval = std::find(out.names.begin(), out.names.end(), "Visits int.");
  if (interval == out.names.end()) throw Error("attribution: no visit interval feature");
  auto& visits = out.temporal_channels[static_cast<std::size_t>(interval - out.names.begin())];
  visits.resize(data::kVisitTypeCount);
  std::iota(visits.begin(), visits.end(), 0);
  temporal("BMI %", {data::kBmiColumn, data::kBmiPresentColumn});
  if (vocab_size > 0) {
    std::vector<std::size_t> dx(vocab_size);
    std::iota(dx.begin(), dx.end(), data::kDiagnosisColumn);
    temporal("Diagnoses", dx);
  }
  return out;
}

FeatureGroups per_feature_groups(std::span<const std::string> vocab) {
  FeatureGroups out;
  const auto names = data::static_feature_names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    out.names.push_back(names[c]);
    out.static_columns.push_back({c});
    out.temporal_channels.emplace_back();
  }
  const auto channels = data::temporal_feature_names(vocab);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    out.names.push_back(channels[c]);
    out.static_columns.emplace_back();
    out.temporal_channels.push_back({c});
  }
  return out;
}

NetworkGame::NetworkGame(nn::MultiTaskModel& model, const data::Dataset& layout,
                         const data::WindowedSample& instance, std::vector<const data::WindowedSample*> background,
                         const FeatureGroups& groups)
    : model_(model),
      steps_(layout.steps),
      static_width_(layout.static_width),
      temporal_width_(layout.temporal_width),
      instance_(instance),
      background_(std::move(background)),
      groups_(groups) {
  if (background_.empty()) throw DataError("NetworkGame: background set is empty");
  if (groups_.size() > 62) throw ConfigError("NetworkGame: too many feature groups");
  groups_.validate(static_width_, temporal_width_);
  auto check = [&](const data::WindowedSample& s) {
    if (s.static_features.size() != static_width_ || s.temporal.size() != steps_ * temporal_width_) {
      throw ShapeError("NetworkGame: sample " + s.patient_id + " does not match the layout");
    }
  };
  check(instance_);
  for (const auto* b : background_) check(*b);
  static_owner_.resize(static_width_);
  temporal_owner_.resize(temporal_width_);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (std::size_t c : groups_.static_columns[g]) static_owner_[c] = g;
    for (std::size_t c : groups_.temporal_channels[g]) temporal_owner_[c] = g;
    if (!groups_.static_columns[g].empty()) static_groups_ |= Coalition{1} << g;
    if (!groups_.temporal_channels[g].empty()) temporal_groups_ |= Coalition{1} << g;
  }
}

const Tensor& NetworkGame::static_encoding(Coalition key) {
  auto it = static_cache_.find(key);
  if (it != static_cache_.end()) return it->second;
  const std::size_t b = background_.size();
  Tensor x({b, static_width_});
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t c = 0; c < static_width_; ++c) {
      const bool present = (key >> static_owner_[c]) & 1;
      x(r, c) = present ? instance_.static_features[c] : background_[r]->static_features[c];
    }
  }
  Graph graph(ad::GradMode::kDisabled);
  const nn::ForwardContext ctx;
  Tensor enc = graph.value(model_.encode_static(graph, graph.constant(std::move(x)), ctx));
  return static_cache_.emplace(key, std::move(enc)).first->second;
}

const Tensor& NetworkGame::temporal_encoding(Coalition key) {
  auto it = temporal_cache_.find(key);
  if (it != temporal_cache_.end()) return it->second;
  const std::size_t b = background_.size();
  Tensor seq({steps_ * b, temporal_width_});
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t t = 0; t < steps_; ++t) {
      for (std::size_t c = 0; c < temporal_width_; ++c) {
        const bool present = (key >> temporal_owner_[c]) & 1;
        const auto& src = present ? instance_.temporal : background_[r]->temporal;
        seq(t * b + r, c) = src[t * temporal_width_ + c];
      }
    }
  }
  Graph graph(ad::GradMode::kDisabled);
  const nn::ForwardContext ctx;
  Tensor enc = graph.value(model_.encode_temporal(graph, graph.constant(std::move(seq)), steps_, ctx));
  return temporal_cache_.emplace(key, std::move(enc)).first->second;
}

std::vector<double> NetworkGame::values(std::span<const Coalition> coalitions) {
  const std::size_t b = background_.size();
  const std::size_t sw = model_.static_output_width();
  const std::size_t tw = model_.temporal_output_width();
  std::vector<double> out(coalitions.size() * 2, 0.0);
  const std::size_t chunk = std::max<std::size_t>(1, 8192 / b);
  for (std::size_t start = 0; start < coalitions.size(); start += chunk) {
    const std::size_t end = std::min(coalitions.size(), start + chunk);
    Tensor shared({(end - start) * b, sw + tw});
    for (std::size_t i = start; i < end; ++i) {
      const Tensor& s = static_encoding(coalitions[i] & static_groups_);
      const Tensor& t = temporal_encoding(coalitions[i] & temporal_groups_);
      for (std::size_t r = 0; r < b; ++r) {
        double* row = shared.data() + ((i - start) * b + r) * (sw + tw);
        std::copy_n(s.data() + r * sw, sw, row);
        std::copy_n(t.data() + r * tw, tw, row + sw);
      }
    }
    Graph graph(ad::GradMode::kDisabled);
    const nn::ForwardContext ctx;
    Var x = graph.constant(std::move(shared));
    const Tensor& a = graph.value(model_.head(graph, nn::Component::kAttritionHead, x, ctx));
    const Tensor& o = graph.value(model_.head(graph, nn::Component::kOutcomeHead, x, ctx));
    for (std::size_t i = start; i < end; ++i) {
      double sa = 0.0, so = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        sa += a[(i - start) * b + r];
        so += o[(i - start) * b + r];
      }
      out[i * 2] = sa / static_cast<double>(b);
      out[i * 2 + 1] = so / static_cast<double>(b);
    }
  }
  return out;
}

WindowAttribution summarize(const data::WindowConfig& window, const std::string& task,
                            std::span<const std::string> names, std::span<const Attribution> attributions) {
  if (attributions.empty()) throw DataError("attribution: no instances for window " + window.label());
  WindowAttribution out;
  out.window = window;
  out.task = task;
  out.instances = attributions.size();
  for (std::size_t g = 0; g < names.size(); ++g) {
    double sum = 0.0;
    for (const Attribution& a : attributions) {
      if (a.phi.size() != names.size()) throw ShapeError("attribution: group count mismatch");
      sum += std::abs(a.phi[g]);
    }
    out.mean_abs.push_back({names[g], sum / static_cast<double>(attributions.size())});
  }
  for (const Attribution& a : attributions) {
    const double sum = std::accumulate(a.phi.begin(), a.phi.end(), 0.0);
    out.max_additivity_error = std::max(out.max_additivity_error, std::abs(sum - (a.prediction - a.base)));
  }
  out.top = out.mean_abs;
  std::stable_sort(out.top.begin(), out.top.end(),
                   [](const GroupValue& x, const GroupValue& y) { return x.value > y.value; });
  if (out.top.size() > 5) out.top.resize(5);
  return out;
}

AttributionReport attribution_report(std::span<std::pair<data::WindowConfig, nn::MultiTaskModel>> models,
                                     std::span<const data::WindowData> windows, const FeatureGroups& groups,
                                     const ReportOptions& options) {
  if (options.background == 0) throw ConfigError("attribution: background size must be positive");
  if (options.estimator == Estimator::kExact && groups.size() > kExactLimit) {
    throw ConfigError("attribution: exact estimator needs at most " + std::to_string(kExactLimit) +
                      " feature groups, got " + std::to_string(groups.size()));
  }
  AttributionReport report;
  for (std::size_t w = 0; w < models.size(); ++w) {
    auto& [window, model] = models[w];
    const auto match = std::find_if(windows.begin(), windows.end(),
                                    [&](const data::WindowData& d) { return d.window == window; });
    if (match == windows.end()) throw DataError("attribution: no data for window " + window.label());
    const data::Dataset& train = match->of(data::Split::kTrain);
    const data::Dataset& test = match->of(data::Split::kTest);
    if (train.samples.empty()) throw DataError("attribution: empty training split for window " + window.label());
    if (test.samples.empty()) throw DataError("attribution: empty test split for window " + window.label());

    std::vector<std::size_t> bg(train.samples.size());
    std::iota(bg.begin(), bg.end(), 0);
    Rng bg_rng(derive_seed(options.seed, kBackground, w));
    bg_rng.shuffle(std::span<std::size_t>(bg));
    bg.resize(std::min(bg.size(), options.background));
    std::sort(bg.begin(), bg.end());
    std::vector<const data::WindowedSample*> background;
    for (std::size_t i : bg) background.push_back(&train.samples[i]);

    std::vector<std::size_t> inst(test.samples.size());
    std::iota(inst.begin(), inst.end(), 0);
    if (options.max_instances > 0 && inst.size() > options.max_instances) {
      Rng inst_rng(derive_seed(options.seed, kInstances, w));
      inst_rng.shuffle(std::span<std::size_t>(inst));
      inst.resize(options.max_instances);
      std::sort(inst.begin(), inst.end());
    }

    std::vector<std::vector<Attribution>> per_instance(inst.size());
    parallel_for(inst.size(), options.jobs, [&](std::size_t i) {
      NetworkGame game(model, test, test.samples[inst[i]], background, groups);
      per_instance[i] = options.estimator == Estimator::kExact
                            ? exact_shap(game)
                            : kernel_shap(game, {options.budget, derive_seed(options.seed, w, inst[i])});
    });
    for (std::size_t task = 0; task < 2; ++task) {
      std::vector<Attribution> column;
      for (const auto& a : per_instance) column.push_back(a[task]);
      report.entries.push_back(summarize(window, task == 0 ? "attrition" : "outcome", groups.names, column));
    }
  }
  return report;
}

std::string attribution_table(const AttributionReport& report, const std::string& task, char delimiter) {
  std::vector<const WindowAttribution*> cols;
  for (const auto& e : report.entries) {
    if (e.task == task) cols.push_back(&e);
  }
  std::string out;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c > 0) out += delimiter;
    out += eval::format_months(cols[c]->window.observation_months) + "/" +
           eval::format_months(cols[c]->window.prediction_months);
  }
  out += '\n';
  for (std::size_t rank = 0; rank < 5; ++rank) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c > 0) out += delimiter;
      if (rank < cols[c]->top.size()) {
        out += cols[c]->top[rank].group + "(" + eval::format_fixed(cols[c]->top[rank].value, 3) + ")";
      }
    }
    out += '\n';
  }
  return out;
}

nlohmann::json report_to_json(const AttributionReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json mean = nlohmann::json::array();
    for (const auto& g : e.mean_abs) mean.push_back({{"group", g.group}, {"value", g.value}});
    nlohmann::json top = nlohmann::json::array();
    for (const auto& g : e.top) top.push_back({{"group", g.group}, {"value", g.value}});
    entries.push_back({{"window", e.window.label()},
                       {"task", e.task},
                       {"instances", e.instances},
                       {"mean_abs", mean},
                       {"top", top},
                       {"max_additivity_error", e.max_additivity_error}});
  }
  return {{"entries", entries}};
}

}  // namespace wmattr::explain
