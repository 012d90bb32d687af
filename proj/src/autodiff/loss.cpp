// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/autodiff/loss.hpp"

#include <string>
#include <vector>

#include "wmattr/error.hpp"

namespace wmattr::ad {

namespace {

void check_labels(const Tensor& p, const Tensor& labels, std::span<const double> mask) {
  if (labels.size() != p.size()) {
    throw ShapeError("bce_loss: " + std::to_string(p.size()) + " probabilities but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (!mask.empty() && mask.size() != p.size()) {
    throw ShapeError("bce_loss: mask length " + std::to_string(mask.size()) +
                     " does not match " + std::to_string(p.size()) + " probabilities");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw DataError("bce_loss: label " + std::to_string(labels[i]) + " at index " +
                      std::to_string(i) + " is not in {0,1}");
    }
  }
}

// Elementwise y*log(p) + (1-y)*log(1-p) with clamped p.
Var log_likelihood(Graph& g, Var p, const Tensor& labels, double eps) {
  const Shape shape = g.value(p).shape();
  Tensor y = labels.reshaped(shape);
  Tensor one_minus_y = y;
  for (double& v : one_minus_y.values()) v = 1.0 - v;
  Var pc = g.clamp(p, eps, 1.0 - eps);
  Var log_p = g.log(pc);
  Var log_q = g.log(g.add(g.negate(pc), g.constant(Tensor::filled(shape, 1.0))));
  return g.add(g.mul(log_p, g.constant(std::move(y))),
               g.mul(log_q, g.constant(std::move(one_minus_y))));
}

}  // namespace

Var bce_loss(Graph& graph, Var probabilities, const Tensor& labels, double eps) {
  check_labels(graph.value(probabilities), labels, {});
  return graph.negate(graph.mean(log_likelihood(graph, probabilities, labels, eps)));
}

Var masked_bce_loss(Graph& graph, Var probabilities, const Tensor& labels,
                    std::span<const double> mask, double eps) {
  const Tensor p = graph.value(probabilities);
  check_labels(p, labels, mask);
  double count = 0.0;
  for (double m : mask) count += m != 0.0 ? 1.0 : 0.0;
  if (count == 0.0) return graph.constant(Tensor::scalar(0.0));
  // Masked-out labels may be placeholders; replace them so the log terms stay
  // well defined.
  Tensor safe_labels = labels;
  Tensor weights(p.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool on = mask[i] != 0.0;
    weights[i] = on ? 1.0 : 0.0;
    if (!on) safe_labels[i] = 0.0;
  }
  Var ll = log_likelihood(graph, probabilities, safe_labels, eps);
  return graph.scale(graph.sum(graph.mul(ll, graph.constant(std::move(weights)))), -1.0 / count);
}

}  // namespace wmattr::ad
