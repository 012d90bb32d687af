// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/autodiff/optimizer.hpp"

#include <cmath>
#include <string>

#include "wmattr/error.hpp"

namespace wmattr::ad {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0) || !(config_.epsilon > 0.0) || !(config_.beta1 >= 0.0) ||
      !(config_.beta1 < 1.0) || !(config_.beta2 >= 0.0) || !(config_.beta2 < 1.0)) {
    throw ConfigError("adam: learning rate and epsilon must be positive, decay rates in [0,1)");
  }
}

void Adam::reset() {
  steps_ = 0;
  slots_.clear();
}

void Adam::step(std::span<Parameter* const> params) {
  if (slots_.empty()) slots_.resize(params.size());
  if (slots_.size() != params.size()) {
    throw ShapeError("adam: parameter list changed size between steps (" +
                     std::to_string(slots_.size()) + " vs " + std::to_string(params.size()) + ")");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = *params[k];
    if (p.frozen) continue;
    if (!p.grad.empty() && p.grad.shape() != p.value.shape()) {
      throw ShapeError("adam: gradient shape " + shape_to_string(p.grad.shape()) +
                       " does not match parameter '" + p.name + "' shape " +
                       shape_to_string(p.value.shape()));
    }
    if (!slots_[k].m.empty() && slots_[k].m.shape() != p.value.shape()) {
      throw ShapeError("adam: moment buffer shape does not match parameter '" + p.name + "'");
    }
    if (!p.grad.empty() && !p.grad.all_finite()) {
      throw NumericError("adam: non-finite gradient for parameter '" + p.name + "'");
    }
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.frozen) continue;
    Slot& s = slots_[k];
    if (s.m.empty()) {
      s.m = Tensor::zeros(p.value.shape());
      s.v = Tensor::zeros(p.value.shape());
    }
    const bool has_grad = !p.grad.empty();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = has_grad ? p.grad[i] : 0.0;
      s.m[i] = config_.beta1 * s.m[i] + (1.0 - config_.beta1) * g;
      s.v[i] = config_.beta2 * s.v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = s.m[i] / c1;
      const double v_hat = s.v[i] / c2;
      p.value[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace wmattr::ad
