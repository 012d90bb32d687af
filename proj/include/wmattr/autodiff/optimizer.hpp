// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wmattr/autodiff/graph.hpp"

namespace wmattr::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias correction.
///
/// Moment buffers are indexed by position in the parameter list, so the same
/// list (same order, same shapes) must be passed to every step(). Frozen
/// parameters are skipped and never get buffers.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  /// Applies one update from each parameter's `grad`. A missing grad buffer is
  /// read as zero. Throws NumericError before touching anything if a gradient
  /// is non-finite.
  void step(std::span<Parameter* const> params);

  std::uint64_t step_count() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }
  /// Empty tensors for frozen/untouched slots.
  const Tensor& first_moment(std::size_t slot) const { return slots_.at(slot).m; }
  const Tensor& second_moment(std::size_t slot) const { return slots_.at(slot).v; }
  void reset();

 private:
  struct Slot {
    Tensor m;
    Tensor v;
  };
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace wmattr::ad
