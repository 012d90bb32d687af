// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "wmattr/autodiff/graph.hpp"

namespace wmattr::ad {

struct GradCheckReport {
  double max_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_parameter = 0;
  std::size_t worst_index = 0;
};

/// Compares analytic gradients against central differences.
///
/// `loss(true)` must evaluate the loss and run backward() so that every
/// parameter's grad is populated; `loss(false)` only evaluates. The error per
/// coordinate is |analytic - numeric| / max(1, |analytic|). When
/// `max_coordinates` is non-zero, at most that many coordinates per parameter
/// are probed, chosen with `seed`.
GradCheckReport finite_diff_check(const std::function<double(bool)>& loss,
                                  std::span<Parameter* const> params, double h = 1e-5,
                                  std::size_t max_coordinates = 0, std::uint64_t seed = 0);

}  // namespace wmattr::ad
