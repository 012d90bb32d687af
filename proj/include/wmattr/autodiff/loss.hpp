// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <span>

#include "wmattr/autodiff/graph.hpp"

namespace wmattr::ad {

/// Probabilities are clamped into [eps, 1 - eps] before taking logarithms.
inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy (1/N) * sum(-(y log p + (1 - y) log(1 - p))).
///
/// `labels` must hold only 0/1 and have as many elements as `probabilities`.
Var bce_loss(Graph& graph, Var probabilities, const Tensor& labels,
             double eps = kProbabilityClamp);

/// Binary cross-entropy averaged over the entries whose mask is non-zero.
/// Entries with a zero mask may carry any label value. Returns a constant zero
/// node when the mask is empty.
Var masked_bce_loss(Graph& graph, Var probabilities, const Tensor& labels,
                    std::span<const double> mask, double eps = kProbabilityClamp);

}  // namespace wmattr::ad
