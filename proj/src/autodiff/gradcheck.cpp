// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "wmattr/error.hpp"
#include "wmattr/random.hpp"

namespace wmattr::ad {

GradCheckReport finite_diff_check(const std::function<double(bool)>& loss,
                                  std::span<Parameter* const> params, double h,
                                  std::size_t max_coordinates, std::uint64_t seed) {
  if (!(h > 0.0)) throw Error("finite_diff_check: step must be positive");
  const double base = loss(true);
  if (!std::isfinite(base)) throw NumericError("finite_diff_check: non-finite loss at base point");

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) {
    analytic.push_back(p->grad.empty() ? Tensor::zeros(p->value.shape()) : p->grad);
  }

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coordinates != 0 && coords.size() > max_coordinates) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(max_coordinates);
    }
    for (std::size_t i : coords) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = loss(false);
      p.value[i] = saved - h;
      const double down = loss(false);
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss at probe of '" + p.name + "'");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++report.coordinates;
      if (err > report.max_error) {
        report.max_error = err;
        report.worst_parameter = k;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace wmattr::ad
