// Copyright 2026 The ACA-NMT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "acanmt/tensor.hpp"

namespace acanmt {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  double max_abs_error = 0.0;
};

// Compares backward() against central differences over every coordinate of
// `params`. `loss_fn` must rebuild the scalar loss from the current parameter
// values and be deterministic (no dropout).
//
// Relative error per coordinate: |a - n| / max(|a|, |n|, floor). The floor
// keeps coordinates whose gradient sits near the rounding noise of the
// difference quotient (about ulp(loss) / eps) from dominating the maximum.
template <class T, class F>
GradCheckResult finite_difference_check(F&& loss_fn, std::span<Tensor<T>> params, double eps,
                                        double floor = 1e-6) {
  for (auto& p : params) p.zero_grad();
  backward(loss_fn());
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad())
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    else
      analytic.emplace_back(p.size(), T(0));
    p.zero_grad();
  }

  GradCheckResult res;
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const T saved = vals[i];
      vals[i] = saved + static_cast<T>(eps);
      const T up = loss_fn().item();
      vals[i] = saved - static_cast<T>(eps);
      const T down = loss_fn().item();
      vals[i] = saved;
      const double numeric = static_cast<double>((up - down) / (T(2) * static_cast<T>(eps)));
      const double a = static_cast<double>(analytic[pi][i]);
      const double diff = std::abs(a - numeric);
      const double rel = diff / std::max({floor, std::abs(a), std::abs(numeric)});
      ++res.coordinates;
      res.max_abs_error = std::max(res.max_abs_error, diff);
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = pi;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace acanmt
