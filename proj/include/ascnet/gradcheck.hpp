// Copyright 2026 The ascnet Authors
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
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "ascnet/rng.hpp"
#include "ascnet/tensor.hpp"

namespace ascnet {

struct GradCheckOptions {
  double h = 1e-6;
  // Coordinates to verify per tensor (0 = all).
  std::size_t coords = 0;
  std::uint64_t seed = 0;
  // Lower bound on |analytic| + |numeric| in the relative-error denominator.
  // Coordinates whose true gradient is exactly zero otherwise compare two
  // roundoff residues.
  double denom_floor = 1e-12;
  // Skip coordinates where the one-sided slopes (f(x+h) - f(x)) / h and
  // (f(x) - f(x-h)) / h disagree by more than this fraction: the step
  // straddles a ReLU / max kink and central differences are meaningless.
  // Skipped coordinates are replaced by further samples. 0 disables.
  double kink_tolerance = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
};

// Compares the tape gradient of a scalar function against central
// differences (f(x + h e_i) - f(x - h e_i)) / 2h.
//
// `loss_fn(tape)` must rebuild the scalar loss from scratch on the tape it
// is handed, reading `x` by reference. Coordinates are visited in a
// seed-determined random order.
//
// max_rel_error = max_i |a_i - n_i| / max(denom_floor, |a_i| + |n_i|).
// NaN anywhere yields NaN.
template <typename T, typename LossFn>
GradCheckResult gradient_check(LossFn&& loss_fn, Tensor<T>& x, const GradCheckOptions& opt) {
  const bool had_requires_grad = x.requires_grad();
  x.set_requires_grad(true);
  x.grad();
  x.zero_grad();
  {
    Tape<T> tape;
    Tensor<T> loss = loss_fn(tape);
    tape.backward(loss);
  }
  std::vector<T> analytic(x.grad().begin(), x.grad().end());

  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool sampled = opt.coords != 0 && opt.coords < order.size();
  CounterRng rng(opt.seed, {0x67726164ull});

  auto eval = [&]() {
    Tape<T> off(false);
    return static_cast<double>(loss_fn(off).item());
  };
  const double mid = opt.kink_tolerance > 0 ? eval() : 0.0;
  const T h = static_cast<T>(opt.h);
  const std::size_t want = sampled ? opt.coords : order.size();

  GradCheckResult r;
  for (std::size_t k = 0; k < order.size() && r.checked < want; ++k) {
    if (sampled) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(order.size() - k));
      std::swap(order[k], order[j]);
    }
    const std::size_t i = order[k];
    const T saved = x[i];
    x[i] = saved + h;
    const double up = eval();
    x[i] = saved - h;
    const double down = eval();
    x[i] = saved;
    if (opt.kink_tolerance > 0) {
      const double right = (up - mid) / opt.h, left = (mid - down) / opt.h;
      if (std::abs(right - left) >
          opt.kink_tolerance * std::max(opt.denom_floor, std::abs(right) + std::abs(left))) {
        ++r.kinks_skipped;
        continue;
      }
    }
    const double numeric = (up - down) / (2.0 * opt.h);
    const double a = static_cast<double>(analytic[i]);
    const double err = std::abs(a - numeric) /
                       std::max(opt.denom_floor, std::abs(a) + std::abs(numeric));
    if (std::isnan(err)) {
      r.max_rel_error = std::numeric_limits<double>::quiet_NaN();
      break;
    }
    r.max_rel_error = std::max(r.max_rel_error, err);
    ++r.checked;
  }
  x.set_requires_grad(had_requires_grad);
  return r;
}

// Shorthand returning only the worst relative error, no kink skipping.
template <typename T, typename LossFn>
T finite_difference_check(LossFn&& loss_fn, Tensor<T>& x, T h = T(1e-5),
                          std::size_t max_coords = 0, std::uint64_t seed = 0) {
  GradCheckOptions opt;
  opt.h = static_cast<double>(h);
  opt.coords = max_coords;
  opt.seed = seed;
  return static_cast<T>(gradient_check(loss_fn, x, opt).max_rel_error);
}

}  // namespace ascnet
