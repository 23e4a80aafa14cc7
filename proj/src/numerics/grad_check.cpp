// Copyright 2026 The mvlad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "core/error.hpp"
#include "numerics/rng.hpp"

namespace mvlad::numerics {
namespace {

double checked_value(const Objective& f, std::span<const double> x) {
  const double v = f(x).value;
  require(std::isfinite(v), ErrorKind::kEvaluation, "objective is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const Objective& f, std::span<const double> params,
                           const GradCheckOptions& options) {
  std::vector<double> x(params.begin(), params.end());
  const ValueAndGrad base = f(x);
  require(std::isfinite(base.value), ErrorKind::kEvaluation, "objective is not finite");
  require(base.grad.size() == x.size(), ErrorKind::kShape,
          "gradient has " + std::to_string(base.grad.size()) + " entries for " +
              std::to_string(x.size()) + " parameters");

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords > 0 && options.max_coords < coords.size()) {
    Rng rng(options.seed, 0x67636b);
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + options.step;
    const double plus = checked_value(f, x);
    x[i] = saved - options.step;
    const double minus = checked_value(f, x);
    x[i] = saved;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double err = std::abs(base.grad[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (err > result.max_rel_error || result.checked == 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_index = i;
      result.analytic = base.grad[i];
      result.numeric = numeric;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace mvlad::numerics
