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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace mvlad::numerics {

struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// A scalar objective with its analytic gradient at the given parameters.
using Objective = std::function<ValueAndGrad(std::span<const double>)>;

struct GradCheckOptions {
  double step = 1e-5;
  // Check at most this many coordinates, chosen with `seed`; 0 checks all.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Central-difference check. The error for coordinate i is
// |analytic_i - numeric_i| / max(1, |numeric_i|).
// Throws an evaluation error if the objective is not finite anywhere it is
// sampled.
GradCheckResult grad_check(const Objective& f, std::span<const double> params,
                           const GradCheckOptions& options = {});

}  // namespace mvlad::numerics
