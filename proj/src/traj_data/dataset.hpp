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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/config.hpp"
#include "numerics/rng.hpp"

namespace mvlad::traj {

// Ego frame: x lateral (right positive), y longitudinal (forward positive), meters.
struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

using Trajectory = std::vector<Waypoint>;

enum class Maneuver { kKeepLane, kTurnLeft, kTurnRight, kStop, kAccelerate, kDecelerate };

inline constexpr std::array<Maneuver, 6> kAllManeuvers = {
    Maneuver::kKeepLane, Maneuver::kTurnLeft,   Maneuver::kTurnRight,
    Maneuver::kStop,     Maneuver::kAccelerate, Maneuver::kDecelerate};

std::string_view maneuver_name(Maneuver m);
std::optional<Maneuver> parse_maneuver(std::string_view name);
// The single word in a reasoning sentence that names its maneuver.
std::string_view maneuver_keyword(Maneuver m);
std::optional<Maneuver> maneuver_from_keyword(std::string_view word);

struct Sample {
  std::vector<int> scene_context;
  std::string instruction;
  Trajectory trajectory;
  std::string reasoning;
  Maneuver label = Maneuver::kKeepLane;
  friend bool operator==(const Sample&, const Sample&) = default;
};

// Scene-context layout: [speed coarse, curvature coarse, speed fine,
// curvature fine, noise...]. Coarse tokens carry 16 bins; fine tokens split
// each coarse bin into 8.
inline constexpr std::size_t kContextLength = 8;
inline constexpr int kContextAlphabet = 128;
inline constexpr int kCoarseBins = 16;
inline constexpr int kFineBins = 8;
inline constexpr int kLevels = kCoarseBins * kFineBins;
inline constexpr std::size_t kInstructionLength = 4;
inline constexpr double kMaxStepSpeed = 25.0;  // m/s, displacement bound
inline constexpr double kEnvelopeX = 50.0;
inline constexpr double kEnvelopeY = 60.0;

struct GeneratorConfig {
  std::size_t horizon = 6;
  double dt = 0.5;
  double speed_max = 20.0;
  double curvature_max = 0.05;
  double curved_fraction = 0.4;

  static GeneratorConfig from(const Config& cfg);
  void validate() const;
};

// Constant-speed, constant-curvature arc position at time t.
Waypoint arc_point(double speed, double curvature, double t);
Trajectory arc_trajectory(double speed, double curvature, std::size_t horizon, double dt);

int speed_level(double speed, const GeneratorConfig& cfg);
int curvature_level(double curvature, const GeneratorConfig& cfg);
Maneuver maneuver_for_levels(int speed_lvl, int curvature_lvl);

// Builds one sample; `noise` supplies the filler context tokens.
Sample make_sample(double speed, double curvature, numerics::Rng& noise, const GeneratorConfig& cfg);

std::vector<Sample> generate_dataset(std::size_t n, numerics::Rng& rng, const GeneratorConfig& cfg = {});

// Every instruction and reasoning word, in a fixed order.
std::vector<std::string> template_words();

void validate_sample(const Sample& s);

std::string to_jsonl(std::span<const Sample> samples);
std::vector<Sample> parse_jsonl(std::string_view text, const std::string& source = "<memory>");
void save_dataset(const std::string& path, std::span<const Sample> samples);
std::vector<Sample> load_dataset(const std::string& path);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

// Sizes are floor(n * f_i) with the remainder handed out by largest
// fractional part (ties to the earlier split). Membership is a seeded
// shuffle; each part keeps the input order.
Split split_dataset(std::span<const Sample> samples, std::array<double, 3> fractions, numerics::Rng& rng);

// All waypoints, sample-major then timestep order.
std::vector<Waypoint> pool_waypoints(std::span<const Sample> samples);

// L2 displacement error. `per_step[k]` is the distance at timestamp
// (k + 1) * dt; the 1 s / 2 s / 3 s entries are NaN when the trajectory is
// shorter than that horizon. `avg` averages every waypoint.
struct HorizonL2 {
  std::vector<double> per_step;
  double at_1s = 0.0;
  double at_2s = 0.0;
  double at_3s = 0.0;
  double avg = 0.0;
};

HorizonL2 l2_at_horizons(const Trajectory& pred, const Trajectory& truth, double dt = 0.5);

// Element-wise mean of several reports (all of the same length).
HorizonL2 mean_l2(std::span<const HorizonL2> reports);

// Per-step displacements w_k - w_{k-1} with w_0 = origin, and the inverse.
Trajectory to_displacements(const Trajectory& t);
Trajectory from_displacements(const Trajectory& d);

}  // namespace mvlad::traj
