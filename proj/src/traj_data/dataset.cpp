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

#include "traj_data/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "core/error.hpp"
#include "core/hash.hpp"

namespace mvlad::traj {
namespace {

using nlohmann::json;

struct ManeuverInfo {
  Maneuver maneuver;
  std::string_view name;
  std::string_view keyword;
  std::string_view reasoning;
};

// Each sentence contains exactly one keyword and fits BOS + words + EOS in 16.
constexpr std::array<ManeuverInfo, 6> kManeuvers = {{
    {Maneuver::kKeepLane, "keep-lane", "keep", "the lane ahead is clear so keep lane at a steady pace"},
    {Maneuver::kTurnLeft, "turn-left", "left", "the road bends ahead so turn left and follow the curve"},
    {Maneuver::kTurnRight, "turn-right", "right", "the road bends ahead so turn right and follow the curve"},
    {Maneuver::kStop, "stop", "stop", "the vehicle is not moving so stop and wait for space"},
    {Maneuver::kAccelerate, "accelerate", "accelerate", "the road is open and fast so accelerate to cruising pace"},
    {Maneuver::kDecelerate, "decelerate", "decelerate", "the traffic is slow so decelerate and hold a safe gap"},
}};

constexpr std::array<std::string_view, 3> kInstructions = {
    "follow route turning left", "follow route going straight", "follow route turning right"};

const ManeuverInfo& info(Maneuver m) {
  for (const auto& i : kManeuvers) {
    if (i.maneuver == m) return i;
  }
  fail(ErrorKind::kValidation, "unknown maneuver");
}

int clamp_level(double scaled) {
  return std::clamp(static_cast<int>(std::floor(scaled)), 0, kLevels - 1);
}

// Curvature coarse bins [0, 6) bend left, [10, 16) bend right. Speed coarse
// bin 0 is below 1.25 m/s, bins 1-4 below 6.25 m/s, bins 11+ from 13.75 m/s.
constexpr int kLeftBelow = 6;
constexpr int kRightFrom = 10;

std::string_view instruction_for(int curvature_lvl) {
  const int coarse = curvature_lvl / kFineBins;
  if (coarse < kLeftBelow) return kInstructions[0];
  if (coarse >= kRightFrom) return kInstructions[2];
  return kInstructions[1];
}

void split_words(std::string_view text, std::vector<std::string>& out) {
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
}

json sample_to_json(const Sample& s) {
  json points = json::array();
  for (const auto& w : s.trajectory) points.push_back(json::array({w.x, w.y}));
  return json{{"scene_context", s.scene_context}, {"instruction", s.instruction},
              {"waypoints", std::move(points)},   {"reasoning", s.reasoning},
              {"label", maneuver_name(s.label)}};
}

Sample sample_from_json(const json& j) {
  Sample s;
  s.scene_context = j.at("scene_context").get<std::vector<int>>();
  s.instruction = j.at("instruction").get<std::string>();
  for (const auto& p : j.at("waypoints")) {
    if (!p.is_array() || p.size() != 2) throw json::type_error::create(302, "waypoint must be [x, y]", &p);
    s.trajectory.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  s.reasoning = j.at("reasoning").get<std::string>();
  const auto label = j.at("label").get<std::string>();
  const auto m = parse_maneuver(label);
  if (!m) throw json::other_error::create(501, "unknown label '" + label + "'", &j);
  s.label = *m;
  return s;
}

}  // namespace

std::string_view maneuver_name(Maneuver m) { return info(m).name; }

std::optional<Maneuver> parse_maneuver(std::string_view name) {
  for (const auto& i : kManeuvers) {
    if (i.name == name) return i.maneuver;
  }
  return std::nullopt;
}

std::string_view maneuver_keyword(Maneuver m) { return info(m).keyword; }

std::optional<Maneuver> maneuver_from_keyword(std::string_view word) {
  for (const auto& i : kManeuvers) {
    if (i.keyword == word) return i.maneuver;
  }
  return std::nullopt;
}

GeneratorConfig GeneratorConfig::from(const Config& cfg) {
  GeneratorConfig g;
  g.horizon = cfg.get_uint("horizon", g.horizon);
  g.speed_max = cfg.get_double("speed_max", g.speed_max);
  g.curvature_max = cfg.get_double("curvature_max", g.curvature_max);
  g.curved_fraction = cfg.get_double("curved_fraction", g.curved_fraction);
  g.validate();
  return g;
}

void GeneratorConfig::validate() const {
  require(horizon >= 1, ErrorKind::kValidation, "horizon must be at least 1");
  require(dt > 0.0, ErrorKind::kValidation, "dt must be positive");
  require(speed_max >= 0.0 && speed_max <= kMaxStepSpeed, ErrorKind::kValidation,
          "speed_max must lie in [0, 25] m/s");
  require(curvature_max > 0.0, ErrorKind::kValidation, "curvature_max must be positive");
  require(curved_fraction >= 0.0 && curved_fraction <= 1.0, ErrorKind::kValidation,
          "curved_fraction must lie in [0, 1]");
  // Largest heading change must stay below pi so y never goes negative.
  require(speed_max * curvature_max * dt * static_cast<double>(horizon) < 3.14159, ErrorKind::kValidation,
          "speed_max * curvature_max * horizon time must stay below pi");
}

Waypoint arc_point(double speed, double curvature, double t) {
  if (curvature == 0.0) return {0.0, speed * t};
  const double heading = speed * curvature * t;
  const double half = std::sin(0.5 * heading);
  return {2.0 * half * half / curvature, std::sin(heading) / curvature};
}

Trajectory arc_trajectory(double speed, double curvature, std::size_t horizon, double dt) {
  Trajectory out;
  out.reserve(horizon);
  for (std::size_t k = 1; k <= horizon; ++k) out.push_back(arc_point(speed, curvature, dt * static_cast<double>(k)));
  return out;
}

int speed_level(double speed, const GeneratorConfig& cfg) {
  return clamp_level(speed / cfg.speed_max * kLevels);
}

int curvature_level(double curvature, const GeneratorConfig& cfg) {
  return clamp_level((curvature + cfg.curvature_max) / (2.0 * cfg.curvature_max) * kLevels);
}

Maneuver maneuver_for_levels(int speed_lvl, int curvature_lvl) {
  const int speed_coarse = speed_lvl / kFineBins;
  const int curv_coarse = curvature_lvl / kFineBins;
  if (speed_coarse == 0) return Maneuver::kStop;
  if (curv_coarse < kLeftBelow) return Maneuver::kTurnLeft;
  if (curv_coarse >= kRightFrom) return Maneuver::kTurnRight;
  if (speed_coarse >= 11) return Maneuver::kAccelerate;
  if (speed_coarse <= 4) return Maneuver::kDecelerate;
  return Maneuver::kKeepLane;
}

Sample make_sample(double speed, double curvature, numerics::Rng& noise, const GeneratorConfig& cfg) {
  const int sl = speed_level(speed, cfg);
  const int cl = curvature_level(curvature, cfg);
  Sample s;
  s.scene_context = {sl / kFineBins, kCoarseBins + cl / kFineBins, 2 * kCoarseBins + sl % kFineBins,
                     2 * kCoarseBins + kFineBins + cl % kFineBins};
  while (s.scene_context.size() < kContextLength) {
    s.scene_context.push_back(static_cast<int>(noise.below(kContextAlphabet)));
  }
  s.instruction = std::string(instruction_for(cl));
  s.trajectory = arc_trajectory(speed, curvature, cfg.horizon, cfg.dt);
  s.label = maneuver_for_levels(sl, cl);
  s.reasoning = std::string(info(s.label).reasoning);
  return s;
}

std::vector<Sample> generate_dataset(std::size_t n, numerics::Rng& rng, const GeneratorConfig& cfg) {
  cfg.validate();
  require(n >= 1, ErrorKind::kValidation, "dataset size must be at least 1");
  const std::uint64_t base = rng.next_u64();
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    numerics::Rng item(base, i);
    const double speed = item.uniform(0.0, cfg.speed_max);
    const bool curved = item.uniform() < cfg.curved_fraction;
    const double curvature = curved ? item.uniform(-cfg.curvature_max, cfg.curvature_max) : 0.0;
    out.push_back(make_sample(speed, curvature, item, cfg));
  }
  return out;
}

std::vector<std::string> template_words() {
  std::vector<std::string> all;
  for (auto text : kInstructions) split_words(text, all);
  for (const auto& m : kManeuvers) split_words(m.reasoning, all);
  std::vector<std::string> out;
  for (auto& w : all) {
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  }
  return out;
}

void validate_sample(const Sample& s) {
  require(!s.trajectory.empty(), ErrorKind::kValidation, "trajectory is empty");
  for (const auto& w : s.trajectory) {
    require(std::isfinite(w.x) && std::isfinite(w.y), ErrorKind::kValidation, "non-finite waypoint");
    require(std::abs(w.x) <= kEnvelopeX && w.y >= 0.0 && w.y <= kEnvelopeY, ErrorKind::kValidation,
            "waypoint (" + std::to_string(w.x) + ", " + std::to_string(w.y) + ") outside the envelope");
  }
  for (int tok : s.scene_context) {
    require(tok >= 0 && tok < kContextAlphabet, ErrorKind::kValidation,
            "scene context token " + std::to_string(tok) + " outside [0, 128)");
  }
}

std::string to_jsonl(std::span<const Sample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::vector<Sample> parse_jsonl(std::string_view text, const std::string& source) {
  std::vector<Sample> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    Sample s;
    try {
      s = sample_from_json(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      validate_sample(s);
      if (!out.empty()) {
        require(s.trajectory.size() == out.front().trajectory.size(), ErrorKind::kValidation,
                "trajectory length differs from the first sample");
      }
    } catch (const Error& e) {
      fail(e.kind(), source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const std::string& path, std::span<const Sample> samples) {
  write_file(path, to_jsonl(samples));
}

std::vector<Sample> load_dataset(const std::string& path) { return parse_jsonl(read_file(path), path); }

Split split_dataset(std::span<const Sample> samples, std::array<double, 3> fractions, numerics::Rng& rng) {
  double total = 0.0;
  for (double f : fractions) {
    require(f >= 0.0 && std::isfinite(f), ErrorKind::kValidation, "split fractions must be non-negative");
    total += f;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::kValidation, "split fractions must sum to 1");

  const std::size_t n = samples.size();
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best]) best = i;
    }
    ++sizes[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<int> part(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    part[order[i]] = i < sizes[0] ? 0 : (i < sizes[0] + sizes[1] ? 1 : 2);
  }
  Split out;
  for (std::size_t i = 0; i < n; ++i) {
    (part[i] == 0 ? out.train : part[i] == 1 ? out.val : out.test).push_back(samples[i]);
  }
  return out;
}

std::vector<Waypoint> pool_waypoints(std::span<const Sample> samples) {
  require(!samples.empty(), ErrorKind::kValidation, "cannot pool waypoints of an empty sample set");
  std::vector<Waypoint> out;
  for (const auto& s : samples) out.insert(out.end(), s.trajectory.begin(), s.trajectory.end());
  return out;
}

Trajectory to_displacements(const Trajectory& t) {
  Trajectory out;
  out.reserve(t.size());
  Waypoint prev{};
  for (const auto& w : t) {
    out.push_back({w.x - prev.x, w.y - prev.y});
    prev = w;
  }
  return out;
}

Trajectory from_displacements(const Trajectory& d) {
  Trajectory out;
  out.reserve(d.size());
  Waypoint acc{};
  for (const auto& s : d) {
    acc.x += s.x;
    acc.y += s.y;
    out.push_back(acc);
  }
  return out;
}

}  // namespace mvlad::traj

namespace mvlad::traj {
namespace {

double horizon_value(const std::vector<double>& per_step, double seconds, double dt) {
  const auto k = static_cast<std::size_t>(std::llround(seconds / dt));
  if (k == 0 || k > per_step.size()) return std::nan("");
  return per_step[k - 1];
}

}  // namespace

HorizonL2 l2_at_horizons(const Trajectory& pred, const Trajectory& truth, double dt) {
  require(pred.size() == truth.size(), ErrorKind::kValidation,
          "trajectory lengths differ: " + std::to_string(pred.size()) + " vs " + std::to_string(truth.size()));
  require(!truth.empty(), ErrorKind::kValidation, "empty trajectories");
  HorizonL2 r;
  r.per_step.reserve(truth.size());
  double total = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double e = std::hypot(pred[k].x - truth[k].x, pred[k].y - truth[k].y);
    r.per_step.push_back(e);
    total += e;
  }
  r.avg = total / static_cast<double>(truth.size());
  r.at_1s = horizon_value(r.per_step, 1.0, dt);
  r.at_2s = horizon_value(r.per_step, 2.0, dt);
  r.at_3s = horizon_value(r.per_step, 3.0, dt);
  return r;
}

HorizonL2 mean_l2(std::span<const HorizonL2> reports) {
  require(!reports.empty(), ErrorKind::kValidation, "no reports to average");
  HorizonL2 m;
  m.per_step.assign(reports.front().per_step.size(), 0.0);
  for (const auto& r : reports) {
    require(r.per_step.size() == m.per_step.size(), ErrorKind::kValidation, "report lengths differ");
    for (std::size_t k = 0; k < m.per_step.size(); ++k) m.per_step[k] += r.per_step[k];
    m.at_1s += r.at_1s;
    m.at_2s += r.at_2s;
    m.at_3s += r.at_3s;
    m.avg += r.avg;
  }
  const double n = static_cast<double>(reports.size());
  for (double& v : m.per_step) v /= n;
  m.at_1s /= n;
  m.at_2s /= n;
  m.at_3s /= n;
  m.avg /= n;
  return m;
}

}  // namespace mvlad::traj
