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

#include "action_codebook/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "core/error.hpp"
#include "core/hash.hpp"
#include "json.hpp"

namespace mvlad::codebook {
namespace {

using nlohmann::json;

double sq_dist(Waypoint a, Waypoint b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Index and squared distance of the nearest centroid, lowest index on ties.
std::pair<std::size_t, double> nearest_one(const std::vector<double>& xs, const std::vector<double>& ys,
                                           Waypoint w) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double dx = w.x - xs[j];
    const double dy = w.y - ys[j];
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return {best, best_d};
}

void check_distinct(std::span<const Waypoint> centroids) {
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      require(std::sqrt(sq_dist(centroids[i], centroids[j])) > 1e-9, ErrorKind::kValidation,
              "centroids " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
    }
  }
}

std::vector<Waypoint> kmeans_plus_plus(std::span<const Waypoint> points, std::size_t n, numerics::Rng& rng) {
  std::vector<Waypoint> centroids;
  centroids.reserve(n);
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = sq_dist(points[i], centroids[0]);
  while (centroids.size() < n) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    require(total > 0.0, ErrorKind::kValidation,
            "fewer than " + std::to_string(n) + " distinct points to seed the codebook");
    const double target = rng.uniform() * total;
    double run = 0.0;
    std::size_t pick = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      run += d2[i];
      if (run > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] == 0.0) --pick;  // rounding at the tail
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = std::min(d2[i], sq_dist(points[i], points[pick]));
  }
  return centroids;
}

}  // namespace

std::string_view representation_name(Representation r) {
  return r == Representation::kWaypoint ? "waypoint" : "displacement";
}

Representation parse_representation(std::string_view name) {
  if (name == "waypoint") return Representation::kWaypoint;
  if (name == "displacement") return Representation::kDisplacement;
  fail(ErrorKind::kValidation, "unknown representation '" + std::string(name) + "'");
}

Codebook::Codebook(std::vector<Waypoint> centroids, Representation representation, FitStats stats)
    : centroids_(std::move(centroids)), representation_(representation), stats_(std::move(stats)) {
  require(centroids_.size() >= 2, ErrorKind::kValidation, "a codebook needs at least two centroids");
  for (const auto& c : centroids_) {
    require(std::isfinite(c.x) && std::isfinite(c.y), ErrorKind::kValidation, "non-finite centroid");
  }
  check_distinct(centroids_);
  xs_.reserve(centroids_.size());
  ys_.reserve(centroids_.size());
  for (const auto& c : centroids_) {
    xs_.push_back(c.x);
    ys_.push_back(c.y);
  }
}

std::size_t Codebook::quantize(Waypoint w) const { return nearest_one(xs_, ys_, w).first; }

Waypoint Codebook::dequantize(std::size_t k) const {
  require(k < centroids_.size(), ErrorKind::kIndex,
          "token " + std::to_string(k) + " outside codebook of size " + std::to_string(centroids_.size()));
  return centroids_[k];
}

std::vector<std::size_t> Codebook::nearest(Waypoint w, std::size_t k) const {
  require(k >= 1 && k <= centroids_.size(), ErrorKind::kValidation,
          "neighbour count " + std::to_string(k) + " outside [1, " + std::to_string(centroids_.size()) + "]");
  std::vector<std::pair<double, std::size_t>> d(centroids_.size());
  for (std::size_t j = 0; j < centroids_.size(); ++j) {
    const double dx = w.x - xs_[j];
    const double dy = w.y - ys_[j];
    d[j] = {dx * dx + dy * dy, j};
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

std::vector<std::size_t> Codebook::encode(const Trajectory& t) const {
  const Trajectory pts = representation_ == Representation::kWaypoint ? t : traj::to_displacements(t);
  std::vector<std::size_t> out;
  out.reserve(pts.size());
  for (const auto& w : pts) out.push_back(quantize(w));
  return out;
}

Trajectory Codebook::decode(std::span<const std::size_t> tokens) const {
  Trajectory pts;
  pts.reserve(tokens.size());
  for (std::size_t k : tokens) pts.push_back(dequantize(k));
  return representation_ == Representation::kWaypoint ? pts : traj::from_displacements(pts);
}

std::vector<Waypoint> Codebook::pool(std::span<const traj::Sample> samples, Representation r) {
  if (r == Representation::kWaypoint) return traj::pool_waypoints(samples);
  require(!samples.empty(), ErrorKind::kValidation, "cannot pool displacements of an empty sample set");
  std::vector<Waypoint> out;
  for (const auto& s : samples) {
    const auto d = traj::to_displacements(s.trajectory);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

bool operator==(const Codebook& a, const Codebook& b) {
  return a.centroids_ == b.centroids_ && a.representation_ == b.representation_ &&
         a.stats_.objective == b.stats_.objective && a.stats_.iterations == b.stats_.iterations &&
         a.stats_.seed == b.stats_.seed;
}

double kmeans_objective(std::span<const Waypoint> points, std::span<const Waypoint> centroids) {
  double j = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centroids) best = std::min(best, sq_dist(p, c));
    j += best;
  }
  return j;
}

Codebook fit_kmeans(std::span<const Waypoint> points, const KMeansOptions& options, numerics::Rng& rng,
                    Representation representation) {
  const std::size_t n = options.n;
  require(n >= 2, ErrorKind::kValidation, "codebook size must be at least 2");
  require(points.size() >= n, ErrorKind::kValidation,
          std::to_string(points.size()) + " points cannot fill " + std::to_string(n) + " clusters");
  require(options.tol >= 0.0, ErrorKind::kValidation, "tolerance must be non-negative");

  FitStats stats;
  stats.seed = rng.seed();
  std::vector<Waypoint> centroids = kmeans_plus_plus(points, n, rng);
  std::vector<double> xs(n), ys(n);
  std::vector<std::size_t> assign(points.size());
  std::vector<double> dist(points.size());

  auto assign_all = [&]() {
    for (std::size_t j = 0; j < n; ++j) {
      xs[j] = centroids[j].x;
      ys[j] = centroids[j].y;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [k, d] = nearest_one(xs, ys, points[i]);
      assign[i] = k;
      dist[i] = d;
      total += d;
    }
    return total;
  };

  double objective = assign_all();
  stats.objective_history.push_back(objective);
  std::size_t iter = 0;
  std::vector<double> sx(n), sy(n);
  std::vector<std::size_t> count(n);
  while (iter < options.max_iter) {
    ++iter;
    std::fill(sx.begin(), sx.end(), 0.0);
    std::fill(sy.begin(), sy.end(), 0.0);
    std::fill(count.begin(), count.end(), std::size_t{0});
    for (std::size_t i = 0; i < points.size(); ++i) {
      sx[assign[i]] += points[i].x;
      sy[assign[i]] += points[i].y;
      ++count[assign[i]];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (count[j] > 0) {
        centroids[j] = {sx[j] / static_cast<double>(count[j]), sy[j] / static_cast<double>(count[j])};
        continue;
      }
      // Reseed with the worst-served point; zero its distance so the next
      // empty cluster takes a different one.
      const auto far = static_cast<std::size_t>(
          std::distance(dist.begin(), std::max_element(dist.begin(), dist.end())));
      centroids[j] = points[far];
      dist[far] = 0.0;
    }
    const double next = assign_all();
    stats.objective_history.push_back(next);
    require(next <= objective * (1.0 + 1e-12), ErrorKind::kTraining,
            "k-means objective increased at iteration " + std::to_string(iter));
    const bool converged = objective == 0.0 || (objective - next) / objective < options.tol;
    objective = next;
    if (converged) break;
  }
  stats.objective = objective;
  stats.iterations = iter;
  return Codebook(std::move(centroids), representation, std::move(stats));
}

traj::HorizonL2 quantization_floor(std::span<const traj::Sample> samples, const Codebook& cb) {
  require(!samples.empty(), ErrorKind::kValidation, "no samples for the quantization floor");
  std::vector<traj::HorizonL2> reports;
  reports.reserve(samples.size());
  for (const auto& s : samples) {
    const auto tokens = cb.encode(s.trajectory);
    reports.push_back(traj::l2_at_horizons(cb.decode(tokens), s.trajectory));
  }
  return traj::mean_l2(reports);
}

std::string to_json(const Codebook& cb) {
  json centroids = json::array();
  for (const auto& c : cb.centroids()) centroids.push_back(json::array({c.x, c.y}));
  const json j = {{"version", kCodebookVersion},
                  {"n", cb.size()},
                  {"representation", representation_name(cb.representation())},
                  {"centroids", std::move(centroids)},
                  {"objective", cb.stats().objective},
                  {"iterations", cb.stats().iterations},
                  {"seed", cb.stats().seed}};
  return j.dump() + "\n";
}

Codebook codebook_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("corrupt codebook: ") + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    require(version == kCodebookVersion, ErrorKind::kFormat,
            "codebook version " + std::to_string(version) + " is not supported");
    std::vector<Waypoint> centroids;
    for (const auto& p : j.at("centroids")) {
      require(p.is_array() && p.size() == 2, ErrorKind::kFormat, "centroid must be [x, y]");
      centroids.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    require(j.at("n").get<std::size_t>() == centroids.size(), ErrorKind::kFormat,
            "codebook n does not match the centroid count");
    FitStats stats;
    stats.objective = j.at("objective").get<double>();
    stats.iterations = j.at("iterations").get<std::size_t>();
    stats.seed = j.at("seed").get<std::uint64_t>();
    return Codebook(std::move(centroids), parse_representation(j.at("representation").get<std::string>()),
                    std::move(stats));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("corrupt codebook: ") + e.what());
  }
}

void save_codebook(const Codebook& cb, const std::string& path) { write_file(path, to_json(cb)); }

Codebook load_codebook(const std::string& path) { return codebook_from_json(read_file(path)); }

}  // namespace mvlad::codebook
