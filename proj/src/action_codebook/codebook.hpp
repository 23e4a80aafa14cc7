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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "numerics/rng.hpp"
#include "traj_data/dataset.hpp"

namespace mvlad::codebook {

using traj::Trajectory;
using traj::Waypoint;

// What one action token stands for: an absolute waypoint, or the per-step
// displacement from the previous waypoint (reconstructed by cumulative sum).
enum class Representation { kWaypoint, kDisplacement };

std::string_view representation_name(Representation r);
Representation parse_representation(std::string_view name);

struct FitStats {
  double objective = 0.0;  // within-cluster sum of squares at the final centroids
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> objective_history;  // one entry per assignment pass; not serialized
};

class Codebook {
 public:
  Codebook(std::vector<Waypoint> centroids, Representation representation, FitStats stats);

  std::size_t size() const { return centroids_.size(); }
  std::span<const Waypoint> centroids() const { return centroids_; }
  Representation representation() const { return representation_; }
  const FitStats& stats() const { return stats_; }

  // Nearest centroid; ties go to the lowest index.
  std::size_t quantize(Waypoint w) const;
  // Throws an index error unless k < size().
  Waypoint dequantize(std::size_t k) const;
  // The k nearest centroid indices, closest first, ties by index.
  std::vector<std::size_t> nearest(Waypoint w, std::size_t k) const;

  // Trajectory <-> token indices under this codebook's representation.
  std::vector<std::size_t> encode(const Trajectory& t) const;
  Trajectory decode(std::span<const std::size_t> tokens) const;

  // Points the codebook is fitted on for the given samples.
  static std::vector<Waypoint> pool(std::span<const traj::Sample> samples, Representation r);

  friend bool operator==(const Codebook& a, const Codebook& b);

 private:
  std::vector<Waypoint> centroids_;
  Representation representation_;
  FitStats stats_;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

struct KMeansOptions {
  std::size_t n = 256;
  std::size_t max_iter = 200;
  double tol = 1e-6;
};

// Lloyd iterations from a k-means++ start. Empty clusters are reseeded with
// the point farthest from its assigned centroid.
Codebook fit_kmeans(std::span<const Waypoint> points, const KMeansOptions& options, numerics::Rng& rng,
                    Representation representation = Representation::kWaypoint);

double kmeans_objective(std::span<const Waypoint> points, std::span<const Waypoint> centroids);

// Average per-horizon L2 between each trajectory and its own quantized copy.
traj::HorizonL2 quantization_floor(std::span<const traj::Sample> samples, const Codebook& cb);

inline constexpr int kCodebookVersion = 1;

std::string to_json(const Codebook& cb);
Codebook codebook_from_json(std::string_view text);
void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace mvlad::codebook
