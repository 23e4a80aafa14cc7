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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "action_codebook/codebook.hpp"
#include "numerics/rng.hpp"
#include "traj_data/dataset.hpp"

namespace mvlad::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mvlad_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::vector<traj::Sample> make_samples(std::size_t n, std::uint64_t seed) {
  numerics::Rng rng(seed);
  return traj::generate_dataset(n, rng);
}

inline codebook::Codebook make_codebook(const std::vector<traj::Sample>& samples, std::size_t n, std::uint64_t seed,
                                        codebook::Representation rep = codebook::Representation::kWaypoint) {
  numerics::Rng rng(seed, 3);
  codebook::KMeansOptions opts;
  opts.n = n;
  return codebook::fit_kmeans(codebook::Codebook::pool(samples, rep), opts, rng, rep);
}

}  // namespace mvlad::testing
