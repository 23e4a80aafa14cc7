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

#include "action_codebook/codebook.hpp"
#include "core/config.hpp"
#include "numerics/rng.hpp"
#include "numerics/tensor.hpp"

namespace mvlad::embed {

using codebook::Codebook;
using numerics::RowMatrix;
using numerics::Tensor;
using traj::Waypoint;

struct EmbedTrainConfig {
  std::size_t dim = 64;
  std::size_t k_start = 16;
  std::size_t k_end = 1;
  double tau = 0.5;       // meters
  double tau_con = 0.1;
  double lambda_recon = 1.0;
  double lambda_geom = 0.5;
  double lambda_contra = 0.5;
  std::size_t epochs = 8;
  std::size_t batch_size = 64;
  double learning_rate = 5e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  // Use at most this many samples per epoch; 0 uses all of them.
  std::size_t max_samples = 0;

  static EmbedTrainConfig from(const Config& cfg, std::uint64_t seed);
  void validate() const;
};

// Neighbour count used in epoch `epoch` of `epochs`: linear from k_start to
// k_end, rounded half away from zero.
std::size_t curriculum_k(std::size_t epoch, std::size_t epochs, std::size_t k_start, std::size_t k_end);

struct SoftAssignment {
  std::vector<double> z;
  std::vector<double> weights;
  std::vector<std::size_t> indices;
};

// z = sum_j softmax_j(-|w - c_j| / tau) E_j over the k nearest centroids.
SoftAssignment soft_assign(Waypoint w, const Codebook& cb, const Tensor& embeddings, std::size_t k, double tau);

// Two-layer perceptron R^D -> R^128 (tanh) -> R^2.
class Decoder {
 public:
  static constexpr std::size_t kHidden = 128;

  Decoder() = default;
  explicit Decoder(std::size_t dim, std::size_t hidden = kHidden);

  void init(numerics::Rng& rng, Waypoint output_bias);

  std::size_t dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  Waypoint forward(std::span<const double> z) const;
  // Rows of `z` in, rows of (x, y) out.
  RowMatrix forward(const RowMatrix& z) const;
  // Backward for forward(z): accumulates parameter gradients, returns dL/dz.
  RowMatrix backward(const RowMatrix& z, const RowMatrix& d_out, std::span<double> param_grad) const;

  friend bool operator==(const Decoder&, const Decoder&) = default;

 private:
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return dim_ * hidden_; }
  std::size_t w2() const { return b1() + hidden_; }
  std::size_t b2() const { return w2() + hidden_ * 2; }

  std::size_t dim_ = 0;
  std::size_t hidden_ = kHidden;
  std::vector<double> params_;
};

// Loss functions over a batch. Each returns the loss and, when `d_z` is not
// null, adds `scale * dL/dz` into it (d_z must already be sized like z).

// Mean over rows of |D(z_i) - w_i|^2. Decoder gradients go to `decoder_grad`
// (scaled likewise) when it is non-empty.
double loss_recon(const RowMatrix& z, std::span<const Waypoint> w, const Decoder& decoder, RowMatrix* d_z,
                  std::span<double> decoder_grad, double scale = 1.0);

// Mean over unordered pairs of (|z_i - z_j| / med_z - |w_i - w_j| / med_w)^2,
// medians over the batch's pairs. Zero when either median is below 1e-9.
double loss_geom(const RowMatrix& z, std::span<const Waypoint> w, RowMatrix* d_z, double scale = 1.0);

// Supervised contrastive loss on unit-normalized z with positives sharing a
// cluster index; averaged over anchors that have positives.
double loss_contra(const RowMatrix& z, std::span<const std::size_t> cluster, double tau_con, RowMatrix* d_z,
                   double scale = 1.0);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t k = 0;
  double recon = 0.0;
  double geom = 0.0;
  double contra = 0.0;
  double total = 0.0;
};

struct EmbeddingModel {
  Tensor embeddings;  // N x D
  Decoder decoder;
  EmbedTrainConfig config;
  std::vector<EpochLog> log;

  std::size_t n() const { return embeddings.rows(); }
  std::size_t d() const { return embeddings.cols(); }
};

EmbeddingModel train_embeddings(const Codebook& cb, std::span<const traj::Sample> samples,
                                const EmbedTrainConfig& config);

// Rows drawn i.i.d. normal with the given per-entry standard deviation.
Tensor random_embeddings(std::size_t n, std::size_t d, double stddev, numerics::Rng& rng);

// Spearman correlation between |E_i - E_j| and |c_i - c_j| over all i < j.
double metric_alignment_score(const Tensor& embeddings, const Codebook& cb);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

inline constexpr int kEmbeddingVersion = 1;

std::string to_json(const EmbeddingModel& m);
EmbeddingModel embedding_from_json(std::string_view text);
void save_embedding(const EmbeddingModel& m, const std::string& path);
EmbeddingModel load_embedding(const std::string& path);
std::string log_csv(const std::vector<EpochLog>& log);

}  // namespace mvlad::embed
