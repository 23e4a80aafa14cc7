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
#include <span>
#include <vector>

#include "numerics/rng.hpp"
#include "numerics/tensor.hpp"

namespace mvlad::numerics {

struct BlockShape {
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t ff_width = 256;
};

// Offsets of one pre-norm transformer block inside a flat parameter vector.
// Matrices are row-major with shape (fan_in, fan_out).
struct BlockLayout {
  BlockShape shape;
  std::size_t ln1_gain, ln1_bias;
  std::size_t w_qkv, b_qkv;  // D x 3D, 3D
  std::size_t w_out, b_out;  // D x D, D
  std::size_t ln2_gain, ln2_bias;
  std::size_t w_ff1, b_ff1;  // D x F, F
  std::size_t w_ff2, b_ff2;  // F x D, D
  std::size_t end;           // one past the last parameter

  static BlockLayout at(std::size_t base, const BlockShape& shape);
  std::size_t size(std::size_t base) const { return end - base; }
};

void init_block(std::span<double> params, const BlockLayout& layout, Rng& rng);

// Activations kept from the forward pass for the backward pass.
struct BlockCache {
  std::size_t batch = 0;
  std::size_t seq = 0;
  RowMatrix ln1_hat;
  Eigen::VectorXd ln1_inv_std;
  RowMatrix ln1_out;
  RowMatrix qkv;
  std::vector<RowMatrix> probs;  // batch * heads matrices of seq x seq
  RowMatrix attn;
  RowMatrix ln2_hat;
  Eigen::VectorXd ln2_inv_std;
  RowMatrix ln2_out;
  RowMatrix ff_pre;
  RowMatrix ff_act;
};

// x holds `batch` sequences of length `seq` stacked row-wise. Attention is
// full (no causal mask) and never crosses sequence boundaries.
RowMatrix block_forward(std::span<const double> params, const BlockLayout& layout,
                        const RowMatrix& x, std::size_t batch, std::size_t seq, BlockCache& cache);

// Returns d loss / d x and accumulates parameter gradients into `grad`.
RowMatrix block_backward(std::span<const double> params, const BlockLayout& layout,
                         const BlockCache& cache, const RowMatrix& d_out, std::span<double> grad);

// Layer norm helpers shared with the predictor's final norm.
void layer_norm_forward(const RowMatrix& x, std::span<const double> gain, std::span<const double> bias,
                        RowMatrix& hat, Eigen::VectorXd& inv_std, RowMatrix& out);
RowMatrix layer_norm_backward(const RowMatrix& d_out, const RowMatrix& hat,
                              const Eigen::VectorXd& inv_std, std::span<const double> gain,
                              std::span<double> d_gain, std::span<double> d_bias);

// A standalone block that owns its parameters, for single-sequence use.
class AttentionBlock {
 public:
  AttentionBlock(const BlockShape& shape, Rng& rng);

  // x is seq x width.
  Tensor forward(const Tensor& x) const;
  // Gradient of sum(forward(x) .* d_out) with respect to x; parameter
  // gradients are written to `param_grad` (resized to params().size()).
  Tensor backward(const Tensor& x, const Tensor& d_out, std::vector<double>& param_grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  const BlockLayout& layout() const { return layout_; }

 private:
  BlockLayout layout_;
  std::vector<double> params_;
};

}  // namespace mvlad::numerics
