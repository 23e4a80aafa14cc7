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
#include <vector>

#include "core/config.hpp"
#include "numerics/attention.hpp"
#include "numerics/tensor.hpp"
#include "vla_sequence/sequence.hpp"

namespace mvlad::model {

using numerics::RowMatrix;
using numerics::Tensor;

struct PredictorConfig {
  std::size_t layers = 4;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t ff_width = 256;
  std::size_t max_length = 34;
  std::size_t vocab_size = 0;
  std::uint64_t seed = 0;

  static PredictorConfig from(const Config& cfg, std::size_t vocab_size, std::size_t max_length, std::size_t width,
                              std::uint64_t seed);
  void validate() const;
  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

struct ParamLayout {
  std::size_t tok_emb = 0;  // V x D
  std::size_t pos_emb = 0;  // L x D
  std::vector<numerics::BlockLayout> blocks;
  std::size_t lnf_gain = 0, lnf_bias = 0;
  std::size_t w_out = 0;  // D x V
  std::size_t b_out = 0;  // V
  std::size_t total = 0;

  static ParamLayout of(const PredictorConfig& cfg);
};

// Activations of one batched forward pass.
struct ForwardCache {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<int> ids;
  std::vector<numerics::BlockCache> blocks;
  RowMatrix lnf_hat;
  Eigen::VectorXd lnf_inv_std;
  RowMatrix hidden;  // final normalized states, (batch * seq) x D
};

// Bidirectional transformer over token IDs with one output distribution per
// position.
class Predictor {
 public:
  // Fresh weights. Rows [action_begin, action_begin + E.rows()) of the token
  // table are copied from `action_embeddings`.
  Predictor(const PredictorConfig& cfg, const Tensor& action_embeddings, std::size_t action_begin);
  // Restores saved weights.
  Predictor(const PredictorConfig& cfg, std::vector<double> params, std::size_t action_begin,
            std::size_t action_size);

  const PredictorConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t action_begin() const { return action_begin_; }
  std::size_t action_size() const { return action_size_; }
  // Flat index range of the action rows of the token table.
  std::pair<std::size_t, std::size_t> action_param_range() const;
  Tensor action_embeddings() const;

  // `ids` holds `batch` sequences of length `seq` back to back. Returns the
  // final normalized hidden states; `cache` is filled for backward.
  const RowMatrix& encode(std::span<const int> ids, std::size_t batch, std::size_t seq, ForwardCache& cache) const;
  // Logits for the given rows of cache.hidden.
  RowMatrix logits(const ForwardCache& cache, std::span<const std::size_t> rows) const;
  // Accumulates the parameter gradient given d loss / d logits at `rows`.
  void backward(const ForwardCache& cache, std::span<const std::size_t> rows, const RowMatrix& d_logits,
                std::span<double> grad) const;

  // Per-position distributions over the vocabulary (seq length x V).
  Tensor forward_predict(const seq::TokenSequence& seq) const;

  friend bool operator==(const Predictor& a, const Predictor& b) {
    return a.config_ == b.config_ && a.params_ == b.params_ && a.action_begin_ == b.action_begin_ &&
           a.action_size_ == b.action_size_;
  }

 private:
  PredictorConfig config_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::size_t action_begin_ = 0;
  std::size_t action_size_ = 0;
};

struct LossResult {
  double loss = 0.0;
  double action_loss = 0.0;     // mean over masked action positions (0 if none)
  double reasoning_loss = 0.0;  // mean over masked non-PAD reasoning positions (0 if none)
  std::size_t action_count = 0;
  std::size_t reasoning_count = 0;
};

// Number of positions diffusion_loss would score.
std::size_t loss_position_count(std::span<const seq::TokenSequence> batch, const seq::Vocabulary& vocab);

// Mean negative log-likelihood of the original IDs over masked, non-PAD
// positions. With `importance_weight`, each position is weighted by 1/t of
// its sequence. All sequences must share one length. Gradients are added to
// `grad` when it is non-empty.
LossResult diffusion_loss(const Predictor& model, std::span<const seq::TokenSequence> batch,
                          const seq::Vocabulary& vocab, bool importance_weight, std::span<double> grad = {});

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  void reset(std::size_t n);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct TrainOptions {
  AdamConfig adam;
  bool importance_weight = false;
  bool freeze_action_rows = false;
};

// One Adam step on the batch loss. Frozen action rows are left untouched.
LossResult train_step(Predictor& model, std::span<const seq::TokenSequence> batch, const seq::Vocabulary& vocab,
                      AdamState& state, const TrainOptions& options);

}  // namespace mvlad::model
