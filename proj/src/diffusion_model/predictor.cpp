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

#include "diffusion_model/predictor.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"

namespace mvlad::model {
namespace {

using Eigen::Index;
using numerics::ConstMatrixMap;
using numerics::MatrixMap;

constexpr std::uint64_t kInitStream = 0x707265;

double rms(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

PredictorConfig PredictorConfig::from(const Config& cfg, std::size_t vocab_size, std::size_t max_length,
                                      std::size_t width, std::uint64_t seed) {
  PredictorConfig c;
  c.layers = cfg.get_uint("layers", c.layers);
  c.heads = cfg.get_uint("heads", c.heads);
  c.ff_width = cfg.get_uint("ff_width", c.ff_width);
  c.width = width;
  c.max_length = max_length;
  c.vocab_size = vocab_size;
  c.seed = seed;
  c.validate();
  return c;
}

void PredictorConfig::validate() const {
  require(layers >= 1, ErrorKind::kValidation, "predictor needs at least one layer");
  require(width >= 1 && heads >= 1 && ff_width >= 1, ErrorKind::kValidation, "predictor sizes must be positive");
  require(width % heads == 0, ErrorKind::kValidation,
          "width " + std::to_string(width) + " is not divisible by heads " + std::to_string(heads));
  require(max_length >= 1 && vocab_size >= 2, ErrorKind::kValidation, "predictor needs a length and a vocabulary");
}

ParamLayout ParamLayout::of(const PredictorConfig& cfg) {
  ParamLayout l;
  const std::size_t d = cfg.width;
  std::size_t o = 0;
  l.tok_emb = o; o += cfg.vocab_size * d;
  l.pos_emb = o; o += cfg.max_length * d;
  const numerics::BlockShape shape{cfg.width, cfg.heads, cfg.ff_width};
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    l.blocks.push_back(numerics::BlockLayout::at(o, shape));
    o = l.blocks.back().end;
  }
  l.lnf_gain = o; o += d;
  l.lnf_bias = o; o += d;
  l.w_out = o; o += d * cfg.vocab_size;
  l.b_out = o; o += cfg.vocab_size;
  l.total = o;
  return l;
}

Predictor::Predictor(const PredictorConfig& cfg, const Tensor& action_embeddings, std::size_t action_begin)
    : config_(cfg), layout_(ParamLayout::of(cfg)), action_begin_(action_begin),
      action_size_(action_embeddings.rows()) {
  config_.validate();
  const std::size_t d = cfg.width;
  require(action_embeddings.cols() == d, ErrorKind::kShape,
          "action embeddings have width " + std::to_string(action_embeddings.cols()) + ", predictor uses " +
              std::to_string(d));
  require(action_begin_ + action_size_ <= cfg.vocab_size, ErrorKind::kShape,
          "action block exceeds the vocabulary");
  params_.assign(layout_.total, 0.0);
  numerics::Rng rng(cfg.seed, kInitStream);

  double scale = rms(action_embeddings.data());
  if (!(scale > 0.0)) scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < cfg.vocab_size * d; ++i) params_[layout_.tok_emb + i] = scale * rng.normal();
  for (std::size_t i = 0; i < cfg.max_length * d; ++i) params_[layout_.pos_emb + i] = scale * rng.normal();
  const auto e = action_embeddings.data();
  std::copy(e.begin(), e.end(), params_.begin() + static_cast<std::ptrdiff_t>(layout_.tok_emb + action_begin_ * d));
  for (const auto& b : layout_.blocks) numerics::init_block(params_, b, rng);
  for (std::size_t i = 0; i < d; ++i) params_[layout_.lnf_gain + i] = 1.0;
  const double out_std = 0.5 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < d * cfg.vocab_size; ++i) params_[layout_.w_out + i] = out_std * rng.normal();
}

Predictor::Predictor(const PredictorConfig& cfg, std::vector<double> params, std::size_t action_begin,
                     std::size_t action_size)
    : config_(cfg), layout_(ParamLayout::of(cfg)), params_(std::move(params)), action_begin_(action_begin),
      action_size_(action_size) {
  config_.validate();
  require(params_.size() == layout_.total, ErrorKind::kFormat,
          "expected " + std::to_string(layout_.total) + " parameters, got " + std::to_string(params_.size()));
  require(action_begin_ + action_size_ <= cfg.vocab_size, ErrorKind::kShape, "action block exceeds the vocabulary");
}

std::pair<std::size_t, std::size_t> Predictor::action_param_range() const {
  const std::size_t d = config_.width;
  const std::size_t begin = layout_.tok_emb + action_begin_ * d;
  return {begin, begin + action_size_ * d};
}

Tensor Predictor::action_embeddings() const {
  const auto [begin, end] = action_param_range();
  return Tensor({action_size_, config_.width},
                std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(begin),
                                    params_.begin() + static_cast<std::ptrdiff_t>(end)));
}

const RowMatrix& Predictor::encode(std::span<const int> ids, std::size_t batch, std::size_t seq,
                                   ForwardCache& cache) const {
  const std::size_t d = config_.width;
  require(seq <= config_.max_length, ErrorKind::kShape,
          "sequence length " + std::to_string(seq) + " exceeds the maximum " + std::to_string(config_.max_length));
  require(ids.size() == batch * seq && batch > 0, ErrorKind::kShape, "token batch does not match batch x seq");
  cache.batch = batch;
  cache.seq = seq;
  cache.ids.assign(ids.begin(), ids.end());
  RowMatrix x(static_cast<Index>(batch * seq), static_cast<Index>(d));
  const ConstMatrixMap tok(params_.data() + layout_.tok_emb, static_cast<Index>(config_.vocab_size),
                           static_cast<Index>(d));
  const ConstMatrixMap pos(params_.data() + layout_.pos_emb, static_cast<Index>(config_.max_length),
                           static_cast<Index>(d));
  for (std::size_t r = 0; r < batch * seq; ++r) {
    const int id = ids[r];
    require(id >= 0 && static_cast<std::size_t>(id) < config_.vocab_size, ErrorKind::kIndex,
            "token id " + std::to_string(id) + " outside the vocabulary");
    x.row(static_cast<Index>(r)) = tok.row(id) + pos.row(static_cast<Index>(r % seq));
  }
  cache.blocks.resize(layout_.blocks.size());
  for (std::size_t i = 0; i < layout_.blocks.size(); ++i) {
    x = numerics::block_forward(params_, layout_.blocks[i], x, batch, seq, cache.blocks[i]);
  }
  const std::span<const double> p(params_);
  numerics::layer_norm_forward(x, p.subspan(layout_.lnf_gain, d), p.subspan(layout_.lnf_bias, d), cache.lnf_hat,
                               cache.lnf_inv_std, cache.hidden);
  return cache.hidden;
}

RowMatrix Predictor::logits(const ForwardCache& cache, std::span<const std::size_t> rows) const {
  const std::size_t d = config_.width;
  const std::size_t v = config_.vocab_size;
  RowMatrix h(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Index>(i)) = cache.hidden.row(static_cast<Index>(rows[i]));
  RowMatrix out = h * ConstMatrixMap(params_.data() + layout_.w_out, static_cast<Index>(d), static_cast<Index>(v));
  out.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params_.data() + layout_.b_out, static_cast<Index>(v));
  return out;
}

void Predictor::backward(const ForwardCache& cache, std::span<const std::size_t> rows, const RowMatrix& d_logits,
                         std::span<double> grad) const {
  const std::size_t d = config_.width;
  const std::size_t v = config_.vocab_size;
  require(grad.size() == params_.size(), ErrorKind::kShape, "gradient buffer has the wrong size");
  const ConstMatrixMap w_out(params_.data() + layout_.w_out, static_cast<Index>(d), static_cast<Index>(v));
  RowMatrix h(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Index>(i)) = cache.hidden.row(static_cast<Index>(rows[i]));
  MatrixMap(grad.data() + layout_.w_out, static_cast<Index>(d), static_cast<Index>(v)).noalias() +=
      h.transpose() * d_logits;
  Eigen::Map<Eigen::RowVectorXd>(grad.data() + layout_.b_out, static_cast<Index>(v)) += d_logits.colwise().sum();

  const RowMatrix d_h_rows = d_logits * w_out.transpose();
  RowMatrix d_h = RowMatrix::Zero(cache.hidden.rows(), cache.hidden.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) d_h.row(static_cast<Index>(rows[i])) += d_h_rows.row(static_cast<Index>(i));

  const std::span<const double> p(params_);
  RowMatrix dx = numerics::layer_norm_backward(d_h, cache.lnf_hat, cache.lnf_inv_std, p.subspan(layout_.lnf_gain, d),
                                               grad.subspan(layout_.lnf_gain, d), grad.subspan(layout_.lnf_bias, d));
  for (std::size_t i = layout_.blocks.size(); i-- > 0;) {
    dx = numerics::block_backward(params_, layout_.blocks[i], cache.blocks[i], dx, grad);
  }
  MatrixMap tok(grad.data() + layout_.tok_emb, static_cast<Index>(v), static_cast<Index>(d));
  MatrixMap pos(grad.data() + layout_.pos_emb, static_cast<Index>(config_.max_length), static_cast<Index>(d));
  for (std::size_t r = 0; r < cache.ids.size(); ++r) {
    tok.row(cache.ids[r]) += dx.row(static_cast<Index>(r));
    pos.row(static_cast<Index>(r % cache.seq)) += dx.row(static_cast<Index>(r));
  }
}

Tensor Predictor::forward_predict(const seq::TokenSequence& seq) const {
  ForwardCache cache;
  encode(seq.ids, 1, seq.size(), cache);
  std::vector<std::size_t> rows(seq.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Tensor out = Tensor::from(logits(cache, rows));
  for (std::size_t r = 0; r < out.rows(); ++r) numerics::softmax_inplace(out.row(r));
  return out;
}

namespace {

bool scored(const seq::TokenSequence& s, std::size_t i, const seq::Vocabulary& vocab) {
  return s.mask_flags[i] != 0 && s.is_generation(i) && s.original[i] != vocab.pad();
}

}  // namespace

std::size_t loss_position_count(std::span<const seq::TokenSequence> batch, const seq::Vocabulary& vocab) {
  std::size_t n = 0;
  for (const auto& s : batch) {
    for (std::size_t i = 0; i < s.size(); ++i) n += scored(s, i, vocab) ? 1 : 0;
  }
  return n;
}

LossResult diffusion_loss(const Predictor& model, std::span<const seq::TokenSequence> batch,
                          const seq::Vocabulary& vocab, bool importance_weight, std::span<double> grad) {
  require(!batch.empty(), ErrorKind::kValidation, "empty batch");
  const std::size_t len = batch.front().size();
  std::vector<int> ids;
  ids.reserve(batch.size() * len);
  std::vector<std::size_t> rows;
  std::vector<int> targets;
  std::vector<double> weights;
  std::vector<bool> is_action;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = batch[b];
    require(s.size() == len, ErrorKind::kShape, "sequences in a batch must share one length");
    require(s.original.size() == len && s.mask_flags.size() == len, ErrorKind::kShape,
            "sequence is missing its original ids or mask flags");
    ids.insert(ids.end(), s.ids.begin(), s.ids.end());
    double w = 1.0;
    if (importance_weight) {
      require(s.mask_ratio > 0.0, ErrorKind::kValidation, "importance weighting needs a positive mask ratio");
      w = 1.0 / s.mask_ratio;
    }
    for (std::size_t i = 0; i < len; ++i) {
      if (!scored(s, i, vocab)) continue;
      rows.push_back(b * len + i);
      targets.push_back(s.original[i]);
      weights.push_back(w);
      is_action.push_back(s.segment[i] == seq::Segment::kAction);
    }
  }
  require(!rows.empty(), ErrorKind::kValidation, "batch has no masked positions to score");

  ForwardCache cache;
  model.encode(ids, batch.size(), len, cache);
  RowMatrix logit = model.logits(cache, rows);
  LossResult r;
  const double inv_count = 1.0 / static_cast<double>(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto row = std::span<double>(logit.data() + k * logit.cols(), static_cast<std::size_t>(logit.cols()));
    const double lse = numerics::log_sum_exp(row);
    const double nll = lse - row[static_cast<std::size_t>(targets[k])];
    r.loss += weights[k] * nll;
    if (is_action[k]) {
      r.action_loss += nll;
      ++r.action_count;
    } else {
      r.reasoning_loss += nll;
      ++r.reasoning_count;
    }
    if (!grad.empty()) {
      // Reuse the row for d loss / d logits.
      for (double& x : row) x = std::exp(x - lse);
      row[static_cast<std::size_t>(targets[k])] -= 1.0;
      for (double& x : row) x *= weights[k] * inv_count;
    }
  }
  r.loss *= inv_count;
  if (r.action_count > 0) r.action_loss /= static_cast<double>(r.action_count);
  if (r.reasoning_count > 0) r.reasoning_loss /= static_cast<double>(r.reasoning_count);
  if (!grad.empty()) model.backward(cache, rows, logit, grad);
  return r;
}

void AdamState::reset(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  step = 0;
}

LossResult train_step(Predictor& model, std::span<const seq::TokenSequence> batch, const seq::Vocabulary& vocab,
                      AdamState& state, const TrainOptions& options) {
  auto& p = model.params();
  if (state.m.size() != p.size()) state.reset(p.size());
  std::vector<double> grad(p.size(), 0.0);
  const LossResult r = diffusion_loss(model, batch, vocab, options.importance_weight, grad);
  if (!std::isfinite(r.loss)) fail(ErrorKind::kTraining, "non-finite diffusion loss");

  const auto& a = options.adam;
  ++state.step;
  const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(state.step));
  const auto [frozen_begin, frozen_end] = model.action_param_range();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (options.freeze_action_rows && i >= frozen_begin && i < frozen_end) continue;
    state.m[i] = a.beta1 * state.m[i] + (1.0 - a.beta1) * grad[i];
    state.v[i] = a.beta2 * state.v[i] + (1.0 - a.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    p[i] -= a.learning_rate * m_hat / (std::sqrt(v_hat) + a.eps);
  }
  return r;
}

}  // namespace mvlad::model
