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

#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "diffusion_model/predictor.hpp"
#include "geo_embedding/embedding.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "numerics/grad_check.hpp"

using namespace mvlad;
using namespace mvlad::model;
using mvlad::seq::Segment;
using mvlad::seq::TokenSequence;
using mvlad::seq::Vocabulary;
using numerics::grad_check;
using numerics::Objective;
using numerics::Rng;
using numerics::ValueAndGrad;

namespace {

// 12 context + 4 words + BOS EOS PAD MASK + 12 actions = 32 ids.
Vocabulary mini_vocab() { return Vocabulary(12, {"a", "b", "c", "d"}, 12); }

// Length-16 sequence: 4 vision, 2 instruction, 6 action, 4 reasoning.
TokenSequence mini_sequence(const Vocabulary& v, Rng& rng, double t) {
  TokenSequence s;
  s.layout = {4, 2, 6, 4, 0};
  for (int i = 0; i < 4; ++i) {
    s.ids.push_back(static_cast<int>(rng.below(12)));
    s.segment.push_back(Segment::kVision);
  }
  for (int i = 0; i < 2; ++i) {
    s.ids.push_back(12 + static_cast<int>(rng.below(4)));
    s.segment.push_back(Segment::kInstruction);
  }
  for (int i = 0; i < 6; ++i) {
    s.ids.push_back(v.action_id(rng.below(12)));
    s.segment.push_back(Segment::kAction);
  }
  for (int id : {v.bos(), 12 + static_cast<int>(rng.below(4)), v.eos(), v.pad()}) {
    s.ids.push_back(id);
    s.segment.push_back(Segment::kReasoning);
  }
  s.original = s.ids;
  s.mask_flags.assign(16, 0);
  s.mask_ratio = t;
  for (std::size_t i = 6; i < 16; ++i) {
    if (rng.uniform() < t) {
      s.ids[i] = v.mask();
      s.mask_flags[i] = 1;
    }
  }
  return s;
}

PredictorConfig mini_config(std::size_t layers) {
  PredictorConfig c;
  c.layers = layers;
  c.width = 8;
  c.heads = 2;
  c.ff_width = 16;
  c.max_length = 16;
  c.vocab_size = 32;
  c.seed = 9;
  return c;
}

Predictor mini_model(std::size_t layers) {
  Rng rng(1);
  const Tensor e = embed::random_embeddings(12, 8, 0.3, rng);
  return Predictor(mini_config(layers), e, mini_vocab().action_begin());
}

Objective loss_objective(const Predictor& base, const std::vector<TokenSequence>& batch, const Vocabulary& v,
                         bool importance) {
  return [&base, &batch, &v, importance](std::span<const double> p) {
    Predictor m(base.config(), std::vector<double>(p.begin(), p.end()), base.action_begin(), base.action_size());
    ValueAndGrad r;
    r.grad.assign(p.size(), 0.0);
    r.value = diffusion_loss(m, batch, v, importance, r.grad).loss;
    return r;
  };
}

}  // namespace

TEST_CASE("initialization copies the action rows") {
  Rng rng(2);
  const Tensor e = embed::random_embeddings(12, 8, 0.3, rng);
  const Predictor m(mini_config(1), e, 20);
  CHECK(m.action_embeddings() == e);
  CHECK(m.params().size() == m.layout().total);
  PredictorConfig bad = mini_config(1);
  bad.heads = 3;
  CHECK_THROWS_AS(Predictor(bad, e, 20), Error);
}

TEST_CASE("predictions are distributions and see both directions") {
  const Vocabulary v = mini_vocab();
  const Predictor m = mini_model(2);
  Rng rng(3);
  TokenSequence s = mini_sequence(v, rng, 0.5);
  const Tensor p = m.forward_predict(s);
  REQUIRE(p.rows() == 16);
  REQUIRE(p.cols() == 32);
  for (std::size_t r = 0; r < 16; ++r) {
    double sum = 0.0;
    for (double x : p.row(r)) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  CHECK(m.forward_predict(s) == p);

  // Changing the last reasoning token moves the first action prediction.
  TokenSequence t = s;
  t.ids[15] = t.ids[15] == 13 ? 14 : 13;
  const Tensor q = m.forward_predict(t);
  double diff = 0.0;
  for (std::size_t c = 0; c < 32; ++c) diff += std::abs(q(6, c) - p(6, c));
  CHECK(diff > 1e-6);
  // And a conditioning token changes masked positions downstream.
  TokenSequence u = s;
  u.ids[0] = (u.ids[0] + 1) % 12;
  const Tensor w = m.forward_predict(u);
  diff = 0.0;
  for (std::size_t c = 0; c < 32; ++c) diff += std::abs(w(10, c) - p(10, c));
  CHECK(diff > 1e-6);

  TokenSequence longer = s;
  longer.ids.push_back(0);
  CHECK_THROWS_AS(m.forward_predict(longer), Error);
}

TEST_CASE("loss limits") {
  const Vocabulary v = mini_vocab();
  Predictor m = mini_model(1);
  Rng rng(4);
  std::vector<TokenSequence> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(mini_sequence(v, rng, 1.0));

  // Zero output projection gives uniform predictions.
  const auto& l = m.layout();
  std::fill(m.params().begin() + static_cast<std::ptrdiff_t>(l.w_out), m.params().end(), 0.0);
  const LossResult uni = diffusion_loss(m, batch, v, false);
  CHECK(std::abs(uni.loss - std::log(32.0)) <= 1e-9);
  CHECK(uni.action_count == 18);
  CHECK(uni.reasoning_count == 9);  // the PAD slot is never scored

  // All masked positions share one true id; a huge bias on it gives zero.
  for (auto& s : batch) {
    for (std::size_t i = 6; i < 16; ++i) s.original[i] = v.action_id(3);
  }
  m.params()[l.b_out + static_cast<std::size_t>(v.action_id(3))] = 1000.0;
  CHECK(diffusion_loss(m, batch, v, false).loss == 0.0);

  std::vector<TokenSequence> clean = {mini_sequence(v, rng, 0.0)};
  CHECK_THROWS_AS(diffusion_loss(m, clean, v, false), Error);
  CHECK(loss_position_count(clean, v) == 0);
}

TEST_CASE("miniature predictor gradients") {
  const Vocabulary v = mini_vocab();
  const Predictor m = mini_model(1);
  Rng rng(5);
  std::vector<TokenSequence> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(mini_sequence(v, rng, 0.6));
  const auto res = grad_check(loss_objective(m, batch, v, false), m.params());
  CHECK(res.checked == m.params().size());
  CHECK(res.max_rel_error <= 1e-4);
  CHECK(grad_check(loss_objective(m, batch, v, true), m.params(), {1e-5, 300, 1}).max_rel_error <= 1e-4);
}

TEST_CASE("two-layer gradients") {
  const Vocabulary v = mini_vocab();
  const Predictor m = mini_model(2);
  Rng rng(6);
  std::vector<TokenSequence> batch;
  for (int i = 0; i < 2; ++i) batch.push_back(mini_sequence(v, rng, 0.7));
  CHECK(grad_check(loss_objective(m, batch, v, false), m.params(), {1e-5, 600, 2}).max_rel_error <= 1e-4);
}

TEST_CASE("training steps") {
  const Vocabulary v = mini_vocab();
  Rng rng(7);
  std::vector<TokenSequence> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(mini_sequence(v, rng, 0.8));

  Predictor still = mini_model(1);
  const auto before = still.params();
  AdamState st;
  TrainOptions zero;
  zero.adam.learning_rate = 0.0;
  train_step(still, batch, v, st, zero);
  CHECK(still.params() == before);
  CHECK(st.step == 1);

  Predictor frozen = mini_model(1);
  AdamState fs;
  TrainOptions freeze;
  freeze.freeze_action_rows = true;
  freeze.adam.learning_rate = 1e-2;
  const Tensor rows = frozen.action_embeddings();
  for (int i = 0; i < 3; ++i) train_step(frozen, batch, v, fs, freeze);
  CHECK(frozen.action_embeddings() == rows);
  CHECK(frozen.params() != before);

  auto curve = [&]() {
    Predictor m = mini_model(1);
    AdamState s;
    std::vector<double> out;
    for (int i = 0; i < 5; ++i) out.push_back(train_step(m, batch, v, s, {}).loss);
    return out;
  };
  CHECK(curve() == curve());
}

TEST_CASE("memorizes a small set") {
  const auto samples = mvlad::testing::make_samples(200, 11);
  const auto cb = mvlad::testing::make_codebook(samples, 64, 11);
  const auto vocab = seq::build_vocab(cb, traj::template_words());
  std::vector<TokenSequence> clean;
  for (const auto& s : samples) clean.push_back(seq::assemble_sequence(s, cb, vocab, false));

  PredictorConfig cfg;
  cfg.layers = 2;
  cfg.ff_width = 128;
  cfg.max_length = 18;
  cfg.vocab_size = vocab.size();
  cfg.seed = 1;
  Rng er(2);
  Predictor m(cfg, embed::random_embeddings(cb.size(), cfg.width, 0.125, er), vocab.action_begin());
  AdamState st;
  TrainOptions opts;
  opts.adam.learning_rate = 1e-3;
  Rng rng(3);
  std::vector<std::size_t> order(clean.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double loss = 1e9;
  std::size_t steps = 0;
  std::vector<TokenSequence> batch;
  // Score the whole set at full masking as the memorization measure.
  std::vector<TokenSequence> probe;
  for (const auto& s : clean) probe.push_back(seq::apply_forward_masking(s, 1.0, rng, vocab));
  while (steps < 500) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b + 50 <= order.size() && steps < 500; b += 50, ++steps) {
      batch.clear();
      for (std::size_t i = b; i < b + 50; ++i) {
        batch.push_back(seq::apply_forward_masking(clean[order[i]], rng.uniform(0.05, 1.0), rng, vocab));
      }
      if (loss_position_count(batch, vocab) == 0) continue;
      train_step(m, batch, vocab, st, opts);
    }
    loss = diffusion_loss(m, probe, vocab, false).loss;
    if (loss < 0.1) break;
  }
  MESSAGE("memorization loss " << loss << " after " << steps << " steps");
  CHECK(loss < 0.1);
}
