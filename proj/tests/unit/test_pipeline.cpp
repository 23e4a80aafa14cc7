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

#include <cstring>

#include "core/error.hpp"
#include "core/hash.hpp"
#include "doctest.h"
#include "eval/experiment.hpp"
#include "helpers.hpp"
#include "pipeline/checkpoint.hpp"
#include "pipeline/pipeline.hpp"

using namespace mvlad;
using namespace mvlad::pipeline;
using mvlad::testing::TempDir;

namespace {

// Reference toy set shared by the tests below.
struct Toy {
  traj::Split parts;
  codebook::Codebook cb;
  seq::Vocabulary vocab;
  numerics::Tensor embeddings;
  model::PredictorConfig pcfg;

  static const Toy& get() {
    static const Toy toy = build();
    return toy;
  }

  TrainingState fresh(std::uint64_t seed = 5) const { return init_training(pcfg, embeddings, vocab, seed); }

  StageConfig stage(int s, std::size_t epochs) const {
    StageConfig c;
    c.stage = s;
    c.epochs = epochs;
    c.learning_rate = 1e-3;
    c.freeze_action_rows = s == 1;
    c.record_timing = false;
    return c;
  }

  double val_l2(const TrainingState& st, bool reasoning) const {
    decode::DecodeConfig d;
    return eval::evaluate(st.model, cb, vocab, parts.val, d, reasoning).report.l2_avg;
  }

 private:
  static Toy build() {
    const auto samples = mvlad::testing::make_samples(2000, 31);
    numerics::Rng sr(31, 2);
    auto parts = traj::split_dataset(samples, {0.8, 0.1, 0.1}, sr);
    auto cb = mvlad::testing::make_codebook(parts.train, 64, 31);
    auto vocab = seq::build_vocab(cb, traj::template_words());
    embed::EmbedTrainConfig ec;
    ec.dim = 32;
    ec.epochs = 4;
    ec.seed = 31;
    auto emb = embed::train_embeddings(cb, parts.train, ec);
    model::PredictorConfig p;
    p.layers = 2;
    p.width = 32;
    p.heads = 4;
    p.ff_width = 64;
    p.max_length = max_sequence_length(6);
    p.vocab_size = vocab.size();
    p.seed = 31;
    return Toy{std::move(parts), std::move(cb), std::move(vocab), std::move(emb.embeddings), p};
  }
};

std::string reseal(std::string bytes) {
  bytes.resize(bytes.size() - 64);
  return bytes + sha256_hex(bytes);
}

}  // namespace

TEST_CASE("stage layouts and defaults") {
  const Toy& toy = Toy::get();
  CHECK(max_sequence_length(6) == 34);
  const auto s1 = assemble_stage(toy.parts.train, toy.cb, toy.vocab, 1);
  const auto s2 = assemble_stage(toy.parts.train, toy.cb, toy.vocab, 2);
  for (const auto& s : s1) CHECK(s.size() == 18);
  for (const auto& s : s2) CHECK(s.size() == 34);
  CHECK(StageConfig{}.epochs == 8);
  CHECK(StageConfig::from(Config{}, 1).epochs == 8);
  CHECK(StageConfig::from(Config{}, 1).freeze_action_rows);
  CHECK_FALSE(StageConfig::from(Config{}, 2).freeze_action_rows);

  TrainingState st = toy.fresh();
  try {
    run_stage1(st, toy.parts.train, toy.cb, toy.vocab, toy.stage(2, 1));
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfiguration);
  }
}

TEST_CASE("stage 2 needs stage 1 unless overridden") {
  const Toy& toy = Toy::get();
  TrainingState st = toy.fresh();
  try {
    run_stage2(st, toy.parts.train, toy.cb, toy.vocab, toy.stage(2, 1));
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfiguration);
  }
  StageConfig skip = toy.stage(2, 1);
  skip.allow_skip_stage1 = true;
  CHECK(run_stage2(st, toy.parts.train, toy.cb, toy.vocab, skip).size() == 1);
  CHECK(st.stage == 2);
}

TEST_CASE("two-stage training on the toy set") {
  const Toy& toy = Toy::get();
  TrainingState st = toy.fresh();
  const auto rows = st.model.action_embeddings();
  const auto log1 = run_stage1(st, toy.parts.train, toy.cb, toy.vocab, toy.stage(1, 6));
  REQUIRE(log1.size() == 6);
  CHECK(st.stage1_complete);
  CHECK(log1[1].total_loss < log1[0].total_loss);
  CHECK(log1[2].total_loss < log1[1].total_loss);
  for (const auto& r : log1) {
    CHECK(r.masked_reasoning == 0);
    CHECK(r.masked_action > 0);
    CHECK(r.wall_seconds == 0.0);
  }
  CHECK(st.model.action_embeddings() == rows);  // frozen through stage 1
  const double l2_stage1 = toy.val_l2(st, false);

  const auto log2 = run_stage2(st, toy.parts.train, toy.cb, toy.vocab, toy.stage(2, 6));
  REQUIRE(log2.size() == 6);
  for (const auto& r : log2) {
    CHECK(r.stage == 2);
    CHECK(r.masked_reasoning > 0);
    CHECK(r.masked_action > 0);
    CHECK(r.reasoning_loss > 0.0);
  }
  CHECK_FALSE(st.model.action_embeddings() == rows);
  const double l2_stage2 = toy.val_l2(st, true);
  MESSAGE("validation L2 after stage 1 " << l2_stage1 << ", after stage 2 " << l2_stage2);
  CHECK(l2_stage2 <= 1.1 * l2_stage1);

  // Same stage-2 budget without the warm-up.
  TrainingState cold = toy.fresh();
  StageConfig skip = toy.stage(2, 6);
  skip.allow_skip_stage1 = true;
  run_stage2(cold, toy.parts.train, toy.cb, toy.vocab, skip);
  const double l2_skip = toy.val_l2(cold, true);
  MESSAGE("validation L2 without stage 1 " << l2_skip);
  CHECK(l2_skip >= l2_stage2);

  const std::string csv = log_csv(st.log);
  CHECK(csv.rfind("epoch,stage,total_loss,action_loss,reasoning_loss,wall_seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
}

TEST_CASE("resume from a checkpoint is bit identical") {
  const Toy& toy = Toy::get();
  const std::span<const traj::Sample> train(toy.parts.train.data(), 400);
  const StageConfig c1 = toy.stage(1, 3);

  TrainingState straight = toy.fresh(8);
  run_stage1(straight, train, toy.cb, toy.vocab, c1);

  TempDir dir("ckpt");
  TrainingState first = toy.fresh(8);
  first.codebook_sha256 = sha256_hex(codebook::to_json(toy.cb));
  run_stage1(first, train, toy.cb, toy.vocab, c1, 2);
  save_checkpoint(first, dir.file("a.ckpt"));
  TrainingState resumed = load_checkpoint(dir.file("a.ckpt"), first.codebook_sha256);
  CHECK(resumed.model == first.model);
  CHECK(resumed.adam == first.adam);
  CHECK(resumed.rng == first.rng);
  CHECK(resumed.epochs_done == 2);
  CHECK_FALSE(resumed.stage1_complete);
  run_stage1(resumed, train, toy.cb, toy.vocab, c1);

  CHECK(resumed.model.params() == straight.model.params());
  CHECK(resumed.adam == straight.adam);
  CHECK(resumed.log == straight.log);
  CHECK(resumed.stage1_complete);
  CHECK(checkpoint_bytes(resumed) != checkpoint_bytes(first));
}

TEST_CASE("checkpoint damage is detected") {
  const Toy& toy = Toy::get();
  TrainingState st = toy.fresh(9);
  st.codebook_sha256 = sha256_hex("codebook");
  st.embedding_sha256 = sha256_hex("embedding");
  const std::string bytes = checkpoint_bytes(st);
  CHECK(checkpoint_from_bytes(bytes).model == st.model);

  auto expect = [](std::string_view b, ErrorKind kind) {
    try {
      checkpoint_from_bytes(b);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
    }
  };
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  expect(flipped, ErrorKind::kIntegrity);
  expect(bytes.substr(0, bytes.size() - 10), ErrorKind::kIntegrity);
  expect(bytes.substr(0, 5), ErrorKind::kIntegrity);

  std::string versioned = bytes;
  const std::uint32_t other = kCheckpointVersion + 1;
  std::memcpy(versioned.data() + 8, &other, sizeof other);
  expect(reseal(versioned), ErrorKind::kFormat);
  std::string magic = bytes;
  magic[0] = 'X';
  expect(reseal(magic), ErrorKind::kFormat);

  TempDir dir("ckpt2");
  save_checkpoint(st, dir.file("c.ckpt"));
  CHECK_NOTHROW(load_checkpoint(dir.file("c.ckpt"), st.codebook_sha256, st.embedding_sha256));
  try {
    load_checkpoint(dir.file("c.ckpt"), sha256_hex("another codebook"));
    FAIL("expected an integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIntegrity);
  }
  try {
    load_checkpoint(dir.file("c.ckpt"), {}, sha256_hex("another embedding"));
    FAIL("expected an integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIntegrity);
  }
}
