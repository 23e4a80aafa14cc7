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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "action_codebook/codebook.hpp"
#include "core/config.hpp"
#include "diffusion_model/predictor.hpp"
#include "numerics/rng.hpp"
#include "traj_data/dataset.hpp"
#include "vla_sequence/sequence.hpp"

namespace mvlad::pipeline {

struct StageConfig {
  int stage = 1;
  std::size_t epochs = 8;
  std::size_t batch_size = 64;
  double learning_rate = 3e-4;
  double mask_eps = 0.05;  // t ~ U(mask_eps, 1]
  bool importance_weight = false;
  bool freeze_action_rows = true;
  bool allow_skip_stage1 = false;
  bool record_timing = true;

  // Stage 1 freezes the action rows by default, stage 2 does not.
  static StageConfig from(const Config& cfg, int stage);
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based within its stage
  int stage = 1;
  double total_loss = 0.0;
  double action_loss = 0.0;
  double reasoning_loss = 0.0;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  std::size_t masked_action = 0;     // scored action positions over the epoch
  std::size_t masked_reasoning = 0;  // scored reasoning positions over the epoch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// Everything needed to continue training bit-identically.
struct TrainingState {
  model::Predictor model;
  model::AdamState adam;
  numerics::Rng rng;
  int stage = 1;
  std::size_t epochs_done = 0;  // within the current stage
  bool stage1_complete = false;
  std::vector<EpochRecord> log;
  std::string codebook_sha256;
  std::string embedding_sha256;

  TrainingState(model::Predictor m, std::uint64_t seed);
};

// Fresh training state for the given dataset geometry.
TrainingState init_training(const model::PredictorConfig& cfg, const numerics::Tensor& action_embeddings,
                            const seq::Vocabulary& vocab, std::uint64_t seed);

// Length of the longest sequence either stage produces.
std::size_t max_sequence_length(std::size_t horizon);

// Assembles every sample; throws a configuration error when a stage-1
// sequence carries reasoning.
std::vector<seq::TokenSequence> assemble_stage(std::span<const traj::Sample> samples, const codebook::Codebook& cb,
                                               const seq::Vocabulary& vocab, int stage);

// Runs up to `epoch_limit` more epochs of the stage, stopping at
// config.epochs. Returns the records produced by this call.
std::vector<EpochRecord> run_stage1(TrainingState& state, std::span<const traj::Sample> samples,
                                    const codebook::Codebook& cb, const seq::Vocabulary& vocab,
                                    const StageConfig& config,
                                    std::size_t epoch_limit = std::numeric_limits<std::size_t>::max());
// Needs a completed stage 1 unless config.allow_skip_stage1. Entering stage 2
// resets the optimizer.
std::vector<EpochRecord> run_stage2(TrainingState& state, std::span<const traj::Sample> samples,
                                    const codebook::Codebook& cb, const seq::Vocabulary& vocab,
                                    const StageConfig& config,
                                    std::size_t epoch_limit = std::numeric_limits<std::size_t>::max());

std::string log_csv(std::span<const EpochRecord> log);

}  // namespace mvlad::pipeline
