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

#include "pipeline/pipeline.hpp"

#include <chrono>
#include <numeric>
#include <sstream>

#include "core/error.hpp"

namespace mvlad::pipeline {
namespace {

constexpr std::uint64_t kTrainStream = 0x747261696e;

std::vector<EpochRecord> run_epochs(TrainingState& state, std::span<const seq::TokenSequence> seqs,
                                    const seq::Vocabulary& vocab, const StageConfig& config,
                                    std::size_t epoch_limit) {
  require(!seqs.empty(), ErrorKind::kValidation, "no training samples");
  model::TrainOptions options;
  options.adam.learning_rate = config.learning_rate;
  options.importance_weight = config.importance_weight;
  options.freeze_action_rows = config.freeze_action_rows;

  std::vector<std::size_t> order(seqs.size());
  std::vector<EpochRecord> produced;
  std::vector<seq::TokenSequence> batch;
  for (std::size_t run = 0; run < epoch_limit && state.epochs_done < config.epochs; ++run) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = state.epochs_done;
    rec.stage = state.stage;
    std::iota(order.begin(), order.end(), std::size_t{0});
    state.rng.shuffle(std::span<std::size_t>(order));
    std::size_t action_batches = 0;
    std::size_t reasoning_batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + config.batch_size);
      batch.clear();
      for (std::size_t i = b0; i < b1; ++i) {
        const double t = config.mask_eps + (1.0 - config.mask_eps) * (1.0 - state.rng.uniform());
        batch.push_back(seq::apply_forward_masking(seqs[order[i]], t, state.rng, vocab));
      }
      if (model::loss_position_count(batch, vocab) == 0) continue;
      const auto r = model::train_step(state.model, batch, vocab, state.adam, options);
      rec.total_loss += r.loss;
      if (r.action_count > 0) {
        rec.action_loss += r.action_loss;
        ++action_batches;
      }
      if (r.reasoning_count > 0) {
        rec.reasoning_loss += r.reasoning_loss;
        ++reasoning_batches;
      }
      rec.masked_action += r.action_count;
      rec.masked_reasoning += r.reasoning_count;
      ++rec.steps;
    }
    if (rec.steps > 0) rec.total_loss /= static_cast<double>(rec.steps);
    if (action_batches > 0) rec.action_loss /= static_cast<double>(action_batches);
    if (reasoning_batches > 0) rec.reasoning_loss /= static_cast<double>(reasoning_batches);
    if (config.record_timing) {
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    ++state.epochs_done;
    state.log.push_back(rec);
    produced.push_back(rec);
  }
  if (state.stage == 1 && state.epochs_done >= config.epochs) state.stage1_complete = true;
  return produced;
}

}  // namespace

StageConfig StageConfig::from(const Config& cfg, int stage) {
  StageConfig c;
  c.stage = stage;
  c.epochs = cfg.get_uint("epochs", c.epochs);
  c.batch_size = cfg.get_uint("batch_size", c.batch_size);
  c.learning_rate = cfg.get_double("learning_rate", c.learning_rate);
  c.mask_eps = cfg.get_double("mask_eps", c.mask_eps);
  c.importance_weight = cfg.get_bool("importance_weight", c.importance_weight);
  c.freeze_action_rows = stage == 1 ? cfg.get_bool("freeze_actions_stage1", true)
                                    : cfg.get_bool("freeze_actions_stage2", false);
  c.allow_skip_stage1 = cfg.get_bool("allow_skip_stage1", c.allow_skip_stage1);
  c.record_timing = cfg.get_bool("record_timing", c.record_timing);
  c.validate();
  return c;
}

void StageConfig::validate() const {
  require(stage == 1 || stage == 2, ErrorKind::kValidation, "stage must be 1 or 2");
  require(epochs >= 1 && batch_size >= 1, ErrorKind::kValidation, "epochs and batch size must be positive");
  require(learning_rate >= 0.0, ErrorKind::kValidation, "learning rate must be non-negative");
  require(mask_eps >= 0.0 && mask_eps < 1.0, ErrorKind::kValidation, "mask_eps must lie in [0, 1)");
}

TrainingState::TrainingState(model::Predictor m, std::uint64_t seed)
    : model(std::move(m)), rng(seed, kTrainStream) {
  adam.reset(model.params().size());
}

TrainingState init_training(const model::PredictorConfig& cfg, const numerics::Tensor& action_embeddings,
                            const seq::Vocabulary& vocab, std::uint64_t seed) {
  require(cfg.vocab_size == vocab.size(), ErrorKind::kValidation, "predictor vocabulary size differs from vocabulary");
  require(action_embeddings.rows() == vocab.action_size(), ErrorKind::kValidation,
          "embedding rows differ from the action block size");
  return TrainingState(model::Predictor(cfg, action_embeddings, vocab.action_begin()), seed);
}

std::size_t max_sequence_length(std::size_t horizon) {
  seq::SequenceLayout l;
  l.action = horizon;
  l.reasoning = seq::kReasoningLength;
  return l.length();
}

std::vector<seq::TokenSequence> assemble_stage(std::span<const traj::Sample> samples, const codebook::Codebook& cb,
                                               const seq::Vocabulary& vocab, int stage) {
  std::vector<seq::TokenSequence> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(seq::assemble_sequence(s, cb, vocab, stage == 2));
    if (stage == 1) {
      require(out.back().layout.reasoning == 0, ErrorKind::kConfiguration,
              "stage 1 sequences must not contain reasoning tokens");
    } else {
      require(out.back().layout.reasoning > 0, ErrorKind::kConfiguration,
              "stage 2 sequences must contain reasoning tokens");
    }
  }
  return out;
}

std::vector<EpochRecord> run_stage1(TrainingState& state, std::span<const traj::Sample> samples,
                                    const codebook::Codebook& cb, const seq::Vocabulary& vocab,
                                    const StageConfig& config, std::size_t epoch_limit) {
  config.validate();
  require(config.stage == 1, ErrorKind::kConfiguration, "stage 1 run given a stage 2 configuration");
  require(state.stage == 1, ErrorKind::kConfiguration, "training state has already entered stage 2");
  const auto seqs = assemble_stage(samples, cb, vocab, 1);
  return run_epochs(state, seqs, vocab, config, epoch_limit);
}

std::vector<EpochRecord> run_stage2(TrainingState& state, std::span<const traj::Sample> samples,
                                    const codebook::Codebook& cb, const seq::Vocabulary& vocab,
                                    const StageConfig& config, std::size_t epoch_limit) {
  config.validate();
  require(config.stage == 2, ErrorKind::kConfiguration, "stage 2 run given a stage 1 configuration");
  if (state.stage == 1) {
    require(state.stage1_complete || config.allow_skip_stage1, ErrorKind::kConfiguration,
            "stage 2 needs a completed stage 1 checkpoint (set allow_skip_stage1 to override)");
    state.stage = 2;
    state.epochs_done = 0;
    state.adam.reset(state.model.params().size());
  }
  const auto seqs = assemble_stage(samples, cb, vocab, 2);
  return run_epochs(state, seqs, vocab, config, epoch_limit);
}

std::string log_csv(std::span<const EpochRecord> log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,stage,total_loss,action_loss,reasoning_loss,wall_seconds\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << r.stage << ',' << r.total_loss << ',' << r.action_loss << ',' << r.reasoning_loss << ','
        << r.wall_seconds << '\n';
  }
  return out.str();
}

}  // namespace mvlad::pipeline
