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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "action_codebook/codebook.hpp"
#include "core/config.hpp"
#include "decoding/decoding.hpp"
#include "diffusion_model/predictor.hpp"
#include "eval/metrics.hpp"
#include "geo_embedding/embedding.hpp"
#include "pipeline/pipeline.hpp"
#include "traj_data/dataset.hpp"
#include "vla_sequence/vocabulary.hpp"

namespace mvlad::eval {

struct EvalResult {
  PlanningReport report;
  std::vector<decode::DecodeResult> decodes;
  std::vector<DecodeOutcome> outcomes;
};

// Decodes every sample from a fully masked prompt and scores it against the
// ground truth. Reasoning is decoded and scored when `include_reasoning`.
EvalResult evaluate(const model::Predictor& model, const codebook::Codebook& cb, const seq::Vocabulary& vocab,
                    std::span<const traj::Sample> samples, const decode::DecodeConfig& config,
                    bool include_reasoning);

// Aggregates precomputed decodes; the pure half of evaluate().
PlanningReport summarize(std::span<const decode::DecodeResult> decodes, std::span<const DecodeOutcome> outcomes,
                         std::span<const traj::Sample> samples, const codebook::Codebook& cb,
                         const seq::Vocabulary& vocab, bool include_reasoning, double dt = 0.5);

enum class EmbeddingInit { kGeometry, kRandom };

std::string_view embedding_init_name(EmbeddingInit e);
EmbeddingInit parse_embedding_init(std::string_view name);

// One end-to-end configuration: data, codebook, embeddings, both stages and a
// held-out evaluation.
struct ExperimentSpec {
  std::uint64_t seed = 0;
  std::size_t samples = 20000;
  std::size_t eval_samples = 0;  // 0 evaluates the whole test split
  std::array<double, 3> split{0.8, 0.1, 0.1};
  traj::GeneratorConfig generator;
  codebook::KMeansOptions kmeans;
  codebook::Representation representation = codebook::Representation::kWaypoint;
  embed::EmbedTrainConfig embed;
  EmbeddingInit embedding = EmbeddingInit::kGeometry;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t ff_width = 256;
  pipeline::StageConfig stage1;
  pipeline::StageConfig stage2;
  bool skip_stage1 = false;
  decode::DecodeConfig decode;

  static ExperimentSpec from(const Config& cfg, std::uint64_t seed);
};

struct ExperimentResult {
  PlanningReport report;
  traj::HorizonL2 floor;  // quantization floor on the evaluated samples
  double alignment = 0.0;
  std::vector<pipeline::EpochRecord> log;
  std::size_t train_samples = 0;
  std::size_t eval_samples = 0;
  double seconds = 0.0;
};

// Everything run_experiment() builds before its held-out evaluation.
struct TrainedPipeline {
  traj::Split data;
  codebook::Codebook codebook;
  seq::Vocabulary vocab;
  pipeline::TrainingState state;
  traj::HorizonL2 floor;  // on the evaluated test samples
  double alignment = 0.0;
  std::size_t eval_samples = 0;
  double seconds = 0.0;

  std::span<const traj::Sample> eval_set() const { return std::span(data.test).first(eval_samples); }
};

TrainedPipeline train_pipeline(const ExperimentSpec& spec);

ExperimentResult run_experiment(const ExperimentSpec& spec);

enum class Study { kVocab, kEmbedding, kRepresentation, kAll };

Study parse_study(std::string_view name);

struct AblationRow {
  std::string study;
  std::string variant;
  ExperimentSpec spec;
  ExperimentResult result;
  std::string config_hash;
};

std::vector<AblationRow> ablate(Study study, const ExperimentSpec& base);

// One row per configuration: identifiers, PlanningReport columns, the
// quantization floor and the config hash.
std::string ablation_csv(std::span<const AblationRow> rows);

// Short digest of every setting that influences an experiment.
std::string spec_hash(const ExperimentSpec& spec);

}  // namespace mvlad::eval
