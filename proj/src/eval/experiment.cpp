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

#include "eval/experiment.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "core/hash.hpp"

namespace mvlad::eval {
namespace {

enum Stream : std::uint64_t { kData = 1, kSplit, kKMeans, kRandomEmbedding };

double rms(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

PlanningReport summarize(std::span<const decode::DecodeResult> decodes, std::span<const DecodeOutcome> outcomes,
                         std::span<const traj::Sample> samples, const codebook::Codebook& cb,
                         const seq::Vocabulary& vocab, bool include_reasoning, double dt) {
  require(decodes.size() == samples.size() && outcomes.size() == samples.size(), ErrorKind::kValidation,
          "decodes, outcomes and samples must align");
  PlanningReport r;
  r.decodes = decodes.size();
  r.failure_rate = failure_rate(outcomes);
  std::vector<traj::HorizonL2> errors;
  double steps = 0.0;
  double ms = 0.0;
  double tok_sum = 0.0;
  std::size_t tok_n = 0;
  std::size_t label_hits = 0;
  for (std::size_t i = 0; i < decodes.size(); ++i) {
    const auto& d = decodes[i];
    steps += static_cast<double>(d.schedule.action_ready_step);
    for (const auto& rec : d.schedule.steps) ms += rec.wall_ms;
    if (!outcomes[i].valid) continue;
    errors.push_back(traj::l2_at_horizons(decode::extract_trajectory(d.sequence, cb, vocab), samples[i].trajectory, dt));
    if (include_reasoning) {
      const auto& s = d.sequence;
      const auto begin = s.ids.begin() + static_cast<std::ptrdiff_t>(s.layout.reasoning_begin());
      const std::vector<int> predicted(begin, begin + static_cast<std::ptrdiff_t>(s.layout.reasoning));
      const auto truth = seq::tokenize_reasoning(samples[i].reasoning, vocab, s.layout.reasoning);
      const auto score = reasoning_accuracy(predicted, truth, vocab, samples[i].label);
      if (score.token_accuracy) {
        tok_sum += *score.token_accuracy;
        ++tok_n;
      }
      label_hits += score.label_match ? 1 : 0;
    }
  }
  if (!errors.empty()) {
    const auto m = traj::mean_l2(errors);
    r.l2_1s = m.at_1s;
    r.l2_2s = m.at_2s;
    r.l2_3s = m.at_3s;
    r.l2_avg = m.avg;
  }
  if (!decodes.empty()) {
    r.steps_to_action_ready = steps / static_cast<double>(decodes.size());
    r.wall_ms_per_decode = ms / static_cast<double>(decodes.size());
  }
  if (include_reasoning && !errors.empty()) {
    if (tok_n > 0) r.token_accuracy = tok_sum / static_cast<double>(tok_n);
    r.label_match = static_cast<double>(label_hits) / static_cast<double>(errors.size());
  }
  return r;
}

EvalResult evaluate(const model::Predictor& model, const codebook::Codebook& cb, const seq::Vocabulary& vocab,
                    std::span<const traj::Sample> samples, const decode::DecodeConfig& config,
                    bool include_reasoning) {
  EvalResult out;
  const decode::Predict predict = [&model](const seq::TokenSequence& s) { return model.forward_predict(s); };
  for (const auto& sample : samples) {
    const auto prompt = seq::masked_prompt(sample, vocab, sample.trajectory.size(), include_reasoning);
    out.decodes.push_back(decode::run_decode(predict, prompt, vocab, config));
    DecodeOutcome o;
    try {
      decode::extract_trajectory(out.decodes.back().sequence, cb, vocab);
    } catch (const Error& e) {
      o.valid = false;
      o.error = e.what();
    }
    out.outcomes.push_back(std::move(o));
  }
  out.report = summarize(out.decodes, out.outcomes, samples, cb, vocab, include_reasoning);
  return out;
}

std::string_view embedding_init_name(EmbeddingInit e) { return e == EmbeddingInit::kGeometry ? "geometry" : "random"; }

EmbeddingInit parse_embedding_init(std::string_view name) {
  if (name == "geometry") return EmbeddingInit::kGeometry;
  if (name == "random") return EmbeddingInit::kRandom;
  fail(ErrorKind::kValidation, "unknown embedding kind '" + std::string(name) + "'");
}

ExperimentSpec ExperimentSpec::from(const Config& cfg, std::uint64_t seed) {
  ExperimentSpec s;
  s.seed = seed;
  s.samples = cfg.get_uint("ablate_samples", s.samples);
  s.eval_samples = cfg.get_uint("ablate_eval_samples", s.eval_samples);
  s.split = {cfg.get_double("split_train", s.split[0]), cfg.get_double("split_val", s.split[1]),
             cfg.get_double("split_test", s.split[2])};
  s.generator = traj::GeneratorConfig::from(cfg);
  s.kmeans.n = cfg.get_uint("codebook_size", s.kmeans.n);
  s.kmeans.max_iter = cfg.get_uint("kmeans_max_iter", s.kmeans.max_iter);
  s.kmeans.tol = cfg.get_double("kmeans_tol", s.kmeans.tol);
  s.representation = codebook::parse_representation(cfg.get_string("representation", "waypoint"));
  s.embed = embed::EmbedTrainConfig::from(cfg, seed);
  s.embedding = parse_embedding_init(cfg.get_string("embedding_init", "geometry"));
  s.layers = cfg.get_uint("layers", s.layers);
  s.heads = cfg.get_uint("heads", s.heads);
  s.ff_width = cfg.get_uint("ff_width", s.ff_width);
  s.stage1 = pipeline::StageConfig::from(cfg, 1);
  s.stage2 = pipeline::StageConfig::from(cfg, 2);
  s.skip_stage1 = cfg.get_bool("allow_skip_stage1", false);
  s.decode = decode::DecodeConfig::from(cfg, seed);
  require(s.samples >= 10, ErrorKind::kValidation, "an experiment needs at least 10 samples");
  return s;
}

TrainedPipeline train_pipeline(const ExperimentSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  numerics::Rng data_rng(spec.seed, kData);
  const auto data = traj::generate_dataset(spec.samples, data_rng, spec.generator);
  numerics::Rng split_rng(spec.seed, kSplit);
  auto parts = traj::split_dataset(data, spec.split, split_rng);
  require(!parts.train.empty() && !parts.test.empty(), ErrorKind::kValidation, "train and test splits must be non-empty");
  std::size_t n_eval = parts.test.size();
  if (spec.eval_samples > 0 && spec.eval_samples < n_eval) n_eval = spec.eval_samples;
  const std::span<const traj::Sample> test = std::span<const traj::Sample>(parts.test).first(n_eval);

  numerics::Rng km_rng(spec.seed, kKMeans);
  const auto pool = codebook::Codebook::pool(parts.train, spec.representation);
  auto cb = codebook::fit_kmeans(pool, spec.kmeans, km_rng, spec.representation);
  const auto floor = codebook::quantization_floor(test, cb);

  auto embed_cfg = spec.embed;
  embed_cfg.seed = spec.seed;
  const auto trained = embed::train_embeddings(cb, parts.train, embed_cfg);
  numerics::Tensor e = trained.embeddings;
  if (spec.embedding == EmbeddingInit::kRandom) {
    numerics::Rng rng(spec.seed, kRandomEmbedding);
    e = embed::random_embeddings(cb.size(), embed_cfg.dim, rms(trained.embeddings.data()), rng);
  }
  const double alignment = embed::metric_alignment_score(e, cb);

  auto vocab = seq::build_vocab(cb, traj::template_words());
  model::PredictorConfig pc;
  pc.layers = spec.layers;
  pc.heads = spec.heads;
  pc.ff_width = spec.ff_width;
  pc.width = embed_cfg.dim;
  pc.vocab_size = vocab.size();
  pc.max_length = pipeline::max_sequence_length(spec.generator.horizon);
  pc.seed = spec.seed;
  auto state = pipeline::init_training(pc, e, vocab, spec.seed);
  if (!spec.skip_stage1) pipeline::run_stage1(state, parts.train, cb, vocab, spec.stage1);
  auto s2 = spec.stage2;
  s2.allow_skip_stage1 = s2.allow_skip_stage1 || spec.skip_stage1;
  pipeline::run_stage2(state, parts.train, cb, vocab, s2);

  TrainedPipeline out{std::move(parts), std::move(cb), std::move(vocab), std::move(state), floor, alignment, n_eval,
                      0.0};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  const TrainedPipeline p = train_pipeline(spec);
  ExperimentResult res;
  res.floor = p.floor;
  res.alignment = p.alignment;
  res.log = p.state.log;
  res.train_samples = p.data.train.size();
  res.eval_samples = p.eval_samples;
  res.report = evaluate(p.state.model, p.codebook, p.vocab, p.eval_set(), spec.decode, true).report;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

Study parse_study(std::string_view name) {
  if (name == "vocab") return Study::kVocab;
  if (name == "embedding") return Study::kEmbedding;
  if (name == "representation") return Study::kRepresentation;
  if (name == "all") return Study::kAll;
  fail(ErrorKind::kUsage, "unknown study '" + std::string(name) + "' (vocab, embedding, representation, all)");
}

std::string spec_hash(const ExperimentSpec& s) {
  std::ostringstream o;
  o << "seed=" << s.seed << ";samples=" << s.samples << ";eval=" << s.eval_samples << ";split=" << fmt(s.split[0])
    << ',' << fmt(s.split[1]) << ',' << fmt(s.split[2]) << ";gen=" << s.generator.horizon << ','
    << fmt(s.generator.dt) << ',' << fmt(s.generator.speed_max) << ',' << fmt(s.generator.curvature_max) << ','
    << fmt(s.generator.curved_fraction) << ";kmeans=" << s.kmeans.n << ',' << s.kmeans.max_iter << ','
    << fmt(s.kmeans.tol) << ";rep=" << codebook::representation_name(s.representation) << ";embed=" << s.embed.dim
    << ',' << s.embed.k_start << ',' << s.embed.k_end << ',' << fmt(s.embed.tau) << ',' << fmt(s.embed.tau_con) << ','
    << fmt(s.embed.lambda_recon) << ',' << fmt(s.embed.lambda_geom) << ',' << fmt(s.embed.lambda_contra) << ','
    << s.embed.epochs << ',' << s.embed.batch_size << ',' << fmt(s.embed.learning_rate) << ','
    << fmt(s.embed.momentum) << ',' << s.embed.max_samples << ";init=" << embedding_init_name(s.embedding)
    << ";model=" << s.layers << ',' << s.heads << ',' << s.ff_width << ";skip1=" << s.skip_stage1;
  for (const auto* st : {&s.stage1, &s.stage2}) {
    o << ";stage" << st->stage << '=' << st->epochs << ',' << st->batch_size << ',' << fmt(st->learning_rate) << ','
      << fmt(st->mask_eps) << ',' << st->importance_weight << ',' << st->freeze_action_rows;
  }
  o << ";decode=" << s.decode.total_steps << ',' << s.decode.action_steps << ','
    << decode::policy_name(s.decode.policy);
  return sha256_hex(o.str()).substr(0, 16);
}

std::vector<AblationRow> ablate(Study study, const ExperimentSpec& base) {
  std::vector<std::pair<std::string, std::pair<std::string, ExperimentSpec>>> plan;
  if (study == Study::kVocab || study == Study::kAll) {
    for (std::size_t n : {128, 256, 384}) {
      ExperimentSpec s = base;
      s.kmeans.n = n;
      plan.push_back({"vocab", {"n=" + std::to_string(n), s}});
    }
  }
  if (study == Study::kEmbedding || study == Study::kAll) {
    for (auto e : {EmbeddingInit::kGeometry, EmbeddingInit::kRandom}) {
      ExperimentSpec s = base;
      s.embedding = e;
      plan.push_back({"embedding", {std::string(embedding_init_name(e)), s}});
    }
  }
  if (study == Study::kRepresentation || study == Study::kAll) {
    for (auto r : {codebook::Representation::kWaypoint, codebook::Representation::kDisplacement}) {
      ExperimentSpec s = base;
      s.representation = r;
      plan.push_back({"representation", {std::string(codebook::representation_name(r)), s}});
    }
  }
  std::map<std::string, ExperimentResult> done;
  std::vector<AblationRow> rows;
  for (auto& [name, variant] : plan) {
    AblationRow row;
    row.study = name;
    row.variant = variant.first;
    row.spec = variant.second;
    row.config_hash = spec_hash(row.spec);
    auto it = done.find(row.config_hash);
    if (it == done.end()) it = done.emplace(row.config_hash, run_experiment(row.spec)).first;
    row.result = it->second;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "study,variant,codebook_size,representation,embedding," + report_csv_header() +
                    ",floor_avg,alignment,config_hash\n";
  for (const auto& r : rows) {
    std::ostringstream extra;
    extra.setf(std::ios::fixed);
    extra.precision(6);
    extra << r.result.floor.avg << ',' << r.result.alignment;
    out += r.study + ',' + r.variant + ',' + std::to_string(r.spec.kmeans.n) + ',' +
           std::string(codebook::representation_name(r.spec.representation)) + ',' +
           std::string(embedding_init_name(r.spec.embedding)) + ',' + report_csv_row(r.result.report) + ',' +
           extra.str() + ',' + r.config_hash + '\n';
  }
  return out;
}

}  // namespace mvlad::eval
