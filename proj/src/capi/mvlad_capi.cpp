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

#include "mvlad/mvlad.h"

#include <cmath>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "action_codebook/codebook.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/hash.hpp"
#include "decoding/decoding.hpp"
#include "eval/experiment.hpp"
#include "eval/metrics.hpp"
#include "geo_embedding/embedding.hpp"
#include "json.hpp"
#include "pipeline/checkpoint.hpp"
#include "pipeline/pipeline.hpp"
#include "traj_data/dataset.hpp"
#include "vla_sequence/vocabulary.hpp"

struct mvlad_config {
  mvlad::Config config;
};

struct mvlad_dataset {
  std::vector<mvlad::traj::Sample> samples;
};

struct mvlad_codebook {
  mvlad::codebook::Codebook codebook;
};

struct mvlad_embedding {
  mvlad::embed::EmbeddingModel model;
};

struct mvlad_model {
  mvlad::codebook::Codebook codebook;
  mvlad::seq::Vocabulary vocab;
  mvlad::pipeline::TrainingState state;
};

namespace {

using namespace mvlad;

thread_local std::string g_last_error;
thread_local std::string g_table;

mvlad_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape:
    case ErrorKind::kIndex:
      return MVLAD_INVALID_ARGUMENT;
    case ErrorKind::kValidation:
    case ErrorKind::kTokenization:
    case ErrorKind::kConfiguration:
    case ErrorKind::kScheduler:
    case ErrorKind::kIncompleteDecode:
      return MVLAD_VALIDATION;
    case ErrorKind::kParse: return MVLAD_PARSE;
    case ErrorKind::kFormat: return MVLAD_FORMAT;
    case ErrorKind::kIntegrity: return MVLAD_INTEGRITY;
    case ErrorKind::kIo: return MVLAD_IO;
    case ErrorKind::kTraining:
    case ErrorKind::kEvaluation:
      return MVLAD_TRAINING;
    case ErrorKind::kUsage: return MVLAD_USAGE;
  }
  return MVLAD_INTERNAL;
}

template <class F>
mvlad_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MVLAD_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MVLAD_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MVLAD_INTERNAL;
  }
}

template <class T>
void need(const T* p, const char* name) {
  if (p == nullptr) fail(ErrorKind::kShape, std::string(name) + " must not be null");
}

// Null configs act as empty ones.
const Config& cfg_of(const mvlad_config* c) {
  static const Config kEmpty;
  return c == nullptr ? kEmpty : c->config;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

mvlad_report to_c(const eval::PlanningReport& r) {
  mvlad_report out{};
  out.l2_1s = r.l2_1s;
  out.l2_2s = r.l2_2s;
  out.l2_3s = r.l2_3s;
  out.l2_avg = r.l2_avg;
  out.failure_rate = r.failure_rate;
  out.steps_to_action_ready = r.steps_to_action_ready;
  out.wall_ms_per_decode = r.wall_ms_per_decode;
  out.token_accuracy = r.token_accuracy.value_or(kNaN);
  out.label_match = r.label_match.value_or(kNaN);
  out.decodes = r.decodes;
  return out;
}

eval::PlanningReport from_c(const mvlad_report& r) {
  eval::PlanningReport out;
  out.l2_1s = r.l2_1s;
  out.l2_2s = r.l2_2s;
  out.l2_3s = r.l2_3s;
  out.l2_avg = r.l2_avg;
  out.failure_rate = r.failure_rate;
  out.steps_to_action_ready = r.steps_to_action_ready;
  out.wall_ms_per_decode = r.wall_ms_per_decode;
  if (!std::isnan(r.token_accuracy)) out.token_accuracy = r.token_accuracy;
  if (!std::isnan(r.label_match)) out.label_match = r.label_match;
  out.decodes = r.decodes;
  return out;
}

std::string codebook_digest(const codebook::Codebook& cb) { return sha256_hex(codebook::to_json(cb)); }

}  // namespace

extern "C" {

const char* mvlad_last_error(void) { return g_last_error.c_str(); }

const char* mvlad_status_name(mvlad_status status) {
  switch (status) {
    case MVLAD_OK: return "ok";
    case MVLAD_INVALID_ARGUMENT: return "invalid argument";
    case MVLAD_VALIDATION: return "validation error";
    case MVLAD_PARSE: return "parse error";
    case MVLAD_FORMAT: return "format error";
    case MVLAD_INTEGRITY: return "integrity error";
    case MVLAD_IO: return "i/o error";
    case MVLAD_TRAINING: return "training error";
    case MVLAD_USAGE: return "usage error";
    case MVLAD_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mvlad_version(void) { return "0.1.0"; }

mvlad_status mvlad_config_create(mvlad_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new mvlad_config{};
  });
}

mvlad_status mvlad_config_load(const char* path, mvlad_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mvlad_config{Config::from_file(path)};
  });
}

mvlad_status mvlad_config_set(mvlad_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    config->config.set(key, value);
  });
}

void mvlad_config_free(mvlad_config* config) { delete config; }

mvlad_status mvlad_dataset_generate(const mvlad_config* config, uint64_t n, uint64_t seed, mvlad_dataset** out) {
  return guarded([&] {
    need(out, "out");
    const auto gen = traj::GeneratorConfig::from(cfg_of(config));
    numerics::Rng rng(seed);
    *out = new mvlad_dataset{traj::generate_dataset(n, rng, gen)};
  });
}

mvlad_status mvlad_dataset_load(const char* path, mvlad_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mvlad_dataset{traj::load_dataset(path)};
  });
}

mvlad_status mvlad_dataset_save(const mvlad_dataset* dataset, const char* path) {
  return guarded([&] {
    need(dataset, "dataset");
    need(path, "path");
    traj::save_dataset(path, dataset->samples);
  });
}

mvlad_status mvlad_dataset_split(const mvlad_dataset* dataset, const mvlad_config* config, uint64_t seed,
                                 mvlad_dataset** train, mvlad_dataset** val, mvlad_dataset** test) {
  return guarded([&] {
    need(dataset, "dataset");
    need(train, "train");
    need(val, "val");
    need(test, "test");
    const Config& c = cfg_of(config);
    const std::array<double, 3> fractions = {c.get_double("split_train", 0.8), c.get_double("split_val", 0.1),
                                             c.get_double("split_test", 0.1)};
    numerics::Rng rng(seed, 2);
    auto parts = traj::split_dataset(dataset->samples, fractions, rng);
    auto a = std::make_unique<mvlad_dataset>(mvlad_dataset{std::move(parts.train)});
    auto b = std::make_unique<mvlad_dataset>(mvlad_dataset{std::move(parts.val)});
    auto d = std::make_unique<mvlad_dataset>(mvlad_dataset{std::move(parts.test)});
    *train = a.release();
    *val = b.release();
    *test = d.release();
  });
}

size_t mvlad_dataset_size(const mvlad_dataset* dataset) { return dataset == nullptr ? 0 : dataset->samples.size(); }

mvlad_status mvlad_dataset_trajectory(const mvlad_dataset* dataset, size_t index, double* xy, size_t capacity,
                                      size_t* horizon) {
  return guarded([&] {
    need(dataset, "dataset");
    need(horizon, "horizon");
    require(index < dataset->samples.size(), ErrorKind::kIndex, "sample index out of range");
    const auto& t = dataset->samples[index].trajectory;
    *horizon = t.size();
    require(xy != nullptr && capacity >= 2 * t.size(), ErrorKind::kShape,
            "buffer needs room for " + std::to_string(2 * t.size()) + " doubles");
    for (std::size_t k = 0; k < t.size(); ++k) {
      xy[2 * k] = t[k].x;
      xy[2 * k + 1] = t[k].y;
    }
  });
}

void mvlad_dataset_free(mvlad_dataset* dataset) { delete dataset; }

mvlad_status mvlad_codebook_fit(const mvlad_dataset* dataset, const mvlad_config* config, uint64_t seed,
                                mvlad_codebook** out) {
  return guarded([&] {
    need(dataset, "dataset");
    need(out, "out");
    const Config& c = cfg_of(config);
    codebook::KMeansOptions opts;
    opts.n = c.get_uint("codebook_size", opts.n);
    opts.max_iter = c.get_uint("kmeans_max_iter", opts.max_iter);
    opts.tol = c.get_double("kmeans_tol", opts.tol);
    const auto rep = codebook::parse_representation(c.get_string("representation", "waypoint"));
    numerics::Rng rng(seed, 3);
    const auto pool = codebook::Codebook::pool(dataset->samples, rep);
    *out = new mvlad_codebook{codebook::fit_kmeans(pool, opts, rng, rep)};
  });
}

mvlad_status mvlad_codebook_load(const char* path, mvlad_codebook** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mvlad_codebook{codebook::load_codebook(path)};
  });
}

mvlad_status mvlad_codebook_save(const mvlad_codebook* cb, const char* path) {
  return guarded([&] {
    need(cb, "codebook");
    need(path, "path");
    codebook::save_codebook(cb->codebook, path);
  });
}

size_t mvlad_codebook_size(const mvlad_codebook* cb) { return cb == nullptr ? 0 : cb->codebook.size(); }

mvlad_status mvlad_codebook_quantize(const mvlad_codebook* cb, double x, double y, size_t* index) {
  return guarded([&] {
    need(cb, "codebook");
    need(index, "index");
    require(std::isfinite(x) && std::isfinite(y), ErrorKind::kValidation, "waypoint must be finite");
    *index = cb->codebook.quantize({x, y});
  });
}

mvlad_status mvlad_codebook_dequantize(const mvlad_codebook* cb, size_t index, double* x, double* y) {
  return guarded([&] {
    need(cb, "codebook");
    need(x, "x");
    need(y, "y");
    const auto w = cb->codebook.dequantize(index);
    *x = w.x;
    *y = w.y;
  });
}

mvlad_status mvlad_codebook_floor(const mvlad_codebook* cb, const mvlad_dataset* dataset, double out[4]) {
  return guarded([&] {
    need(cb, "codebook");
    need(dataset, "dataset");
    need(out, "out");
    const auto f = codebook::quantization_floor(dataset->samples, cb->codebook);
    out[0] = f.at_1s;
    out[1] = f.at_2s;
    out[2] = f.at_3s;
    out[3] = f.avg;
  });
}

void mvlad_codebook_free(mvlad_codebook* cb) { delete cb; }

mvlad_status mvlad_embedding_train(const mvlad_codebook* cb, const mvlad_dataset* dataset, const mvlad_config* config,
                                   uint64_t seed, mvlad_embedding** out) {
  return guarded([&] {
    need(cb, "codebook");
    need(dataset, "dataset");
    need(out, "out");
    const auto ec = embed::EmbedTrainConfig::from(cfg_of(config), seed);
    auto model = embed::train_embeddings(cb->codebook, dataset->samples, ec);
    // Random rows keep the trained rows' scale so only the geometry differs.
    if (eval::parse_embedding_init(cfg_of(config).get_string("embedding_init", "geometry")) ==
        eval::EmbeddingInit::kRandom) {
      const auto e = model.embeddings.data();
      double s = 0.0;
      for (double v : e) s += v * v;
      numerics::Rng rng(seed, 4);
      model.embeddings =
          embed::random_embeddings(model.n(), model.d(), std::sqrt(s / static_cast<double>(e.size())), rng);
    }
    *out = new mvlad_embedding{std::move(model)};
  });
}

mvlad_status mvlad_embedding_load(const char* path, mvlad_embedding** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mvlad_embedding{embed::load_embedding(path)};
  });
}

mvlad_status mvlad_embedding_save(const mvlad_embedding* e, const char* path) {
  return guarded([&] {
    need(e, "embedding");
    need(path, "path");
    embed::save_embedding(e->model, path);
  });
}

mvlad_status mvlad_embedding_save_log(const mvlad_embedding* e, const char* path) {
  return guarded([&] {
    need(e, "embedding");
    need(path, "path");
    write_file(path, embed::log_csv(e->model.log));
  });
}

mvlad_status mvlad_embedding_alignment(const mvlad_embedding* e, const mvlad_codebook* cb, double* score) {
  return guarded([&] {
    need(e, "embedding");
    need(cb, "codebook");
    need(score, "score");
    *score = embed::metric_alignment_score(e->model.embeddings, cb->codebook);
  });
}

void mvlad_embedding_free(mvlad_embedding* e) { delete e; }

mvlad_status mvlad_model_create(const mvlad_codebook* cb, const mvlad_embedding* e, const mvlad_config* config,
                                uint64_t seed, mvlad_model** out) {
  return guarded([&] {
    need(cb, "codebook");
    need(e, "embedding");
    need(out, "out");
    const Config& c = cfg_of(config);
    auto vocab = seq::build_vocab(cb->codebook, traj::template_words());
    const auto gen = traj::GeneratorConfig::from(c);
    const auto pc = model::PredictorConfig::from(c, vocab.size(), pipeline::max_sequence_length(gen.horizon),
                                                 e->model.d(), seed);
    auto state = pipeline::init_training(pc, e->model.embeddings, vocab, seed);
    state.codebook_sha256 = codebook_digest(cb->codebook);
    state.embedding_sha256 = sha256_hex(embed::to_json(e->model));
    *out = new mvlad_model{cb->codebook, std::move(vocab), std::move(state)};
  });
}

mvlad_status mvlad_model_train_stage(mvlad_model* m, const mvlad_dataset* train, const mvlad_config* config,
                                     int stage) {
  return guarded([&] {
    need(m, "model");
    need(train, "dataset");
    require(stage == 1 || stage == 2, ErrorKind::kUsage, "stage must be 1 or 2");
    const auto sc = pipeline::StageConfig::from(cfg_of(config), stage);
    if (stage == 1) {
      pipeline::run_stage1(m->state, train->samples, m->codebook, m->vocab, sc);
    } else {
      pipeline::run_stage2(m->state, train->samples, m->codebook, m->vocab, sc);
    }
  });
}

mvlad_status mvlad_model_save(const mvlad_model* m, const char* path) {
  return guarded([&] {
    need(m, "model");
    need(path, "path");
    pipeline::save_checkpoint(m->state, path);
  });
}

mvlad_status mvlad_model_load(const char* path, const mvlad_codebook* cb, const mvlad_embedding* e,
                              mvlad_model** out) {
  return guarded([&] {
    need(path, "path");
    need(cb, "codebook");
    need(out, "out");
    const std::string emb_digest = e == nullptr ? std::string() : sha256_hex(embed::to_json(e->model));
    auto state = pipeline::load_checkpoint(path, codebook_digest(cb->codebook), emb_digest);
    auto vocab = seq::build_vocab(cb->codebook, traj::template_words());
    require(state.model.config().vocab_size == vocab.size() && state.model.action_begin() == vocab.action_begin(),
            ErrorKind::kIntegrity, "checkpoint vocabulary does not match the codebook");
    *out = new mvlad_model{cb->codebook, std::move(vocab), std::move(state)};
  });
}

mvlad_status mvlad_model_save_log(const mvlad_model* m, const char* path) {
  return guarded([&] {
    need(m, "model");
    need(path, "path");
    write_file(path, pipeline::log_csv(m->state.log));
  });
}

int mvlad_model_stage(const mvlad_model* m) { return m == nullptr ? 0 : m->state.stage; }

mvlad_status mvlad_model_decode(const mvlad_model* m, const mvlad_dataset* dataset, const mvlad_config* config,
                                const char* trace_path, const char* predictions_path, mvlad_report* report) {
  return guarded([&] {
    need(m, "model");
    need(dataset, "dataset");
    const auto dc = decode::DecodeConfig::from(cfg_of(config), 0);
    const bool reasoning = m->state.stage == 2;
    std::span<const traj::Sample> samples = dataset->samples;
    const std::size_t limit = cfg_of(config).get_uint("decode_limit", 0);
    if (limit > 0 && limit < samples.size()) samples = samples.first(limit);
    const auto res = eval::evaluate(m->state.model, m->codebook, m->vocab, samples, dc, reasoning);
    if (trace_path != nullptr) {
      std::string trace;
      for (std::size_t i = 0; i < res.decodes.size(); ++i) trace += decode::trace_jsonl(res.decodes[i].schedule, i, dc.policy);
      write_file(trace_path, trace);
    }
    if (predictions_path != nullptr) {
      std::string lines;
      for (std::size_t i = 0; i < res.decodes.size(); ++i) {
        nlohmann::json j = {{"index", i}, {"valid", res.outcomes[i].valid}};
        if (res.outcomes[i].valid) {
          nlohmann::json pts = nlohmann::json::array();
          for (const auto& w : decode::extract_trajectory(res.decodes[i].sequence, m->codebook, m->vocab)) {
            pts.push_back({w.x, w.y});
          }
          j["waypoints"] = pts;
        }
        if (reasoning) {
          std::string text;
          for (const auto& w : seq::reasoning_words(res.decodes[i].sequence, m->vocab)) {
            text += text.empty() ? w : " " + w;
          }
          j["reasoning"] = text;
        }
        lines += j.dump();
        lines += '\n';
      }
      write_file(predictions_path, lines);
    }
    if (report != nullptr) *report = to_c(res.report);
  });
}

void mvlad_model_free(mvlad_model* m) { delete m; }

mvlad_status mvlad_latency_from_traces(const char* priority_trace_path, const char* global_trace_path,
                                       mvlad_latency* out) {
  return guarded([&] {
    need(priority_trace_path, "priority trace path");
    need(global_trace_path, "global trace path");
    need(out, "out");
    const auto p = eval::parse_trace_jsonl(read_file(priority_trace_path));
    const auto g = eval::parse_trace_jsonl(read_file(global_trace_path));
    const auto r = eval::latency_report(p, g);
    *out = mvlad_latency{r.priority.decodes, r.priority.mean_steps, r.priority.median_steps, r.priority.mean_ms,
                         r.global.decodes,   r.global.mean_steps,   r.global.median_steps,   r.global.mean_ms,
                         r.step_ratio,       r.ms_ratio};
  });
}

mvlad_status mvlad_latency_write_csv(const mvlad_latency* l, const char* path) {
  return guarded([&] {
    need(l, "latency");
    need(path, "path");
    eval::LatencyReport r;
    r.priority = {std::string(decode::policy_name(decode::Policy::kActionPriority)), l->priority_decodes,
                  l->priority_mean_steps, l->priority_median_steps, l->priority_mean_ms, 0.0};
    r.global = {std::string(decode::policy_name(decode::Policy::kGlobalConfidence)), l->global_decodes,
                l->global_mean_steps, l->global_median_steps, l->global_mean_ms, 0.0};
    r.step_ratio = l->step_ratio;
    r.ms_ratio = l->ms_ratio;
    write_file(path, eval::latency_csv(r));
  });
}

mvlad_status mvlad_report_write_csv(const mvlad_report* reports, const char* const* labels, size_t count,
                                    const char* path) {
  return guarded([&] {
    need(path, "path");
    require(count == 0 || (reports != nullptr && labels != nullptr), ErrorKind::kShape, "reports and labels needed");
    std::string out = "label," + eval::report_csv_header() + "\n";
    for (std::size_t i = 0; i < count; ++i) {
      need(labels[i], "label");
      out += std::string(labels[i]) + ',' + eval::report_csv_row(from_c(reports[i])) + '\n';
    }
    write_file(path, out);
  });
}

const char* mvlad_report_table(const mvlad_report* report) {
  g_table = report == nullptr ? std::string() : eval::report_table(from_c(*report));
  return g_table.c_str();
}

mvlad_status mvlad_ablate(const mvlad_config* config, const char* study, uint64_t seed, const char* csv_path) {
  return guarded([&] {
    need(study, "study");
    need(csv_path, "csv path");
    const auto s = eval::parse_study(study);
    const auto spec = eval::ExperimentSpec::from(cfg_of(config), seed);
    const auto rows = eval::ablate(s, spec);
    write_file(csv_path, eval::ablation_csv(rows));
  });
}

}  // extern "C"
