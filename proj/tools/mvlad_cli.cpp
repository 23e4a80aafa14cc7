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

// Command-line front end over the mvlad C API.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvlad/mvlad.h"

namespace {

// Carries a status out of a subcommand to main().
class Failure : public std::runtime_error {
 public:
  Failure(mvlad_status status, const std::string& what) : std::runtime_error(what), status_(status) {}
  mvlad_status status() const { return status_; }

 private:
  mvlad_status status_;
};

void check(mvlad_status s, const std::string& context) {
  if (s != MVLAD_OK) throw Failure(s, context + ": " + mvlad_last_error());
}

int exit_code(mvlad_status s) {
  switch (s) {
    case MVLAD_OK: return 0;
    case MVLAD_USAGE: return 2;
    case MVLAD_VALIDATION:
    case MVLAD_PARSE:
    case MVLAD_INVALID_ARGUMENT:
      return 3;
    case MVLAD_FORMAT:
    case MVLAD_INTEGRITY:
      return 4;
    default: return 1;
  }
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using ConfigPtr = std::unique_ptr<mvlad_config, Deleter<mvlad_config, mvlad_config_free>>;
using DatasetPtr = std::unique_ptr<mvlad_dataset, Deleter<mvlad_dataset, mvlad_dataset_free>>;
using CodebookPtr = std::unique_ptr<mvlad_codebook, Deleter<mvlad_codebook, mvlad_codebook_free>>;
using EmbeddingPtr = std::unique_ptr<mvlad_embedding, Deleter<mvlad_embedding, mvlad_embedding_free>>;
using ModelPtr = std::unique_ptr<mvlad_model, Deleter<mvlad_model, mvlad_model_free>>;

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::map<std::string, std::string> overrides;  // from dedicated flags
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--config", c.config, "Config file (key = value lines)");
  sub->add_option("--out", c.out, "Output path")->required();
  sub->add_option("--set", c.sets, "Override a config key, key=value (repeatable)");
}

ConfigPtr load_config(const Common& c) {
  mvlad_config* raw = nullptr;
  if (c.config.empty()) {
    check(mvlad_config_create(&raw), "config");
  } else {
    check(mvlad_config_load(c.config.c_str(), &raw), "config " + c.config);
  }
  ConfigPtr cfg(raw);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure(MVLAD_USAGE, "--set expects key=value, got '" + kv + "'");
    check(mvlad_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set " + kv);
  }
  for (const auto& [k, v] : c.overrides) check(mvlad_config_set(cfg.get(), k.c_str(), v.c_str()), "--" + k);
  return cfg;
}

DatasetPtr load_dataset(const std::string& path) {
  mvlad_dataset* raw = nullptr;
  check(mvlad_dataset_load(path.c_str(), &raw), "dataset " + path);
  return DatasetPtr(raw);
}

CodebookPtr load_codebook(const std::string& path) {
  mvlad_codebook* raw = nullptr;
  check(mvlad_codebook_load(path.c_str(), &raw), "codebook " + path);
  return CodebookPtr(raw);
}

EmbeddingPtr load_embedding(const std::string& path) {
  mvlad_embedding* raw = nullptr;
  check(mvlad_embedding_load(path.c_str(), &raw), "embedding " + path);
  return EmbeddingPtr(raw);
}

ModelPtr load_model(const std::string& path, const mvlad_codebook* cb, const mvlad_embedding* e) {
  mvlad_model* raw = nullptr;
  check(mvlad_model_load(path.c_str(), cb, e, &raw), "checkpoint " + path);
  return ModelPtr(raw);
}

// Flags that were given on the command line become config overrides.
template <class T>
void override_if(CLI::Option* opt, Common& c, const std::string& key, const T& value) {
  if (opt->count() > 0) c.overrides[key] = std::to_string(value);
}

void override_if(CLI::Option* opt, Common& c, const std::string& key, const std::string& value) {
  if (opt->count() > 0) c.overrides[key] = value;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-diffusion vision-language-action planner toolkit"};
  app.require_subcommand(1);

  // gen-data
  Common gen;
  std::uint64_t gen_n = 1000;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset and its train/val/test split");
  add_common(gen_cmd, gen);
  gen_cmd->add_option("--n", gen_n, "Number of samples")->capture_default_str();

  // build-codebook
  Common cbk;
  std::string cbk_data;
  std::size_t cbk_n = 256;
  std::string cbk_rep;
  auto* cbk_cmd = app.add_subcommand("build-codebook", "Fit the action codebook with k-means");
  add_common(cbk_cmd, cbk);
  cbk_cmd->add_option("--data", cbk_data, "Training samples (JSONL)")->required();
  auto* cbk_n_opt = cbk_cmd->add_option("--n", cbk_n, "Codebook size");
  auto* cbk_rep_opt = cbk_cmd->add_option("--representation", cbk_rep, "waypoint or displacement");

  // train-embed
  Common emb;
  std::string emb_data, emb_cb;
  std::size_t emb_epochs = 0;
  auto* emb_cmd = app.add_subcommand("train-embed", "Train geometry-aware action embeddings");
  add_common(emb_cmd, emb);
  emb_cmd->add_option("--data", emb_data, "Training samples (JSONL)")->required();
  emb_cmd->add_option("--codebook", emb_cb, "Codebook file")->required();
  auto* emb_epochs_opt = emb_cmd->add_option("--epochs", emb_epochs, "Embedding epochs");

  // train-stage1 / train-stage2
  struct StageArgs {
    Common common;
    std::string data, codebook, embedding, checkpoint;
    std::size_t epochs = 0;
    bool skip_stage1 = false;
    CLI::Option* epochs_opt = nullptr;
  };
  StageArgs st1, st2;
  auto* st1_cmd = app.add_subcommand("train-stage1", "Action-only warm-up training");
  auto* st2_cmd = app.add_subcommand("train-stage2", "Joint action and reasoning training");
  for (auto [cmd, a] : {std::pair{st1_cmd, &st1}, std::pair{st2_cmd, &st2}}) {
    add_common(cmd, a->common);
    cmd->add_option("--data", a->data, "Training samples (JSONL)")->required();
    cmd->add_option("--codebook", a->codebook, "Codebook file")->required();
    cmd->add_option("--embedding", a->embedding, "Embedding file")->required();
    a->epochs_opt = cmd->add_option("--epochs", a->epochs, "Epochs for this stage");
  }
  st1_cmd->add_option("--resume", st1.checkpoint, "Continue from a stage-1 checkpoint");
  st2_cmd->add_option("--checkpoint", st2.checkpoint, "Stage-1 checkpoint");
  st2_cmd->add_flag("--skip-stage1", st2.skip_stage1, "Train stage 2 from scratch (ablation)");

  // decode
  Common dec;
  std::string dec_data, dec_cb, dec_ckpt, dec_pred, dec_policy;
  std::size_t dec_steps = 0, dec_action_steps = 0;
  auto* dec_cmd = app.add_subcommand("decode", "Decode samples and write a step trace (JSONL)");
  add_common(dec_cmd, dec);
  dec_cmd->add_option("--data", dec_data, "Samples to decode (JSONL)")->required();
  dec_cmd->add_option("--codebook", dec_cb, "Codebook file")->required();
  dec_cmd->add_option("--checkpoint", dec_ckpt, "Trained checkpoint")->required();
  dec_cmd->add_option("--predictions", dec_pred, "Also write decoded trajectories and reasoning (JSONL)");
  auto* dec_policy_opt = dec_cmd->add_option("--policy", dec_policy, "action_priority or global_confidence");
  auto* dec_steps_opt = dec_cmd->add_option("--steps", dec_steps, "Total decoding steps");
  auto* dec_as_opt = dec_cmd->add_option("--action-steps", dec_action_steps, "Steps reserved for action tokens");

  // eval
  Common ev;
  std::string ev_data, ev_cb, ev_ckpt, ev_ptrace, ev_gtrace;
  auto* ev_cmd = app.add_subcommand("eval", "Planning report for both decode policies plus latency");
  add_common(ev_cmd, ev);
  ev_cmd->add_option("--data", ev_data, "Held-out samples (JSONL)")->required();
  ev_cmd->add_option("--codebook", ev_cb, "Codebook file")->required();
  ev_cmd->add_option("--checkpoint", ev_ckpt, "Trained checkpoint")->required();
  ev_cmd->add_option("--priority-trace", ev_ptrace, "Existing action_priority trace");
  ev_cmd->add_option("--global-trace", ev_gtrace, "Existing global_confidence trace");

  // ablate
  Common abl;
  std::string abl_study = "all";
  std::string abl_embedding, abl_rep;
  auto* abl_cmd = app.add_subcommand("ablate", "Run an ablation study and write a comparison CSV");
  add_common(abl_cmd, abl);
  abl_cmd->add_option("--study", abl_study, "vocab, embedding, representation or all")->capture_default_str();
  auto* abl_emb_opt = abl_cmd->add_option("--embedding", abl_embedding, "Base embedding kind (geometry or random)");
  auto* abl_rep_opt = abl_cmd->add_option("--representation", abl_rep, "Base representation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) {
      const auto cfg = load_config(gen);
      mvlad_dataset* raw = nullptr;
      check(mvlad_dataset_generate(cfg.get(), gen_n, gen.seed, &raw), "gen-data");
      DatasetPtr all(raw);
      mvlad_dataset *tr = nullptr, *va = nullptr, *te = nullptr;
      check(mvlad_dataset_split(all.get(), cfg.get(), gen.seed, &tr, &va, &te), "split");
      DatasetPtr train(tr), val(va), test(te);
      std::filesystem::create_directories(gen.out);
      const std::filesystem::path dir(gen.out);
      check(mvlad_dataset_save(all.get(), (dir / "dataset.jsonl").c_str()), "write");
      check(mvlad_dataset_save(train.get(), (dir / "train.jsonl").c_str()), "write");
      check(mvlad_dataset_save(val.get(), (dir / "val.jsonl").c_str()), "write");
      check(mvlad_dataset_save(test.get(), (dir / "test.jsonl").c_str()), "write");
      std::printf("%zu samples: %zu train, %zu val, %zu test -> %s\n", mvlad_dataset_size(all.get()),
                  mvlad_dataset_size(train.get()), mvlad_dataset_size(val.get()), mvlad_dataset_size(test.get()),
                  gen.out.c_str());
    } else if (cbk_cmd->parsed()) {
      override_if(cbk_n_opt, cbk, "codebook_size", cbk_n);
      override_if(cbk_rep_opt, cbk, "representation", cbk_rep);
      const auto cfg = load_config(cbk);
      const auto data = load_dataset(cbk_data);
      mvlad_codebook* raw = nullptr;
      check(mvlad_codebook_fit(data.get(), cfg.get(), cbk.seed, &raw), "build-codebook");
      CodebookPtr cb(raw);
      check(mvlad_codebook_save(cb.get(), cbk.out.c_str()), "write");
      double floor[4];
      check(mvlad_codebook_floor(cb.get(), data.get(), floor), "floor");
      std::printf("codebook of %zu tokens, quantization floor avg %.4f m -> %s\n", mvlad_codebook_size(cb.get()),
                  floor[3], cbk.out.c_str());
    } else if (emb_cmd->parsed()) {
      override_if(emb_epochs_opt, emb, "embed_epochs", emb_epochs);
      const auto cfg = load_config(emb);
      const auto data = load_dataset(emb_data);
      const auto cb = load_codebook(emb_cb);
      mvlad_embedding* raw = nullptr;
      check(mvlad_embedding_train(cb.get(), data.get(), cfg.get(), emb.seed, &raw), "train-embed");
      EmbeddingPtr e(raw);
      check(mvlad_embedding_save(e.get(), emb.out.c_str()), "write");
      check(mvlad_embedding_save_log(e.get(), with_suffix(emb.out, ".log.csv").c_str()), "write log");
      double score = 0.0;
      check(mvlad_embedding_alignment(e.get(), cb.get(), &score), "alignment");
      std::printf("metric alignment %.4f -> %s\n", score, emb.out.c_str());
    } else if (st1_cmd->parsed() || st2_cmd->parsed()) {
      const int stage = st1_cmd->parsed() ? 1 : 2;
      StageArgs& a = stage == 1 ? st1 : st2;
      override_if(a.epochs_opt, a.common, "epochs", a.epochs);
      if (a.skip_stage1) a.common.overrides["allow_skip_stage1"] = "1";
      const auto cfg = load_config(a.common);
      const auto data = load_dataset(a.data);
      const auto cb = load_codebook(a.codebook);
      const auto e = load_embedding(a.embedding);
      ModelPtr m;
      if (!a.checkpoint.empty()) {
        m = load_model(a.checkpoint, cb.get(), e.get());
      } else {
        if (stage == 2 && !a.skip_stage1) {
          throw Failure(MVLAD_VALIDATION, "train-stage2 needs --checkpoint from stage 1 (or --skip-stage1)");
        }
        mvlad_model* raw = nullptr;
        check(mvlad_model_create(cb.get(), e.get(), cfg.get(), a.common.seed, &raw), "model");
        m.reset(raw);
      }
      check(mvlad_model_train_stage(m.get(), data.get(), cfg.get(), stage), "train-stage" + std::to_string(stage));
      check(mvlad_model_save(m.get(), a.common.out.c_str()), "write");
      check(mvlad_model_save_log(m.get(), with_suffix(a.common.out, ".log.csv").c_str()), "write log");
      std::printf("stage %d checkpoint -> %s\n", stage, a.common.out.c_str());
    } else if (dec_cmd->parsed()) {
      override_if(dec_policy_opt, dec, "policy", dec_policy);
      override_if(dec_steps_opt, dec, "total_steps", dec_steps);
      override_if(dec_as_opt, dec, "action_steps", dec_action_steps);
      const auto cfg = load_config(dec);
      const auto data = load_dataset(dec_data);
      const auto cb = load_codebook(dec_cb);
      const auto m = load_model(dec_ckpt, cb.get(), nullptr);
      mvlad_report report{};
      check(mvlad_model_decode(m.get(), data.get(), cfg.get(), dec.out.c_str(),
                               dec_pred.empty() ? nullptr : dec_pred.c_str(), &report),
            "decode");
      std::fputs(mvlad_report_table(&report), stdout);
    } else if (ev_cmd->parsed()) {
      const auto cfg = load_config(ev);
      const auto data = load_dataset(ev_data);
      const auto cb = load_codebook(ev_cb);
      const auto m = load_model(ev_ckpt, cb.get(), nullptr);
      const std::string ptrace = ev_ptrace.empty() ? with_suffix(ev.out, ".action_priority.jsonl") : ev_ptrace;
      const std::string gtrace = ev_gtrace.empty() ? with_suffix(ev.out, ".global_confidence.jsonl") : ev_gtrace;
      mvlad_report reports[2]{};
      const char* labels[2] = {"action_priority", "global_confidence"};
      for (int i = 0; i < 2; ++i) {
        Common c = ev;
        c.overrides["policy"] = labels[i];
        const auto pcfg = load_config(c);
        const bool have_trace = i == 0 ? !ev_ptrace.empty() : !ev_gtrace.empty();
        check(mvlad_model_decode(m.get(), data.get(), pcfg.get(), have_trace ? nullptr : (i == 0 ? ptrace : gtrace).c_str(),
                                 nullptr, &reports[i]),
              std::string("eval ") + labels[i]);
        std::printf("%s\n%s", labels[i], mvlad_report_table(&reports[i]));
      }
      check(mvlad_report_write_csv(reports, labels, 2, ev.out.c_str()), "write report");
      mvlad_latency lat{};
      check(mvlad_latency_from_traces(ptrace.c_str(), gtrace.c_str(), &lat), "latency");
      check(mvlad_latency_write_csv(&lat, with_suffix(ev.out, ".latency.csv").c_str()), "write latency");
      std::printf("steps to action-ready: priority %.3f, global %.3f (ratio %.3f)\n", lat.priority_mean_steps,
                  lat.global_mean_steps, lat.step_ratio);
    } else if (abl_cmd->parsed()) {
      override_if(abl_emb_opt, abl, "embedding_init", abl_embedding);
      override_if(abl_rep_opt, abl, "representation", abl_rep);
      const auto cfg = load_config(abl);
      check(mvlad_ablate(cfg.get(), abl_study.c_str(), abl.seed, abl.out.c_str()), "ablate");
      std::printf("ablation '%s' -> %s\n", abl_study.c_str(), abl.out.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error (%s): %s\n", mvlad_status_name(f.status()), f.what());
    return exit_code(f.status());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
