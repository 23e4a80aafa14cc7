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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "mvlad/mvlad.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("mvlad_capi_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string file(const char* name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

mvlad_config* small_config() {
  mvlad_config* c = nullptr;
  REQUIRE(mvlad_config_create(&c) == MVLAD_OK);
  const char* kv[][2] = {{"codebook_size", "32"}, {"embed_dim", "16"}, {"embed_epochs", "2"},
                         {"layers", "1"},         {"heads", "2"},       {"ff_width", "32"},
                         {"epochs", "1"},         {"record_timing", "0"}, {"decode_limit", "6"}};
  for (const auto& p : kv) REQUIRE(mvlad_config_set(c, p[0], p[1]) == MVLAD_OK);
  return c;
}

}  // namespace

TEST_CASE("status reporting") {
  CHECK(std::strlen(mvlad_version()) > 0);
  CHECK(std::string(mvlad_status_name(MVLAD_INTEGRITY)).size() > 0);
  mvlad_config* c = nullptr;
  REQUIRE(mvlad_config_create(&c) == MVLAD_OK);
  CHECK(mvlad_config_set(c, "no_such_key", "1") == MVLAD_USAGE);
  CHECK(std::strlen(mvlad_last_error()) > 0);
  CHECK(mvlad_config_set(c, "codebook_size", "64") == MVLAD_OK);
  CHECK(std::strlen(mvlad_last_error()) == 0);
  mvlad_config_free(c);
  CHECK(mvlad_config_create(nullptr) == MVLAD_INVALID_ARGUMENT);
  CHECK(mvlad_dataset_size(nullptr) == 0);
  mvlad_dataset* d = nullptr;
  CHECK(mvlad_dataset_load("/nonexistent/mvlad.jsonl", &d) == MVLAD_IO);
  CHECK(d == nullptr);
}

TEST_CASE("datasets and codebooks") {
  Scratch tmp;
  mvlad_config* cfg = small_config();
  mvlad_dataset *a = nullptr, *b = nullptr;
  REQUIRE(mvlad_dataset_generate(cfg, 300, 7, &a) == MVLAD_OK);
  REQUIRE(mvlad_dataset_generate(cfg, 300, 7, &b) == MVLAD_OK);
  REQUIRE(mvlad_dataset_size(a) == 300);
  double xa[12], xb[12];
  std::size_t h = 0;
  REQUIRE(mvlad_dataset_trajectory(a, 17, xa, 12, &h) == MVLAD_OK);
  REQUIRE(h == 6);
  REQUIRE(mvlad_dataset_trajectory(b, 17, xb, 12, &h) == MVLAD_OK);
  CHECK(std::memcmp(xa, xb, sizeof(xa)) == 0);
  CHECK(mvlad_dataset_trajectory(a, 17, xa, 11, &h) != MVLAD_OK);
  CHECK(mvlad_dataset_trajectory(a, 300, xa, 12, &h) != MVLAD_OK);

  REQUIRE(mvlad_dataset_save(a, tmp.file("a.jsonl").c_str()) == MVLAD_OK);
  mvlad_dataset* back = nullptr;
  REQUIRE(mvlad_dataset_load(tmp.file("a.jsonl").c_str(), &back) == MVLAD_OK);
  REQUIRE(mvlad_dataset_save(back, tmp.file("b.jsonl").c_str()) == MVLAD_OK);
  CHECK(slurp(tmp.file("a.jsonl")) == slurp(tmp.file("b.jsonl")));

  mvlad_dataset *tr = nullptr, *va = nullptr, *te = nullptr;
  REQUIRE(mvlad_dataset_split(a, cfg, 7, &tr, &va, &te) == MVLAD_OK);
  CHECK(mvlad_dataset_size(tr) == 240);
  CHECK(mvlad_dataset_size(va) + mvlad_dataset_size(te) == 60);

  mvlad_codebook* cb = nullptr;
  REQUIRE(mvlad_codebook_fit(tr, cfg, 7, &cb) == MVLAD_OK);
  CHECK(mvlad_codebook_size(cb) == 32);
  for (std::size_t k = 0; k < 32; ++k) {
    double x = 0, y = 0;
    std::size_t idx = 99;
    REQUIRE(mvlad_codebook_dequantize(cb, k, &x, &y) == MVLAD_OK);
    REQUIRE(mvlad_codebook_quantize(cb, x, y, &idx) == MVLAD_OK);
    double cx = 0, cy = 0;
    mvlad_codebook_dequantize(cb, idx, &cx, &cy);
    CHECK(cx == x);
    CHECK(cy == y);
  }
  double x = 0, y = 0;
  CHECK(mvlad_codebook_dequantize(cb, 32, &x, &y) != MVLAD_OK);
  double floor[4];
  REQUIRE(mvlad_codebook_floor(cb, tr, floor) == MVLAD_OK);
  CHECK(floor[0] >= 0.0);
  CHECK(floor[3] > 0.0);

  REQUIRE(mvlad_codebook_save(cb, tmp.file("cb.json").c_str()) == MVLAD_OK);
  mvlad_codebook* cb2 = nullptr;
  REQUIRE(mvlad_codebook_load(tmp.file("cb.json").c_str(), &cb2) == MVLAD_OK);
  double floor2[4];
  REQUIRE(mvlad_codebook_floor(cb2, tr, floor2) == MVLAD_OK);
  CHECK(std::memcmp(floor, floor2, sizeof(floor)) == 0);
  {
    std::ofstream(tmp.file("bad.json")) << "{\"format\": ";
  }
  mvlad_codebook* bad = nullptr;
  const mvlad_status s = mvlad_codebook_load(tmp.file("bad.json").c_str(), &bad);
  CHECK((s == MVLAD_PARSE || s == MVLAD_FORMAT));

  for (auto* d : {a, b, back, tr, va, te}) mvlad_dataset_free(d);
  mvlad_codebook_free(cb);
  mvlad_codebook_free(cb2);
  mvlad_config_free(cfg);
}

TEST_CASE("training, checkpoints and decoding") {
  Scratch tmp;
  mvlad_config* cfg = small_config();
  mvlad_dataset* all = nullptr;
  REQUIRE(mvlad_dataset_generate(cfg, 400, 3, &all) == MVLAD_OK);
  mvlad_codebook* cb = nullptr;
  REQUIRE(mvlad_codebook_fit(all, cfg, 3, &cb) == MVLAD_OK);
  mvlad_embedding* e = nullptr;
  REQUIRE(mvlad_embedding_train(cb, all, cfg, 3, &e) == MVLAD_OK);
  double align = 2.0;
  REQUIRE(mvlad_embedding_alignment(e, cb, &align) == MVLAD_OK);
  CHECK(align >= -1.0);
  CHECK(align <= 1.0);
  REQUIRE(mvlad_embedding_save(e, tmp.file("emb.json").c_str()) == MVLAD_OK);
  REQUIRE(mvlad_embedding_save_log(e, tmp.file("emb.csv").c_str()) == MVLAD_OK);

  mvlad_model* m = nullptr;
  REQUIRE(mvlad_model_create(cb, e, cfg, 3, &m) == MVLAD_OK);
  CHECK(mvlad_model_stage(m) == 1);
  CHECK(mvlad_model_train_stage(m, all, cfg, 2) == MVLAD_VALIDATION);
  CHECK(mvlad_model_train_stage(m, all, cfg, 3) == MVLAD_USAGE);
  REQUIRE(mvlad_model_train_stage(m, all, cfg, 1) == MVLAD_OK);
  CHECK(mvlad_model_stage(m) == 1);

  mvlad_report r1{};
  REQUIRE(mvlad_model_decode(m, all, cfg, nullptr, nullptr, &r1) == MVLAD_OK);
  CHECK(r1.decodes == 6);
  CHECK(std::isnan(r1.token_accuracy));
  CHECK(r1.steps_to_action_ready > 0.0);

  REQUIRE(mvlad_model_train_stage(m, all, cfg, 2) == MVLAD_OK);
  CHECK(mvlad_model_stage(m) == 2);
  REQUIRE(mvlad_model_save(m, tmp.file("m.ckpt").c_str()) == MVLAD_OK);
  REQUIRE(mvlad_model_save_log(m, tmp.file("m.csv").c_str()) == MVLAD_OK);

  mvlad_report r2{};
  REQUIRE(mvlad_model_decode(m, all, cfg, tmp.file("p.jsonl").c_str(), tmp.file("pred.jsonl").c_str(), &r2) ==
          MVLAD_OK);
  CHECK_FALSE(std::isnan(r2.token_accuracy));
  CHECK_FALSE(std::isnan(r2.label_match));

  mvlad_model* loaded = nullptr;
  REQUIRE(mvlad_model_load(tmp.file("m.ckpt").c_str(), cb, e, &loaded) == MVLAD_OK);
  mvlad_report r3{};
  REQUIRE(mvlad_model_decode(loaded, all, cfg, nullptr, nullptr, &r3) == MVLAD_OK);
  CHECK(r3.l2_avg == r2.l2_avg);
  CHECK(r3.token_accuracy == r2.token_accuracy);

  // A checkpoint refuses a codebook it was not trained with.
  mvlad_config* other_cfg = small_config();
  REQUIRE(mvlad_config_set(other_cfg, "codebook_size", "24") == MVLAD_OK);
  mvlad_codebook* other = nullptr;
  REQUIRE(mvlad_codebook_fit(all, other_cfg, 4, &other) == MVLAD_OK);
  mvlad_model* wrong = nullptr;
  CHECK(mvlad_model_load(tmp.file("m.ckpt").c_str(), other, nullptr, &wrong) == MVLAD_INTEGRITY);

  mvlad_config* gcfg = small_config();
  REQUIRE(mvlad_config_set(gcfg, "policy", "global_confidence") == MVLAD_OK);
  REQUIRE(mvlad_model_decode(m, all, gcfg, tmp.file("g.jsonl").c_str(), nullptr, nullptr) == MVLAD_OK);
  mvlad_latency lat{};
  REQUIRE(mvlad_latency_from_traces(tmp.file("p.jsonl").c_str(), tmp.file("g.jsonl").c_str(), &lat) == MVLAD_OK);
  CHECK(lat.priority_decodes == 6);
  CHECK(lat.global_decodes == 6);
  CHECK(lat.priority_mean_steps == 3.0);
  CHECK(lat.step_ratio > 0.0);
  REQUIRE(mvlad_latency_write_csv(&lat, tmp.file("lat.csv").c_str()) == MVLAD_OK);
  CHECK(slurp(tmp.file("lat.csv")).rfind("policy,", 0) == 0);

  const mvlad_report reports[2] = {r1, r2};
  const char* labels[2] = {"stage1", "stage2"};
  REQUIRE(mvlad_report_write_csv(reports, labels, 2, tmp.file("r.csv").c_str()) == MVLAD_OK);
  const std::string csv = slurp(tmp.file("r.csv"));
  CHECK(csv.find("\nstage1,") != std::string::npos);
  CHECK(csv.find("\nstage2,") != std::string::npos);
  CHECK(std::string(mvlad_report_table(&r2)).find("Avg") != std::string::npos);

  std::string pred = slurp(tmp.file("pred.jsonl"));
  CHECK(std::count(pred.begin(), pred.end(), '\n') == 6);
  CHECK(pred.find("\"reasoning\"") != std::string::npos);

  mvlad_model_free(loaded);
  mvlad_model_free(m);
  mvlad_codebook_free(other);
  mvlad_codebook_free(cb);
  mvlad_embedding_free(e);
  mvlad_dataset_free(all);
  mvlad_config_free(gcfg);
  mvlad_config_free(other_cfg);
  mvlad_config_free(cfg);
}
