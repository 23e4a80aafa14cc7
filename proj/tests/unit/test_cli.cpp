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

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("mvlad_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (scratch() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(MVLAD_CLI_PATH) + " " + args + " >>" + at("cli.log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

// Small enough to train in seconds.
const std::string& small_config() {
  static const std::string path = [] {
    const std::string p = at("small.cfg");
    write(p,
          "# toy sizes\n"
          "codebook_size = 32\n"
          "embed_dim = 16\n"
          "embed_epochs = 2\n"
          "layers = 1\n"
          "heads = 2\n"
          "ff_width = 32\n"
          "epochs = 1\n"
          "record_timing = 0\n"
          "decode_limit = 8\n");
    return p;
  }();
  return path;
}

std::string with_config(const std::string& args) { return args + " --config " + small_config(); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("gen-data --n 10") == 2);  // --out is required
  CHECK(run("gen-data --n 10 --out " + at("x") + " --bogus") == 2);
  CHECK(run("gen-data --n 10 --out " + at("x") + " --set nonsense_key=1") == 2);
  CHECK(run("gen-data --n 10 --out " + at("x") + " --set missing_equals") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("full command-line workflow") {
  REQUIRE(run(with_config("gen-data --n 300 --seed 5 --out " + at("data"))) == 0);
  REQUIRE(run(with_config("gen-data --n 300 --seed 5 --out " + at("data2"))) == 0);
  const std::string all = slurp(at("data/dataset.jsonl"));
  CHECK(all == slurp(at("data2/dataset.jsonl")));
  CHECK(std::count(all.begin(), all.end(), '\n') == 300);
  const std::string train_text = slurp(at("data/train.jsonl"));
  CHECK(std::count(train_text.begin(), train_text.end(), '\n') == 240);
  const std::string train = at("data/train.jsonl");
  const std::string test = at("data/test.jsonl");

  SUBCASE("codebook size flag") {
    REQUIRE(run("build-codebook --n 256 --data " + train + " --out " + at("cb256.json")) == 0);
    CHECK(slurp(at("cb256.json")).find("\"n\":256") != std::string::npos);
  }

  REQUIRE(run(with_config("build-codebook --seed 1 --data " + train + " --out " + at("cb.json"))) == 0);
  CHECK(slurp(at("cb.json")).find("\"n\":32") != std::string::npos);
  REQUIRE(run(with_config("train-embed --seed 1 --data " + train + " --codebook " + at("cb.json") + " --out " +
                          at("emb.json"))) == 0);
  CHECK(fs::exists(at("emb.log.csv")));

  const std::string stage_args = " --seed 2 --data " + train + " --codebook " + at("cb.json") + " --embedding " +
                                 at("emb.json");
  REQUIRE(run(with_config("train-stage1" + stage_args + " --out " + at("s1.ckpt"))) == 0);
  REQUIRE(run(with_config("train-stage1" + stage_args + " --out " + at("s1b.ckpt"))) == 0);
  CHECK(slurp(at("s1.ckpt")) == slurp(at("s1b.ckpt")));
  CHECK(fs::exists(at("s1.log.csv")));

  CHECK(run(with_config("train-stage2" + stage_args + " --out " + at("bad.ckpt"))) == 3);
  REQUIRE(run(with_config("train-stage2" + stage_args + " --checkpoint " + at("s1.ckpt") + " --out " +
                          at("s2.ckpt"))) == 0);

  const std::string dec_args = " --data " + test + " --codebook " + at("cb.json");
  REQUIRE(run(with_config("decode" + dec_args + " --checkpoint " + at("s2.ckpt") + " --predictions " +
                          at("pred.jsonl") + " --out " + at("trace.jsonl"))) == 0);
  const std::string trace = slurp(at("trace.jsonl"));
  CHECK(trace.find("\"policy\":\"action_priority\"") != std::string::npos);
  const std::string pred = slurp(at("pred.jsonl"));
  CHECK(std::count(pred.begin(), pred.end(), '\n') == 8);

  CHECK(run(with_config("decode" + dec_args + " --checkpoint " + at("s2.ckpt") + " --steps 3 --action-steps 3 --out " +
                        at("t2.jsonl"))) == 3);

  REQUIRE(run(with_config("eval" + dec_args + " --checkpoint " + at("s2.ckpt") + " --out " + at("report.csv"))) == 0);
  const std::string report = slurp(at("report.csv"));
  CHECK(report.find("\naction_priority,") != std::string::npos);
  CHECK(report.find("\nglobal_confidence,") != std::string::npos);
  CHECK(slurp(at("report.latency.csv")).rfind("policy,", 0) == 0);

  // Damaged checkpoint: integrity failure.
  std::string bytes = slurp(at("s2.ckpt"));
  bytes[bytes.size() / 2] ^= 0x01;
  write(at("damaged.ckpt"), bytes);
  CHECK(run(with_config("decode" + dec_args + " --checkpoint " + at("damaged.ckpt") + " --out " + at("t3.jsonl"))) ==
        4);
  // Checkpoint paired with a different codebook.
  REQUIRE(run("build-codebook --n 24 --data " + train + " --out " + at("cb24.json")) == 0);
  CHECK(run(with_config("decode --data " + test + " --codebook " + at("cb24.json") + " --checkpoint " +
                        at("s2.ckpt") + " --out " + at("t4.jsonl"))) == 4);

  // Malformed dataset: parse failure.
  write(at("broken.jsonl"), all.substr(0, all.find('\n') + 1) + "{\"trajectory\": [\n");
  CHECK(run("build-codebook --data " + at("broken.jsonl") + " --out " + at("cbx.json")) == 3);
}
