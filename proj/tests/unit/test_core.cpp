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

#include <fstream>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/hash.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace mvlad;

TEST_CASE("config file parsing, comments and overrides") {
  testing::TempDir dir("config");
  const auto path = dir.file("run.cfg");
  std::ofstream(path) << "# experiment\nepochs = 3   # short\n\nlearning_rate=0.001\npolicy = global_confidence\n";
  Config cfg = Config::from_file(path);
  CHECK(cfg.get_uint("epochs", 8) == 3);
  CHECK(cfg.get_double("learning_rate", 0.0) == doctest::Approx(0.001));
  CHECK(cfg.get_string("policy", "") == "global_confidence");
  CHECK(cfg.get_uint("batch_size", 64) == 64);
  cfg.set("epochs", "5");
  CHECK(cfg.get_uint("epochs", 8) == 5);
  CHECK(cfg.canonical() == "epochs=5\nlearning_rate=0.001\npolicy=global_confidence\n");
}

TEST_CASE("config errors carry their category") {
  Config cfg;
  try {
    cfg.set("no_such_key", "1");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUsage);
  }
  cfg.set("epochs", "three");
  CHECK_THROWS_AS(cfg.get_uint("epochs", 1), Error);
  cfg.set("epochs", "-1");
  CHECK_THROWS_AS(cfg.get_uint("epochs", 1), Error);
  cfg.set("record_timing", "maybe");
  CHECK_THROWS_AS(cfg.get_bool("record_timing", true), Error);

  testing::TempDir dir("config_bad");
  const auto path = dir.file("bad.cfg");
  std::ofstream(path) << "epochs 3\n";
  try {
    Config::from_file(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::from_file(dir.file("missing.cfg")), Error);
}

TEST_CASE("boolean spellings") {
  Config cfg;
  for (const char* t : {"1", "true", "yes", "on"}) {
    cfg.set("importance_weight", t);
    CHECK(cfg.get_bool("importance_weight", false));
  }
  for (const char* f : {"0", "false", "no", "off"}) {
    cfg.set("importance_weight", f);
    CHECK_FALSE(cfg.get_bool("importance_weight", true));
  }
}

TEST_CASE("sha256 known vectors and atomic file writes") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  testing::TempDir dir("hash");
  const auto path = dir.file("blob.bin");
  const std::string bytes("a\0b\nc", 5);
  write_file(path, bytes);
  CHECK(read_file(path) == bytes);
  CHECK_THROWS_AS(read_file(dir.file("absent")), Error);
}
