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

#include "pipeline/checkpoint.hpp"

#include <cstring>

#include "core/error.hpp"
#include "core/hash.hpp"
#include "json.hpp"

namespace mvlad::pipeline {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "MVLADCKP";
constexpr std::size_t kDigestLength = 64;
constexpr std::size_t kPrefixLength = 8 + 4 + 8;

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

void put_doubles(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

std::vector<double> get_doubles(std::string_view bytes, std::size_t& offset, std::size_t count) {
  require(offset + count * sizeof(double) <= bytes.size(), ErrorKind::kFormat, "checkpoint payload is short");
  std::vector<double> v(count);
  std::memcpy(v.data(), bytes.data() + offset, count * sizeof(double));
  offset += count * sizeof(double);
  return v;
}

json record_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"stage", r.stage},
          {"total_loss", r.total_loss},
          {"action_loss", r.action_loss},
          {"reasoning_loss", r.reasoning_loss},
          {"wall_seconds", r.wall_seconds},
          {"steps", r.steps},
          {"masked_action", r.masked_action},
          {"masked_reasoning", r.masked_reasoning}};
}

EpochRecord record_from(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.stage = j.at("stage").get<int>();
  r.total_loss = j.at("total_loss").get<double>();
  r.action_loss = j.at("action_loss").get<double>();
  r.reasoning_loss = j.at("reasoning_loss").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.steps = j.at("steps").get<std::size_t>();
  r.masked_action = j.at("masked_action").get<std::size_t>();
  r.masked_reasoning = j.at("masked_reasoning").get<std::size_t>();
  return r;
}

}  // namespace

std::string checkpoint_bytes(const TrainingState& state) {
  const auto& cfg = state.model.config();
  const std::size_t n = state.model.params().size();
  require(state.adam.m.size() == n && state.adam.v.size() == n, ErrorKind::kValidation,
          "optimizer state does not match the parameter count");
  json log = json::array();
  for (const auto& r : state.log) log.push_back(record_json(r));
  const json header = {
      {"predictor",
       {{"layers", cfg.layers},
        {"width", cfg.width},
        {"heads", cfg.heads},
        {"ff_width", cfg.ff_width},
        {"max_length", cfg.max_length},
        {"vocab_size", cfg.vocab_size},
        {"seed", cfg.seed}}},
      {"action_begin", state.model.action_begin()},
      {"action_size", state.model.action_size()},
      {"tensors", {{"params", n}, {"adam_m", n}, {"adam_v", n}}},
      {"adam_step", state.adam.step},
      {"rng", {{"seed", state.rng.seed()}, {"stream", state.rng.stream()}, {"counter", state.rng.counter()}}},
      {"stage", state.stage},
      {"epochs_done", state.epochs_done},
      {"stage1_complete", state.stage1_complete},
      {"log", log},
      {"codebook_sha256", state.codebook_sha256},
      {"embedding_sha256", state.embedding_sha256},
  };
  const std::string head = header.dump();
  std::string out;
  out.append(kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, head.size());
  out += head;
  put_doubles(out, state.model.params());
  put_doubles(out, state.adam.m);
  put_doubles(out, state.adam.v);
  out += sha256_hex(out);
  return out;
}

TrainingState checkpoint_from_bytes(std::string_view bytes) {
  require(bytes.size() >= kPrefixLength + kDigestLength, ErrorKind::kIntegrity, "checkpoint is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - kDigestLength);
  const std::string_view digest = bytes.substr(bytes.size() - kDigestLength);
  require(sha256_hex(body) == digest, ErrorKind::kIntegrity, "checkpoint checksum mismatch");
  require(body.substr(0, kMagic.size()) == kMagic, ErrorKind::kFormat, "not a checkpoint file");
  const auto version = get<std::uint32_t>(body, 8);
  require(version == kCheckpointVersion, ErrorKind::kFormat,
          "checkpoint version " + std::to_string(version) + " is not supported");
  const auto head_len = get<std::uint64_t>(body, 12);
  require(kPrefixLength + head_len <= body.size(), ErrorKind::kFormat, "checkpoint header overruns the file");
  try {
    const json h = json::parse(body.substr(kPrefixLength, head_len));
    const auto& p = h.at("predictor");
    model::PredictorConfig cfg;
    cfg.layers = p.at("layers").get<std::size_t>();
    cfg.width = p.at("width").get<std::size_t>();
    cfg.heads = p.at("heads").get<std::size_t>();
    cfg.ff_width = p.at("ff_width").get<std::size_t>();
    cfg.max_length = p.at("max_length").get<std::size_t>();
    cfg.vocab_size = p.at("vocab_size").get<std::size_t>();
    cfg.seed = p.at("seed").get<std::uint64_t>();
    const auto n = h.at("tensors").at("params").get<std::size_t>();
    std::size_t offset = kPrefixLength + head_len;
    auto params = get_doubles(body, offset, n);
    auto m = get_doubles(body, offset, h.at("tensors").at("adam_m").get<std::size_t>());
    auto v = get_doubles(body, offset, h.at("tensors").at("adam_v").get<std::size_t>());
    require(offset == body.size(), ErrorKind::kFormat, "trailing bytes after the checkpoint payload");
    require(m.size() == n && v.size() == n, ErrorKind::kFormat, "optimizer moments do not match parameters");

    const auto& r = h.at("rng");
    TrainingState state(model::Predictor(cfg, std::move(params), h.at("action_begin").get<std::size_t>(),
                                         h.at("action_size").get<std::size_t>()),
                        r.at("seed").get<std::uint64_t>());
    state.rng = numerics::Rng(r.at("seed").get<std::uint64_t>(), r.at("stream").get<std::uint64_t>());
    state.rng.set_counter(r.at("counter").get<std::uint64_t>());
    state.adam.m = std::move(m);
    state.adam.v = std::move(v);
    state.adam.step = h.at("adam_step").get<std::uint64_t>();
    state.stage = h.at("stage").get<int>();
    state.epochs_done = h.at("epochs_done").get<std::size_t>();
    state.stage1_complete = h.at("stage1_complete").get<bool>();
    for (const auto& rec : h.at("log")) state.log.push_back(record_from(rec));
    state.codebook_sha256 = h.at("codebook_sha256").get<std::string>();
    state.embedding_sha256 = h.at("embedding_sha256").get<std::string>();
    return state;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const TrainingState& state, const std::string& path) { write_file(path, checkpoint_bytes(state)); }

TrainingState load_checkpoint(const std::string& path, const std::string& expected_codebook_sha256,
                              const std::string& expected_embedding_sha256) {
  TrainingState state = checkpoint_from_bytes(read_file(path));
  require(expected_codebook_sha256.empty() || expected_codebook_sha256 == state.codebook_sha256,
          ErrorKind::kIntegrity, "codebook file does not match the one this checkpoint was trained with");
  require(expected_embedding_sha256.empty() || expected_embedding_sha256 == state.embedding_sha256,
          ErrorKind::kIntegrity, "embedding file does not match the one this checkpoint was trained with");
  return state;
}

}  // namespace mvlad::pipeline
