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

#include "core/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace mvlad {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

const std::vector<std::string_view>& known_config_keys() {
  static const std::vector<std::string_view> keys = {
      // data generation
      "horizon", "speed_max", "curvature_max", "curved_fraction",
      // splits
      "split_train", "split_val", "split_test",
      // codebook
      "codebook_size", "kmeans_max_iter", "kmeans_tol", "representation",
      // embedding
      "embed_dim", "k_start", "k_end", "tau", "tau_con", "lambda_recon", "lambda_geom",
      "lambda_contra", "embed_epochs", "embed_batch_size", "embed_learning_rate", "embed_momentum",
      "embed_max_samples", "embedding_init",
      // predictor
      "layers", "heads", "ff_width",
      // stages
      "epochs", "batch_size", "learning_rate", "mask_eps", "importance_weight",
      "freeze_actions_stage1", "freeze_actions_stage2", "allow_skip_stage1", "record_timing",
      // decoding
      "total_steps", "action_steps", "policy", "decode_limit",
      // ablation
      "ablate_samples", "ablate_eval_samples",
  };
  return keys;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config file " + path);
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(std::string_view key, std::string_view value) {
  const auto& keys = known_config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    fail(ErrorKind::kUsage, "unknown config key '" + std::string(key) + "'");
  }
  entries_.insert_or_assign(std::string(key), std::string(value));
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.entries_) entries_.insert_or_assign(k, v);
}

bool Config::contains(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? std::string(fallback) : it->second;
}

double Config::get_double(std::string_view key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double value = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return value;
  } catch (const std::exception&) {
    fail(ErrorKind::kValidation, "config key '" + it->first + "' is not a number: " + it->second);
  }
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::int64_t value = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::kValidation, "config key '" + it->first + "' is not an integer: " + s);
  }
  return value;
}

std::uint64_t Config::get_uint(std::string_view key, std::uint64_t fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::uint64_t value = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::kValidation, "config key '" + it->first + "' is not a non-negative integer: " + s);
  }
  return value;
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const auto& s = it->second;
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  fail(ErrorKind::kValidation, "config key '" + it->first + "' is not a boolean: " + s);
}

std::string Config::canonical() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
  return out.str();
}

}  // namespace mvlad
