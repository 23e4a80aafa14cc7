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

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mvlad {

// Flat key-value settings. Files hold one `key = value` per line; `#` starts
// a comment. Later assignments override earlier ones, so flags applied after
// loading a file win.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);

  void set(std::string_view key, std::string_view value);
  void merge(const Config& other);
  bool contains(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

  // Canonical `key=value\n` text, sorted by key.
  std::string canonical() const;

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

// Every key understood by some component. Setting anything else is rejected.
const std::vector<std::string_view>& known_config_keys();

}  // namespace mvlad
