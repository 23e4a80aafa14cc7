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
#include <string>
#include <string_view>

#include "pipeline/pipeline.hpp"

namespace mvlad::pipeline {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary container: magic, version, JSON header, raw little-endian doubles
// (parameters, Adam moments), then a SHA-256 over all preceding bytes.
std::string checkpoint_bytes(const TrainingState& state);
// Corruption raises an integrity error; an unknown version or a malformed
// header raises a format error.
TrainingState checkpoint_from_bytes(std::string_view bytes);

void save_checkpoint(const TrainingState& state, const std::string& path);
// Non-empty expected digests must match the ones the checkpoint recorded.
TrainingState load_checkpoint(const std::string& path, const std::string& expected_codebook_sha256 = {},
                              const std::string& expected_embedding_sha256 = {});

}  // namespace mvlad::pipeline
