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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "action_codebook/codebook.hpp"
#include "core/config.hpp"
#include "numerics/tensor.hpp"
#include "vla_sequence/sequence.hpp"

namespace mvlad::decode {

using numerics::Tensor;
using seq::TokenSequence;
using seq::Vocabulary;

enum class Policy { kActionPriority, kGlobalConfidence };

std::string_view policy_name(Policy p);
Policy parse_policy(std::string_view name);

struct DecodeConfig {
  std::size_t total_steps = 8;
  std::size_t action_steps = 3;
  Policy policy = Policy::kActionPriority;
  std::uint64_t seed = 0;
  bool record_timing = true;

  static DecodeConfig from(const Config& cfg, std::uint64_t seed);
  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  std::vector<std::size_t> positions;
  std::vector<int> ids;
  std::vector<double> confidences;
  std::size_t actions_remaining = 0;  // after this step
  double wall_ms = 0.0;
};

struct DecodeSchedule {
  std::vector<StepRecord> steps;
  // First step after which no action position is masked; 0 if never.
  std::size_t action_ready_step = 0;
};

struct DecodeResult {
  TokenSequence sequence;
  DecodeSchedule schedule;
};

// Per-position distributions (sequence length x V) for a partially masked
// sequence. A trained predictor or a test double.
using Predict = std::function<Tensor(const TokenSequence&)>;

struct Candidate {
  std::size_t position = 0;
  int id = 0;
  double confidence = 0.0;
};

// Greedy choice and its probability at each listed position. Action positions
// only consider the action block; MASK is never chosen. Ties go to the lower
// ID.
std::vector<Candidate> confidence_scores(const Tensor& distributions, std::span<const std::size_t> positions,
                                         const TokenSequence& seq, const Vocabulary& vocab);

// Tokens committed per step when `remaining` positions share `steps_left`
// steps.
std::size_t unmask_count(std::size_t remaining, std::size_t steps_left);

// Commits every action token within `action_steps` steps, then the reasoning
// tokens within the remaining steps.
DecodeResult action_priority_decode(const Predict& predict, const TokenSequence& prompt, const Vocabulary& vocab,
                                    const DecodeConfig& config);

// Commits the most confident positions regardless of segment.
DecodeResult global_confidence_decode(const Predict& predict, const TokenSequence& prompt, const Vocabulary& vocab,
                                      const DecodeConfig& config);

DecodeResult run_decode(const Predict& predict, const TokenSequence& prompt, const Vocabulary& vocab,
                        const DecodeConfig& config);

// Throws a scheduler error unless every action position was committed before
// any reasoning position.
void check_action_first(const DecodeResult& result);

traj::Trajectory extract_trajectory(const TokenSequence& seq, const codebook::Codebook& cb, const Vocabulary& vocab);

// One JSON object per step.
std::string trace_jsonl(const DecodeSchedule& schedule, std::size_t decode_index, Policy policy);

}  // namespace mvlad::decode
