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
#include <string>
#include <string_view>
#include <vector>

#include "vla_sequence/vocabulary.hpp"

namespace mvlad::seq {

enum class Segment : std::uint8_t { kVision, kInstruction, kAction, kReasoning, kPad };

std::string_view segment_name(Segment s);

inline constexpr std::size_t kReasoningLength = 16;

struct SequenceLayout {
  std::size_t vision = traj::kContextLength;
  std::size_t instruction = traj::kInstructionLength;
  std::size_t action = 6;
  std::size_t reasoning = 0;  // 0 when the reasoning block is excluded
  std::size_t pad = 0;

  std::size_t action_begin() const { return vision + instruction; }
  std::size_t reasoning_begin() const { return action_begin() + action; }
  std::size_t length() const { return reasoning_begin() + reasoning + pad; }
  friend bool operator==(const SequenceLayout&, const SequenceLayout&) = default;
};

struct TokenSequence {
  SequenceLayout layout;
  std::vector<int> ids;
  std::vector<Segment> segment;
  std::vector<std::uint8_t> mask_flags;
  std::vector<int> original;  // ids before any masking
  double mask_ratio = 0.0;    // t used by the last apply_forward_masking

  std::size_t size() const { return ids.size(); }
  std::size_t masked_count() const;
  bool is_generation(std::size_t pos) const {
    return segment[pos] == Segment::kAction || segment[pos] == Segment::kReasoning;
  }
};

// Reasoning text as word IDs: BOS words EOS, right-padded with PAD to
// `length`. Unknown words raise a tokenization error.
std::vector<int> tokenize_reasoning(std::string_view text, const Vocabulary& vocab,
                                    std::size_t length = kReasoningLength);

TokenSequence assemble_sequence(const traj::Sample& sample, const Codebook& cb, const Vocabulary& vocab,
                                bool include_reasoning, std::size_t reasoning_length = kReasoningLength);

// Conditioning prefix only; every action and reasoning position holds MASK.
TokenSequence masked_prompt(const traj::Sample& sample, const Vocabulary& vocab, std::size_t horizon,
                            bool include_reasoning, std::size_t reasoning_length = kReasoningLength);

// Each action and reasoning position becomes MASK independently with
// probability t.
TokenSequence apply_forward_masking(const TokenSequence& seq, double t, numerics::Rng& rng, const Vocabulary& vocab);

// Codebook indices of the action segment. A masked or non-action ID raises an
// incomplete-decode error.
std::vector<std::size_t> action_tokens(const TokenSequence& seq, const Vocabulary& vocab);

// Words of the reasoning segment between BOS and the first EOS.
std::vector<std::string> reasoning_words(const TokenSequence& seq, const Vocabulary& vocab);

}  // namespace mvlad::seq
