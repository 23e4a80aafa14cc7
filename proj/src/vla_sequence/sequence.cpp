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

#include "vla_sequence/sequence.hpp"

#include <sstream>

#include "core/error.hpp"

namespace mvlad::seq {
namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(std::move(w));
  return out;
}

TokenSequence prefix(const traj::Sample& sample, const Vocabulary& vocab, std::size_t horizon,
                     std::size_t reasoning_length) {
  TokenSequence s;
  s.layout.action = horizon;
  s.layout.reasoning = reasoning_length;
  require(sample.scene_context.size() == s.layout.vision, ErrorKind::kTokenization,
          "scene context has " + std::to_string(sample.scene_context.size()) + " tokens, expected " +
              std::to_string(s.layout.vision));
  const auto instr = split_words(sample.instruction);
  require(instr.size() == s.layout.instruction, ErrorKind::kTokenization,
          "instruction has " + std::to_string(instr.size()) + " words, expected " +
              std::to_string(s.layout.instruction));

  const std::size_t len = s.layout.length();
  s.ids.assign(len, vocab.mask());
  s.segment.assign(len, Segment::kPad);
  s.mask_flags.assign(len, 0);
  std::size_t pos = 0;
  for (int sym : sample.scene_context) {
    s.segment[pos] = Segment::kVision;
    s.ids[pos++] = vocab.context_id(sym);
  }
  for (const auto& w : instr) {
    const auto id = vocab.word_id(w);
    require(id.has_value(), ErrorKind::kTokenization, "instruction word '" + w + "' is not in the vocabulary");
    s.segment[pos] = Segment::kInstruction;
    s.ids[pos++] = *id;
  }
  for (std::size_t k = 0; k < horizon; ++k) s.segment[pos++] = Segment::kAction;
  for (std::size_t k = 0; k < reasoning_length; ++k) s.segment[pos++] = Segment::kReasoning;
  return s;
}

}  // namespace

std::string_view segment_name(Segment s) {
  switch (s) {
    case Segment::kVision: return "vision";
    case Segment::kInstruction: return "instruction";
    case Segment::kAction: return "action";
    case Segment::kReasoning: return "reasoning";
    case Segment::kPad: return "pad";
  }
  return "?";
}

std::size_t TokenSequence::masked_count() const {
  std::size_t n = 0;
  for (auto f : mask_flags) n += f;
  return n;
}

std::vector<int> tokenize_reasoning(std::string_view text, const Vocabulary& vocab, std::size_t length) {
  const auto words = split_words(text);
  require(words.size() + 2 <= length, ErrorKind::kTokenization,
          "reasoning of " + std::to_string(words.size()) + " words does not fit " + std::to_string(length) +
              " positions");
  std::vector<int> ids;
  ids.reserve(length);
  ids.push_back(vocab.bos());
  for (const auto& w : words) {
    const auto id = vocab.word_id(w);
    require(id.has_value(), ErrorKind::kTokenization, "reasoning word '" + w + "' is not in the vocabulary");
    ids.push_back(*id);
  }
  ids.push_back(vocab.eos());
  ids.resize(length, vocab.pad());
  return ids;
}

TokenSequence assemble_sequence(const traj::Sample& sample, const Codebook& cb, const Vocabulary& vocab,
                                bool include_reasoning, std::size_t reasoning_length) {
  require(vocab.action_size() == cb.size(), ErrorKind::kValidation,
          "vocabulary action block does not match the codebook size");
  const std::size_t r = include_reasoning ? reasoning_length : 0;
  TokenSequence s = prefix(sample, vocab, sample.trajectory.size(), r);
  const auto tokens = cb.encode(sample.trajectory);
  std::size_t pos = s.layout.action_begin();
  for (auto t : tokens) s.ids[pos++] = vocab.action_id(t);
  if (include_reasoning) {
    for (int id : tokenize_reasoning(sample.reasoning, vocab, r)) s.ids[pos++] = id;
  }
  s.original = s.ids;
  return s;
}

TokenSequence masked_prompt(const traj::Sample& sample, const Vocabulary& vocab, std::size_t horizon,
                            bool include_reasoning, std::size_t reasoning_length) {
  TokenSequence s = prefix(sample, vocab, horizon, include_reasoning ? reasoning_length : 0);
  s.original = s.ids;
  for (std::size_t i = 0; i < s.size(); ++i) s.mask_flags[i] = s.is_generation(i) ? 1 : 0;
  s.mask_ratio = 1.0;
  return s;
}

TokenSequence apply_forward_masking(const TokenSequence& seq, double t, numerics::Rng& rng, const Vocabulary& vocab) {
  require(t >= 0.0 && t <= 1.0, ErrorKind::kValidation, "masking ratio must lie in [0, 1]");
  TokenSequence out = seq;
  out.mask_ratio = t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.is_generation(i)) continue;
    if (rng.uniform() < t) {
      out.ids[i] = vocab.mask();
      out.mask_flags[i] = 1;
    }
  }
  return out;
}

std::vector<std::size_t> action_tokens(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::size_t> out;
  out.reserve(seq.layout.action);
  for (std::size_t k = 0; k < seq.layout.action; ++k) {
    const std::size_t pos = seq.layout.action_begin() + k;
    const int id = seq.ids.at(pos);
    if (id == vocab.mask() || !vocab.is_action(id)) {
      fail(ErrorKind::kIncompleteDecode,
           "action position " + std::to_string(pos) + " holds " + (id == vocab.mask() ? "MASK" : "a non-action id"));
    }
    out.push_back(vocab.action_index(id));
  }
  return out;
}

std::vector<std::string> reasoning_words(const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  const std::size_t begin = seq.layout.reasoning_begin();
  const std::size_t end = begin + seq.layout.reasoning;
  for (std::size_t i = begin; i < end; ++i) {
    const int id = seq.ids[i];
    if (id == vocab.eos()) break;
    if (id == vocab.bos() || id == vocab.pad() || vocab.classify(id) != TokenClass::kWord) continue;
    out.push_back(vocab.word(id));
  }
  return out;
}

}  // namespace mvlad::seq
