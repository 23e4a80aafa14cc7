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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "action_codebook/codebook.hpp"
#include "numerics/rng.hpp"
#include "traj_data/dataset.hpp"

namespace mvlad::seq {

using codebook::Codebook;

// Every token ID belongs to exactly one of these blocks. BOS, EOS and PAD sit
// in the word block; MASK is a block of its own.
enum class TokenClass { kContext, kWord, kAction, kMask };

std::string_view token_class_name(TokenClass c);

inline constexpr std::size_t kMaxWords = 64;

// ID layout: [context | words | BOS EOS PAD | MASK | action block].
class Vocabulary {
 public:
  Vocabulary(std::size_t context_size, std::vector<std::string> words, std::size_t action_size);

  std::size_t size() const { return action_begin() + action_size_; }
  std::size_t context_size() const { return context_size_; }
  std::size_t word_begin() const { return context_size_; }
  std::size_t word_count() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  int bos() const { return static_cast<int>(word_begin() + words_.size()); }
  int eos() const { return bos() + 1; }
  int pad() const { return bos() + 2; }
  int mask() const { return bos() + 3; }
  std::size_t action_begin() const { return static_cast<std::size_t>(mask()) + 1; }
  std::size_t action_size() const { return action_size_; }

  TokenClass classify(int id) const;
  bool is_action(int id) const;
  int context_id(int symbol) const;
  int action_id(std::size_t index) const;
  std::size_t action_index(int id) const;
  std::optional<int> word_id(std::string_view word) const;
  // Word text for word-block IDs, including "<bos>", "<eos>", "<pad>".
  std::string word(int id) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.context_size_ == b.context_size_ && a.words_ == b.words_ && a.action_size_ == b.action_size_;
  }

 private:
  void check_id(int id) const;

  std::size_t context_size_;
  std::vector<std::string> words_;
  std::size_t action_size_;
  std::unordered_map<std::string, int> word_ids_;
};

// Word list must be free of duplicates.
Vocabulary build_vocab(const Codebook& cb, std::span<const std::string> words,
                       std::size_t context_size = traj::kContextAlphabet);

std::string to_json(const Vocabulary& v);
Vocabulary vocab_from_json(std::string_view text);

}  // namespace mvlad::seq
