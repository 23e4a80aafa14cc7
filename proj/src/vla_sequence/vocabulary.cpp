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

#include "vla_sequence/vocabulary.hpp"

#include "core/error.hpp"
#include "json.hpp"

namespace mvlad::seq {

using nlohmann::json;

std::string_view token_class_name(TokenClass c) {
  switch (c) {
    case TokenClass::kContext: return "context";
    case TokenClass::kWord: return "word";
    case TokenClass::kAction: return "action";
    case TokenClass::kMask: return "mask";
  }
  return "?";
}

Vocabulary::Vocabulary(std::size_t context_size, std::vector<std::string> words, std::size_t action_size)
    : context_size_(context_size), words_(std::move(words)), action_size_(action_size) {
  require(context_size_ >= 1, ErrorKind::kValidation, "context block must be non-empty");
  require(action_size_ >= 1, ErrorKind::kValidation, "action block must be non-empty");
  require(words_.size() <= kMaxWords, ErrorKind::kValidation,
          std::to_string(words_.size()) + " words exceed the limit of " + std::to_string(kMaxWords));
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const auto& w = words_[i];
    require(!w.empty() && w.find_first_of(" \t\n") == std::string::npos, ErrorKind::kValidation,
            "word '" + w + "' is empty or contains whitespace");
    const bool inserted = word_ids_.emplace(w, static_cast<int>(word_begin() + i)).second;
    require(inserted, ErrorKind::kValidation, "duplicate word '" + w + "'");
  }
}

void Vocabulary::check_id(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    fail(ErrorKind::kIndex, "token id " + std::to_string(id) + " outside [0, " + std::to_string(size()) + ")");
  }
}

TokenClass Vocabulary::classify(int id) const {
  check_id(id);
  const auto u = static_cast<std::size_t>(id);
  if (u < context_size_) return TokenClass::kContext;
  if (id < mask()) return TokenClass::kWord;
  if (id == mask()) return TokenClass::kMask;
  return TokenClass::kAction;
}

bool Vocabulary::is_action(int id) const {
  return id >= 0 && static_cast<std::size_t>(id) >= action_begin() && static_cast<std::size_t>(id) < size();
}

int Vocabulary::context_id(int symbol) const {
  require(symbol >= 0 && static_cast<std::size_t>(symbol) < context_size_, ErrorKind::kTokenization,
          "context symbol " + std::to_string(symbol) + " outside the context block");
  return symbol;
}

int Vocabulary::action_id(std::size_t index) const {
  require(index < action_size_, ErrorKind::kIndex,
          "action index " + std::to_string(index) + " outside [0, " + std::to_string(action_size_) + ")");
  return static_cast<int>(action_begin() + index);
}

std::size_t Vocabulary::action_index(int id) const {
  require(is_action(id), ErrorKind::kIndex, "token id " + std::to_string(id) + " is not an action token");
  return static_cast<std::size_t>(id) - action_begin();
}

std::optional<int> Vocabulary::word_id(std::string_view word) const {
  const auto it = word_ids_.find(std::string(word));
  if (it == word_ids_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::word(int id) const {
  require(classify(id) == TokenClass::kWord, ErrorKind::kIndex,
          "token id " + std::to_string(id) + " is not a word token");
  if (id == bos()) return "<bos>";
  if (id == eos()) return "<eos>";
  if (id == pad()) return "<pad>";
  return words_[static_cast<std::size_t>(id) - word_begin()];
}

Vocabulary build_vocab(const Codebook& cb, std::span<const std::string> words, std::size_t context_size) {
  return Vocabulary(context_size, std::vector<std::string>(words.begin(), words.end()), cb.size());
}

std::string to_json(const Vocabulary& v) {
  const auto range = [](std::size_t begin, std::size_t end) { return json::array({begin, end}); };
  const json j = {
      {"version", 1},
      {"size", v.size()},
      {"blocks",
       {{"context", range(0, v.context_size())},
        {"word", range(v.word_begin(), v.word_begin() + v.word_count())},
        {"special", {{"bos", v.bos()}, {"eos", v.eos()}, {"pad", v.pad()}, {"mask", v.mask()}}},
        {"action", range(v.action_begin(), v.size())}}},
      {"words", v.words()},
  };
  return j.dump(2) + "\n";
}

Vocabulary vocab_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    require(j.at("version").get<int>() == 1, ErrorKind::kFormat, "unsupported vocabulary version");
    const auto& blocks = j.at("blocks");
    const auto context = blocks.at("context").get<std::vector<std::size_t>>();
    const auto action = blocks.at("action").get<std::vector<std::size_t>>();
    require(context.size() == 2 && action.size() == 2 && context[0] == 0 && action[1] > action[0],
            ErrorKind::kFormat, "malformed block ranges");
    Vocabulary v(context[1], j.at("words").get<std::vector<std::string>>(), action[1] - action[0]);
    require(v.action_begin() == action[0] && v.size() == j.at("size").get<std::size_t>(), ErrorKind::kFormat,
            "block ranges disagree with the word list");
    return v;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("corrupt vocabulary file: ") + e.what());
  }
}

}  // namespace mvlad::seq
