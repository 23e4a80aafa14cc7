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

#include "decoding/decoding.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "core/error.hpp"
#include "json.hpp"

namespace mvlad::decode {
namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::size_t> masked_positions(const TokenSequence& s, const Vocabulary& vocab, bool actions) {
  std::vector<std::size_t> out;
  const auto want = actions ? seq::Segment::kAction : seq::Segment::kReasoning;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.segment[i] == want && s.ids[i] == vocab.mask()) out.push_back(i);
  }
  return out;
}

std::size_t count_masked_actions(const TokenSequence& s, const Vocabulary& vocab) {
  return masked_positions(s, vocab, true).size();
}

void check_prompt(const TokenSequence& prompt, const Vocabulary& vocab) {
  require(prompt.ids.size() == prompt.segment.size(), ErrorKind::kShape, "prompt ids and segments differ in size");
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    const bool gen = prompt.is_generation(i);
    require(gen == (prompt.ids[i] == vocab.mask()), ErrorKind::kValidation,
            "position " + std::to_string(i) +
                (gen ? " must start masked" : " is conditioning and must not be masked"));
  }
}

// Commits the `count` most confident candidates (ties to the lower position).
void commit(const Predict& predict, TokenSequence& s, std::span<const std::size_t> pool, std::size_t count,
            std::size_t step, const Vocabulary& vocab, const DecodeConfig& config, DecodeSchedule& schedule) {
  const auto start = Clock::now();
  const Tensor dist = predict(s);
  require(dist.rank() == 2 && dist.rows() == s.size() && dist.cols() == vocab.size(), ErrorKind::kShape,
          "predictor returned distributions of the wrong shape");
  std::vector<Candidate> cands = confidence_scores(dist, pool, s, vocab);
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.confidence > b.confidence || (a.confidence == b.confidence && a.position < b.position);
  });
  cands.resize(std::min(count, cands.size()));
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.position < b.position; });
  StepRecord rec;
  rec.step = step;
  for (const auto& c : cands) {
    s.ids[c.position] = c.id;
    s.mask_flags[c.position] = 0;
    rec.positions.push_back(c.position);
    rec.ids.push_back(c.id);
    rec.confidences.push_back(c.confidence);
  }
  rec.actions_remaining = count_masked_actions(s, vocab);
  if (config.record_timing) {
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  }
  if (rec.actions_remaining == 0 && schedule.action_ready_step == 0) schedule.action_ready_step = step;
  schedule.steps.push_back(std::move(rec));
}

}  // namespace

std::string_view policy_name(Policy p) {
  return p == Policy::kActionPriority ? "action_priority" : "global_confidence";
}

Policy parse_policy(std::string_view name) {
  if (name == "action_priority") return Policy::kActionPriority;
  if (name == "global_confidence") return Policy::kGlobalConfidence;
  fail(ErrorKind::kValidation, "unknown decode policy '" + std::string(name) + "'");
}

DecodeConfig DecodeConfig::from(const Config& cfg, std::uint64_t seed) {
  DecodeConfig c;
  c.total_steps = cfg.get_uint("total_steps", c.total_steps);
  c.action_steps = cfg.get_uint("action_steps", c.action_steps);
  c.policy = parse_policy(cfg.get_string("policy", policy_name(c.policy)));
  c.record_timing = cfg.get_bool("record_timing", c.record_timing);
  c.seed = seed;
  c.validate();
  return c;
}

void DecodeConfig::validate() const {
  require(total_steps >= 1, ErrorKind::kValidation, "decoding needs at least one step");
  require(action_steps >= 1 && action_steps <= total_steps, ErrorKind::kValidation,
          "action steps must lie in [1, total steps]");
}

std::vector<Candidate> confidence_scores(const Tensor& distributions, std::span<const std::size_t> positions,
                                         const TokenSequence& seq, const Vocabulary& vocab) {
  std::vector<Candidate> out;
  out.reserve(positions.size());
  const std::size_t v = distributions.cols();
  const int mask = vocab.mask();
  for (std::size_t pos : positions) {
    require(pos < distributions.rows(), ErrorKind::kIndex, "position outside the distribution table");
    const auto row = distributions.row(pos);
    const bool action = seq.segment.at(pos) == seq::Segment::kAction;
    std::size_t lo = action ? vocab.action_begin() : 0;
    const std::size_t hi = action ? vocab.action_begin() + vocab.action_size() : v;
    Candidate best{pos, -1, -std::numeric_limits<double>::infinity()};
    for (std::size_t k = lo; k < hi; ++k) {
      if (static_cast<int>(k) == mask) continue;
      if (row[k] > best.confidence) {
        best.confidence = row[k];
        best.id = static_cast<int>(k);
      }
    }
    require(best.id >= 0, ErrorKind::kEvaluation, "no finite probability at position " + std::to_string(pos));
    out.push_back(best);
  }
  return out;
}

std::size_t unmask_count(std::size_t remaining, std::size_t steps_left) {
  require(steps_left > 0, ErrorKind::kScheduler, "no steps left to unmask " + std::to_string(remaining) + " tokens");
  return (remaining + steps_left - 1) / steps_left;
}

DecodeResult action_priority_decode(const Predict& predict, const TokenSequence& prompt, const Vocabulary& vocab,
                                    const DecodeConfig& config) {
  config.validate();
  check_prompt(prompt, vocab);
  DecodeResult r{prompt, {}};
  TokenSequence& s = r.sequence;
  const bool has_reasoning = !masked_positions(s, vocab, false).empty();
  require(!has_reasoning || config.total_steps > config.action_steps, ErrorKind::kValidation,
          "reasoning positions need total steps greater than action steps");
  require(config.action_steps <= masked_positions(s, vocab, true).size(), ErrorKind::kValidation,
          "action steps exceed the number of action positions");

  std::size_t step = 0;
  for (std::size_t k = 0; k < config.action_steps; ++k) {
    const auto pool = masked_positions(s, vocab, true);
    commit(predict, s, pool, unmask_count(pool.size(), config.action_steps - k), ++step, vocab, config, r.schedule);
  }
  require(count_masked_actions(s, vocab) == 0 && r.schedule.action_ready_step == config.action_steps,
          ErrorKind::kScheduler, "action budget exhausted with action tokens still masked");
  if (has_reasoning) {
    const std::size_t reasoning_steps = config.total_steps - config.action_steps;
    for (std::size_t k = 0; k < reasoning_steps; ++k) {
      const auto pool = masked_positions(s, vocab, false);
      commit(predict, s, pool, unmask_count(pool.size(), reasoning_steps - k), ++step, vocab, config, r.schedule);
    }
  }
  check_action_first(r);
  return r;
}

DecodeResult global_confidence_decode(const Predict& predict, const TokenSequence& prompt, const Vocabulary& vocab,
                                      const DecodeConfig& config) {
  config.validate();
  check_prompt(prompt, vocab);
  DecodeResult r{prompt, {}};
  TokenSequence& s = r.sequence;
  for (std::size_t k = 0; k < config.total_steps; ++k) {
    auto pool = masked_positions(s, vocab, true);
    const auto reasoning = masked_positions(s, vocab, false);
    pool.insert(pool.end(), reasoning.begin(), reasoning.end());
    std::sort(pool.begin(), pool.end());
    commit(predict, s, pool, unmask_count(pool.size(), config.total_steps - k), k + 1, vocab, config, r.schedule);
  }
  return r;
}

DecodeResult run_decode(const Predict& predict, const TokenSequence& prompt, const Vocabulary& vocab,
                        const DecodeConfig& config) {
  return config.policy == Policy::kActionPriority ? action_priority_decode(predict, prompt, vocab, config)
                                                  : global_confidence_decode(predict, prompt, vocab, config);
}

void check_action_first(const DecodeResult& result) {
  std::size_t last_action = 0;
  std::size_t first_reasoning = std::numeric_limits<std::size_t>::max();
  for (const auto& rec : result.schedule.steps) {
    for (std::size_t pos : rec.positions) {
      if (result.sequence.segment[pos] == seq::Segment::kAction) last_action = std::max(last_action, rec.step);
      if (result.sequence.segment[pos] == seq::Segment::kReasoning) first_reasoning = std::min(first_reasoning, rec.step);
    }
  }
  require(first_reasoning > last_action, ErrorKind::kScheduler,
          "reasoning token committed at step " + std::to_string(first_reasoning) +
              " before the last action token at step " + std::to_string(last_action));
}

traj::Trajectory extract_trajectory(const TokenSequence& seq, const codebook::Codebook& cb, const Vocabulary& vocab) {
  return cb.decode(seq::action_tokens(seq, vocab));
}

std::string trace_jsonl(const DecodeSchedule& schedule, std::size_t decode_index, Policy policy) {
  std::string out;
  for (const auto& rec : schedule.steps) {
    const nlohmann::json j = {{"decode", decode_index},
                              {"policy", policy_name(policy)},
                              {"step", rec.step},
                              {"positions", rec.positions},
                              {"ids", rec.ids},
                              {"confidences", rec.confidences},
                              {"actions_remaining", rec.actions_remaining},
                              {"wall_ms", rec.wall_ms}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mvlad::decode
