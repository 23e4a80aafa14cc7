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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decoding/decoding.hpp"
#include "traj_data/dataset.hpp"
#include "vla_sequence/sequence.hpp"

namespace mvlad::eval {

struct PlanningReport {
  double l2_1s = 0.0;
  double l2_2s = 0.0;
  double l2_3s = 0.0;
  double l2_avg = 0.0;  // mean over every waypoint of every decode
  double failure_rate = 0.0;
  double steps_to_action_ready = 0.0;
  double wall_ms_per_decode = 0.0;
  std::optional<double> token_accuracy;
  std::optional<double> label_match;
  std::size_t decodes = 0;
};

struct DecodeOutcome {
  bool valid = true;
  std::string error;
};

double failure_rate(std::span<const DecodeOutcome> outcomes);

struct ReasoningScore {
  std::optional<double> token_accuracy;  // absent when the truth is all PAD
  bool label_match = false;
};

// First maneuver keyword among the words between BOS and the first EOS.
std::optional<traj::Maneuver> decoded_maneuver(std::span<const int> tokens, const seq::Vocabulary& vocab);

// Exact-match fraction over positions whose truth is not PAD, plus whether
// the predicted keyword names `label`. Lengths must agree.
ReasoningScore reasoning_accuracy(std::span<const int> predicted, std::span<const int> truth,
                                  const seq::Vocabulary& vocab, traj::Maneuver label);

struct LatencyStats {
  std::string policy;
  std::size_t decodes = 0;
  double mean_steps = 0.0;
  double median_steps = 0.0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
};

struct LatencyReport {
  LatencyStats priority;
  LatencyStats global;
  double step_ratio = 0.0;  // priority / global mean steps to action-ready
  double ms_ratio = 0.0;    // 0 when no wall-clock was recorded
};

// Schedules from both policies; either list empty is an input error.
LatencyReport latency_report(std::span<const decode::DecodeSchedule> priority,
                             std::span<const decode::DecodeSchedule> global);

// Groups trace lines by decode index. Returns the policy named in the records.
std::vector<decode::DecodeSchedule> parse_trace_jsonl(std::string_view text, std::string* policy = nullptr);

std::string latency_csv(const LatencyReport& r);

// Table with 1 s / 2 s / 3 s / Avg / FR columns.
std::string report_table(const PlanningReport& r);
std::string report_csv_header();
std::string report_csv_row(const PlanningReport& r);

}  // namespace mvlad::eval
