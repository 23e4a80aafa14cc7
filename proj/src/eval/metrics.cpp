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

#include "eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "json.hpp"

namespace mvlad::eval {
namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LatencyStats stats(std::span<const decode::DecodeSchedule> schedules, std::string policy) {
  LatencyStats s;
  s.policy = std::move(policy);
  s.decodes = schedules.size();
  std::vector<double> steps, ms;
  for (const auto& sch : schedules) {
    steps.push_back(static_cast<double>(sch.action_ready_step));
    double total = 0.0;
    for (const auto& rec : sch.steps) total += rec.wall_ms;
    ms.push_back(total);
  }
  s.mean_steps = mean(steps);
  s.median_steps = median(steps);
  s.mean_ms = mean(ms);
  s.median_ms = median(ms);
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

double failure_rate(std::span<const DecodeOutcome> outcomes) {
  if (outcomes.empty()) return 0.0;
  std::size_t failed = 0;
  for (const auto& o : outcomes) failed += o.valid ? 0 : 1;
  return static_cast<double>(failed) / static_cast<double>(outcomes.size());
}

std::optional<traj::Maneuver> decoded_maneuver(std::span<const int> tokens, const seq::Vocabulary& vocab) {
  for (int id : tokens) {
    if (id == vocab.eos()) break;
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size() || vocab.classify(id) != seq::TokenClass::kWord ||
        id == vocab.bos() || id == vocab.pad()) {
      continue;
    }
    if (auto m = traj::maneuver_from_keyword(vocab.word(id))) return m;
  }
  return std::nullopt;
}

ReasoningScore reasoning_accuracy(std::span<const int> predicted, std::span<const int> truth,
                                  const seq::Vocabulary& vocab, traj::Maneuver label) {
  require(predicted.size() == truth.size(), ErrorKind::kValidation,
          "predicted reasoning has " + std::to_string(predicted.size()) + " tokens, truth has " +
              std::to_string(truth.size()));
  ReasoningScore s;
  std::size_t counted = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == vocab.pad()) continue;
    ++counted;
    hits += predicted[i] == truth[i] ? 1 : 0;
  }
  if (counted > 0) s.token_accuracy = static_cast<double>(hits) / static_cast<double>(counted);
  const auto m = decoded_maneuver(predicted, vocab);
  s.label_match = m.has_value() && *m == label;
  return s;
}

LatencyReport latency_report(std::span<const decode::DecodeSchedule> priority,
                             std::span<const decode::DecodeSchedule> global) {
  require(!priority.empty() && !global.empty(), ErrorKind::kValidation,
          "latency report needs traces from both decode policies");
  LatencyReport r;
  r.priority = stats(priority, std::string(decode::policy_name(decode::Policy::kActionPriority)));
  r.global = stats(global, std::string(decode::policy_name(decode::Policy::kGlobalConfidence)));
  r.step_ratio = r.global.mean_steps > 0.0 ? r.priority.mean_steps / r.global.mean_steps : 0.0;
  r.ms_ratio = r.global.mean_ms > 0.0 ? r.priority.mean_ms / r.global.mean_ms : 0.0;
  return r;
}

std::vector<decode::DecodeSchedule> parse_trace_jsonl(std::string_view text, std::string* policy) {
  std::map<std::size_t, decode::DecodeSchedule> by_decode;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      decode::StepRecord rec;
      rec.step = j.at("step").get<std::size_t>();
      rec.positions = j.at("positions").get<std::vector<std::size_t>>();
      rec.ids = j.at("ids").get<std::vector<int>>();
      rec.confidences = j.at("confidences").get<std::vector<double>>();
      rec.actions_remaining = j.at("actions_remaining").get<std::size_t>();
      rec.wall_ms = j.at("wall_ms").get<double>();
      if (policy != nullptr) *policy = j.at("policy").get<std::string>();
      auto& sch = by_decode[j.at("decode").get<std::size_t>()];
      if (rec.actions_remaining == 0 && sch.action_ready_step == 0) sch.action_ready_step = rec.step;
      sch.steps.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, "trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<decode::DecodeSchedule> out;
  for (auto& [idx, sch] : by_decode) out.push_back(std::move(sch));
  return out;
}

std::string latency_csv(const LatencyReport& r) {
  std::string out = "policy,decodes,mean_steps_to_action_ready,median_steps_to_action_ready,mean_ms,median_ms\n";
  for (const auto* s : {&r.priority, &r.global}) {
    out += s->policy + ',' + std::to_string(s->decodes) + ',' + num(s->mean_steps) + ',' + num(s->median_steps) +
           ',' + num(s->mean_ms) + ',' + num(s->median_ms) + '\n';
  }
  out += "ratio,," + num(r.step_ratio) + ",," + num(r.ms_ratio) + ",\n";
  return out;
}

std::string report_table(const PlanningReport& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%8s %8s %8s %8s %8s\n", "1s", "2s", "3s", "Avg", "FR");
  out << "L2 (m)\n" << buf;
  std::snprintf(buf, sizeof(buf), "%8.3f %8.3f %8.3f %8.3f %7.2f%%\n", r.l2_1s, r.l2_2s, r.l2_3s, r.l2_avg,
                100.0 * r.failure_rate);
  out << buf;
  std::snprintf(buf, sizeof(buf), "steps to action-ready %.3f, %.3f ms per decode, %zu decodes\n",
                r.steps_to_action_ready, r.wall_ms_per_decode, r.decodes);
  out << buf;
  if (r.token_accuracy || r.label_match) {
    out << "reasoning token accuracy " << (r.token_accuracy ? num(*r.token_accuracy) : "n/a") << ", label match "
        << (r.label_match ? num(*r.label_match) : "n/a") << '\n';
  }
  return out.str();
}

std::string report_csv_header() {
  return "l2_1s,l2_2s,l2_3s,l2_avg,failure_rate,steps_to_action_ready,wall_ms_per_decode,token_accuracy,"
         "label_match,decodes";
}

std::string report_csv_row(const PlanningReport& r) {
  return num(r.l2_1s) + ',' + num(r.l2_2s) + ',' + num(r.l2_3s) + ',' + num(r.l2_avg) + ',' + num(r.failure_rate) +
         ',' + num(r.steps_to_action_ready) + ',' + num(r.wall_ms_per_decode) + ',' + opt(r.token_accuracy) + ',' +
         opt(r.label_match) + ',' + std::to_string(r.decodes);
}

}  // namespace mvlad::eval
