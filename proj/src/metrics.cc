/*
 * Copyright 2026 The fedsched Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedsched/metrics.h"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {

std::string FormatMs(VirtualUs us) {
  const char* sign = us < 0 ? "-" : "";
  const auto a = us < 0 ? -us : us;
  return fmt::format("{}{}.{:03}", sign, a / 1000, a % 1000);
}

const char* EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kFetch: return "fetch";
    case EventKind::kTrainStart: return "train_start";
    case EventKind::kTrainEnd: return "train_end";
    case EventKind::kUpdateRequest: return "update_request";
    case EventKind::kCommunityCommit: return "community_commit";
    case EventKind::kEval: return "eval";
  }
  return "unknown";
}

void MetricsLog::Finalize() {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });
}

VirtualUs MetricsLog::TotalIdle(std::size_t learner,
                                std::uint64_t first_round) const {
  VirtualUs total = 0;
  for (const auto& s : spans) {
    if (s.learner == learner && s.round >= first_round) total += s.idle;
  }
  return total;
}

std::string MetricsCsv(const MetricsLog& log) {
  std::string out = kMetricsCsvHeader;
  out += '\n';
  for (const auto& r : log.evals) {
    out += fmt::format("{},{},{},{:.10g},{:.10g}\n", FormatMs(r.time),
                       r.update_requests, r.round, r.accuracy, r.loss);
  }
  return out;
}

std::string IdleCsv(const MetricsLog& log) {
  std::string out = kIdleCsvHeader;
  out += '\n';
  for (const auto& s : log.spans) {
    out += fmt::format("{},{},{},{}\n", s.learner, s.round, FormatMs(s.active),
                       FormatMs(s.idle));
  }
  return out;
}

std::string EventsJsonl(const MetricsLog& log) {
  std::string out;
  for (const auto& e : log.events) {
    nlohmann::json j = {{"virtual_ms", FormatMs(e.time)},
                        {"learner", e.learner},
                        {"kind", EventKindName(e.kind)},
                        {"round", e.round}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

nlohmann::json Summary(const MetricsLog& log) {
  nlohmann::json j = {{"schema_version", kSummarySchemaVersion},
                      {"policy", log.policy},
                      {"rounds", log.rounds},
                      {"update_requests", log.update_requests},
                      {"models_exchanged", log.models_exchanged()},
                      {"requests_per_learner", log.requests_per_learner},
                      {"virtual_ms", FormatMs(log.end_time)}};
  if (!log.evals.empty()) {
    j["final_accuracy"] = log.evals.back().accuracy;
    j["final_loss"] = log.evals.back().loss;
  }
  if (log.plan) {
    j["schedule"] = {{"t_max_ms", log.plan->t_max_ms},
                     {"batches", log.plan->batches}};
  }
  if (!log.community.is_null()) j["community"] = log.community;
  return j;
}

void WriteFile(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << contents;
  f.close();
  if (!f) throw IoError("failed writing " + path.string());
}

void ExportMetrics(const MetricsLog& log, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  WriteFile(dir / "metrics.csv", MetricsCsv(log));
  WriteFile(dir / "idle.csv", IdleCsv(log));
  WriteFile(dir / "events.jsonl", EventsJsonl(log));
  WriteFile(dir / "summary.json", Summary(log).dump(2) + "\n");
}

}  // namespace fedsched
