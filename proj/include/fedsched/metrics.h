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

#ifndef FEDSCHED_METRICS_H_
#define FEDSCHED_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fedsched {

// Virtual time in integer microseconds.
using VirtualUs = std::int64_t;

inline VirtualUs MsToUs(double ms) {
  return static_cast<VirtualUs>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5));
}

// "12.345" from 12345 us, exact.
std::string FormatMs(VirtualUs us);

enum class EventKind {
  kFetch,
  kTrainStart,
  kTrainEnd,
  kUpdateRequest,
  kCommunityCommit,
  kEval,
};

const char* EventKindName(EventKind kind);

inline constexpr std::int64_t kControllerId = -1;

struct Event {
  VirtualUs time = 0;
  std::int64_t learner = kControllerId;
  EventKind kind = EventKind::kFetch;
  std::uint64_t round = 0;
};

// One learner's round (sync/semisync) or one fetch-to-commit cycle (async).
struct Span {
  std::size_t learner = 0;
  std::uint64_t round = 0;
  VirtualUs start = 0;
  VirtualUs active = 0;
  VirtualUs idle = 0;
  std::size_t batches = 0;
};

struct EvalRow {
  VirtualUs time = 0;
  std::uint64_t update_requests = 0;
  std::uint64_t round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
};

struct SchedulePlan {
  double t_max_ms = 0.0;
  std::vector<std::size_t> batches;  // B_k
};

struct MetricsLog {
  std::string policy;
  std::vector<Event> events;
  std::vector<Span> spans;
  std::vector<EvalRow> evals;
  std::uint64_t update_requests = 0;
  std::uint64_t rounds = 0;
  std::vector<std::uint64_t> requests_per_learner;
  VirtualUs end_time = 0;
  std::optional<SchedulePlan> plan;
  nlohmann::json community;  // controller snapshot at the end of the run

  std::uint64_t models_exchanged() const { return 2 * update_requests; }

  // Stable-sorts events by virtual time.
  void Finalize();

  // Idle time summed over `learner`'s spans with round >= first_round.
  VirtualUs TotalIdle(std::size_t learner, std::uint64_t first_round = 0) const;
};

// CSV header lines, fixed.
inline constexpr const char* kMetricsCsvHeader =
    "virtual_ms,update_requests,round,accuracy,loss";
inline constexpr const char* kIdleCsvHeader =
    "learner_id,round,active_ms,idle_ms";
inline constexpr int kSummarySchemaVersion = 1;

std::string MetricsCsv(const MetricsLog& log);
std::string IdleCsv(const MetricsLog& log);
std::string EventsJsonl(const MetricsLog& log);
nlohmann::json Summary(const MetricsLog& log);

// Writes metrics.csv, idle.csv, events.jsonl and summary.json into `dir`
// (created if missing). Throws IoError naming the failing path.
void ExportMetrics(const MetricsLog& log, const std::filesystem::path& dir);

// Writes `contents` to `path`, throwing IoError on failure.
void WriteFile(const std::filesystem::path& path, const std::string& contents);

}  // namespace fedsched

#endif  // FEDSCHED_METRICS_H_
