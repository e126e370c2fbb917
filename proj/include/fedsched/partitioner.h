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

#ifndef FEDSCHED_PARTITIONER_H_
#define FEDSCHED_PARTITIONER_H_

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsched/tasks.h"

namespace fedsched {

enum class SizeDist { kUniform, kSkewed, kPowerLaw };
enum class ClassDist { kIid, kNonIid };
enum class DeviceClass { kFast, kSlow };

struct PartitionSpec {
  SizeDist size_dist = SizeDist::kUniform;
  double skew_ratio = 1.3;  // skewed: sizes proportional to ratio^-k
  double exponent = 1.5;    // powerlaw: sizes proportional to k^-exponent
  ClassDist class_dist = ClassDist::kIid;
  std::size_t classes_per_learner = 0;  // non-iid x
  // Explicit per-learner class counts; overrides x when present.
  std::optional<std::vector<std::size_t>> class_count_override;
  std::size_t num_learners = 1;

  // Throws SpecError. `num_classes` bounds x and the override entries.
  void Validate(std::size_t num_classes) const;

  // Per-learner class-count quotas in rank order. For power-law non-iid
  // without an explicit override the known head-expanded layouts are used
  // (e.g. 10 learners / 10 classes / x=5 -> 8,7,6,5,5,5,5,5,5,5).
  std::vector<std::size_t> ClassCounts(std::size_t num_classes) const;
};

struct LearnerPartition {
  std::vector<std::size_t> indices;     // into the master dataset
  std::vector<std::size_t> class_ids;   // owned classes, ascending
  std::size_t size() const { return indices.size(); }
};

struct PartitionResult {
  std::vector<LearnerPartition> learners;  // rank order, head first

  std::vector<std::size_t> Sizes() const;
  // {"learners": [{"learner", "size", "classes", "histogram"}]}
  nlohmann::json HistogramJson(const Dataset& data) const;
};

// Partition sizes in descending order, summing exactly to `total`, each >= 1.
std::vector<std::size_t> MakeSizes(const PartitionSpec& spec,
                                   std::size_t total);

// Deals classes round-robin (examples sorted by class id) and fills each
// learner's size quota. Leftover examples of a class go to its owners,
// head of the distribution first.
PartitionResult AssignClasses(const PartitionSpec& spec,
                              const std::vector<std::size_t>& sizes,
                              const Dataset& dataset);

// Returns, for each partition rank, the index into `device_order` of the
// device it runs on. Partitions (largest first) alternate fast, slow, fast,
// ...; equal-sized partitions keep identity order.
std::vector<std::size_t> AssignToDevices(
    const PartitionResult& result, const std::vector<DeviceClass>& device_order);

}  // namespace fedsched

#endif  // FEDSCHED_PARTITIONER_H_
