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

#ifndef FEDSCHED_EXPERIMENT_H_
#define FEDSCHED_EXPERIMENT_H_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fedsched/config.h"
#include "fedsched/metrics.h"
#include "fedsched/partitioner.h"
#include "fedsched/protocol.h"

namespace fedsched {

// Dataset, partitions and learner profiles built from a config. Owns the
// data the Federation points into, so it is neither copied nor moved.
struct Experiment {
  Dataset train;
  Dataset test;
  PartitionResult partition;
  std::vector<std::size_t> device_of_rank;
  Federation fed;

  Experiment() = default;
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;
};

// Devices are numbered fast first, then slow; learner k runs on device k.
std::unique_ptr<Experiment> BuildExperiment(const ExperimentConfig& cfg);

// Partition report: per-learner class histograms plus device assignment.
nlohmann::json PartitionReport(const ExperimentConfig& cfg, const Experiment& exp);

struct CellResult {
  std::filesystem::path dir;
  double lambda = 0.0;
  MetricsLog log;
};

struct RunOptions {
  bool report_partitions_only = false;
};

// Runs every cell (one per lambda) and writes, per output directory:
// config.ini (byte echo), resolved_config.json, partitions.json and, unless
// report-only, metrics.csv / idle.csv / events.jsonl / summary.json.
std::vector<CellResult> RunExperiment(const ExperimentConfig& cfg,
                                      const std::filesystem::path& out_dir,
                                      const RunOptions& options = {});

// Output directory name for one matrix cell, e.g. "lambda_0.5".
std::string CellDirName(double lambda);

}  // namespace fedsched

#endif  // FEDSCHED_EXPERIMENT_H_
