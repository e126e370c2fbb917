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

#include "fedsched/experiment.h"

#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {

std::unique_ptr<Experiment> BuildExperiment(const ExperimentConfig& cfg) {
  auto exp = std::make_unique<Experiment>();
  const auto& t = cfg.task;
  const Dataset all =
      GenSynthetic(t.model.num_classes, t.per_class + t.test_per_class,
                   t.model.input_dim, t.cluster_spread, cfg.seed);
  std::tie(exp->train, exp->test) = SplitHoldout(all, t.test_per_class);

  PartitionSpec spec = cfg.partition;
  spec.num_learners = cfg.learners.total();
  const auto sizes = MakeSizes(spec, exp->train.size());
  exp->partition = AssignClasses(spec, sizes, exp->train);

  std::vector<DeviceClass> devices(cfg.learners.fast, DeviceClass::kFast);
  devices.insert(devices.end(), cfg.learners.slow, DeviceClass::kSlow);
  exp->device_of_rank = AssignToDevices(exp->partition, devices);

  auto& fed = exp->fed;
  fed.task = t.model;
  fed.train = &exp->train;
  fed.test = &exp->test;
  fed.seed = cfg.seed;
  fed.initial = t.model.InitParams(cfg.seed);
  fed.learners.resize(devices.size());
  for (std::size_t rank = 0; rank < devices.size(); ++rank) {
    const std::size_t d = exp->device_of_rank[rank];
    auto& l = fed.learners[d];
    l.id = d;
    l.device = devices[d];
    l.batch_size = cfg.learners.batch_size;
    l.t_beta_ms = devices[d] == DeviceClass::kFast ? cfg.learners.fast_ms
                                                   : cfg.learners.slow_ms;
    l.indices = exp->partition.learners[rank].indices;
  }
  return exp;
}

nlohmann::json PartitionReport(const ExperimentConfig& cfg, const Experiment& exp) {
  nlohmann::json j = exp.partition.HistogramJson(exp.train);
  for (std::size_t rank = 0; rank < exp.device_of_rank.size(); ++rank) {
    const auto& l = exp.fed.learners[exp.device_of_rank[rank]];
    auto& e = j["learners"][rank];
    e["learner_id"] = l.id;
    e["device"] = l.device == DeviceClass::kFast ? "fast" : "slow";
    e["t_beta_ms"] = l.t_beta_ms;
  }
  j["size_distribution"] = cfg.ToJson()["partition"]["size_dist"];
  j["total_examples"] = exp.train.size();
  return j;
}

std::string CellDirName(double lambda) { return fmt::format("lambda_{}", lambda); }

std::vector<CellResult> RunExperiment(const ExperimentConfig& cfg,
                                      const std::filesystem::path& out_dir,
                                      const RunOptions& options) {
  const bool matrix = cfg.lambdas.size() > 1;
  auto exp = BuildExperiment(cfg);
  const auto report = PartitionReport(cfg, *exp);
  std::vector<CellResult> results;
  for (double lambda : cfg.lambdas) {
    ExperimentConfig cell = cfg;
    cell.protocol.lambda = lambda;
    CellResult r;
    r.dir = matrix ? out_dir / CellDirName(lambda) : out_dir;
    r.lambda = lambda;
    std::error_code ec;
    std::filesystem::create_directories(r.dir, ec);
    if (ec) throw IoError("cannot create " + r.dir.string() + ": " + ec.message());
    WriteFile(r.dir / "config.ini", cfg.source_text);
    WriteFile(r.dir / "resolved_config.json", cell.ToJson().dump(2) + "\n");
    WriteFile(r.dir / "partitions.json", report.dump(2) + "\n");
    if (!options.report_partitions_only) {
      r.log = RunProtocol(cell.protocol, exp->fed);
      ExportMetrics(r.log, r.dir);
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace fedsched
