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

#ifndef FEDSCHED_PROTOCOL_H_
#define FEDSCHED_PROTOCOL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsched/controller.h"
#include "fedsched/metrics.h"
#include "fedsched/optimizers.h"
#include "fedsched/param_set.h"
#include "fedsched/partitioner.h"
#include "fedsched/tasks.h"

namespace fedsched {

struct LearnerProfile {
  std::size_t id = 0;
  DeviceClass device = DeviceClass::kFast;
  std::size_t batch_size = 1;
  double t_beta_ms = 1.0;  // time per batch
  std::vector<std::size_t> indices;

  std::size_t data_size() const { return indices.size(); }
  std::size_t batches_per_epoch() const {
    return (indices.size() + batch_size - 1) / batch_size;
  }
  VirtualUs batch_us() const { return MsToUs(t_beta_ms); }
  void Validate() const;
};

enum class Policy { kSync, kSemiSync, kAsync };

const char* PolicyName(Policy p);

struct ProtocolConfig {
  Policy policy = Policy::kSync;
  std::size_t epochs = 4;  // sync / async
  double lambda = 2.0;     // semisync
  WeightingScheme weighting;
  OptimizerConfig optimizer;
  // Stop once either limit is reached. Sync/semisync count rounds; async
  // counts update requests against max_rounds.
  std::optional<std::uint64_t> max_rounds;
  std::optional<double> budget_ms;
  std::uint64_t eval_every = 1;

  void Validate() const;
};

// Everything a run needs besides the protocol: the task, data, learners and
// the shared initial model.
struct Federation {
  TaskModel task;
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  std::vector<LearnerProfile> learners;
  ParamSet initial;
  std::uint64_t seed = 1990;
};

// t_max = lambda * max_k (|D_k| / beta_k) * t_beta_k;  B_k = t_max / t_beta_k,
// floored (with 1e-9 slack for exact quotients) and at least 1.
SchedulePlan PlanSemiSync(double lambda, const std::vector<LearnerProfile>& learners);

MetricsLog RunSync(const ProtocolConfig& cfg, const Federation& fed,
                   CommunityState& controller);
MetricsLog RunSemiSync(const ProtocolConfig& cfg, const Federation& fed,
                       CommunityState& controller);
MetricsLog RunAsync(const ProtocolConfig& cfg, const Federation& fed,
                    CommunityState& controller);

// Dispatches on cfg.policy with a fresh controller; the finished
// controller state is kept in the log's community snapshot.
MetricsLog RunProtocol(const ProtocolConfig& cfg, const Federation& fed);

// Real-threaded asynchronous driver: one thread per learner, each issuing
// `commits_per_learner` update requests through the FIFO controller.
// Nondeterministic interleaving; not used for metrics.
struct ThreadedCommit {
  std::uint64_t ticket = 0;
  LearnerId learner = 0;
  ParamSet model;
  std::uint64_t fetch_steps = 0;
  std::uint64_t fetch_version = 0;
  std::uint64_t local_steps = 0;
  double contribution = 0.0;
};

struct ThreadedRun {
  std::vector<ThreadedCommit> commits;  // ticket order
  CommunityState final_state;
};

ThreadedRun RunAsyncThreaded(const ProtocolConfig& cfg, const Federation& fed,
                             std::size_t commits_per_learner);

}  // namespace fedsched

#endif  // FEDSCHED_PROTOCOL_H_
