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

#ifndef FEDSCHED_CONFIG_H_
#define FEDSCHED_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsched/partitioner.h"
#include "fedsched/protocol.h"
#include "fedsched/tasks.h"

namespace fedsched {

inline constexpr std::uint64_t kDefaultSeed = 1990;
// Round limit used when neither protocol.rounds nor protocol.budget_ms is set.
inline constexpr std::uint64_t kDefaultRounds = 10;

struct TaskSpec {
  TaskModel model{TaskKind::kSoftmaxRegression, 16, 10, 32, Activation::kRelu};
  std::size_t per_class = 200;       // training examples per class
  std::size_t test_per_class = 50;   // held-out examples per class
  double cluster_spread = 1.0;
};

struct LearnerSpec {
  std::size_t fast = 5;
  std::size_t slow = 5;
  double fast_ms = 30.0;
  double slow_ms = 300.0;
  std::size_t batch_size = 32;

  std::size_t total() const { return fast + slow; }
};

struct ExperimentConfig {
  std::string preset;
  TaskSpec task;
  PartitionSpec partition;
  LearnerSpec learners;
  ProtocolConfig protocol;
  std::vector<double> lambdas;  // matrix mode when size() > 1
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = "out";
  std::string source_text;      // exact bytes that were parsed

  nlohmann::json ToJson() const;
};

// Parses the INI-style text format:
//
//   seed = 1990
//   preset = cifar10-like
//   [task]       kind, input_dim, num_classes, hidden_dim, activation,
//                per_class, test_per_class, cluster_spread
//   [partition]  size_dist, exponent, skew_ratio, class_dist,
//                classes_per_learner, class_counts
//   [learners]   fast, slow, fast_ms, slow_ms, batch_size
//   [protocol]   policy, epochs, lambda, weighting, fedrec_guard,
//                fedasync_a, fedasync_rho, fedasync_adaptive, rounds,
//                budget_ms, eval_every
//   [optimizer]  kind, eta, gamma, mu, momentum_form, reset_momentum
//   [output]     dir
//
// Presets apply first; explicit keys override them. Throws ConfigError
// carrying every violation found.
ExperimentConfig ParseConfigString(const std::string& text);
ExperimentConfig ParseConfig(const std::filesystem::path& path);

}  // namespace fedsched

#endif  // FEDSCHED_CONFIG_H_
