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

#ifndef FEDSCHED_OPTIMIZERS_H_
#define FEDSCHED_OPTIMIZERS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "fedsched/param_set.h"
#include "fedsched/tasks.h"

namespace fedsched {

enum class OptimizerKind { kVanilla, kMomentum, kFedProx };

// kGradientBuffer: u' = gamma*u + g;       w' = w - eta*u'
// kVelocity:       u' = gamma*u - eta*g;   w' = w + u'
enum class MomentumForm { kGradientBuffer, kVelocity };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kVanilla;
  double eta = 0.01;
  double gamma = 0.0;  // momentum only
  double mu = 0.0;     // fedprox only
  MomentumForm momentum_form = MomentumForm::kGradientBuffer;
  // Zero the momentum buffer whenever a new community model is fetched.
  bool reset_momentum_on_fetch = true;

  // Throws SpecError listing the violated constraint.
  void Validate() const;
};

struct OptimizerState {
  ParamSet u;       // momentum buffer
  ParamSet anchor;  // community model at fetch time
};

ParamSet StepVanilla(const ParamSet& w, const ParamSet& grad,
                     const OptimizerConfig& cfg);

// Returns (w_{t+1}, u_{t+1}).
std::pair<ParamSet, ParamSet> StepMomentum(const ParamSet& w,
                                           const ParamSet& u,
                                           const ParamSet& grad,
                                           const OptimizerConfig& cfg);

ParamSet StepFedProx(const ParamSet& w, const ParamSet& anchor,
                     const ParamSet& grad, const OptimizerConfig& cfg);

// Yields shuffled minibatches over one learner's local examples. Every
// epoch is a fresh permutation; the last batch of an epoch may be short.
class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> local_indices, std::size_t batch_size,
              std::uint64_t seed);

  // Drops any partially consumed epoch; the next batch opens a new one.
  void StartEpoch();
  std::span<const std::size_t> Next();

  std::size_t batch_size() const { return batch_size_; }
  std::size_t local_size() const { return order_.size(); }
  std::size_t batches_per_epoch() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t pos_ = 0;
  bool fresh_ = false;
  std::mt19937_64 rng_;
};

struct ClientOptResult {
  ParamSet model;
  std::size_t steps_done = 0;
  double last_loss = 0.0;
};

// Loss and gradient of the local objective at `w` over one batch.
using GradientFn =
    std::function<LossGrad(const ParamSet& w, std::span<const std::size_t> batch)>;

// Runs exactly `budget_batches` optimizer steps from `start`, starting a
// freshly shuffled epoch. `state.anchor` must hold the fetched community
// model; `extra_prox` adds extra_prox*(w - anchor) to every gradient (used
// for the FedAsync regularizer on top of any optimizer kind).
ClientOptResult RunClientOpt(const ParamSet& start, std::size_t budget_batches,
                             BatchStream& stream, const OptimizerConfig& cfg,
                             const TaskModel& task, const Dataset& data,
                             OptimizerState& state, double extra_prox = 0.0);

ClientOptResult RunClientOpt(const ParamSet& start, std::size_t budget_batches,
                             BatchStream& stream, const OptimizerConfig& cfg,
                             const GradientFn& gradient, OptimizerState& state,
                             double extra_prox = 0.0);

}  // namespace fedsched

#endif  // FEDSCHED_OPTIMIZERS_H_
