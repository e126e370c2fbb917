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

#ifndef FEDSCHED_CONTROLLER_H_
#define FEDSCHED_CONTROLLER_H_

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsched/param_set.h"

namespace fedsched {

using LearnerId = std::size_t;

enum class WeightingKind { kFedAvgStatic, kFedRecStaleness, kFedAsyncPoly };

struct WeightingScheme {
  WeightingKind kind = WeightingKind::kFedAvgStatic;
  // FedRec: add 1 inside the power so a zero base yields weight 1.
  bool fedrec_guard = true;
  // FedAsync+Poly.
  double mixing = 0.5;   // a in (0, 1]
  double rho = 0.005;    // client proximal coefficient
  bool adaptive_mixing = true;  // alpha = a * S_k; false -> alpha = a

  void Validate() const;
};

struct ContributionRecord {
  LearnerId learner = 0;
  ParamSet model;
  double contribution = 0.0;
  std::uint64_t fetch_steps = 0;  // s_c at fetch
  std::uint64_t local_steps = 0;
};

// Community & caching tier. W_c is the unnormalized sum of p_k * w_k over
// the most recent record of every learner, P the sum of p_k.
class CommunityState {
 public:
  CommunityState(ParamSet initial, std::size_t num_learners);

  // O(M) incremental refresh of W_c and P for learner k's new model.
  // Returns the new community model W_c / P.
  ParamSet CachedUpdate(LearnerId k, const ParamSet& model, double contribution,
                        std::uint64_t steps, std::uint64_t fetch_steps = 0);

  // w_c <- (1 - alpha) w_c + alpha w_k with alpha from the FedAsync+Poly
  // staleness of tau_k against the version clock. Bypasses the cache.
  ParamSet FedAsyncUpdate(LearnerId k, const ParamSet& model,
                          const WeightingScheme& scheme, std::uint64_t tau_k,
                          std::uint64_t steps = 0);

  // W_c / P when P > 0, otherwise the initial broadcast (or the latest
  // FedAsync mixture).
  ParamSet Community() const;

  // Full O(MN) weighted average over the live records.
  ParamSet Recompute() const;

  // Replaces all records at once (synchronous rounds), as if each learner
  // had issued one CachedUpdate in id order; returns the community model
  // computed by a full pass.
  ParamSet SyncAggregate(const std::vector<ParamSet>& models,
                         const std::vector<double>& contributions,
                         std::uint64_t steps_total);

  double normalization() const { return normalization_; }
  const ParamSet& unnormalized() const { return weighted_sum_; }
  std::uint64_t committed_steps() const { return committed_steps_; }
  std::uint64_t version() const { return version_; }
  std::size_t num_learners() const { return num_learners_; }
  // Indexed by learner id; empty until the learner's first commit.
  const std::vector<std::optional<ContributionRecord>>& records() const { return records_; }
  std::size_t num_records() const { return num_records_; }
  const ParamSet& initial() const { return initial_; }

  // {"committed_steps", "version", "normalization", "learners": [...]}
  nlohmann::json Snapshot() const;

 private:
  void CheckLearner(LearnerId k) const;

  ParamSet initial_;
  ParamSet weighted_sum_;
  double normalization_ = 0.0;
  std::vector<std::optional<ContributionRecord>> records_;
  std::size_t num_records_ = 0;
  std::uint64_t committed_steps_ = 0;
  std::uint64_t version_ = 0;
  std::size_t num_learners_;
  std::optional<ParamSet> mixed_;  // FedAsync community model
};

CommunityState InitCommunity(ParamSet initial, std::size_t num_learners);

// (T - tau + 1)^(-1/2)
double FedAsyncPolyStaleness(std::uint64_t version, std::uint64_t tau);

// Effective staleness in committed steps. `now_steps` includes the
// requesting learner's own pending steps, so the base counts steps other
// learners committed since the fetch. Guarded: (max(0, base) + 1)^(-1/2);
// raw: base^(-1/2), undefined for base <= 0.
double FedRecStaleness(std::uint64_t now_steps, std::uint64_t fetch_steps,
                       std::uint64_t local_steps, bool guarded);

// Contribution value p_k for the cached weighting schemes. `data_size` is
// |D_k|. FedAsync has no contribution value; asking for one is an error.
double ComputeContribution(const WeightingScheme& scheme,
                           const CommunityState& state, std::size_t data_size,
                           std::uint64_t fetch_steps, std::uint64_t local_steps);

// Serializes mutations of a CommunityState in ticket (arrival) order.
class Controller {
 public:
  explicit Controller(CommunityState state) : state_(std::move(state)) {}

  struct Fetch {
    ParamSet model;
    std::uint64_t committed_steps;
    std::uint64_t version;
  };

  Fetch FetchCommunity();

  struct Commit {
    std::uint64_t ticket;
    double contribution;
    ParamSet community;
  };

  // Applies one update request under the FIFO lock: cached schemes compute
  // p_k and call CachedUpdate, FedAsync calls FedAsyncUpdate.
  Commit SubmitUpdate(LearnerId k, const ParamSet& model,
                      const WeightingScheme& scheme, std::size_t data_size,
                      std::uint64_t fetch_steps, std::uint64_t fetch_version,
                      std::uint64_t local_steps);

  // Copy of the state taken under the lock.
  CommunityState Snapshot();

 private:
  class TicketGuard;

  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t serving_ = 0;
  CommunityState state_;
};

}  // namespace fedsched

#endif  // FEDSCHED_CONTROLLER_H_
