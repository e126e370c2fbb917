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

#include "fedsched/controller.h"

#include <cmath>

#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {

void WeightingScheme::Validate() const {
  if (kind == WeightingKind::kFedAsyncPoly) {
    if (!(mixing > 0.0 && mixing <= 1.0)) {
      throw SpecError(fmt::format("fedasync mixing a in (0,1] required, got {}", mixing));
    }
    if (!(rho >= 0.0)) {
      throw SpecError(fmt::format("fedasync rho >= 0 required, got {}", rho));
    }
  }
}

CommunityState::CommunityState(ParamSet initial, std::size_t num_learners)
    : initial_(std::move(initial)),
      weighted_sum_(ZerosLike(initial_)),
      records_(num_learners),
      num_learners_(num_learners) {
  if (num_learners_ == 0) throw SpecError("community needs at least one learner");
}

CommunityState InitCommunity(ParamSet initial, std::size_t num_learners) {
  return CommunityState(std::move(initial), num_learners);
}

void CommunityState::CheckLearner(LearnerId k) const {
  if (k >= num_learners_) {
    throw SpecError(fmt::format("unknown learner {} (federation has {})", k,
                                num_learners_));
  }
}

ParamSet CommunityState::CachedUpdate(LearnerId k, const ParamSet& model,
                                      double contribution, std::uint64_t steps,
                                      std::uint64_t fetch_steps) {
  CheckLearner(k);
  CheckSameStructure(initial_, model, "CachedUpdate");
  if (!(contribution >= 0.0) || !std::isfinite(contribution)) {
    throw DegenerateWeightError(
        fmt::format("contribution value {} for learner {}", contribution, k));
  }
  auto& slot = records_[k];
  const double old_p = slot ? slot->contribution : 0.0;
  const double next_p = normalization_ + contribution - old_p;
  if (!(next_p > 0.0)) {
    throw DegenerateWeightError(
        fmt::format("community normalization would become {}", next_p));
  }

  // W_c,i <- W_c,i + p'_k w'_k,i - p_k w_k,i
  auto& sum = weighted_sum_.mutable_layers();
  for (std::size_t i = 0; i < sum.size(); ++i) {
    auto& dst = sum[i].values;
    const auto& fresh = model.layer(i).values;
    if (slot) {
      const auto& stale = slot->model.layer(i).values;
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] += contribution * fresh[j] - old_p * stale[j];
      }
    } else {
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += contribution * fresh[j];
    }
  }
  normalization_ = next_p;

  if (slot) {
    // Copy-assign in place, reusing the record buffers.
    slot->model = model;
    slot->contribution = contribution;
    slot->fetch_steps = fetch_steps;
    slot->local_steps = steps;
  } else {
    slot = ContributionRecord{k, model, contribution, fetch_steps, steps};
    ++num_records_;
  }
  committed_steps_ += steps;
  ++version_;
  return Community();
}

ParamSet CommunityState::FedAsyncUpdate(LearnerId k, const ParamSet& model,
                                        const WeightingScheme& scheme,
                                        std::uint64_t tau_k,
                                        std::uint64_t steps) {
  CheckLearner(k);
  CheckSameStructure(initial_, model, "FedAsyncUpdate");
  if (tau_k > version_) {
    throw SpecError(fmt::format("tau {} is ahead of the version clock {}",
                                tau_k, version_));
  }
  const double staleness = FedAsyncPolyStaleness(version_, tau_k);
  const double alpha =
      scheme.adaptive_mixing ? scheme.mixing * staleness : scheme.mixing;
  ParamSet next = Community();
  next.Scale(1.0 - alpha);
  next.AddScaled(alpha, model);
  mixed_ = std::move(next);
  if (!records_[k]) ++num_records_;
  records_[k] = ContributionRecord{k, model, alpha, tau_k, steps};
  committed_steps_ += steps;
  ++version_;
  return *mixed_;
}

ParamSet CommunityState::Community() const {
  if (mixed_) return *mixed_;
  if (normalization_ > 0.0) return Scale(1.0 / normalization_, weighted_sum_);
  return initial_;
}

ParamSet CommunityState::Recompute() const {
  if (num_records_ == 0) return initial_;
  std::vector<const ParamSet*> models;
  std::vector<double> weights;
  for (const auto& rec : records_) {
    if (!rec) continue;
    models.push_back(&rec->model);
    weights.push_back(rec->contribution);
  }
  return WeightedAverage(std::span<const ParamSet* const>(models), weights);
}

ParamSet CommunityState::SyncAggregate(const std::vector<ParamSet>& models,
                                       const std::vector<double>& contributions,
                                       std::uint64_t steps_total) {
  if (models.size() != num_learners_ || contributions.size() != num_learners_) {
    throw SpecError(fmt::format("SyncAggregate: {} models / {} weights for {} learners",
                                models.size(), contributions.size(), num_learners_));
  }
  ParamSet avg = WeightedAverage(std::span<const ParamSet>(models), contributions);
  double total = 0.0;
  for (double p : contributions) total += p;
  weighted_sum_ = Scale(total, avg);
  normalization_ = total;
  for (LearnerId k = 0; k < num_learners_; ++k) {
    records_[k] = ContributionRecord{k, models[k], contributions[k],
                                     committed_steps_, 0};
  }
  num_records_ = num_learners_;
  committed_steps_ += steps_total;
  version_ += num_learners_;
  mixed_.reset();
  return avg;
}

nlohmann::json CommunityState::Snapshot() const {
  nlohmann::json learners = nlohmann::json::array();
  for (const auto& rec : records_) {
    if (!rec) continue;
    learners.push_back({{"learner", rec->learner},
                        {"contribution", rec->contribution},
                        {"fetch_steps", rec->fetch_steps},
                        {"local_steps", rec->local_steps}});
  }
  return {{"committed_steps", committed_steps_},
          {"version", version_},
          {"normalization", normalization_},
          {"learners", learners}};
}

double FedAsyncPolyStaleness(std::uint64_t version, std::uint64_t tau) {
  if (tau > version) {
    throw SpecError(fmt::format("tau {} ahead of version {}", tau, version));
  }
  return 1.0 / std::sqrt(static_cast<double>(version - tau + 1));
}

double FedRecStaleness(std::uint64_t now_steps, std::uint64_t fetch_steps,
                       std::uint64_t local_steps, bool guarded) {
  const auto base = static_cast<double>(now_steps) -
                    static_cast<double>(fetch_steps) -
                    static_cast<double>(local_steps);
  if (guarded) return 1.0 / std::sqrt(std::max(0.0, base) + 1.0);
  if (!(base > 0.0)) {
    throw DegenerateWeightError(fmt::format(
        "raw FedRec staleness undefined for base {} (no intervening commits)", base));
  }
  return 1.0 / std::sqrt(base);
}

double ComputeContribution(const WeightingScheme& scheme,
                           const CommunityState& state, std::size_t data_size,
                           std::uint64_t fetch_steps, std::uint64_t local_steps) {
  if (local_steps == 0) throw SpecError("contribution needs local_steps >= 1");
  switch (scheme.kind) {
    case WeightingKind::kFedAvgStatic:
      return static_cast<double>(data_size);
    case WeightingKind::kFedRecStaleness:
      return FedRecStaleness(state.committed_steps() + local_steps, fetch_steps,
                             local_steps, scheme.fedrec_guard);
    case WeightingKind::kFedAsyncPoly:
      break;
  }
  throw SpecError("FedAsync mixes models directly and has no contribution value");
}

// Holds the controller mutex for the caller's ticket turn.
class Controller::TicketGuard {
 public:
  explicit TicketGuard(Controller& c) : c_(c), lock_(c.mu_) {
    ticket_ = c_.next_ticket_++;
    c_.cv_.wait(lock_, [&] { return c_.serving_ == ticket_; });
  }
  ~TicketGuard() {
    ++c_.serving_;
    lock_.unlock();
    c_.cv_.notify_all();
  }
  std::uint64_t ticket() const { return ticket_; }

 private:
  Controller& c_;
  std::unique_lock<std::mutex> lock_;
  std::uint64_t ticket_ = 0;
};

Controller::Fetch Controller::FetchCommunity() {
  TicketGuard g(*this);
  return {state_.Community(), state_.committed_steps(), state_.version()};
}

Controller::Commit Controller::SubmitUpdate(
    LearnerId k, const ParamSet& model, const WeightingScheme& scheme,
    std::size_t data_size, std::uint64_t fetch_steps,
    std::uint64_t fetch_version, std::uint64_t local_steps) {
  TicketGuard g(*this);
  if (scheme.kind == WeightingKind::kFedAsyncPoly) {
    auto w = state_.FedAsyncUpdate(k, model, scheme, fetch_version, local_steps);
    return {g.ticket(), state_.records()[k]->contribution, std::move(w)};
  }
  const double p =
      ComputeContribution(scheme, state_, data_size, fetch_steps, local_steps);
  auto w = state_.CachedUpdate(k, model, p, local_steps, fetch_steps);
  return {g.ticket(), p, std::move(w)};
}

CommunityState Controller::Snapshot() {
  TicketGuard g(*this);
  return state_;
}

}  // namespace fedsched
