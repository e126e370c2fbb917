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

#include "fedsched/protocol.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {
namespace {

std::uint64_t LearnerSeed(std::uint64_t seed, std::size_t k) {
  // splitmix64 finalizer over (seed, k)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct LearnerRuntime {
  BatchStream stream;
  OptimizerState opt;
};

std::vector<LearnerRuntime> MakeRuntimes(const Federation& fed) {
  std::vector<LearnerRuntime> rt;
  rt.reserve(fed.learners.size());
  for (const auto& l : fed.learners) {
    rt.push_back({BatchStream(l.indices, l.batch_size, LearnerSeed(fed.seed, l.id)),
                  OptimizerState{}});
  }
  return rt;
}

void CheckFederation(const Federation& fed) {
  if (fed.learners.empty()) throw SpecError("federation has no learners");
  if (fed.train == nullptr || fed.test == nullptr) {
    throw SpecError("federation is missing its train or test dataset");
  }
  for (std::size_t k = 0; k < fed.learners.size(); ++k) {
    if (fed.learners[k].id != k) {
      throw SpecError(fmt::format("learner at position {} has id {}", k,
                                  fed.learners[k].id));
    }
    fed.learners[k].Validate();
  }
  CheckSameStructure(fed.task.ZeroParams(), fed.initial, "initial model");
}

// Prepares a learner for training from a freshly fetched community model.
void OnFetch(LearnerRuntime& rt, const ParamSet& community,
             const OptimizerConfig& cfg) {
  rt.opt.anchor = community;
  if (cfg.reset_momentum_on_fetch || !rt.opt.u.SameStructure(community)) {
    rt.opt.u = ZerosLike(community);
  }
}

VirtualUs BudgetUs(const ProtocolConfig& cfg) {
  return cfg.budget_ms ? MsToUs(*cfg.budget_ms)
                       : std::numeric_limits<VirtualUs>::max();
}

void RecordEval(MetricsLog& log, const Federation& fed, const ParamSet& w,
                VirtualUs t, std::uint64_t round) {
  const auto r = Evaluate(fed.task, w, *fed.test);
  log.evals.push_back({t, log.update_requests, round, r.accuracy, r.loss});
  log.events.push_back({t, kControllerId, EventKind::kEval, round});
}

// One barrier-synchronized round: every learner trains `batches[k]` batches
// from the current community model, the round ends when the slowest
// finishes, and the controller averages with p_k = |D_k|.
VirtualUs RunBarrierRound(const ProtocolConfig& cfg, const Federation& fed,
                          CommunityState& controller,
                          std::vector<LearnerRuntime>& rt,
                          const std::vector<std::size_t>& batches,
                          VirtualUs clock, std::uint64_t round, MetricsLog& log) {
  const std::size_t n = fed.learners.size();
  const ParamSet community = controller.Community();
  std::vector<ParamSet> models;
  std::vector<double> weights;
  std::vector<VirtualUs> finish(n);
  std::uint64_t steps = 0;
  models.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& l = fed.learners[k];
    const auto id = static_cast<std::int64_t>(k);
    log.events.push_back({clock, id, EventKind::kFetch, round});
    log.events.push_back({clock, id, EventKind::kTrainStart, round});
    OnFetch(rt[k], community, cfg.optimizer);
    auto res = RunClientOpt(community, batches[k], rt[k].stream, cfg.optimizer,
                            fed.task, *fed.train, rt[k].opt);
    finish[k] = clock + static_cast<VirtualUs>(batches[k]) * l.batch_us();
    log.events.push_back({finish[k], id, EventKind::kTrainEnd, round});
    log.events.push_back({finish[k], id, EventKind::kUpdateRequest, round});
    models.push_back(std::move(res.model));
    weights.push_back(static_cast<double>(l.data_size()));
    steps += res.steps_done;
    ++log.requests_per_learner[k];
  }
  const VirtualUs end = *std::max_element(finish.begin(), finish.end());
  for (std::size_t k = 0; k < n; ++k) {
    log.spans.push_back({k, round, clock, finish[k] - clock, end - finish[k],
                         batches[k]});
  }
  controller.SyncAggregate(models, weights, steps);
  log.events.push_back({end, kControllerId, EventKind::kCommunityCommit, round});
  log.update_requests += n;
  return end;
}

MetricsLog StartLog(Policy p, const Federation& fed) {
  MetricsLog log;
  log.policy = PolicyName(p);
  log.requests_per_learner.assign(fed.learners.size(), 0);
  return log;
}

void FinishLog(MetricsLog& log, const CommunityState& controller, VirtualUs end) {
  log.end_time = end;
  log.community = controller.Snapshot();
  log.Finalize();
}

void CheckSyncWeighting(const ProtocolConfig& cfg) {
  if (cfg.weighting.kind != WeightingKind::kFedAvgStatic) {
    throw SpecError(fmt::format("{} policy aggregates with p_k = |D_k|; "
                                "weighting must be fedavg",
                                PolicyName(cfg.policy)));
  }
}

}  // namespace

void LearnerProfile::Validate() const {
  if (!(t_beta_ms > 0.0)) {
    throw SpecError(fmt::format("learner {}: t_beta > 0 required", id));
  }
  if (batch_size < 1) throw SpecError(fmt::format("learner {}: batch size >= 1", id));
  if (indices.empty()) throw SpecError(fmt::format("learner {}: empty partition", id));
  if (batch_us() <= 0) {
    throw SpecError(fmt::format("learner {}: t_beta below 1 us resolution", id));
  }
}

const char* PolicyName(Policy p) {
  switch (p) {
    case Policy::kSync: return "sync";
    case Policy::kSemiSync: return "semisync";
    case Policy::kAsync: return "async";
  }
  return "unknown";
}

void ProtocolConfig::Validate() const {
  if (policy != Policy::kSemiSync && epochs < 1) throw SpecError("epochs >= 1 required");
  if (policy == Policy::kSemiSync && !(lambda > 0.0)) {
    throw SpecError(fmt::format("lambda > 0 required, got {}", lambda));
  }
  if (!max_rounds && !budget_ms) {
    throw SpecError("a round limit or a virtual-time budget is required");
  }
  if (budget_ms && !(*budget_ms > 0.0)) throw SpecError("budget_ms > 0 required");
  if (eval_every < 1) throw SpecError("eval_every >= 1 required");
  weighting.Validate();
  optimizer.Validate();
}

SchedulePlan PlanSemiSync(double lambda, const std::vector<LearnerProfile>& learners) {
  if (!(lambda > 0.0)) throw SpecError(fmt::format("lambda > 0 required, got {}", lambda));
  if (learners.empty()) throw SpecError("PlanSemiSync: no learners");
  double slowest_epoch = 0.0;
  for (const auto& l : learners) {
    if (!(l.t_beta_ms > 0.0)) {
      throw SpecError(fmt::format("PlanSemiSync: learner {} has no profiled t_beta", l.id));
    }
    const double epoch_ms = static_cast<double>(l.data_size()) /
                            static_cast<double>(l.batch_size) * l.t_beta_ms;
    slowest_epoch = std::max(slowest_epoch, epoch_ms);
  }
  SchedulePlan plan;
  plan.t_max_ms = lambda * slowest_epoch;
  for (const auto& l : learners) {
    const double b = std::floor(plan.t_max_ms / l.t_beta_ms + 1e-9);
    plan.batches.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(b)));
  }
  return plan;
}

MetricsLog RunSync(const ProtocolConfig& cfg, const Federation& fed,
                   CommunityState& controller) {
  cfg.Validate();
  CheckFederation(fed);
  CheckSyncWeighting(cfg);
  auto rt = MakeRuntimes(fed);
  MetricsLog log = StartLog(Policy::kSync, fed);
  std::vector<std::size_t> batches;
  for (const auto& l : fed.learners) batches.push_back(cfg.epochs * l.batches_per_epoch());

  const VirtualUs budget = BudgetUs(cfg);
  VirtualUs clock = 0;
  RecordEval(log, fed, controller.Community(), 0, 0);
  while (!(cfg.max_rounds && log.rounds >= *cfg.max_rounds) && clock < budget) {
    clock = RunBarrierRound(cfg, fed, controller, rt, batches, clock, log.rounds, log);
    ++log.rounds;
    if (log.rounds % cfg.eval_every == 0) {
      RecordEval(log, fed, controller.Community(), clock, log.rounds);
    }
  }
  FinishLog(log, controller, clock);
  return log;
}

MetricsLog RunSemiSync(const ProtocolConfig& cfg, const Federation& fed,
                       CommunityState& controller) {
  cfg.Validate();
  CheckFederation(fed);
  CheckSyncWeighting(cfg);
  auto rt = MakeRuntimes(fed);
  MetricsLog log = StartLog(Policy::kSemiSync, fed);

  const VirtualUs budget = BudgetUs(cfg);
  VirtualUs clock = 0;
  RecordEval(log, fed, controller.Community(), 0, 0);
  std::vector<std::size_t> batches;
  while (!(cfg.max_rounds && log.rounds >= *cfg.max_rounds) && clock < budget) {
    if (log.rounds == 0) {
      // Cold start: one epoch each, then profile and plan.
      for (const auto& l : fed.learners) batches.push_back(l.batches_per_epoch());
    }
    clock = RunBarrierRound(cfg, fed, controller, rt, batches, clock, log.rounds, log);
    if (log.rounds == 0) {
      // The simulated profile is its own ground truth: observed t_beta equals
      // the configured value.
      log.plan = PlanSemiSync(cfg.lambda, fed.learners);
      batches = log.plan->batches;
    }
    ++log.rounds;
    if (log.rounds % cfg.eval_every == 0) {
      RecordEval(log, fed, controller.Community(), clock, log.rounds);
    }
  }
  FinishLog(log, controller, clock);
  return log;
}

MetricsLog RunAsync(const ProtocolConfig& cfg, const Federation& fed,
                    CommunityState& controller) {
  cfg.Validate();
  CheckFederation(fed);
  auto rt = MakeRuntimes(fed);
  MetricsLog log = StartLog(Policy::kAsync, fed);
  const std::size_t n = fed.learners.size();
  const bool fedasync = cfg.weighting.kind == WeightingKind::kFedAsyncPoly;
  const double extra_prox = fedasync ? cfg.weighting.rho : 0.0;

  struct Pending {
    ParamSet fetched;
    std::uint64_t fetch_steps = 0;
    std::uint64_t tau = 0;
    VirtualUs start = 0;
    std::uint64_t cycle = 0;
  };
  std::vector<Pending> pending(n);
  using Item = std::pair<VirtualUs, std::size_t>;  // (finish time, learner)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;

  auto fetch = [&](std::size_t k, VirtualUs t) {
    const auto& l = fed.learners[k];
    auto& p = pending[k];
    p.fetched = controller.Community();
    p.fetch_steps = controller.committed_steps();
    p.tau = controller.version();
    p.start = t;
    OnFetch(rt[k], p.fetched, cfg.optimizer);
    const auto id = static_cast<std::int64_t>(k);
    log.events.push_back({t, id, EventKind::kFetch, p.cycle});
    log.events.push_back({t, id, EventKind::kTrainStart, p.cycle});
    const auto batches = cfg.epochs * l.batches_per_epoch();
    queue.push({t + static_cast<VirtualUs>(batches) * l.batch_us(), k});
  };

  const VirtualUs budget = BudgetUs(cfg);
  VirtualUs clock = 0;
  RecordEval(log, fed, controller.Community(), 0, 0);
  for (std::size_t k = 0; k < n; ++k) fetch(k, 0);

  auto limit_hit = [&] {
    return cfg.max_rounds && log.update_requests >= *cfg.max_rounds;
  };
  std::uint64_t commit_batches = 0;
  while (!queue.empty() && queue.top().first <= budget && !limit_hit()) {
    const VirtualUs t = queue.top().first;
    // All commits at the same instant, lower learner id first.
    while (!queue.empty() && queue.top().first == t && !limit_hit()) {
      const std::size_t k = queue.top().second;
      queue.pop();
      const auto& l = fed.learners[k];
      auto& p = pending[k];
      const auto batches = cfg.epochs * l.batches_per_epoch();
      auto res = RunClientOpt(p.fetched, batches, rt[k].stream, cfg.optimizer,
                              fed.task, *fed.train, rt[k].opt, extra_prox);
      const auto id = static_cast<std::int64_t>(k);
      log.events.push_back({t, id, EventKind::kTrainEnd, p.cycle});
      log.events.push_back({t, id, EventKind::kUpdateRequest, p.cycle});
      if (fedasync) {
        controller.FedAsyncUpdate(k, res.model, cfg.weighting, p.tau, res.steps_done);
      } else {
        const double contribution = ComputeContribution(
            cfg.weighting, controller, l.data_size(), p.fetch_steps, res.steps_done);
        controller.CachedUpdate(k, res.model, contribution, res.steps_done,
                                p.fetch_steps);
      }
      log.events.push_back({t, kControllerId, EventKind::kCommunityCommit,
                            controller.version()});
      log.spans.push_back({k, p.cycle, p.start, t - p.start, 0, batches});
      ++log.update_requests;
      ++log.requests_per_learner[k];
      ++p.cycle;
      fetch(k, t);
    }
    clock = t;
    log.rounds = controller.version();
    if (++commit_batches % cfg.eval_every == 0) {
      RecordEval(log, fed, controller.Community(), t, log.rounds);
    }
  }
  FinishLog(log, controller, clock);
  return log;
}

MetricsLog RunProtocol(const ProtocolConfig& cfg, const Federation& fed) {
  CommunityState controller = InitCommunity(fed.initial, fed.learners.size());
  switch (cfg.policy) {
    case Policy::kSync: return RunSync(cfg, fed, controller);
    case Policy::kSemiSync: return RunSemiSync(cfg, fed, controller);
    case Policy::kAsync: return RunAsync(cfg, fed, controller);
  }
  throw SpecError("unknown policy");
}

ThreadedRun RunAsyncThreaded(const ProtocolConfig& cfg, const Federation& fed,
                             std::size_t commits_per_learner) {
  cfg.Validate();
  CheckFederation(fed);
  const std::size_t n = fed.learners.size();
  Controller controller(InitCommunity(fed.initial, n));
  auto rt = MakeRuntimes(fed);
  const double extra_prox =
      cfg.weighting.kind == WeightingKind::kFedAsyncPoly ? cfg.weighting.rho : 0.0;
  std::vector<std::vector<ThreadedCommit>> per_thread(n);

  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      workers.emplace_back([&, k] {
        const auto& l = fed.learners[k];
        for (std::size_t c = 0; c < commits_per_learner; ++c) {
          auto f = controller.FetchCommunity();
          OnFetch(rt[k], f.model, cfg.optimizer);
          auto res = RunClientOpt(f.model, cfg.epochs * l.batches_per_epoch(),
                                  rt[k].stream, cfg.optimizer, fed.task,
                                  *fed.train, rt[k].opt, extra_prox);
          auto commit = controller.SubmitUpdate(k, res.model, cfg.weighting,
                                                l.data_size(), f.committed_steps,
                                                f.version, res.steps_done);
          per_thread[k].push_back({commit.ticket, k, std::move(res.model),
                                   f.committed_steps, f.version, res.steps_done,
                                   commit.contribution});
        }
      });
    }
  }

  ThreadedRun run{{}, controller.Snapshot()};
  for (auto& v : per_thread) {
    for (auto& c : v) run.commits.push_back(std::move(c));
  }
  std::sort(run.commits.begin(), run.commits.end(),
            [](const auto& a, const auto& b) { return a.ticket < b.ticket; });
  return run;
}

}  // namespace fedsched
