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
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fedsched/errors.h"
#include "test_util.h"

namespace fedsched {
namespace {

using testing::Profile;

using testing::Sim;

ProtocolConfig Config(Policy policy, std::size_t epochs, std::uint64_t rounds) {
  ProtocolConfig c;
  c.policy = policy;
  c.epochs = epochs;
  c.max_rounds = rounds;
  c.optimizer.eta = 0.05;
  return c;
}

TEST(SyncTest, IdleExampleTwoLearners) {
  Sim sim({Profile(0, 30, 100, 1), Profile(1, 300, 100, 1, 100)});
  const auto log = RunProtocol(Config(Policy::kSync, 1, 1), sim.fed);
  ASSERT_EQ(log.spans.size(), 2u);
  EXPECT_EQ(log.spans[0].active, MsToUs(3000));
  EXPECT_EQ(log.spans[0].idle, MsToUs(27000));
  EXPECT_EQ(log.spans[1].active, MsToUs(30000));
  EXPECT_EQ(log.spans[1].idle, 0);
  EXPECT_EQ(log.end_time, MsToUs(30000));
}

TEST(SyncTest, HomogeneousHasNoIdle) {
  std::vector<LearnerProfile> ls;
  for (std::size_t k = 0; k < 4; ++k) ls.push_back(Profile(k, 50, 6, 5, 30 * k));
  Sim sim(std::move(ls));
  const auto log = RunProtocol(Config(Policy::kSync, 2, 3), sim.fed);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(log.TotalIdle(k), 0);
  EXPECT_EQ(log.end_time, 3 * MsToUs(2 * 6 * 50));
}

TEST(SyncTest, SpansTileEachRound) {
  Sim sim({Profile(0, 7, 3, 4), Profile(1, 13, 5, 4, 12), Profile(2, 2, 9, 4, 32)});
  const auto log = RunProtocol(Config(Policy::kSync, 2, 4), sim.fed);
  ASSERT_EQ(log.spans.size(), 12u);
  for (const auto& s : log.spans) {
    EXPECT_EQ(s.active + s.idle, MsToUs(2 * 5 * 13));
    EXPECT_EQ(s.start, static_cast<VirtualUs>(s.round) * MsToUs(2 * 5 * 13));
  }
}

TEST(SyncTest, RequestsAreRoundsTimesLearners) {
  Sim sim({Profile(0, 1, 2, 3), Profile(1, 2, 2, 3, 6), Profile(2, 3, 2, 3, 12)});
  for (auto policy : {Policy::kSync, Policy::kSemiSync}) {
    for (std::uint64_t r : {1u, 2u, 7u}) {
      const auto log = RunProtocol(Config(policy, 1, r), sim.fed);
      EXPECT_EQ(log.rounds, r);
      EXPECT_EQ(log.update_requests, r * 3);
      EXPECT_EQ(log.models_exchanged(), 2 * r * 3);
      EXPECT_EQ(log.evals.size(), r + 1);
      for (auto q : log.requests_per_learner) EXPECT_EQ(q, r);
    }
  }
}

TEST(SyncTest, BudgetStopsAfterCrossingRound) {
  Sim sim({Profile(0, 10, 2, 2)});
  auto cfg = Config(Policy::kSync, 1, 1);
  cfg.max_rounds.reset();
  cfg.budget_ms = 45;
  const auto log = RunProtocol(cfg, sim.fed);
  EXPECT_EQ(log.rounds, 3u);
}

TEST(SyncTest, RejectsStalenessWeighting) {
  Sim sim({Profile(0, 10, 2, 2)});
  auto cfg = Config(Policy::kSync, 1, 1);
  cfg.weighting.kind = WeightingKind::kFedRecStaleness;
  EXPECT_THROW(RunProtocol(cfg, sim.fed), SpecError);
  cfg.policy = Policy::kSemiSync;
  EXPECT_THROW(RunProtocol(cfg, sim.fed), SpecError);
  cfg.max_rounds.reset();
  EXPECT_THROW(RunProtocol(cfg, sim.fed), SpecError);
}

TEST(PlanTest, ScheduleExamples) {
  const auto a = PlanSemiSync(2.0, {Profile(0, 30, 114), Profile(1, 300, 114)});
  EXPECT_DOUBLE_EQ(a.t_max_ms, 68400.0);
  EXPECT_EQ(a.batches, (std::vector<std::size_t>{2280, 228}));
  const auto b = PlanSemiSync(0.5, {Profile(0, 60, 114), Profile(1, 2000, 114)});
  EXPECT_DOUBLE_EQ(b.t_max_ms, 114000.0);
  EXPECT_EQ(b.batches, (std::vector<std::size_t>{1900, 57}));
}

TEST(PlanTest, HomogeneousLambdaOneIsOneEpoch) {
  const auto p = PlanSemiSync(1.0, {Profile(0, 40, 17), Profile(1, 40, 17), Profile(2, 40, 17)});
  EXPECT_EQ(p.batches, (std::vector<std::size_t>{17, 17, 17}));
}

TEST(PlanTest, FloorsAtOneBatch) {
  const auto p = PlanSemiSync(0.01, {Profile(0, 1, 10), Profile(1, 500, 1)});
  EXPECT_EQ(p.batches[1], 1u);
  EXPECT_THROW(PlanSemiSync(0.0, {Profile(0, 1, 1)}), SpecError);
  EXPECT_THROW(PlanSemiSync(1.0, {}), SpecError);
}

TEST(PlanProperty, FinishSpreadBelowOneBatch) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> t(0.5, 400.0);
  std::uniform_real_distribution<double> lam(1.0, 4.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<LearnerProfile> ls;
    const std::size_t n = 1 + rng() % 12;
    for (std::size_t k = 0; k < n; ++k) {
      ls.push_back(Profile(k, std::round(t(rng) * 1000) / 1000, 1 + rng() % 200,
                           1 + rng() % 64));
    }
    const auto plan = PlanSemiSync(lam(rng), ls);
    double hi = 0, lo = 1e300;
    for (std::size_t k = 0; k < n; ++k) {
      const double finish = static_cast<double>(plan.batches[k]) * ls[k].t_beta_ms;
      EXPECT_LE(finish, plan.t_max_ms + 1e-6);
      EXPECT_GT(finish, plan.t_max_ms - ls[k].t_beta_ms - 1e-6);
      hi = std::max(hi, finish);
      lo = std::min(lo, finish);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double finish = static_cast<double>(plan.batches[k]) * ls[k].t_beta_ms;
      EXPECT_LE(hi - finish, ls[k].t_beta_ms + 1e-6);
    }
  }
}

TEST(SemiSyncTest, ColdStartThenPlannedRounds) {
  Sim sim({Profile(0, 30, 10, 2), Profile(1, 300, 10, 2, 20)});
  auto cfg = Config(Policy::kSemiSync, 1, 4);
  cfg.lambda = 2.0;
  const auto log = RunProtocol(cfg, sim.fed);
  ASSERT_TRUE(log.plan.has_value());
  EXPECT_EQ(log.plan->batches, (std::vector<std::size_t>{200, 20}));
  for (const auto& s : log.spans) {
    if (s.round == 0) {
      EXPECT_EQ(s.batches, 10u);
      if (s.learner == 0) {
        EXPECT_EQ(s.idle, MsToUs(2700));
      }
    } else {
      EXPECT_LE(s.idle, sim.fed.learners[s.learner].batch_us());
      EXPECT_EQ(s.batches, log.plan->batches[s.learner]);
    }
  }
  EXPECT_EQ(log.end_time, MsToUs(3000) + 3 * MsToUs(6000));
}

TEST(SemiSyncTest, FractionalEpochRounding) {
  // |D|/beta = 1.5 on the slow learner; floor keeps the fast learner inside
  // the round.
  Sim sim({Profile(0, 30, 3, 2), Profile(1, 300, 3, 2, 6)});
  sim.fed.learners[1].indices.resize(3);
  auto cfg = Config(Policy::kSemiSync, 1, 3);
  cfg.lambda = 1.0;
  const auto log = RunProtocol(cfg, sim.fed);
  for (const auto& s : log.spans) {
    if (s.round > 0) EXPECT_LE(s.idle, sim.fed.learners[s.learner].batch_us());
  }
}

TEST(AsyncTest, SingleLearnerRequestCount) {
  Sim sim({Profile(0, 10, 5, 2)});
  auto cfg = Config(Policy::kAsync, 1, 1);
  cfg.max_rounds.reset();
  cfg.budget_ms = 1000;
  const auto log = RunProtocol(cfg, sim.fed);
  EXPECT_EQ(log.update_requests, 20u);
  EXPECT_EQ(log.TotalIdle(0), 0);
  EXPECT_EQ(log.end_time, MsToUs(1000));
}

TEST(AsyncTest, FastLearnerSendsTenTimesMore) {
  Sim sim({Profile(0, 10, 5, 2), Profile(1, 100, 5, 2, 10)});
  auto cfg = Config(Policy::kAsync, 2, 1);
  cfg.max_rounds.reset();
  cfg.budget_ms = 10000;
  const auto log = RunProtocol(cfg, sim.fed);
  EXPECT_EQ(log.requests_per_learner[0], 100u);
  EXPECT_EQ(log.requests_per_learner[1], 10u);
  EXPECT_EQ(log.TotalIdle(0) + log.TotalIdle(1), 0);
}

TEST(AsyncProperty, RequestsMatchEventArithmetic) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<LearnerProfile> ls;
    const std::size_t n = 1 + rng() % 5;
    std::size_t first = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t batches = 1 + rng() % 4;
      const std::size_t bs = 1 + rng() % 3;
      ls.push_back(Profile(k, 1.0 + static_cast<double>(rng() % 500) / 10.0, batches, bs, first));
      first += batches * bs;
    }
    Sim sim(std::move(ls));
    auto cfg = Config(Policy::kAsync, 1 + rng() % 2, 1);
    cfg.max_rounds.reset();
    cfg.budget_ms = 200.0 + static_cast<double>(rng() % 2000);
    cfg.eval_every = 50;
    const auto log = RunProtocol(cfg, sim.fed);
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& l = sim.fed.learners[k];
      const double cycle = static_cast<double>(cfg.epochs * l.batches_per_epoch()) * l.t_beta_ms;
      const double oracle = std::floor(*cfg.budget_ms / cycle);
      EXPECT_LE(std::abs(static_cast<double>(log.requests_per_learner[k]) - oracle), 1.0);
      EXPECT_EQ(log.TotalIdle(k), 0);
      total += log.requests_per_learner[k];
    }
    EXPECT_EQ(total, log.update_requests);
  }
}

TEST(AsyncTest, TiesCommitInLearnerOrder) {
  Sim sim({Profile(0, 10, 2, 2), Profile(1, 10, 2, 2, 4), Profile(2, 20, 1, 2, 8)});
  auto cfg = Config(Policy::kAsync, 1, 9);
  const auto log = RunProtocol(cfg, sim.fed);
  std::vector<std::int64_t> order;
  for (const auto& e : log.events) {
    if (e.kind == EventKind::kUpdateRequest) order.push_back(e.learner);
  }
  EXPECT_EQ(order, (std::vector<std::int64_t>{0, 1, 2, 0, 1, 2, 0, 1, 2}));
  // One evaluation per distinct commit instant plus the initial one.
  EXPECT_EQ(log.evals.size(), 4u);
  EXPECT_EQ(log.update_requests, 9u);
}

TEST(AsyncTest, AllWeightingsRun) {
  Sim sim({Profile(0, 10, 4, 4), Profile(1, 35, 4, 4, 16)});
  for (auto kind : {WeightingKind::kFedAvgStatic, WeightingKind::kFedRecStaleness,
                    WeightingKind::kFedAsyncPoly}) {
    auto cfg = Config(Policy::kAsync, 1, 1);
    cfg.max_rounds.reset();
    cfg.budget_ms = 2000;
    cfg.weighting.kind = kind;
    const auto log = RunProtocol(cfg, sim.fed);
    EXPECT_GT(log.update_requests, 0u);
    EXPECT_GT(log.evals.back().accuracy, 0.0);
    EXPECT_EQ(log.community["version"], log.update_requests);
  }
}

TEST(ProtocolTest, EventsAreTimeOrdered) {
  Sim sim({Profile(0, 3, 4, 2), Profile(1, 11, 3, 2, 8), Profile(2, 7, 2, 2, 14)});
  for (auto policy : {Policy::kSync, Policy::kSemiSync, Policy::kAsync}) {
    const auto log = RunProtocol(Config(policy, 1, 6), sim.fed);
    for (std::size_t i = 1; i < log.events.size(); ++i) {
      ASSERT_LE(log.events[i - 1].time, log.events[i].time);
    }
  }
}

TEST(ProtocolTest, DeterministicReplay) {
  Sim sim({Profile(0, 3, 4, 2), Profile(1, 11, 3, 2, 8)});
  for (auto policy : {Policy::kSync, Policy::kSemiSync, Policy::kAsync}) {
    const auto a = RunProtocol(Config(policy, 2, 5), sim.fed);
    const auto b = RunProtocol(Config(policy, 2, 5), sim.fed);
    EXPECT_EQ(EventsJsonl(a), EventsJsonl(b));
    EXPECT_EQ(MetricsCsv(a), MetricsCsv(b));
    EXPECT_EQ(a.community, b.community);
  }
}

TEST(ProtocolTest, ExportWritesFixedHeaders) {
  Sim sim({Profile(0, 3, 4, 2), Profile(1, 11, 3, 2, 8)});
  auto log = RunProtocol(Config(Policy::kSemiSync, 1, 3), sim.fed);
  const auto dir = std::filesystem::temp_directory_path() / "fedsched_protocol_test";
  std::filesystem::remove_all(dir);
  ExportMetrics(log, dir);
  auto first_line = [&](const char* name) {
    std::ifstream f(dir / name);
    std::string line;
    std::getline(f, line);
    return line;
  };
  EXPECT_EQ(first_line("metrics.csv"), "virtual_ms,update_requests,round,accuracy,loss");
  EXPECT_EQ(first_line("idle.csv"), "learner_id,round,active_ms,idle_ms");
  std::ifstream s(dir / "summary.json");
  const auto summary = nlohmann::json::parse(s);
  EXPECT_EQ(summary["schema_version"], 1);
  EXPECT_EQ(summary["models_exchanged"], 12);
  EXPECT_EQ(summary["update_requests"], 6);
  EXPECT_TRUE(summary.contains("schedule"));
  const auto ev = nlohmann::json::parse(first_line("events.jsonl"));
  EXPECT_EQ(ev["virtual_ms"], "0.000");
  std::filesystem::remove_all(dir);
  EXPECT_THROW(ExportMetrics(log, "/proc/fedsched/none"), IoError);
}

TEST(ThreadedTest, CommitsReplayToSameState) {
  Sim sim({Profile(0, 3, 4, 2), Profile(1, 11, 3, 2, 8), Profile(2, 7, 2, 2, 14)});
  for (auto kind : {WeightingKind::kFedRecStaleness, WeightingKind::kFedAsyncPoly}) {
    auto cfg = Config(Policy::kAsync, 1, 1);
    cfg.weighting.kind = kind;
    const auto run = RunAsyncThreaded(cfg, sim.fed, 15);
    ASSERT_EQ(run.commits.size(), 45u);
    auto replay = InitCommunity(sim.fed.initial, 3);
    for (std::size_t i = 0; i < run.commits.size(); ++i) {
      const auto& c = run.commits[i];
      if (i > 0) EXPECT_LT(run.commits[i - 1].ticket, c.ticket);
      if (kind == WeightingKind::kFedAsyncPoly) {
        replay.FedAsyncUpdate(c.learner, c.model, cfg.weighting, c.fetch_version,
                              c.local_steps);
      } else {
        const double p = ComputeContribution(cfg.weighting, replay,
                                             sim.fed.learners[c.learner].data_size(),
                                             c.fetch_steps, c.local_steps);
        EXPECT_EQ(p, c.contribution);
        replay.CachedUpdate(c.learner, c.model, p, c.local_steps, c.fetch_steps);
      }
    }
    EXPECT_EQ(replay.Community(), run.final_state.Community());
    EXPECT_EQ(replay.committed_steps(), run.final_state.committed_steps());
  }
}

}  // namespace
}  // namespace fedsched
