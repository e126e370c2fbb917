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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails or overruns its time limit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fedsched/bench.h"
#include "fedsched/config.h"
#include "fedsched/controller.h"
#include "fedsched/errors.h"
#include "fedsched/experiment.h"
#include "fedsched/optimizers.h"
#include "fedsched/partitioner.h"
#include "fedsched/protocol.h"
#include "fedsched/tasks.h"
#include "test_util.h"

namespace fedsched {
namespace {

namespace fs = std::filesystem;
using testing::Profile;
using testing::Sim;

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a failed check without stopping the criterion.
  void Check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

Outcome ScheduleReproduction() {
  Outcome o;
  const auto a = PlanSemiSync(2.0, {Profile(0, 30, 114), Profile(1, 300, 114)});
  const auto b = PlanSemiSync(0.5, {Profile(0, 60, 114), Profile(1, 2000, 114)});
  o.Check(a.batches == std::vector<std::size_t>{2280, 228},
          fmt::format("lambda=2 gave {}", fmt::join(a.batches, ",")));
  o.Check(b.batches == std::vector<std::size_t>{1900, 57},
          fmt::format("lambda=0.5 gave {}", fmt::join(b.batches, ",")));
  if (o.pass) o.detail = "B=(2280,228) and (1900,57)";
  return o;
}

Outcome CacheMatchesRecompute() {
  Outcome o;
  std::mt19937_64 rng(1990);
  std::uniform_real_distribution<double> weight(0.01, 100.0);
  auto state = InitCommunity(testing::RandomParams(10000, rng), 10);
  double worst = 0.0;
  for (int u = 0; u < 100; ++u) {
    state.CachedUpdate(rng() % 10, testing::RandomParams(10000, rng), weight(rng),
                       1 + rng() % 10);
    std::vector<ParamSet> models;
    std::vector<double> weights;
    for (const auto& rec : state.records()) {
      if (!rec) continue;
      models.push_back(rec->model);
      weights.push_back(rec->contribution);
    }
    worst = std::max(worst, state.Community().MaxAbsDiff(
                                testing::BruteWeightedMean(models, weights)));
  }
  o.Check(worst <= 1e-9, fmt::format("max abs diff {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("max abs diff {:.3g} over 100 updates", worst);
  return o;
}

Outcome CacheScaling() {
  Outcome o;
  BenchOptions opts;
  opts.learners = {10, 100, 1000};
  opts.model_sizes = {1000, 10000};
  opts.repeats = 10;
  const auto rows = BenchCache(opts);
  std::string summary;
  for (std::size_t m : opts.model_sizes) {
    std::vector<double> x, y;
    SelectSeries(rows, "cached", true, m, x, y);
    const auto cached = FitLine(x, y);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    const double change = std::abs(cached.slope) * (1000.0 - 10.0) / mean;
    // Indistinguishable from zero, or a practically negligible trend.
    const bool flat = cached.slope_p_value > 0.05 || change < 0.10;
    SelectSeries(rows, "recompute", true, m, x, y);
    const auto recompute = FitLine(x, y);
    o.Check(flat, fmt::format("M={} cached slope p={:.3g}, fitted change {:.1f}% of mean",
                              m, cached.slope_p_value, 100.0 * change));
    o.Check(recompute.r2 >= 0.9, fmt::format("M={} recompute R2={:.3f}", m, recompute.r2));
    summary += fmt::format("{}M={}: cached p={:.3g} change={:.1f}%, recompute R2={:.3f}",
                           summary.empty() ? "" : "; ", m, cached.slope_p_value,
                           100.0 * change, recompute.r2);
  }
  o.detail = o.pass ? summary : o.detail + " [" + summary + "]";
  return o;
}

Outcome OptimizerCorrectness() {
  Outcome o;
  std::mt19937_64 rng(4);
  // Momentum: two steps against a hand-unrolled recursion, exact.
  OptimizerConfig mom{OptimizerKind::kMomentum, 0.05};
  mom.gamma = 0.75;
  for (int trial = 0; trial < 50; ++trial) {
    const auto w0 = testing::RandomParams(30, rng);
    const auto g1 = testing::RandomParams(30, rng);
    const auto g2 = testing::RandomParams(30, rng);
    auto [w1, u1] = StepMomentum(w0, ZerosLike(w0), g1, mom);
    auto [w2, u2] = StepMomentum(w1, u1, g2, mom);
    ParamSet hand = w0;
    for (std::size_t i = 0; i < hand.num_layers(); ++i) {
      for (std::size_t j = 0; j < hand.layer(i).size(); ++j) {
        const double a1 = mom.gamma * 0.0 + g1.layer(i).values[j];
        const double x1 = w0.layer(i).values[j] - mom.eta * a1;
        const double a2 = mom.gamma * a1 + g2.layer(i).values[j];
        hand.mutable_layer(i).values[j] = x1 - mom.eta * a2;
      }
    }
    if (!(w2 == hand)) {
      o.Check(false, "momentum two-step mismatch");
      break;
    }
  }

  // FedProx: the step equals gradient descent on loss + (mu/2)||w - anchor||^2.
  const TaskModel task{TaskKind::kMlp1, 5, 4, 6, Activation::kTanh};
  const auto data = GenSynthetic(4, 20, 5, 1.0, 11);
  std::vector<std::size_t> batch(data.labels.size());
  std::iota(batch.begin(), batch.end(), 0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = task.InitParams(100 + trial);
    const auto anchor = task.InitParams(200 + trial);
    OptimizerConfig prox{OptimizerKind::kFedProx, 0.1};
    prox.mu = 0.05 + 0.1 * trial;
    auto objective = [&](const ParamSet& x) {
      double reg = 0.0;
      for (std::size_t i = 0; i < x.num_layers(); ++i) {
        for (std::size_t j = 0; j < x.layer(i).size(); ++j) {
          const double d = x.layer(i).values[j] - anchor.layer(i).values[j];
          reg += d * d;
        }
      }
      return Loss(task, x, data, batch) + 0.5 * prox.mu * reg;
    };
    const auto step = StepFedProx(w, anchor, LossAndGrad(task, w, data, batch).grad, prox);
    ParamSet implied = Axpy(-1.0, step, w);
    implied.Scale(1.0 / prox.eta);
    worst = std::max(worst, testing::RelativeError(implied, testing::FiniteDiffGrad(objective, w, 1e-5)));
  }
  o.Check(worst <= 1e-5, fmt::format("fedprox finite-difference rel err {:.3g}", worst));

  // Degenerate settings reproduce vanilla bit for bit.
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = testing::RandomParams(20, rng);
    const auto g = testing::RandomParams(20, rng);
    const auto anchor = testing::RandomParams(20, rng);
    OptimizerConfig van{OptimizerKind::kVanilla, 0.07};
    OptimizerConfig m0{OptimizerKind::kMomentum, 0.07};
    m0.gamma = 0.0;
    OptimizerConfig p0{OptimizerKind::kFedProx, 0.07};
    p0.mu = 0.0;
    const auto v = StepVanilla(w, g, van);
    if (!(StepMomentum(w, ZerosLike(w), g, m0).first == v) ||
        !(StepFedProx(w, anchor, g, p0) == v)) {
      o.Check(false, "degenerate step differs from vanilla");
      break;
    }
  }
  if (o.pass) {
    o.detail = fmt::format("momentum exact, fedprox rel err {:.2g}, degenerate forms bitwise", worst);
  }
  return o;
}

std::vector<LearnerProfile> FastSlow(std::size_t batches, std::size_t batch_size) {
  std::vector<LearnerProfile> ls;
  for (std::size_t k = 0; k < 10; ++k) {
    ls.push_back(Profile(k, k < 5 ? 30.0 : 300.0, batches, batch_size, k * batches * batch_size));
  }
  return ls;
}

Outcome IdleAccounting() {
  Outcome o;
  Sim sim(FastSlow(20, 5));
  ProtocolConfig cfg;
  cfg.epochs = 4;
  cfg.max_rounds = 3;
  const auto sync = RunProtocol(cfg, sim.fed);
  double worst_fast = 1.0;
  for (const auto& s : sync.spans) {
    if (s.learner < 5) {
      worst_fast = std::min(worst_fast, static_cast<double>(s.idle) /
                                            static_cast<double>(s.active + s.idle));
    }
  }
  o.Check(worst_fast >= 0.85, fmt::format("sync fast idle fraction {:.3f}", worst_fast));

  cfg.policy = Policy::kSemiSync;
  cfg.lambda = 2.0;
  cfg.max_rounds = 5;
  const auto semi = RunProtocol(cfg, sim.fed);
  VirtualUs worst_excess = std::numeric_limits<VirtualUs>::min();
  for (const auto& s : semi.spans) {
    if (s.round == 0) continue;
    worst_excess = std::max(worst_excess, s.idle - sim.fed.learners[s.learner].batch_us());
  }
  o.Check(worst_excess <= 0, fmt::format("semisync idle exceeds a batch by {} us", worst_excess));
  if (o.pass) {
    o.detail = fmt::format("sync fast idle >= {:.3f} of round; semisync idle <= one batch",
                           worst_fast);
  }
  return o;
}

Outcome CommunicationAccounting() {
  Outcome o;
  Sim sim(FastSlow(4, 3));
  for (auto policy : {Policy::kSync, Policy::kSemiSync}) {
    for (std::uint64_t rounds : {1u, 4u, 9u}) {
      ProtocolConfig cfg;
      cfg.policy = policy;
      cfg.epochs = 1;
      cfg.max_rounds = rounds;
      const auto log = RunProtocol(cfg, sim.fed);
      o.Check(log.update_requests == rounds * 10,
              fmt::format("{} {} rounds gave {} requests", PolicyName(policy), rounds,
                          log.update_requests));
      o.Check(log.models_exchanged() == 2 * log.update_requests, "models_exchanged");
    }
  }
  std::mt19937_64 rng(6);
  std::size_t learners_checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<LearnerProfile> ls;
    const std::size_t n = 1 + rng() % 6;
    std::size_t first = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t batches = 1 + rng() % 5;
      ls.push_back(Profile(k, 1.0 + static_cast<double>(rng() % 3000) / 10.0, batches, 2, first));
      first += 2 * batches;
    }
    Sim async_sim(std::move(ls), 1 + trial);
    ProtocolConfig cfg;
    cfg.policy = Policy::kAsync;
    cfg.epochs = 1 + rng() % 3;
    cfg.budget_ms = 1000.0 + static_cast<double>(rng() % 20000);
    cfg.eval_every = 1000;
    const auto log = RunProtocol(cfg, async_sim.fed);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& l = async_sim.fed.learners[k];
      const double cycle =
          static_cast<double>(cfg.epochs * l.batches_per_epoch()) * l.t_beta_ms;
      const double oracle = std::floor(*cfg.budget_ms / cycle);
      const double got = static_cast<double>(log.requests_per_learner[k]);
      o.Check(std::abs(got - oracle) <= 1.0,
              fmt::format("async learner {} sent {} vs oracle {}", k, got, oracle));
      ++learners_checked;
    }
    o.Check(log.models_exchanged() == 2 * log.update_requests, "async models_exchanged");
  }
  if (o.pass) {
    o.detail = fmt::format("rounds*N exact; async within +-1 for {} learners", learners_checked);
  }
  return o;
}

Outcome StalenessWeighting() {
  Outcome o;
  for (bool guarded : {true, false}) {
    double prev = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = guarded ? 0 : 1; s < 2000; ++s) {
      const double v = FedRecStaleness(500 + 20 + s, 500, 20, guarded);
      if (!(v < prev)) {
        o.Check(false, fmt::format("fedrec not decreasing at {}", s));
        break;
      }
      prev = v;
    }
  }
  const std::pair<std::uint64_t, double> cases[] = {{0, 1.0}, {3, 0.5}, {8, 1.0 / 3.0}};
  double worst = 0.0;
  for (auto [gap, want] : cases) {
    worst = std::max(worst, std::abs(FedAsyncPolyStaleness(100 + gap, 100) - want));
    worst = std::max(worst, std::abs(FedAsyncPolyStaleness(gap, 0) - want));
  }
  o.Check(worst <= 1e-12, fmt::format("fedasync poly error {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("fedrec strictly decreasing; poly error {:.2g}", worst);
  return o;
}

constexpr const char* kTrendConfig = R"([task]
input_dim = 16
num_classes = 10
per_class = 300
test_per_class = 50
cluster_spread = 3
[partition]
size_dist = powerlaw
class_dist = non_iid
classes_per_learner = 3
[learners]
fast = 5
slow = 5
fast_ms = 30
slow_ms = 300
batch_size = 32
[protocol]
epochs = 4
lambda = 2
budget_ms = 400000
[optimizer]
kind = momentum
eta = 0.01
gamma = 0.75
)";

std::optional<VirtualUs> Crossing(const MetricsLog& log, double threshold) {
  for (const auto& e : log.evals) {
    if (e.accuracy >= threshold) return e.time;
  }
  return std::nullopt;
}

Outcome TrendReproduction() {
  Outcome o;
  std::string summary;
  for (std::uint64_t seed : {1990u, 1991u, 1992u}) {
    auto cfg = ParseConfigString(kTrendConfig);
    cfg.seed = seed;
    const auto exp = BuildExperiment(cfg);
    auto sync_cfg = cfg.protocol;
    sync_cfg.policy = Policy::kSync;
    auto semi_cfg = cfg.protocol;
    semi_cfg.policy = Policy::kSemiSync;
    const auto sync = RunProtocol(sync_cfg, exp->fed);
    const auto semi = RunProtocol(semi_cfg, exp->fed);
    const double threshold = 0.6 * sync.evals.back().accuracy;
    const auto ts = Crossing(sync, threshold);
    const auto th = Crossing(semi, threshold);
    o.Check(ts && th && *th <= *ts,
            fmt::format("seed {}: semisync {} ms vs sync {} ms", seed,
                        th ? FormatMs(*th) : "never", ts ? FormatMs(*ts) : "never"));
    summary += fmt::format("{}seed {}: thr {:.3f}, semisync {} ms <= sync {} ms",
                           summary.empty() ? "" : "; ", seed, threshold,
                           th ? FormatMs(*th) : "never", ts ? FormatMs(*ts) : "never");
  }
  if (o.pass) o.detail = summary;
  return o;
}

Outcome PartitionReproduction() {
  Outcome o;
  const auto d = testing::Balanced(10, 500);
  const std::pair<std::size_t, std::vector<std::size_t>> layouts[] = {
      {5, {8, 7, 6, 5, 5, 5, 5, 5, 5, 5}}, {3, {8, 4, 3, 3, 3, 3, 3, 3, 3, 3}}};
  for (const auto& [x, want] : layouts) {
    const auto spec = testing::PowerLawNonIid(x);
    const auto r = AssignClasses(spec, MakeSizes(spec, d.size()), d);
    o.Check(testing::OwnedCounts(r, d) == want, fmt::format("Non-IID({}) layout", x));
  }
  std::mt19937_64 rng(1990);
  std::size_t assigned = 0, rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = testing::RandomPartitionCase(rng);
    const auto data = testing::Balanced(c.num_classes, c.per_class);
    const auto sizes = MakeSizes(c.spec, data.size());
    if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != data.size()) {
      o.Check(false, fmt::format("trial {}: sizes do not sum to total", trial));
      break;
    }
    PartitionResult r;
    try {
      r = AssignClasses(c.spec, sizes, data);
    } catch (const SpecError&) {
      ++rejected;  // infeasible quota, reported as an error
      continue;
    }
    std::vector<int> hits(data.size(), 0);
    for (const auto& l : r.learners) {
      for (auto i : l.indices) ++hits[i];
    }
    const bool ok = std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }) &&
                    testing::OwnedCounts(r, data) == c.spec.ClassCounts(c.num_classes);
    if (!ok) {
      o.Check(false, fmt::format("trial {}: overlap, gap or quota mismatch", trial));
      break;
    }
    ++assigned;
  }
  if (o.pass) {
    o.detail = fmt::format("layouts exact; {} random specs disjoint and conserved ({} infeasible rejected)",
                           assigned, rejected);
  }
  return o;
}

std::string Slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome Determinism() {
  Outcome o;
  const auto root = fs::temp_directory_path() / "fedsched_acceptance_determinism";
  std::size_t compared = 0;
  for (const char* policy : {"sync", "semisync", "async"}) {
    std::string text = kTrendConfig;
    text.replace(text.find("epochs = 4"), 10, std::string("epochs = 4\npolicy = ") + policy);
    auto cfg = ParseConfigString(text);
    cfg.protocol.budget_ms = 100000;
    for (const char* run : {"a", "b"}) {
      fs::remove_all(root / policy / run);
      RunExperiment(cfg, root / policy / run);
    }
    for (const char* name : {"metrics.csv", "idle.csv", "events.jsonl", "summary.json",
                             "partitions.json", "resolved_config.json", "config.ini"}) {
      const auto a = Slurp(root / policy / "a" / name);
      const auto b = Slurp(root / policy / "b" / name);
      o.Check(!a.empty() && a == b, fmt::format("{} {} differs", policy, name));
      ++compared;
    }
  }
  fs::remove_all(root);
  if (o.pass) o.detail = fmt::format("{} file pairs byte-identical", compared);
  return o;
}

}  // namespace
}  // namespace fedsched

int main() {
  using namespace fedsched;
  const Criterion criteria[] = {
      {1, "schedule reproduction", 1, ScheduleReproduction},
      {2, "cache equals recompute", 5, CacheMatchesRecompute},
      {3, "cache scaling", 60, CacheScaling},
      {4, "optimizer correctness", 5, OptimizerCorrectness},
      {5, "idle-time accounting", 10, IdleAccounting},
      {6, "communication accounting", 10, CommunicationAccounting},
      {7, "staleness weighting", 1, StalenessWeighting},
      {8, "trend reproduction", 300, TrendReproduction},
      {9, "partition reproduction", 30, PartitionReproduction},
      {10, "determinism", 60, Determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt::format(" (over {} s limit)", c.limit_s);
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s criterion %d: %s [%.2fs] %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
