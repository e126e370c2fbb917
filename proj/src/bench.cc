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

#include "fedsched/bench.h"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "fedsched/controller.h"
#include "fedsched/errors.h"
#include "fedsched/param_set.h"

namespace fedsched {
namespace {

ParamSet RandomModel(std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t a = m / 2, b = m / 4, c = m - a - b;
  std::vector<Layer> layers;
  for (auto [name, n] : {std::pair{"l0", a}, {"l1", b}, {"l2", c}}) {
    Layer l{name, {n}, std::vector<double>(n)};
    for (double& v : l.values) v = u(rng);
    layers.push_back(std::move(l));
  }
  return ParamSet(std::move(layers));
}

using Clock = std::chrono::steady_clock;

double Seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

}  // namespace

std::vector<BenchRow> BenchCache(const BenchOptions& o) {
  if (o.learners.empty() || o.model_sizes.empty() || o.repeats == 0) {
    throw SpecError("bench-cache needs learners, sizes and repeats");
  }
  std::vector<BenchRow> rows;
  std::mt19937_64 rng(o.seed);
  for (std::size_t m : o.model_sizes) {
    if (m < 3) throw SpecError("bench-cache model size must be >= 3");
    struct Cell {
      std::size_t n;
      CommunityState state;
      std::uniform_int_distribution<std::size_t> pick;
    };
    std::vector<Cell> cells;
    for (std::size_t n : o.learners) {
      if (n == 0) throw SpecError("bench-cache learner count must be >= 1");
      CommunityState state = InitCommunity(RandomModel(m, rng), n);
      for (std::size_t k = 0; k < n; ++k) {
        state.CachedUpdate(k, RandomModel(m, rng), 1.0 + static_cast<double>(k % 7), 1);
      }
      cells.push_back({n, std::move(state), std::uniform_int_distribution<std::size_t>(0, n - 1)});
    }
    // Small pool of pre-generated incoming models, cycled during timing.
    std::vector<ParamSet> incoming;
    for (int i = 0; i < 8; ++i) incoming.push_back(RandomModel(m, rng));

    // ~2e7 touched values per timed block; learner counts interleave
    // within each repeat.
    const std::size_t cached_ops = std::max<std::size_t>(20, 20000000 / (3 * m));
    double sink = 0.0;
    for (std::size_t r = 0; r < o.repeats; ++r) {
      for (auto& cell : cells) {
        const std::size_t recompute_ops =
            std::max<std::size_t>(2, 20000000 / (m * cell.n));
        std::vector<std::size_t> targets(cached_ops);
        for (auto& t : targets) t = cell.pick(rng);
        auto t0 = Clock::now();
        for (std::size_t i = 0; i < cached_ops; ++i) {
          auto w = cell.state.CachedUpdate(targets[i], incoming[i % incoming.size()],
                                           1.0 + static_cast<double>(i % 5), 1);
          sink += w.layer(0).values[0];
        }
        auto t1 = Clock::now();
        rows.push_back({"cached", cell.n, m, r,
                        Seconds(t1 - t0) / static_cast<double>(cached_ops)});

        t0 = Clock::now();
        for (std::size_t i = 0; i < recompute_ops; ++i) {
          auto w = cell.state.Recompute();
          sink += w.layer(0).values[0];
        }
        t1 = Clock::now();
        rows.push_back({"recompute", cell.n, m, r,
                        Seconds(t1 - t0) / static_cast<double>(recompute_ops)});
      }
    }
    if (std::isnan(sink)) throw NumericError("bench produced NaN");
  }
  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.model_size, a.mode, a.learners, a.repeat) <
           std::tie(b.model_size, b.mode, b.learners, b.repeat);
  });
  return rows;
}

std::string BenchCsv(const std::vector<BenchRow>& rows) {
  std::string out = "mode,learners,model_size,repeat,seconds\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{:.9g}\n", r.mode, r.learners, r.model_size,
                       r.repeat, r.seconds);
  }
  return out;
}

LineFit FitLine(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 3) throw SpecError("FitLine needs >= 3 paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw SpecError("FitLine: x has no spread");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(0.0, syy - f.slope * sxy);
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  const double dof = static_cast<double>(n - 2);
  const double se = std::sqrt(sse / dof / sxx);
  if (se > 0.0) {
    boost::math::students_t dist(dof);
    const double t = std::abs(f.slope / se);
    f.slope_p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  } else {
    f.slope_p_value = f.slope == 0.0 ? 1.0 : 0.0;
  }
  return f;
}

void SelectSeries(const std::vector<BenchRow>& rows, const std::string& mode,
                  bool over_learners, std::size_t fixed, std::vector<double>& x,
                  std::vector<double>& y) {
  x.clear();
  y.clear();
  for (const auto& r : rows) {
    if (r.mode != mode) continue;
    if (over_learners ? r.model_size != fixed : r.learners != fixed) continue;
    x.push_back(static_cast<double>(over_learners ? r.learners : r.model_size));
    y.push_back(r.seconds);
  }
}

}  // namespace fedsched
