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

#ifndef FEDSCHED_BENCH_H_
#define FEDSCHED_BENCH_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fedsched {

struct BenchRow {
  std::string mode;  // "cached" or "recompute"
  std::size_t learners = 0;
  std::size_t model_size = 0;
  std::size_t repeat = 0;
  double seconds = 0.0;  // mean wall time per community-model computation
};

struct BenchOptions {
  std::vector<std::size_t> learners{10, 100, 1000};
  std::vector<std::size_t> model_sizes{1000, 10000};
  std::size_t repeats = 5;
  std::uint64_t seed = 1990;
};

// Times CachedUpdate against a full weighted-average pass over N cached
// models of M entries (split over three layers).
std::vector<BenchRow> BenchCache(const BenchOptions& options);

std::string BenchCsv(const std::vector<BenchRow>& rows);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_p_value = 1.0;  // two-sided t-test of slope == 0
};

// Ordinary least squares y = intercept + slope * x. Needs >= 3 points.
LineFit FitLine(const std::vector<double>& x, const std::vector<double>& y);

// Selects (x = learners or model_size, y = seconds) for one mode, with the
// other dimension fixed.
void SelectSeries(const std::vector<BenchRow>& rows, const std::string& mode,
                  bool over_learners, std::size_t fixed, std::vector<double>& x,
                  std::vector<double>& y);

}  // namespace fedsched

#endif  // FEDSCHED_BENCH_H_
