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

#include "fedsched/partitioner.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {
namespace {

// Scales non-negative proportions to integers summing exactly to `total`.
// Floors first, then hands the remainder to the largest fractional parts
// (lower index wins ties).
std::vector<std::size_t> LargestRemainder(const std::vector<double>& props,
                                          std::size_t total) {
  const double sum = std::accumulate(props.begin(), props.end(), 0.0);
  std::vector<std::size_t> out(props.size(), 0);
  if (props.empty() || !(sum > 0.0)) return out;
  std::vector<double> frac(props.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const double raw = static_cast<double>(total) * props[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(raw));
    frac[i] = raw - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(props.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  // Floors can overshoot by rounding only in pathological cases; clamp.
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
    ++out[order[i]];
    ++assigned;
  }
  return out;
}

struct KnownLayout {
  std::size_t learners, classes, x;
  std::vector<std::size_t> counts;
};

const std::vector<KnownLayout>& PowerLawLayouts() {
  static const std::vector<KnownLayout> layouts = {
      {10, 10, 5, {8, 7, 6, 5, 5, 5, 5, 5, 5, 5}},
      {10, 10, 3, {8, 4, 3, 3, 3, 3, 3, 3, 3, 3}},
      {10, 100, 50, {84, 76, 68, 64, 55, 50, 50, 50, 50, 50}},
  };
  return layouts;
}

}  // namespace

void PartitionSpec::Validate(std::size_t num_classes) const {
  if (num_learners < 1) throw SpecError("num_learners must be >= 1");
  if (size_dist == SizeDist::kPowerLaw && !(exponent > 0.0)) {
    throw SpecError(fmt::format("power-law exponent > 0 required, got {}", exponent));
  }
  if (size_dist == SizeDist::kSkewed && !(skew_ratio > 1.0)) {
    throw SpecError(fmt::format("skew ratio > 1 required, got {}", skew_ratio));
  }
  if (class_dist == ClassDist::kNonIid && !class_count_override &&
      (classes_per_learner < 1 || classes_per_learner > num_classes)) {
    throw SpecError(fmt::format("non-iid x must be in [1, {}], got {}",
                                num_classes, classes_per_learner));
  }
  if (class_count_override) {
    if (class_count_override->size() != num_learners) {
      throw SpecError(fmt::format(
          "class count override has {} entries for {} learners",
          class_count_override->size(), num_learners));
    }
    for (auto c : *class_count_override) {
      if (c < 1 || c > num_classes) {
        throw SpecError(fmt::format(
            "class count override entry {} outside [1, {}]", c, num_classes));
      }
    }
  }
}

std::vector<std::size_t> PartitionSpec::ClassCounts(
    std::size_t num_classes) const {
  if (class_dist == ClassDist::kIid) {
    return std::vector<std::size_t>(num_learners, num_classes);
  }
  if (class_count_override) return *class_count_override;
  if (size_dist == SizeDist::kPowerLaw) {
    for (const auto& l : PowerLawLayouts()) {
      if (l.learners == num_learners && l.classes == num_classes &&
          l.x == classes_per_learner) {
        return l.counts;
      }
    }
  }
  return std::vector<std::size_t>(num_learners, classes_per_learner);
}

std::vector<std::size_t> PartitionResult::Sizes() const {
  std::vector<std::size_t> s;
  s.reserve(learners.size());
  for (const auto& l : learners) s.push_back(l.size());
  return s;
}

nlohmann::json PartitionResult::HistogramJson(const Dataset& data) const {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t k = 0; k < learners.size(); ++k) {
    arr.push_back({{"learner", k},
                   {"size", learners[k].size()},
                   {"classes", learners[k].class_ids},
                   {"histogram", data.ClassHistogram(learners[k].indices)}});
  }
  return {{"learners", arr}};
}

std::vector<std::size_t> MakeSizes(const PartitionSpec& spec,
                                   std::size_t total) {
  const std::size_t n = spec.num_learners;
  if (n == 0) throw SpecError("MakeSizes: no learners");
  if (total < n) {
    throw SpecError(fmt::format("MakeSizes: total {} < num_learners {}", total, n));
  }
  std::vector<std::size_t> sizes;
  if (spec.size_dist == SizeDist::kUniform) {
    sizes.assign(n, total / n);
    for (std::size_t k = 0; k < total % n; ++k) ++sizes[k];
    return sizes;
  }
  std::vector<double> props(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double rank = static_cast<double>(k + 1);
    props[k] = spec.size_dist == SizeDist::kPowerLaw
                   ? std::pow(rank, -spec.exponent)
                   : std::pow(spec.skew_ratio, -rank);
  }
  sizes = LargestRemainder(props, total);
  // Lift empty tail partitions to 1, taking from the current largest.
  for (auto& s : sizes) {
    if (s == 0) {
      ++s;
      --*std::max_element(sizes.begin(), sizes.end());
    }
  }
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  return sizes;
}

PartitionResult AssignClasses(const PartitionSpec& spec,
                              const std::vector<std::size_t>& sizes,
                              const Dataset& dataset) {
  const std::size_t C = dataset.num_classes;
  const std::size_t N = spec.num_learners;
  spec.Validate(C);
  if (sizes.size() != N) {
    throw SpecError(fmt::format("AssignClasses: {} sizes for {} learners",
                                sizes.size(), N));
  }

  // Class pools, examples sorted by class id then index.
  std::vector<std::vector<std::size_t>> pools(C);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    pools[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  }
  std::size_t present = 0;
  for (const auto& p : pools) present += p.empty() ? 0 : 1;
  if (present < C) {
    throw SpecError(fmt::format("AssignClasses: dataset has {} of {} classes",
                                present, C));
  }

  // Round-robin class dealing.
  const auto counts = spec.ClassCounts(C);
  PartitionResult result;
  result.learners.resize(N);
  std::vector<std::vector<std::size_t>> owners(C);  // class -> learners, head first
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < N; ++k) {
    if (sizes[k] < counts[k]) {
      throw SpecError(fmt::format(
          "learner {} quota {} is smaller than its {} classes", k, sizes[k],
          counts[k]));
    }
    auto& owned = result.learners[k].class_ids;
    for (std::size_t j = 0; j < counts[k]; ++j) {
      owned.push_back((cursor + j) % C);
    }
    cursor = (cursor + counts[k]) % C;
    std::sort(owned.begin(), owned.end());
    for (auto c : owned) owners[c].push_back(k);
  }

  // Per-learner demand split evenly over owned classes.
  std::vector<std::vector<std::size_t>> demand(N, std::vector<std::size_t>(C, 0));
  for (std::size_t k = 0; k < N; ++k) {
    const auto& owned = result.learners[k].class_ids;
    const std::size_t share = sizes[k] / owned.size();
    const std::size_t extra = sizes[k] % owned.size();
    for (std::size_t j = 0; j < owned.size(); ++j) {
      demand[k][owned[j]] = share + (j < extra ? 1 : 0);
    }
  }

  for (std::size_t c = 0; c < C; ++c) {
    const auto& own = owners[c];
    if (own.empty()) continue;
    const std::size_t supply = pools[c].size();
    std::vector<std::size_t> alloc(own.size(), 0);
    std::size_t wanted = 0;
    for (auto k : own) wanted += demand[k][c];

    if (wanted <= supply) {
      for (std::size_t j = 0; j < own.size(); ++j) alloc[j] = demand[own[j]][c];
    } else if (supply < own.size()) {
      for (std::size_t j = 0; j < supply; ++j) alloc[j] = 1;
    } else {
      // Over-subscribed: one example per owner, rest in proportion to demand.
      std::vector<double> props(own.size());
      for (std::size_t j = 0; j < own.size(); ++j) {
        props[j] = static_cast<double>(demand[own[j]][c] - 1);
      }
      alloc = LargestRemainder(props, supply - own.size());
      for (auto& a : alloc) ++a;
    }

    std::size_t used = std::accumulate(alloc.begin(), alloc.end(), std::size_t{0});
    for (std::size_t j = 0; used < supply; j = (j + 1) % own.size(), ++used) {
      ++alloc[j];
    }

    std::size_t pos = 0;
    for (std::size_t j = 0; j < own.size(); ++j) {
      auto& dst = result.learners[own[j]].indices;
      dst.insert(dst.end(), pools[c].begin() + static_cast<std::ptrdiff_t>(pos),
                 pools[c].begin() + static_cast<std::ptrdiff_t>(pos + alloc[j]));
      pos += alloc[j];
    }
  }

  for (std::size_t k = 0; k < N; ++k) {
    auto& l = result.learners[k];
    if (l.indices.empty()) {
      throw SpecError(fmt::format("learner {} received no examples", k));
    }
    std::sort(l.indices.begin(), l.indices.end());
  }
  return result;
}

std::vector<std::size_t> AssignToDevices(
    const PartitionResult& result, const std::vector<DeviceClass>& device_order) {
  const std::size_t n = result.learners.size();
  if (device_order.size() != n) {
    throw SpecError(fmt::format("AssignToDevices: {} devices for {} partitions",
                                device_order.size(), n));
  }
  std::vector<std::size_t> mapping(n);
  std::iota(mapping.begin(), mapping.end(), 0);
  const auto sizes = result.Sizes();
  if (std::adjacent_find(sizes.begin(), sizes.end(), std::not_equal_to<>()) ==
      sizes.end()) {
    return mapping;
  }

  std::vector<std::size_t> ranks(n);
  std::iota(ranks.begin(), ranks.end(), 0);
  std::stable_sort(ranks.begin(), ranks.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  std::vector<std::size_t> fast, slow;
  for (std::size_t d = 0; d < n; ++d) {
    (device_order[d] == DeviceClass::kFast ? fast : slow).push_back(d);
  }
  std::size_t fi = 0, si = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const bool want_fast = r % 2 == 0;
    const bool take_fast = want_fast ? fi < fast.size() : si >= slow.size();
    mapping[ranks[r]] = take_fast ? fast[fi++] : slow[si++];
  }
  return mapping;
}

}  // namespace fedsched
