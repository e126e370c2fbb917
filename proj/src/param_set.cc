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

#include "fedsched/param_set.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "fedsched/errors.h"

namespace fedsched {

ParamSet::ParamSet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (const auto& l : layers_) {
    std::size_t n = 1;
    for (auto d : l.shape) n *= d;
    if (l.shape.empty() || n != l.values.size()) {
      throw StructureError(fmt::format(
          "layer '{}' has shape [{}] but {} values", l.name,
          fmt::join(l.shape, ","), l.values.size()));
    }
  }
}

Layer ParamSet::ZeroLayer(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw StructureError("zero-sized dimension in layer " + name);
    n *= d;
  }
  return Layer{std::move(name), std::move(shape), std::vector<double>(n, 0.0)};
}

std::size_t ParamSet::num_values() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.size();
  return n;
}

bool ParamSet::SameStructure(const ParamSet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name != other.layers_[i].name ||
        layers_[i].shape != other.layers_[i].shape) {
      return false;
    }
  }
  return true;
}

bool ParamSet::AllFinite() const {
  for (const auto& l : layers_) {
    for (double v : l.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double ParamSet::MaxAbsDiff(const ParamSet& other) const {
  CheckSameStructure(*this, other, "MaxAbsDiff");
  double m = 0.0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i].values;
    const auto& b = other.layers_[i].values;
    for (std::size_t j = 0; j < a.size(); ++j) {
      m = std::max(m, std::abs(a[j] - b[j]));
    }
  }
  return m;
}

void ParamSet::AddScaled(double alpha, const ParamSet& x) {
  CheckSameStructure(*this, x, "AddScaled");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& dst = layers_[i].values;
    const auto& src = x.layers_[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += alpha * src[j];
  }
}

void ParamSet::Scale(double alpha) {
  for (auto& l : layers_) {
    for (double& v : l.values) v *= alpha;
  }
}

void CheckSameStructure(const ParamSet& a, const ParamSet& b,
                        const char* context) {
  if (a.num_layers() != b.num_layers()) {
    throw StructureError(fmt::format("{}: layer count {} vs {}", context,
                                     a.num_layers(), b.num_layers()));
  }
  for (std::size_t i = 0; i < a.num_layers(); ++i) {
    const auto& la = a.layer(i);
    const auto& lb = b.layer(i);
    if (la.name != lb.name || la.shape != lb.shape) {
      throw StructureError(fmt::format(
          "{}: layer {} is '{}'[{}] vs '{}'[{}]", context, i, la.name,
          fmt::join(la.shape, ","), lb.name, fmt::join(lb.shape, ",")));
    }
  }
}

ParamSet ZerosLike(const ParamSet& proto) {
  ParamSet out = proto;
  for (auto& l : out.mutable_layers()) {
    std::fill(l.values.begin(), l.values.end(), 0.0);
  }
  return out;
}

ParamSet Axpy(double alpha, const ParamSet& x, const ParamSet& y) {
  CheckSameStructure(x, y, "Axpy");
  ParamSet out = y;
  out.AddScaled(alpha, x);
  return out;
}

ParamSet Scale(double alpha, const ParamSet& x) {
  ParamSet out = x;
  out.Scale(alpha);
  return out;
}

ParamSet WeightedAverage(std::span<const ParamSet* const> models,
                         std::span<const double> weights) {
  if (models.empty()) throw SpecError("WeightedAverage: no models");
  if (models.size() != weights.size()) {
    throw SpecError(fmt::format("WeightedAverage: {} models but {} weights",
                                models.size(), weights.size()));
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DegenerateWeightError(
          fmt::format("WeightedAverage: invalid weight {}", w));
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw DegenerateWeightError("WeightedAverage: weights sum to zero");
  }
  ParamSet acc = ZerosLike(*models.front());
  for (std::size_t k = 0; k < models.size(); ++k) {
    acc.AddScaled(weights[k], *models[k]);
  }
  acc.Scale(1.0 / total);
  return acc;
}

ParamSet WeightedAverage(std::span<const ParamSet> models,
                         std::span<const double> weights) {
  std::vector<const ParamSet*> ptrs;
  ptrs.reserve(models.size());
  for (const auto& m : models) ptrs.push_back(&m);
  return WeightedAverage(std::span<const ParamSet* const>(ptrs), weights);
}

nlohmann::json ToJson(const ParamSet& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.layers()) {
    layers.push_back({{"name", l.name}, {"shape", l.shape}, {"values", l.values}});
  }
  return {{"format_version", kParamSetFormatVersion}, {"layers", layers}};
}

ParamSet ParamSetFromJson(const nlohmann::json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kParamSetFormatVersion) {
    throw StructureError(
        fmt::format("unsupported ParamSet format_version {}", version));
  }
  std::vector<Layer> layers;
  for (const auto& jl : j.at("layers")) {
    layers.push_back(Layer{jl.at("name").get<std::string>(),
                           jl.at("shape").get<std::vector<std::size_t>>(),
                           jl.at("values").get<std::vector<double>>()});
  }
  return ParamSet(std::move(layers));
}

}  // namespace fedsched
