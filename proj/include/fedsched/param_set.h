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

#ifndef FEDSCHED_PARAM_SET_H_
#define FEDSCHED_PARAM_SET_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fedsched {

// One named dense array. `values` is row-major over `shape`.
struct Layer {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const Layer&) const = default;
};

// Ordered collection of named layers: a model, a gradient, a momentum
// buffer or an unnormalized community sum all share this representation.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<Layer> layers);

  // Adds a zero-filled layer. Shape entries must be >= 1.
  static Layer ZeroLayer(std::string name, std::vector<std::size_t> shape);

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_values() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  Layer& mutable_layer(std::size_t i) { return layers_.at(i); }

  bool SameStructure(const ParamSet& other) const;
  bool AllFinite() const;

  // Max |a - b| over all entries; structures must match.
  double MaxAbsDiff(const ParamSet& other) const;

  // In-place this += alpha * x.
  void AddScaled(double alpha, const ParamSet& x);
  // In-place this *= alpha.
  void Scale(double alpha);

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<Layer> layers_;
};

// Throws StructureError naming the first mismatch.
void CheckSameStructure(const ParamSet& a, const ParamSet& b,
                        const char* context);

ParamSet ZerosLike(const ParamSet& proto);

// alpha * x + y
ParamSet Axpy(double alpha, const ParamSet& x, const ParamSet& y);

// alpha * x
ParamSet Scale(double alpha, const ParamSet& x);

// (1 / sum(weights)) * sum_k weights[k] * models[k]
ParamSet WeightedAverage(std::span<const ParamSet> models,
                         std::span<const double> weights);
// Same, over borrowed models (avoids copying cached records).
ParamSet WeightedAverage(std::span<const ParamSet* const> models,
                         std::span<const double> weights);

// Versioned JSON form: {"format_version": 1, "layers": [{name, shape, values}]}.
inline constexpr int kParamSetFormatVersion = 1;
nlohmann::json ToJson(const ParamSet& p);
ParamSet ParamSetFromJson(const nlohmann::json& j);

}  // namespace fedsched

#endif  // FEDSCHED_PARAM_SET_H_
