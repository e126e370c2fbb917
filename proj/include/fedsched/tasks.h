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

#ifndef FEDSCHED_TASKS_H_
#define FEDSCHED_TASKS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedsched/param_set.h"

namespace fedsched {

enum class TaskKind { kSoftmaxRegression, kMlp1 };
enum class Activation { kRelu, kTanh };

// Softmax regression has layers W[input_dim x C], b[C].
// The one-hidden-layer MLP has W1[input_dim x H], b1[H], W2[H x C], b2[C].
struct TaskModel {
  TaskKind kind = TaskKind::kSoftmaxRegression;
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t hidden_dim = 16;
  Activation activation = Activation::kRelu;

  void Validate() const;
  ParamSet ZeroParams() const;
  // Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  ParamSet InitParams(std::uint64_t seed) const;
};

struct Dataset {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;  // row-major, size() * input_dim
  std::vector<int> labels;
  std::uint64_t seed = 0;
  std::vector<double> class_means;  // num_classes * input_dim

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * input_dim, input_dim};
  }
  // Per-class example counts over `indices` (or all examples if empty).
  std::vector<std::size_t> ClassHistogram(
      std::span<const std::size_t> indices = {}) const;
};

// Gaussian mixture: per-class mean ~ 3 * N(0, I), examples ~ N(mean,
// spread^2 I). Examples are laid out class by class, per_class each.
Dataset GenSynthetic(std::size_t num_classes, std::size_t per_class,
                     std::size_t input_dim, double cluster_spread,
                     std::uint64_t seed);

// Splits the last `test_per_class` examples of every class into a held-out
// set drawn from the same mixture.
std::pair<Dataset, Dataset> SplitHoldout(const Dataset& all,
                                         std::size_t test_per_class);

struct LossGrad {
  double loss = 0.0;
  ParamSet grad;
};

// Mean softmax cross-entropy over `batch` and its exact gradient.
LossGrad LossAndGrad(const TaskModel& model, const ParamSet& w,
                     const Dataset& data, std::span<const std::size_t> batch);

// Loss only; used by finite-difference checks and evaluation.
double Loss(const TaskModel& model, const ParamSet& w, const Dataset& data,
            std::span<const std::size_t> batch);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Top-1 accuracy (argmax ties go to the lowest class id) and mean loss.
EvalResult Evaluate(const TaskModel& model, const ParamSet& w,
                    const Dataset& test);

}  // namespace fedsched

#endif  // FEDSCHED_TASKS_H_
