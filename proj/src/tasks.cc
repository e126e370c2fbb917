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

#include "fedsched/tasks.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {
namespace {

struct Forward {
  std::vector<double> hidden_pre;  // n * H (mlp only)
  std::vector<double> hidden;      // n * H (mlp only)
  std::vector<double> probs;       // n * C
  double loss = 0.0;
};

double Act(Activation a, double z) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double ActPrime(Activation a, double z, double h) {
  return a == Activation::kRelu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

// y[C] = b + x[D] * W[D x C]
void Affine(std::span<const double> x, const std::vector<double>& w,
            const std::vector<double>& b, std::size_t out, double* y) {
  std::copy(b.begin(), b.end(), y);
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double xd = x[d];
    if (xd == 0.0) continue;
    const double* row = w.data() + d * out;
    for (std::size_t c = 0; c < out; ++c) y[c] += xd * row[c];
  }
}

// Writes softmax of logits into place and returns -log p[label].
double SoftmaxXent(double* logits, std::size_t num_classes, int label) {
  const double mx = *std::max_element(logits, logits + num_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    logits[c] = std::exp(logits[c] - mx);
    sum += logits[c];
  }
  for (std::size_t c = 0; c < num_classes; ++c) logits[c] /= sum;
  return -(std::log(logits[label]));
}

void CheckParams(const TaskModel& model, const ParamSet& w) {
  CheckSameStructure(model.ZeroParams(), w, "task parameters");
}

Forward RunForward(const TaskModel& m, const ParamSet& w, const Dataset& data,
                   std::span<const std::size_t> batch) {
  const std::size_t n = batch.size();
  const std::size_t C = m.num_classes;
  Forward f;
  f.probs.assign(n * C, 0.0);
  if (m.kind == TaskKind::kSoftmaxRegression) {
    const auto& W = w.layer(0).values;
    const auto& b = w.layer(1).values;
    for (std::size_t i = 0; i < n; ++i) {
      Affine(data.row(batch[i]), W, b, C, &f.probs[i * C]);
    }
  } else {
    const std::size_t H = m.hidden_dim;
    const auto& W1 = w.layer(0).values;
    const auto& b1 = w.layer(1).values;
    const auto& W2 = w.layer(2).values;
    const auto& b2 = w.layer(3).values;
    f.hidden_pre.assign(n * H, 0.0);
    f.hidden.assign(n * H, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* z = &f.hidden_pre[i * H];
      double* h = &f.hidden[i * H];
      Affine(data.row(batch[i]), W1, b1, H, z);
      for (std::size_t j = 0; j < H; ++j) h[j] = Act(m.activation, z[j]);
      Affine(std::span<const double>(h, H), W2, b2, C, &f.probs[i * C]);
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += SoftmaxXent(&f.probs[i * C], C, data.labels[batch[i]]);
  }
  f.loss = total / static_cast<double>(n);
  return f;
}

// dW[D x C] += x^T d ; db += d
void AccumulateAffineGrad(std::span<const double> x, const double* d,
                          std::size_t out, std::vector<double>& dW,
                          std::vector<double>& db) {
  for (std::size_t c = 0; c < out; ++c) db[c] += d[c];
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    double* row = dW.data() + k * out;
    for (std::size_t c = 0; c < out; ++c) row[c] += xk * d[c];
  }
}

}  // namespace

void TaskModel::Validate() const {
  if (input_dim < 1 || num_classes < 1 ||
      (kind == TaskKind::kMlp1 && hidden_dim < 1)) {
    throw SpecError("task dimensions must be >= 1");
  }
}

ParamSet TaskModel::ZeroParams() const {
  Validate();
  std::vector<Layer> layers;
  if (kind == TaskKind::kSoftmaxRegression) {
    layers.push_back(ParamSet::ZeroLayer("W", {input_dim, num_classes}));
    layers.push_back(ParamSet::ZeroLayer("b", {num_classes}));
  } else {
    layers.push_back(ParamSet::ZeroLayer("W1", {input_dim, hidden_dim}));
    layers.push_back(ParamSet::ZeroLayer("b1", {hidden_dim}));
    layers.push_back(ParamSet::ZeroLayer("W2", {hidden_dim, num_classes}));
    layers.push_back(ParamSet::ZeroLayer("b2", {num_classes}));
  }
  return ParamSet(std::move(layers));
}

ParamSet TaskModel::InitParams(std::uint64_t seed) const {
  ParamSet p = ZeroParams();
  std::mt19937_64 rng(seed);
  for (auto& l : p.mutable_layers()) {
    if (l.shape.size() != 2) continue;  // biases stay zero
    const double r = 1.0 / std::sqrt(static_cast<double>(l.shape[0]));
    std::uniform_real_distribution<double> u(-r, r);
    for (double& v : l.values) v = u(rng);
  }
  return p;
}

std::vector<std::size_t> Dataset::ClassHistogram(
    std::span<const std::size_t> indices) const {
  std::vector<std::size_t> h(num_classes, 0);
  if (indices.empty()) {
    for (int y : labels) ++h[static_cast<std::size_t>(y)];
  } else {
    for (auto i : indices) ++h[static_cast<std::size_t>(labels.at(i))];
  }
  return h;
}

Dataset GenSynthetic(std::size_t num_classes, std::size_t per_class,
                     std::size_t input_dim, double cluster_spread,
                     std::uint64_t seed) {
  if (num_classes < 1 || per_class < 1 || input_dim < 1) {
    throw SpecError("GenSynthetic: counts must be >= 1");
  }
  if (!(cluster_spread > 0.0)) {
    throw SpecError("GenSynthetic: cluster_spread must be > 0");
  }
  Dataset d;
  d.input_dim = input_dim;
  d.num_classes = num_classes;
  d.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  d.class_means.resize(num_classes * input_dim);
  for (double& m : d.class_means) m = 3.0 * normal(rng);
  d.features.reserve(num_classes * per_class * input_dim);
  d.labels.reserve(num_classes * per_class);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double* mean = &d.class_means[c * input_dim];
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t j = 0; j < input_dim; ++j) {
        d.features.push_back(mean[j] + cluster_spread * normal(rng));
      }
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return d;
}

std::pair<Dataset, Dataset> SplitHoldout(const Dataset& all,
                                         std::size_t test_per_class) {
  const auto hist = all.ClassHistogram();
  std::vector<std::size_t> seen(all.num_classes, 0);
  Dataset train, test;
  for (Dataset* d : {&train, &test}) {
    d->input_dim = all.input_dim;
    d->num_classes = all.num_classes;
    d->seed = all.seed;
    d->class_means = all.class_means;
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto c = static_cast<std::size_t>(all.labels[i]);
    if (hist[c] <= test_per_class) {
      throw SpecError(fmt::format(
          "SplitHoldout: class {} has {} examples, cannot hold out {}", c,
          hist[c], test_per_class));
    }
    Dataset* dst = seen[c]++ >= hist[c] - test_per_class ? &test : &train;
    auto row = all.row(i);
    dst->features.insert(dst->features.end(), row.begin(), row.end());
    dst->labels.push_back(all.labels[i]);
  }
  return {std::move(train), std::move(test)};
}

double Loss(const TaskModel& model, const ParamSet& w, const Dataset& data,
            std::span<const std::size_t> batch) {
  if (batch.empty()) throw SpecError("Loss: empty batch");
  CheckParams(model, w);
  return RunForward(model, w, data, batch).loss;
}

LossGrad LossAndGrad(const TaskModel& model, const ParamSet& w,
                     const Dataset& data, std::span<const std::size_t> batch) {
  if (batch.empty()) throw SpecError("LossAndGrad: empty batch");
  CheckParams(model, w);
  Forward f = RunForward(model, w, data, batch);
  const std::size_t n = batch.size();
  const std::size_t C = model.num_classes;
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL/dlogits = (p - onehot) / n, stored over probs.
  for (std::size_t i = 0; i < n; ++i) {
    double* d = &f.probs[i * C];
    d[data.labels[batch[i]]] -= 1.0;
    for (std::size_t c = 0; c < C; ++c) d[c] *= inv_n;
  }

  LossGrad out{f.loss, model.ZeroParams()};
  auto& g = out.grad.mutable_layers();
  if (model.kind == TaskKind::kSoftmaxRegression) {
    for (std::size_t i = 0; i < n; ++i) {
      AccumulateAffineGrad(data.row(batch[i]), &f.probs[i * C], C,
                           g[0].values, g[1].values);
    }
    return out;
  }

  const std::size_t H = model.hidden_dim;
  const auto& W2 = w.layer(2).values;
  std::vector<double> dz(H);
  for (std::size_t i = 0; i < n; ++i) {
    const double* d = &f.probs[i * C];
    const double* h = &f.hidden[i * H];
    const double* z = &f.hidden_pre[i * H];
    AccumulateAffineGrad(std::span<const double>(h, H), d, C, g[2].values,
                         g[3].values);
    for (std::size_t j = 0; j < H; ++j) {
      double dh = 0.0;
      const double* row = W2.data() + j * C;
      for (std::size_t c = 0; c < C; ++c) dh += row[c] * d[c];
      dz[j] = dh * ActPrime(model.activation, z[j], h[j]);
    }
    AccumulateAffineGrad(data.row(batch[i]), dz.data(), H, g[0].values,
                         g[1].values);
  }
  return out;
}

EvalResult Evaluate(const TaskModel& model, const ParamSet& w,
                    const Dataset& test) {
  if (test.size() == 0) throw SpecError("Evaluate: empty test set");
  CheckParams(model, w);
  std::vector<std::size_t> all(test.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Forward f = RunForward(model, w, test, all);
  const std::size_t C = model.num_classes;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const double* p = &f.probs[i * C];
    // max_element returns the first maximum: lowest class id on ties.
    const auto pred = static_cast<int>(std::max_element(p, p + C) - p);
    if (pred == test.labels[i]) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(all.size()),
          f.loss};
}

}  // namespace fedsched
