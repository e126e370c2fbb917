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

#include "fedsched/optimizers.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {
namespace {

void CheckGradient(const ParamSet& w, const ParamSet& grad) {
  CheckSameStructure(w, grad, "optimizer step");
  if (!grad.AllFinite()) throw NumericError("non-finite gradient entry");
}

void CheckResult(const ParamSet& w) {
  if (!w.AllFinite()) throw NumericError("optimizer step produced non-finite model");
}

}  // namespace

void OptimizerConfig::Validate() const {
  if (!(eta > 0.0)) throw SpecError(fmt::format("eta > 0 required, got {}", eta));
  if (kind == OptimizerKind::kMomentum && !(gamma >= 0.0 && gamma < 1.0)) {
    throw SpecError(fmt::format("gamma in [0,1) required, got {}", gamma));
  }
  if (kind == OptimizerKind::kFedProx && !(mu >= 0.0)) {
    throw SpecError(fmt::format("mu >= 0 required, got {}", mu));
  }
}

ParamSet StepVanilla(const ParamSet& w, const ParamSet& grad,
                     const OptimizerConfig& cfg) {
  CheckGradient(w, grad);
  ParamSet out = w;
  out.AddScaled(-cfg.eta, grad);
  CheckResult(out);
  return out;
}

std::pair<ParamSet, ParamSet> StepMomentum(const ParamSet& w,
                                           const ParamSet& u,
                                           const ParamSet& grad,
                                           const OptimizerConfig& cfg) {
  CheckGradient(w, grad);
  CheckSameStructure(w, u, "momentum buffer");
  ParamSet u_next = Scale(cfg.gamma, u);
  ParamSet w_next = w;
  if (cfg.momentum_form == MomentumForm::kGradientBuffer) {
    u_next.AddScaled(1.0, grad);
    w_next.AddScaled(-cfg.eta, u_next);
  } else {
    u_next.AddScaled(-cfg.eta, grad);
    w_next.AddScaled(1.0, u_next);
  }
  CheckResult(w_next);
  return {std::move(w_next), std::move(u_next)};
}

ParamSet StepFedProx(const ParamSet& w, const ParamSet& anchor,
                     const ParamSet& grad, const OptimizerConfig& cfg) {
  CheckGradient(w, grad);
  CheckSameStructure(w, anchor, "fedprox anchor");
  ParamSet out = w;
  out.AddScaled(-cfg.eta, grad);
  if (cfg.mu != 0.0) {
    // - eta*mu*(w - anchor), evaluated at the pre-step w.
    const double c = cfg.eta * cfg.mu;
    auto& dst = out.mutable_layers();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const auto& wv = w.layer(i).values;
      const auto& av = anchor.layer(i).values;
      auto& ov = dst[i].values;
      for (std::size_t j = 0; j < ov.size(); ++j) ov[j] -= c * (wv[j] - av[j]);
    }
  }
  CheckResult(out);
  return out;
}

BatchStream::BatchStream(std::vector<std::size_t> local_indices,
                         std::size_t batch_size, std::uint64_t seed)
    : order_(std::move(local_indices)), batch_size_(batch_size), rng_(seed) {
  if (order_.empty()) throw SpecError("BatchStream: empty local dataset");
  if (batch_size_ == 0) throw SpecError("BatchStream: batch size must be >= 1");
}

void BatchStream::StartEpoch() { fresh_ = false; }

std::span<const std::size_t> BatchStream::Next() {
  if (!fresh_ || pos_ >= order_.size()) {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
    fresh_ = true;
  }
  const std::size_t n = std::min(batch_size_, order_.size() - pos_);
  std::span<const std::size_t> batch(order_.data() + pos_, n);
  pos_ += n;
  return batch;
}

ClientOptResult RunClientOpt(const ParamSet& start, std::size_t budget_batches,
                             BatchStream& stream, const OptimizerConfig& cfg,
                             const TaskModel& task, const Dataset& data,
                             OptimizerState& state, double extra_prox) {
  return RunClientOpt(
      start, budget_batches, stream, cfg,
      [&](const ParamSet& w, std::span<const std::size_t> batch) {
        return LossAndGrad(task, w, data, batch);
      },
      state, extra_prox);
}

ClientOptResult RunClientOpt(const ParamSet& start, std::size_t budget_batches,
                             BatchStream& stream, const OptimizerConfig& cfg,
                             const GradientFn& gradient, OptimizerState& state,
                             double extra_prox) {
  if (budget_batches == 0) throw SpecError("RunClientOpt: budget must be >= 1");
  cfg.Validate();
  if (cfg.kind == OptimizerKind::kMomentum && !state.u.SameStructure(start)) {
    state.u = ZerosLike(start);
  }
  if ((cfg.kind == OptimizerKind::kFedProx || extra_prox != 0.0) &&
      !state.anchor.SameStructure(start)) {
    throw StructureError("RunClientOpt: anchor model missing or mismatched");
  }

  stream.StartEpoch();
  ClientOptResult r{start, 0, 0.0};
  for (std::size_t b = 0; b < budget_batches; ++b) {
    LossGrad lg = gradient(r.model, stream.Next());
    if (extra_prox != 0.0) {
      lg.grad.AddScaled(extra_prox, r.model);
      lg.grad.AddScaled(-extra_prox, state.anchor);
    }
    switch (cfg.kind) {
      case OptimizerKind::kVanilla:
        r.model = StepVanilla(r.model, lg.grad, cfg);
        break;
      case OptimizerKind::kMomentum: {
        auto [w, u] = StepMomentum(r.model, state.u, lg.grad, cfg);
        r.model = std::move(w);
        state.u = std::move(u);
        break;
      }
      case OptimizerKind::kFedProx:
        r.model = StepFedProx(r.model, state.anchor, lg.grad, cfg);
        break;
    }
    r.last_loss = lg.loss;
    ++r.steps_done;
  }
  return r;
}

}  // namespace fedsched
