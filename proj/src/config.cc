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

#include "fedsched/config.h"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "fedsched/errors.h"

namespace fedsched {
namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(const std::string&)>;

struct Violations {
  std::vector<std::string> list;
  void Add(std::string msg) { list.push_back(std::move(msg)); }
};

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Trim(item));
  return out;
}

double ToDouble(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

std::size_t ToCount(const std::string& v) {
  if (v.empty() || v[0] == '-') throw std::invalid_argument("not a count");
  std::size_t pos = 0;
  const auto n = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return static_cast<std::size_t>(n);
}

bool ToBool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("not a boolean");
}

template <typename E>
E ToEnum(const std::string& v, const std::map<std::string, E>& names) {
  auto it = names.find(v);
  if (it == names.end()) {
    std::string allowed;
    for (const auto& [k, _] : names) allowed += (allowed.empty() ? "" : "|") + k;
    throw std::invalid_argument("expected one of " + allowed);
  }
  return it->second;
}

void ApplyPreset(const std::string& name, ExperimentConfig& c) {
  auto& opt = c.protocol.optimizer;
  if (name == "cifar10-like") {
    opt.eta = 0.05;
    opt.gamma = 0.75;
    opt.mu = 0.001;
    c.learners.batch_size = 100;
    c.learners.fast_ms = 30.0;
    c.learners.slow_ms = 300.0;
  } else if (name == "cifar100-like") {
    opt.eta = 0.1;
    opt.gamma = 0.9;
    opt.mu = 0.001;
    c.learners.batch_size = 100;
    c.learners.fast_ms = 60.0;
    c.learners.slow_ms = 2000.0;
  } else {
    throw std::invalid_argument("unknown preset (cifar10-like|cifar100-like)");
  }
  c.preset = name;
}

std::map<std::string, std::map<std::string, Setter>> MakeSetters(ExperimentConfig& c) {
  auto& task = c.task;
  auto& part = c.partition;
  auto& lrn = c.learners;
  auto& proto = c.protocol;
  auto& opt = c.protocol.optimizer;
  auto& wt = c.protocol.weighting;
  std::map<std::string, std::map<std::string, Setter>> s;

  s[""]["seed"] = [&](const std::string& v) { c.seed = ToCount(v); };
  s[""]["preset"] = [](const std::string&) {};  // applied up front

  s["task"]["kind"] = [&](const std::string& v) {
    task.model.kind = ToEnum<TaskKind>(
        v, {{"softmax_regression", TaskKind::kSoftmaxRegression},
            {"mlp1", TaskKind::kMlp1}});
  };
  s["task"]["input_dim"] = [&](const std::string& v) { task.model.input_dim = ToCount(v); };
  s["task"]["num_classes"] = [&](const std::string& v) { task.model.num_classes = ToCount(v); };
  s["task"]["hidden_dim"] = [&](const std::string& v) { task.model.hidden_dim = ToCount(v); };
  s["task"]["activation"] = [&](const std::string& v) {
    task.model.activation =
        ToEnum<Activation>(v, {{"relu", Activation::kRelu}, {"tanh", Activation::kTanh}});
  };
  s["task"]["per_class"] = [&](const std::string& v) { task.per_class = ToCount(v); };
  s["task"]["test_per_class"] = [&](const std::string& v) { task.test_per_class = ToCount(v); };
  s["task"]["cluster_spread"] = [&](const std::string& v) { task.cluster_spread = ToDouble(v); };

  s["partition"]["size_dist"] = [&](const std::string& v) {
    part.size_dist = ToEnum<SizeDist>(v, {{"uniform", SizeDist::kUniform},
                                          {"skewed", SizeDist::kSkewed},
                                          {"powerlaw", SizeDist::kPowerLaw}});
  };
  s["partition"]["exponent"] = [&](const std::string& v) { part.exponent = ToDouble(v); };
  s["partition"]["skew_ratio"] = [&](const std::string& v) { part.skew_ratio = ToDouble(v); };
  s["partition"]["class_dist"] = [&](const std::string& v) {
    part.class_dist =
        ToEnum<ClassDist>(v, {{"iid", ClassDist::kIid}, {"non_iid", ClassDist::kNonIid}});
  };
  s["partition"]["classes_per_learner"] = [&](const std::string& v) {
    part.classes_per_learner = ToCount(v);
  };
  s["partition"]["class_counts"] = [&](const std::string& v) {
    std::vector<std::size_t> counts;
    for (const auto& item : SplitList(v)) counts.push_back(ToCount(item));
    part.class_count_override = std::move(counts);
  };

  s["learners"]["fast"] = [&](const std::string& v) { lrn.fast = ToCount(v); };
  s["learners"]["slow"] = [&](const std::string& v) { lrn.slow = ToCount(v); };
  s["learners"]["fast_ms"] = [&](const std::string& v) { lrn.fast_ms = ToDouble(v); };
  s["learners"]["slow_ms"] = [&](const std::string& v) { lrn.slow_ms = ToDouble(v); };
  s["learners"]["batch_size"] = [&](const std::string& v) { lrn.batch_size = ToCount(v); };

  s["protocol"]["policy"] = [&](const std::string& v) {
    proto.policy = ToEnum<Policy>(v, {{"sync", Policy::kSync},
                                      {"semisync", Policy::kSemiSync},
                                      {"async", Policy::kAsync}});
  };
  s["protocol"]["epochs"] = [&](const std::string& v) { proto.epochs = ToCount(v); };
  s["protocol"]["lambda"] = [&](const std::string& v) {
    c.lambdas.clear();
    for (const auto& item : SplitList(v)) c.lambdas.push_back(ToDouble(item));
    if (c.lambdas.empty()) throw std::invalid_argument("empty list");
    proto.lambda = c.lambdas.front();
  };
  s["protocol"]["weighting"] = [&](const std::string& v) {
    wt.kind = ToEnum<WeightingKind>(v, {{"fedavg", WeightingKind::kFedAvgStatic},
                                        {"fedrec", WeightingKind::kFedRecStaleness},
                                        {"fedasync", WeightingKind::kFedAsyncPoly}});
  };
  s["protocol"]["fedrec_guard"] = [&](const std::string& v) { wt.fedrec_guard = ToBool(v); };
  s["protocol"]["fedasync_a"] = [&](const std::string& v) { wt.mixing = ToDouble(v); };
  s["protocol"]["fedasync_rho"] = [&](const std::string& v) { wt.rho = ToDouble(v); };
  s["protocol"]["fedasync_adaptive"] = [&](const std::string& v) {
    wt.adaptive_mixing = ToBool(v);
  };
  s["protocol"]["rounds"] = [&](const std::string& v) { proto.max_rounds = ToCount(v); };
  s["protocol"]["budget_ms"] = [&](const std::string& v) { proto.budget_ms = ToDouble(v); };
  s["protocol"]["eval_every"] = [&](const std::string& v) { proto.eval_every = ToCount(v); };

  s["optimizer"]["kind"] = [&](const std::string& v) {
    opt.kind = ToEnum<OptimizerKind>(v, {{"vanilla", OptimizerKind::kVanilla},
                                         {"momentum", OptimizerKind::kMomentum},
                                         {"fedprox", OptimizerKind::kFedProx}});
  };
  s["optimizer"]["eta"] = [&](const std::string& v) { opt.eta = ToDouble(v); };
  s["optimizer"]["gamma"] = [&](const std::string& v) { opt.gamma = ToDouble(v); };
  s["optimizer"]["mu"] = [&](const std::string& v) { opt.mu = ToDouble(v); };
  s["optimizer"]["momentum_form"] = [&](const std::string& v) {
    opt.momentum_form = ToEnum<MomentumForm>(
        v, {{"gradient_buffer", MomentumForm::kGradientBuffer}, {"velocity", MomentumForm::kVelocity}});
  };
  s["optimizer"]["reset_momentum"] = [&](const std::string& v) {
    opt.reset_momentum_on_fetch = ToBool(v);
  };

  s["output"]["dir"] = [&](const std::string& v) { c.out_dir = v; };
  return s;
}

void Validate(const ExperimentConfig& c, Violations& v) {
  const auto& m = c.task.model;
  if (m.input_dim < 1) v.Add("task.input_dim >= 1");
  if (m.num_classes < 1) v.Add("task.num_classes >= 1");
  if (m.kind == TaskKind::kMlp1 && m.hidden_dim < 1) v.Add("task.hidden_dim >= 1");
  if (c.task.per_class < 1) v.Add("task.per_class >= 1");
  if (c.task.test_per_class < 1) v.Add("task.test_per_class >= 1");
  if (!(c.task.cluster_spread > 0.0)) v.Add("task.cluster_spread > 0");

  const auto& l = c.learners;
  if (l.total() < 1) v.Add("learners: fast + slow >= 1");
  if (!(l.fast_ms > 0.0)) v.Add("learners.fast_ms > 0");
  if (!(l.slow_ms > 0.0)) v.Add("learners.slow_ms > 0");
  if (l.batch_size < 1) v.Add("learners.batch_size >= 1");

  const auto& p = c.partition;
  if (p.size_dist == SizeDist::kPowerLaw && !(p.exponent > 0.0)) {
    v.Add("partition.exponent > 0");
  }
  if (p.size_dist == SizeDist::kSkewed && !(p.skew_ratio > 1.0)) {
    v.Add("partition.skew_ratio > 1");
  }
  if (p.class_dist == ClassDist::kNonIid && !p.class_count_override &&
      (p.classes_per_learner < 1 || p.classes_per_learner > m.num_classes)) {
    v.Add(fmt::format("partition.classes_per_learner in [1, num_classes={}]",
                      m.num_classes));
  }
  if (p.class_count_override) {
    if (p.class_count_override->size() != l.total()) {
      v.Add(fmt::format("partition.class_counts needs {} entries (one per learner)",
                        l.total()));
    }
    for (auto n : *p.class_count_override) {
      if (n < 1 || n > m.num_classes) {
        v.Add(fmt::format("partition.class_counts entries in [1, {}]", m.num_classes));
        break;
      }
    }
  }
  if (m.num_classes * c.task.per_class < l.total()) {
    v.Add("task: training examples must be >= number of learners");
  }

  const auto& pr = c.protocol;
  if (pr.epochs < 1) v.Add("protocol.epochs >= 1");
  for (double lambda : c.lambdas) {
    if (!(lambda > 0.0)) {
      v.Add(fmt::format("protocol.lambda > 0 required (got {})", lambda));
    }
  }
  if (pr.max_rounds && *pr.max_rounds < 1) v.Add("protocol.rounds >= 1");
  if (pr.budget_ms && !(*pr.budget_ms > 0.0)) v.Add("protocol.budget_ms > 0");
  if (pr.eval_every < 1) v.Add("protocol.eval_every >= 1");
  if (pr.policy != Policy::kAsync &&
      pr.weighting.kind != WeightingKind::kFedAvgStatic) {
    v.Add("protocol.weighting must be fedavg for sync/semisync policies");
  }
  if (pr.weighting.kind == WeightingKind::kFedAsyncPoly) {
    if (!(pr.weighting.mixing > 0.0 && pr.weighting.mixing <= 1.0)) {
      v.Add("protocol.fedasync_a in (0, 1]");
    }
    if (!(pr.weighting.rho >= 0.0)) v.Add("protocol.fedasync_rho >= 0");
  }

  const auto& o = pr.optimizer;
  if (!(o.eta > 0.0)) v.Add("optimizer.eta > 0");
  if (o.kind == OptimizerKind::kMomentum && !(o.gamma >= 0.0 && o.gamma < 1.0)) {
    v.Add("optimizer.gamma in [0, 1)");
  }
  if (o.kind == OptimizerKind::kFedProx && !(o.mu >= 0.0)) v.Add("optimizer.mu >= 0");
  if (c.out_dir.empty()) v.Add("output.dir must not be empty");
}

}  // namespace

nlohmann::json ExperimentConfig::ToJson() const {
  const auto& o = protocol.optimizer;
  const auto& w = protocol.weighting;
  nlohmann::json j = {
      {"seed", seed},
      {"preset", preset},
      {"task",
       {{"kind", task.model.kind == TaskKind::kMlp1 ? "mlp1" : "softmax_regression"},
        {"input_dim", task.model.input_dim},
        {"num_classes", task.model.num_classes},
        {"hidden_dim", task.model.hidden_dim},
        {"activation", task.model.activation == Activation::kRelu ? "relu" : "tanh"},
        {"per_class", task.per_class},
        {"test_per_class", task.test_per_class},
        {"cluster_spread", task.cluster_spread}}},
      {"learners",
       {{"fast", learners.fast},
        {"slow", learners.slow},
        {"fast_ms", learners.fast_ms},
        {"slow_ms", learners.slow_ms},
        {"batch_size", learners.batch_size}}},
      {"protocol",
       {{"policy", PolicyName(protocol.policy)},
        {"epochs", protocol.epochs},
        {"lambda", protocol.lambda},
        {"eval_every", protocol.eval_every}}},
      {"optimizer",
       {{"kind", o.kind == OptimizerKind::kVanilla    ? "vanilla"
                 : o.kind == OptimizerKind::kMomentum ? "momentum"
                                                      : "fedprox"},
        {"eta", o.eta},
        {"gamma", o.gamma},
        {"mu", o.mu},
        {"momentum_form", o.momentum_form == MomentumForm::kGradientBuffer ? "gradient_buffer" : "velocity"},
        {"reset_momentum", o.reset_momentum_on_fetch}}},
      {"weighting",
       {{"kind", w.kind == WeightingKind::kFedAvgStatic      ? "fedavg"
                 : w.kind == WeightingKind::kFedRecStaleness ? "fedrec"
                                                             : "fedasync"},
        {"fedrec_guard", w.fedrec_guard},
        {"fedasync_a", w.mixing},
        {"fedasync_rho", w.rho},
        {"fedasync_adaptive", w.adaptive_mixing}}},
  };
  if (protocol.max_rounds) j["protocol"]["rounds"] = *protocol.max_rounds;
  if (protocol.budget_ms) j["protocol"]["budget_ms"] = *protocol.budget_ms;
  std::string size_dist = "uniform";
  if (partition.size_dist == SizeDist::kPowerLaw) {
    size_dist = fmt::format("powerlaw(exponent={})", partition.exponent);
  } else if (partition.size_dist == SizeDist::kSkewed) {
    size_dist = fmt::format("skewed(geometric stand-in, ratio={})", partition.skew_ratio);
  }
  j["partition"] = {
      {"size_dist", size_dist},
      {"class_dist", partition.class_dist == ClassDist::kIid ? "iid" : "non_iid"},
      {"classes_per_learner", partition.classes_per_learner},
      {"class_counts", partition.ClassCounts(task.model.num_classes)}};
  return j;
}

ExperimentConfig ParseConfigString(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({fmt::format("line {}: {}", e.line(), e.message())});
  }

  ExperimentConfig c;
  c.source_text = text;
  Violations v;

  if (auto preset = tree.get_optional<std::string>("preset");
      preset && tree.get_child("preset").empty()) {
    try {
      ApplyPreset(Trim(*preset), c);
    } catch (const std::invalid_argument& e) {
      v.Add(fmt::format("preset '{}': {}", Trim(*preset), e.what()));
    }
  }

  auto setters = MakeSetters(c);
  auto apply = [&](const std::string& section, const std::string& key,
                   const std::string& raw) {
    const std::string where = section.empty() ? key : section + "." + key;
    auto sec = setters.find(section);
    if (sec == setters.end() || !sec->second.count(key)) {
      v.Add("unknown key '" + where + "'");
      return;
    }
    try {
      sec->second.at(key)(Trim(raw));
    } catch (const std::exception& e) {
      v.Add(fmt::format("{} = '{}': {}", where, Trim(raw), e.what()));
    }
  };

  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      apply("", name, node.data());
      continue;
    }
    if (!setters.count(name)) {
      v.Add("unknown section [" + name + "]");
      continue;
    }
    for (const auto& [key, leaf] : node) apply(name, key, leaf.data());
  }

  c.partition.num_learners = c.learners.total();
  if (c.lambdas.empty()) c.lambdas.push_back(c.protocol.lambda);
  if (!c.protocol.max_rounds && !c.protocol.budget_ms) {
    c.protocol.max_rounds = kDefaultRounds;
  }
  Validate(c, v);
  if (!v.list.empty()) throw ConfigError(std::move(v.list));
  return c;
}

ExperimentConfig ParseConfig(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream ss;
  ss << f.rdbuf();
  return ParseConfigString(ss.str());
}

}  // namespace fedsched
