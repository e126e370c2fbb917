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

// fedsched: experiment runner and cache microbenchmark.
//
//   fedsched run <config> [--out DIR] [--seed N] [--report-partitions-only]
//   fedsched bench-cache [--learners 10,100,1000] [--sizes 1000,10000]
//                        [--repeats 5] [--out FILE]
//
// FEDSCHED_OUT_ROOT overrides the config's output directory (--out wins).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fedsched/bench.h"
#include "fedsched/config.h"
#include "fedsched/errors.h"
#include "fedsched/experiment.h"
#include "fedsched/metrics.h"

namespace {

int ReportError(const char* kind, const std::exception& e,
                const std::vector<std::string>& violations = {}) {
  nlohmann::json j = {{"error", kind}, {"message", e.what()}};
  if (!violations.empty()) j["violations"] = violations;
  std::cerr << j.dump(2) << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated training-policy simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool partitions_only = false;
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Override the config seed");
  run->add_flag("--report-partitions-only", partitions_only,
                "Write partition histograms without training");

  auto* bench = app.add_subcommand("bench-cache", "Cached vs full community computation");
  fedsched::BenchOptions bench_opts;
  std::optional<std::string> bench_out;
  bench->add_option("--learners", bench_opts.learners, "Learner counts")->delimiter(',');
  bench->add_option("--sizes", bench_opts.model_sizes, "Model sizes (entries)")->delimiter(',');
  bench->add_option("--repeats", bench_opts.repeats, "Repeats per cell");
  bench->add_option("--out", bench_out, "CSV output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = fedsched::ParseConfig(config_path);
      if (seed) cfg.seed = *seed;
      std::filesystem::path dir = cfg.out_dir;
      if (const char* root = std::getenv("FEDSCHED_OUT_ROOT"); root && *root) {
        dir = std::filesystem::path(root) / cfg.out_dir;
      }
      if (out_dir) dir = *out_dir;
      const auto cells = fedsched::RunExperiment(cfg, dir, {partitions_only});
      for (const auto& c : cells) {
        if (partitions_only) {
          std::cout << fmt::format("{}: partitions written\n", c.dir.string());
        } else {
          std::cout << fmt::format(
              "{}: policy={} rounds={} update_requests={} virtual_ms={} accuracy={:.4f}\n",
              c.dir.string(), c.log.policy, c.log.rounds, c.log.update_requests,
              fedsched::FormatMs(c.log.end_time),
              c.log.evals.empty() ? 0.0 : c.log.evals.back().accuracy);
        }
      }
    } else if (bench->parsed()) {
      const auto csv = fedsched::BenchCsv(fedsched::BenchCache(bench_opts));
      if (bench_out) {
        fedsched::WriteFile(*bench_out, csv);
      } else {
        std::cout << csv;
      }
    }
  } catch (const fedsched::ConfigError& e) {
    return ReportError("config", e, e.violations());
  } catch (const fedsched::IoError& e) {
    return ReportError("io", e);
  } catch (const fedsched::Error& e) {
    return ReportError("spec", e);
  } catch (const std::exception& e) {
    return ReportError("internal", e);
  }
  return 0;
}
