// Copyright 2026 The Smoothmatch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch front end: run a scenario, verify bound suites, or sweep n for a
// scaling fit.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smoothmatch/experiments.hpp"
#include "smoothmatch/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;

using smoothmatch::ConfigError;
using smoothmatch::ExperimentRecord;
using smoothmatch::ScenarioConfig;

std::vector<long long> parse_n_list(const std::string& text) {
  std::vector<long long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("n-list: '" + item + "' is not an integer");
    }
    if (used != item.size()) throw ConfigError("n-list: '" + item + "' is not an integer");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("n-list: empty");
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("out: cannot open '" + path + "' for writing");
  return os;
}

void print_summary(const std::vector<ExperimentRecord>& records) {
  const auto s = smoothmatch::summarize(records);
  nlohmann::json j = {{"trials", records.size()},
                      {"mean_cost_alg", s.alg.mean},
                      {"se_cost_alg", s.alg.std_error},
                      {"mean_cost_opt", s.opt.mean},
                      {"se_cost_opt", s.opt.std_error},
                      {"ratio_of_means", s.ratio_of_means},
                      {"mean_of_ratios", s.mean_of_ratios}};
  std::cout << j.dump(2) << '\n';
}

int cmd_run(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed,
            unsigned threads) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("config: cannot open '" + config_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ScenarioConfig cfg = ScenarioConfig::from_json(j);
  if (seed) cfg.seed = *seed;
  const auto records = smoothmatch::run_scenario(cfg, threads);
  auto os = open_out(out_path);
  smoothmatch::write_csv(os, records);
  print_summary(records);
  return kExitOk;
}

int cmd_verify(const std::string& suite) {
  const auto report = smoothmatch::verify_bounds(suite);
  std::cout << report.to_json().dump(2) << '\n';
  return report.passed() ? kExitOk : kExitVerifyFailed;
}

int cmd_scaling(ScenarioConfig base, const std::string& n_list, const std::string& out_path, unsigned threads) {
  const auto sizes = parse_n_list(n_list);
  std::vector<ExperimentRecord> all;
  for (long long n : sizes) {
    ScenarioConfig cfg = base;
    cfg.n = n;
    const auto records = smoothmatch::run_scenario(cfg, threads);
    all.insert(all.end(), records.begin(), records.end());
  }
  auto os = open_out(out_path);
  smoothmatch::write_csv(os, all);
  nlohmann::json j;
  for (auto [name, column] : {std::pair{"alg", smoothmatch::CostColumn::kAlg},
                              std::pair{"opt", smoothmatch::CostColumn::kOpt}}) {
    try {
      const auto fit = smoothmatch::fit_scaling(smoothmatch::scaling_points(all, column));
      j[name] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"stderr", fit.stderr_slope}};
    } catch (const std::invalid_argument& e) {
      j[name] = {{"error", e.what()}};
    }
  }
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online matching with smooth requests: scenario runner and bound verifier"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads for trials (output does not depend on it)")
      ->check(CLI::Range(1u, 256u));

  auto* run = app.add_subcommand("run", "Run one scenario and write per-trial CSV");
  std::string config_path, out_path;
  std::optional<std::uint64_t> seed;
  run->add_option("--config", config_path, "Scenario JSON")->required();
  run->add_option("--out", out_path, "Output CSV")->required();
  run->add_option("--seed", seed, "Override the config seed");

  auto* verify = app.add_subcommand("verify", "Run bound-verification suites");
  std::string suite = "all";
  verify->add_option("--suite", suite, "pb|rs|opt|embedding|reduction|all")
      ->check(CLI::IsMember({"pb", "rs", "opt", "embedding", "reduction", "all"}));

  auto* scaling = app.add_subcommand("scaling", "Sweep n and fit log-log slopes");
  int d = 1;
  double sigma = 1.0;
  std::string algorithm = "rs_lifted", n_list, scaling_out, preset = "sampled_from_D", request_spec = "identical";
  int trials = 10;
  std::uint64_t scaling_seed = 0;
  scaling->add_option("--d", d, "Dimension")->required();
  scaling->add_option("--sigma", sigma, "Smoothness in (0,1]")->required();
  scaling->add_option("--algorithm", algorithm, "rs_lifted|greedy|rs_reduced")->required();
  scaling->add_option("--n-list", n_list, "Comma-separated sizes")->required();
  scaling->add_option("--trials", trials, "Trials per size")->required();
  scaling->add_option("--out", scaling_out, "Output CSV")->required();
  scaling->add_option("--seed", scaling_seed, "Seed");
  scaling->add_option("--server-preset", preset, "sampled_from_D|uniform_grid|corner_cluster|single_point");
  scaling->add_option("--request-spec", request_spec, "identical|heterogeneous");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_path, seed, threads);
    if (*verify) return cmd_verify(suite);
    if (*scaling) {
      ScenarioConfig base;
      base.d = d;
      base.sigma = sigma;
      base.algorithm = smoothmatch::parse_algorithm(algorithm);
      base.server_preset = smoothmatch::parse_server_preset(preset);
      base.request_spec = smoothmatch::parse_request_spec(request_spec);
      base.trials = trials;
      base.seed = scaling_seed;
      return cmd_scaling(base, n_list, scaling_out, threads);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
