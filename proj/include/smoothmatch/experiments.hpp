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

// Scenario runner: instance generation, per-trial execution, CSV output and
// log-log scaling fits.
//
// Randomness layout. The request distributions of a scenario come from stream
// kDistributionStream. Trial t owns streams 4t..4t+3: servers, proxy samples,
// requests and algorithm coins, in that order, so switching the algorithm
// leaves the instance unchanged.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "smoothmatch/embedding.hpp"
#include "smoothmatch/hst.hpp"
#include "smoothmatch/metric_core.hpp"
#include "smoothmatch/offline_opt.hpp"
#include "smoothmatch/online.hpp"
#include "smoothmatch/reduction.hpp"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {

/// Invalid scenario configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RequestSpec { kIdentical, kHeterogeneous };
enum class ServerPreset { kSampledFromD, kUniformGrid, kCornerCluster, kSinglePoint };
enum class Algorithm { kRsLifted, kGreedy, kRsReduced };

inline const char* to_string(RequestSpec v) {
  return v == RequestSpec::kIdentical ? "identical" : "heterogeneous";
}
inline const char* to_string(ServerPreset v) {
  switch (v) {
    case ServerPreset::kSampledFromD: return "sampled_from_D";
    case ServerPreset::kUniformGrid: return "uniform_grid";
    case ServerPreset::kCornerCluster: return "corner_cluster";
    case ServerPreset::kSinglePoint: return "single_point";
  }
  return "?";
}
inline const char* to_string(Algorithm v) {
  switch (v) {
    case Algorithm::kRsLifted: return "rs_lifted";
    case Algorithm::kGreedy: return "greedy";
    case Algorithm::kRsReduced: return "rs_reduced";
  }
  return "?";
}

inline RequestSpec parse_request_spec(const std::string& s) {
  if (s == "identical") return RequestSpec::kIdentical;
  if (s == "heterogeneous") return RequestSpec::kHeterogeneous;
  throw ConfigError("request_spec: expected identical|heterogeneous, got '" + s + "'");
}
inline ServerPreset parse_server_preset(const std::string& s) {
  if (s == "sampled_from_D") return ServerPreset::kSampledFromD;
  if (s == "uniform_grid") return ServerPreset::kUniformGrid;
  if (s == "corner_cluster") return ServerPreset::kCornerCluster;
  if (s == "single_point") return ServerPreset::kSinglePoint;
  throw ConfigError("server_preset: expected sampled_from_D|uniform_grid|corner_cluster|single_point, got '" +
                    s + "'");
}
inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "rs_lifted") return Algorithm::kRsLifted;
  if (s == "greedy") return Algorithm::kGreedy;
  if (s == "rs_reduced") return Algorithm::kRsReduced;
  throw ConfigError("algorithm: expected rs_lifted|greedy|rs_reduced, got '" + s + "'");
}

/// "rs", "bbgn", or an explicit tree height.
struct HeightChoice {
  enum class Kind { kRs, kBbgn, kExplicit } kind = Kind::kRs;
  int height = 0;

  static HeightChoice rs() { return {Kind::kRs, 0}; }
  static HeightChoice bbgn() { return {Kind::kBbgn, 0}; }
  static HeightChoice fixed(int h) { return {Kind::kExplicit, h}; }

  int resolve(long long n, int dim) const {
    if (kind == Kind::kExplicit) return height;
    return choose_height(std::max(n, 2LL), dim, kind == Kind::kRs ? HeightVariant::kRs : HeightVariant::kBbgn);
  }
  nlohmann::json to_json() const {
    if (kind == Kind::kExplicit) return height;
    return kind == Kind::kRs ? "rs" : "bbgn";
  }
};

struct ScenarioConfig {
  int d = 1;
  long long n = 16;
  double sigma = 1.0;
  RequestSpec request_spec = RequestSpec::kIdentical;
  ServerPreset server_preset = ServerPreset::kSampledFromD;
  Algorithm algorithm = Algorithm::kRsLifted;
  HeightChoice height_variant = HeightChoice::rs();
  int trials = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (d < 1) throw ConfigError("d: must be at least 1, got " + std::to_string(d));
    if (n < 1) throw ConfigError("n: must be at least 1, got " + std::to_string(n));
    if (!(sigma > 0.0 && sigma <= 1.0)) throw ConfigError("sigma: must lie in (0,1]");
    if (trials < 1) throw ConfigError("trials: must be at least 1, got " + std::to_string(trials));
    if (d > 1 && n > static_cast<long long>(kMaxAssignmentSize)) {
      throw ConfigError("n: exact optimum in d >= 2 is limited to " + std::to_string(kMaxAssignmentSize));
    }
    if (height_variant.kind == HeightChoice::Kind::kExplicit && height_variant.height < 1) {
      throw ConfigError("height_variant: explicit height must be at least 1");
    }
    if (algorithm != Algorithm::kGreedy) {
      const int h = height_variant.resolve(n, d);
      if (d * h > 26) throw ConfigError("height_variant: d*h = " + std::to_string(d * h) + " exceeds 26");
    }
  }

  nlohmann::json to_json() const {
    return {{"d", d},
            {"n", n},
            {"sigma", sigma},
            {"request_spec", to_string(request_spec)},
            {"server_preset", to_string(server_preset)},
            {"algorithm", to_string(algorithm)},
            {"height_variant", height_variant.to_json()},
            {"trials", trials},
            {"seed", seed}};
  }

  /// Missing fields keep their defaults; unknown fields are rejected.
  static ScenarioConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    static const char* const kFields[] = {"d",         "n",          "sigma",          "request_spec", "server_preset",
                                          "algorithm", "height_variant", "trials",    "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find_if(std::begin(kFields), std::end(kFields), [&](const char* f) { return it.key() == f; }) ==
          std::end(kFields)) {
        throw ConfigError(it.key() + ": unknown field");
      }
    }
    ScenarioConfig c;
    auto field = [&](const char* name, auto& out) {
      if (!j.contains(name)) return;
      try {
        j.at(name).get_to(out);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
      }
    };
    field("d", c.d);
    field("n", c.n);
    field("sigma", c.sigma);
    field("trials", c.trials);
    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0)) {
        throw ConfigError("seed: expected a nonnegative integer");
      }
      c.seed = s.get<std::uint64_t>();
    }
    std::string text;
    if (j.contains("request_spec")) {
      field("request_spec", text);
      c.request_spec = parse_request_spec(text);
    }
    if (j.contains("server_preset")) {
      field("server_preset", text);
      c.server_preset = parse_server_preset(text);
    }
    if (j.contains("algorithm")) {
      field("algorithm", text);
      c.algorithm = parse_algorithm(text);
    }
    if (j.contains("height_variant")) {
      const auto& h = j.at("height_variant");
      if (h.is_number_integer()) {
        c.height_variant = HeightChoice::fixed(h.get<int>());
      } else if (h.is_string() && h.get<std::string>() == "rs") {
        c.height_variant = HeightChoice::rs();
      } else if (h.is_string() && h.get<std::string>() == "bbgn") {
        c.height_variant = HeightChoice::bbgn();
      } else {
        throw ConfigError("height_variant: expected \"rs\", \"bbgn\" or an integer height");
      }
    }
    c.validate();
    return c;
  }
};

struct ExperimentRecord {
  ScenarioConfig config;
  int trial = 0;
  std::uint64_t stream = 0;  // first of the trial's four streams
  int h = 0;                 // 0 for greedy, which uses no tree
  double cost_alg = 0.0;
  double cost_opt = 0.0;
  double ratio = 1.0;
  double proxy_cost = 0.0;  // nonzero only for rs_reduced
  double inner_cost = 0.0;  // inner algorithm against the samples (rs_reduced) or cost_alg
};

// ---------------------------------------------------------------------------
// Instance generation

inline constexpr std::uint64_t kDistributionStream = ~std::uint64_t{0};

/// Per-axis histogram resolution used for generated distributions.
inline int histogram_resolution(int dim) {
  if (dim == 1) return 64;
  if (dim == 2) return 16;
  return 8;
}

/// Cell extents of the box with the fewest cells whose volume is at least
/// sigma (so its uniform density is at most 1/sigma); ties prefer the smallest
/// gap between the widest and narrowest side, then lexicographic order.
inline std::vector<int> smooth_box_extent(int dim, double sigma, int resolution) {
  const double total = std::pow(static_cast<double>(resolution), dim);
  const double target = sigma * total * (1.0 - 1e-12);
  std::vector<int> best, cur(static_cast<std::size_t>(dim), 1);
  double best_cells = std::numeric_limits<double>::infinity();
  int best_spread = std::numeric_limits<int>::max();
  auto rec = [&](auto&& self, int axis, double cells) -> void {
    if (axis == dim) {
      const auto [lo, hi] = std::minmax_element(cur.begin(), cur.end());
      const int spread = *hi - *lo;
      if (cells >= target && (cells < best_cells || (cells == best_cells && spread < best_spread))) {
        best = cur;
        best_cells = cells;
        best_spread = spread;
      }
      return;
    }
    const double rest = std::pow(static_cast<double>(resolution), dim - axis - 1);
    for (int k = 1; k <= resolution; ++k) {
      if (cells * k * rest < target) continue;
      if (cells * k > best_cells) break;
      cur[static_cast<std::size_t>(axis)] = k;
      self(self, axis + 1, cells * k);
    }
  };
  rec(rec, 0, 1.0);
  return best;
}

/// Histogram uniform on a random cell-aligned box of volume about sigma.
inline SmoothDistribution random_box_histogram(int dim, double sigma, Rng& rng) {
  const int g = histogram_resolution(dim);
  const auto extent = smooth_box_extent(dim, sigma, g);
  std::vector<int> offset(static_cast<std::size_t>(dim));
  for (int a = 0; a < dim; ++a) {
    offset[static_cast<std::size_t>(a)] =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(g - extent[static_cast<std::size_t>(a)] + 1)));
  }
  std::size_t cells = 1;
  for (int a = 0; a < dim; ++a) cells *= static_cast<std::size_t>(g);
  std::size_t inside = 1;
  for (int k : extent) inside *= static_cast<std::size_t>(k);
  const double mass = 1.0 / static_cast<double>(inside);
  std::vector<double> masses(cells, 0.0);
  std::vector<int> c(static_cast<std::size_t>(dim), 0);
  for (std::size_t flat = 0; flat < cells; ++flat) {
    std::size_t rest = flat;
    bool in = true;
    for (int a = 0; a < dim; ++a) {
      const int ca = static_cast<int>(rest % static_cast<std::size_t>(g));
      rest /= static_cast<std::size_t>(g);
      const auto ua = static_cast<std::size_t>(a);
      if (ca < offset[ua] || ca >= offset[ua] + extent[ua]) in = false;
    }
    if (in) masses[flat] = mass;
  }
  return SmoothDistribution::histogram(static_cast<std::size_t>(dim), sigma, g, std::move(masses));
}

/// The request distributions D_1..D_n of a scenario.
inline std::vector<SmoothDistribution> make_request_distributions(const ScenarioConfig& cfg) {
  Rng rng(cfg.seed, kDistributionStream);
  const auto n = static_cast<std::size_t>(cfg.n);
  std::vector<SmoothDistribution> out;
  out.reserve(n);
  if (cfg.request_spec == RequestSpec::kIdentical) {
    const SmoothDistribution shared = cfg.sigma == 1.0 ? SmoothDistribution::uniform(static_cast<std::size_t>(cfg.d))
                                                       : random_box_histogram(cfg.d, cfg.sigma, rng);
    out.assign(n, shared);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_box_histogram(cfg.d, cfg.sigma, rng));
  return out;
}

inline Points draw_from(std::span<const SmoothDistribution> dists, Rng& rng) {
  Points out;
  out.reserve(dists.size());
  for (const auto& dist : dists) out.push_back(dist.sample(rng));
  return out;
}

/// Cell centers of the smallest m^d grid holding n points, axis 0 fastest.
inline Points uniform_grid_points(int dim, long long n) {
  long long m = 1;
  auto fits = [&](long long side) {
    long double cells = 1;
    for (int a = 0; a < dim; ++a) cells *= static_cast<long double>(side);
    return cells >= static_cast<long double>(n);
  };
  while (!fits(m)) ++m;
  Points out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<double> coords(static_cast<std::size_t>(dim));
  for (long long flat = 0; flat < n; ++flat) {
    long long rest = flat;
    for (int a = 0; a < dim; ++a) {
      coords[static_cast<std::size_t>(a)] = (static_cast<double>(rest % m) + 0.5) / static_cast<double>(m);
      rest /= m;
    }
    out.emplace_back(coords);
  }
  return out;
}

inline Points make_servers(ServerPreset preset, int dim, std::span<const SmoothDistribution> dists, Rng& rng) {
  const std::size_t n = dists.size();
  switch (preset) {
    case ServerPreset::kSampledFromD:
      return draw_from(dists, rng);
    case ServerPreset::kUniformGrid:
      return uniform_grid_points(dim, static_cast<long long>(n));
    case ServerPreset::kCornerCluster: {
      Points out;
      out.reserve(n);
      std::vector<double> coords(static_cast<std::size_t>(dim));
      for (std::size_t i = 0; i < n; ++i) {
        for (auto& c : coords) c = rng.uniform(0.0, 0.1);
        out.emplace_back(coords);
      }
      return out;
    }
    case ServerPreset::kSinglePoint:
      return Points(n, Point(std::vector<double>(static_cast<std::size_t>(dim), 0.0)));
  }
  throw std::logic_error("make_servers: unknown preset");
}

// ---------------------------------------------------------------------------
// Execution

inline double ratio_of(double alg, double opt) {
  if (opt > 0.0) return alg / opt;
  return alg == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
}

/// One trial; `dists` must come from make_request_distributions(cfg).
inline ExperimentRecord run_trial(const ScenarioConfig& cfg, std::span<const SmoothDistribution> dists, int trial) {
  ExperimentRecord rec;
  rec.config = cfg;
  rec.trial = trial;
  rec.stream = static_cast<std::uint64_t>(trial) * 4;
  Rng server_rng(cfg.seed, rec.stream);
  Rng sample_rng(cfg.seed, rec.stream + 1);
  Rng request_rng(cfg.seed, rec.stream + 2);
  Rng coin_rng(cfg.seed, rec.stream + 3);

  const Points servers = make_servers(cfg.server_preset, cfg.d, dists, server_rng);
  Points samples;
  if (cfg.algorithm == Algorithm::kRsReduced) samples = draw_from(dists, sample_rng);
  const Points requests = draw_from(dists, request_rng);

  if (cfg.algorithm != Algorithm::kGreedy) rec.h = cfg.height_variant.resolve(cfg.n, cfg.d);
  switch (cfg.algorithm) {
    case Algorithm::kGreedy: {
      GreedyAlgorithm alg(servers);
      rec.cost_alg = run_online(alg, servers, requests, coin_rng).matching.total_cost;
      rec.inner_cost = rec.cost_alg;
      break;
    }
    case Algorithm::kRsLifted: {
      LiftedRandomSubtree alg(DyadicEmbedding(cfg.d, rec.h), servers);
      rec.cost_alg = run_online(alg, servers, requests, coin_rng).matching.total_cost;
      rec.inner_cost = rec.cost_alg;
      break;
    }
    case Algorithm::kRsReduced: {
      LiftedRandomSubtree inner(DyadicEmbedding(cfg.d, rec.h), samples);
      ReducedAlgorithm<LiftedRandomSubtree> alg(build_proxy(servers, samples), std::move(inner));
      rec.cost_alg = run_online(alg, servers, requests, coin_rng).matching.total_cost;
      rec.inner_cost = alg.inner_cost();
      rec.proxy_cost = alg.proxy_cost();
      break;
    }
  }
  rec.cost_opt = optimal_cost(servers, requests);
  rec.ratio = ratio_of(rec.cost_alg, rec.cost_opt);
  return rec;
}

/// Exactly cfg.trials records ordered by trial index. The result does not
/// depend on `threads`.
inline std::vector<ExperimentRecord> run_scenario(const ScenarioConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const auto dists = make_request_distributions(cfg);
  std::vector<ExperimentRecord> out(static_cast<std::size_t>(cfg.trials));
  if (threads <= 1 || cfg.trials == 1) {
    for (int t = 0; t < cfg.trials; ++t) out[static_cast<std::size_t>(t)] = run_trial(cfg, dists, t);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int t = next++; t < cfg.trials; t = next++) out[static_cast<std::size_t>(t)] = run_trial(cfg, dists, t);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reporting

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline constexpr const char* kCsvHeader =
    "trial,d,n,sigma,algorithm,server_preset,h,cost_alg,cost_opt,ratio,proxy_cost,seed";

inline void write_csv_row(std::ostream& os, const ExperimentRecord& r) {
  os << r.trial << ',' << r.config.d << ',' << r.config.n << ',' << format_double(r.config.sigma) << ','
     << to_string(r.config.algorithm) << ',' << to_string(r.config.server_preset) << ',' << r.h << ','
     << format_double(r.cost_alg) << ',' << format_double(r.cost_opt) << ',' << format_double(r.ratio) << ','
     << format_double(r.proxy_cost) << ',' << r.config.seed << '\n';
}

inline void write_csv(std::ostream& os, std::span<const ExperimentRecord> records, bool header = true) {
  if (header) os << kCsvHeader << '\n';
  for (const auto& r : records) write_csv_row(os, r);
}

struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

inline MeanStat mean_stat(std::span<const double> xs) {
  MeanStat s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(sq / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return s;
}

struct Summary {
  MeanStat alg;
  MeanStat opt;
  double ratio_of_means = 1.0;  // mean(cost_alg) / mean(cost_opt); the acceptance quantity
  double mean_of_ratios = 1.0;
};

inline Summary summarize(std::span<const ExperimentRecord> records) {
  std::vector<double> a, o, r;
  for (const auto& rec : records) {
    a.push_back(rec.cost_alg);
    o.push_back(rec.cost_opt);
    r.push_back(rec.ratio);
  }
  Summary s;
  s.alg = mean_stat(a);
  s.opt = mean_stat(o);
  s.ratio_of_means = ratio_of(s.alg.mean, s.opt.mean);
  s.mean_of_ratios = mean_stat(r).mean;
  return s;
}

// ---------------------------------------------------------------------------
// Scaling fits

struct ScalingPoint {
  double n = 0.0;
  double cost = 0.0;
};

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

/// Least squares of log2(mean cost) against log2(n); points sharing n are
/// averaged first.
inline ScalingFit fit_scaling(std::span<const ScalingPoint> points) {
  std::map<double, std::pair<double, int>> by_n;
  for (const auto& p : points) {
    if (!(p.n > 0.0)) throw std::invalid_argument("fit_scaling: n must be positive");
    auto& [sum, count] = by_n[p.n];
    sum += p.cost;
    ++count;
  }
  if (by_n.size() < 3) throw std::invalid_argument("fit_scaling: need at least 3 distinct n values");
  std::vector<double> x, y;
  for (const auto& [n, acc] : by_n) {
    const double mean = acc.first / acc.second;
    if (!(mean > 0.0)) {
      throw std::invalid_argument("fit_scaling: mean cost at n = " + format_double(n) + " is not positive");
    }
    x.push_back(std::log2(n));
    y.push_back(std::log2(mean));
  }
  const auto m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += e * e;
  }
  fit.stderr_slope = std::sqrt(sse / (m - 2.0) / sxx);
  return fit;
}

enum class CostColumn { kAlg, kOpt };

inline std::vector<ScalingPoint> scaling_points(std::span<const ExperimentRecord> records, CostColumn column) {
  std::vector<ScalingPoint> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({static_cast<double>(r.config.n), column == CostColumn::kAlg ? r.cost_alg : r.cost_opt});
  }
  return out;
}

}  // namespace smoothmatch
