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

// Bound-verification suites. Each check runs an inequality or identity over a
// family of instances and reports the worst margin (bound minus value, so a
// negative margin beyond the tolerance is a failure).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "smoothmatch/embedding.hpp"
#include "smoothmatch/experiments.hpp"
#include "smoothmatch/hst.hpp"
#include "smoothmatch/metric_core.hpp"
#include "smoothmatch/offline_opt.hpp"
#include "smoothmatch/online.hpp"
#include "smoothmatch/reduction.hpp"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {

struct CheckResult {
  std::string suite;
  std::string name;
  long long instances = 0;
  long long failures = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  std::string detail;

  bool passed() const noexcept { return failures == 0 && instances > 0; }

  /// Records one instance with slack `margin`; fails when margin < -tolerance.
  void observe(double margin) {
    ++instances;
    worst_margin = std::min(worst_margin, margin);
    if (!(margin >= -tolerance)) ++failures;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"suite", suite},       {"check", name},         {"instances", instances},
                        {"failures", failures}, {"tolerance", tolerance}, {"passed", passed()}};
    j["worst_margin"] = std::isfinite(worst_margin) ? nlohmann::json(worst_margin) : nlohmann::json(nullptr);
    if (!detail.empty()) j["detail"] = detail;
    return j;
  }
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
  }
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) arr.push_back(c.to_json());
    return {{"passed", passed()}, {"checks", arr}};
  }
};

namespace detail {

inline CheckResult make_check(const char* suite, const char* name, double tolerance) {
  CheckResult c;
  c.suite = suite;
  c.name = name;
  c.tolerance = tolerance;
  return c;
}

/// Every vector in {0, .25, .5, .75, 1}^n.
inline std::vector<std::vector<double>> probability_grid(std::size_t n) {
  std::vector<std::vector<double>> out{{}};
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::vector<double>> next;
    for (const auto& v : out) {
      for (int g = 0; g <= 4; ++g) {
        auto w = v;
        w.push_back(0.25 * g);
        next.push_back(std::move(w));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline std::vector<std::uint64_t> random_leaves(const HstTopology& t, std::size_t n, Rng& rng) {
  std::vector<std::uint64_t> out(n);
  for (auto& leaf : out) leaf = rng.below(t.num_leaves());
  return out;
}

inline std::vector<NodeId> as_nodes(const std::vector<std::uint64_t>& leaves) {
  std::vector<NodeId> out;
  out.reserve(leaves.size());
  for (auto l : leaves) out.push_back(NodeId::leaf(l));
  return out;
}

inline Matching tree_matching(const HstTopology& t, const std::vector<std::uint64_t>& s,
                              const std::vector<std::uint64_t>& r) {
  const auto sn = as_nodes(s);
  const auto rn = as_nodes(r);
  return min_cost_matching(std::span<const NodeId>(sn), std::span<const NodeId>(rn),
                           [&](const NodeId& a, const NodeId& b) { return node_distance(t, a, b); });
}

inline Points random_line_points(std::size_t n, Rng& rng) {
  Points out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(Point({rng.uniform()}));
  return out;
}

inline Points random_cube_points(int dim, std::size_t n, Rng& rng) {
  Points out;
  out.reserve(n);
  std::vector<double> c(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : c) x = rng.uniform();
    out.emplace_back(c);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Probability suite

/// PB(p) is dominated by PB(q) in convex order when p majorizes q, probed with
/// |t - c| and (t - c)^2 for c in {0, 0.5, ..., n}.
inline CheckResult check_convex_order(std::size_t max_n = 3) {
  auto c = detail::make_check("pb", "convex_order", kExactTol);
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto grid = detail::probability_grid(n);
    std::vector<std::vector<double>> pmfs;
    for (const auto& p : grid) pmfs.push_back(poisson_binomial_pmf(ProbVector(p)));
    for (std::size_t a = 0; a < grid.size(); ++a) {
      for (std::size_t b = 0; b < grid.size(); ++b) {
        if (!majorizes(ProbVector(grid[a]), ProbVector(grid[b]))) continue;
        for (std::size_t k = 0; k <= 2 * n; ++k) {
          const double center = 0.5 * static_cast<double>(k);
          auto abs_f = [&](double t) { return std::abs(t - center); };
          auto sq_f = [&](double t) { return (t - center) * (t - center); };
          c.observe(pmf_expectation(pmfs[b], abs_f) - pmf_expectation(pmfs[a], abs_f));
          c.observe(pmf_expectation(pmfs[b], sq_f) - pmf_expectation(pmfs[a], sq_f));
        }
      }
    }
  }
  return c;
}

/// Mean absolute deviation about the mean shrinks under majorization.
inline CheckResult check_mad_majorization(std::size_t max_n = 3) {
  auto c = detail::make_check("pb", "mad_majorization", kExactTol);
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto grid = detail::probability_grid(n);
    for (const auto& p : grid) {
      for (const auto& q : grid) {
        const ProbVector pv(p), qv(q);
        if (!majorizes(pv, qv)) continue;
        double sp = 0.0, sq = 0.0;
        for (double x : p) sp += x;
        for (double x : q) sq += x;
        c.observe(mean_abs_dev(poisson_binomial_pmf(qv), sq) - mean_abs_dev(poisson_binomial_pmf(pv), sp));
      }
    }
  }
  return c;
}

/// E|Z - EZ| >= std(Z)/sqrt(2) for Z ~ Bin(n, p), n in 2..20.
inline CheckResult check_binomial_mad(int max_n = 20) {
  auto c = detail::make_check("pb", "binomial_mad_vs_std", kExactTol);
  for (int n = 2; n <= max_n; ++n) {
    const double lo = 1.0 / n;
    for (double p : {lo, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0 - lo}) {
      if (p < lo - kExactTol || p > 1.0 - lo + kExactTol) continue;
      c.observe(binomial_mad_gap(n, p));
    }
  }
  return c;
}

/// std(PB(p)) <= sqrt(sum p) and the pmf is a probability vector.
inline CheckResult check_pb_std_and_normalization(std::size_t max_n = 3) {
  auto c = detail::make_check("pb", "pmf_normalized_and_std_bound", kExactTol);
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (const auto& p : detail::probability_grid(n)) {
      const auto pmf = poisson_binomial_pmf(ProbVector(p));
      double total = 0.0, least = 0.0;
      for (double x : pmf) {
        total += x;
        least = std::min(least, x);
      }
      double sum = 0.0;
      for (double x : p) sum += x;
      c.observe(least);
      c.observe(-std::abs(total - 1.0));
      c.observe(std::sqrt(sum) - pmf_stddev(pmf));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Offline-optimum suite

/// Closed-form HST optimum (both forms) against the assignment solver under
/// the tree metric; Delta = 2, h <= 3, n <= 8.
inline CheckResult check_hst_opt_equivalence(int instances = 200, std::uint64_t seed = 1) {
  auto c = detail::make_check("opt", "hst_opt_equals_assignment", 1e-9);
  Rng rng(seed, 0);
  for (int i = 0; i < instances; ++i) {
    const HstTopology t(2, 2.0, 1 + static_cast<int>(rng.below(3)));
    const std::size_t n = 1 + rng.below(8);
    const auto s = detail::random_leaves(t, n, rng);
    const auto r = detail::random_leaves(t, n, rng);
    const double hungarian = detail::tree_matching(t, s, r).total_cost;
    const auto counts = subtree_counts(t, s, r);
    const double closed = hst_opt_cost(t, counts);
    const double edges = hst_opt_cost_by_edges(t, counts);
    c.observe(-std::max(std::abs(closed - hungarian), std::abs(edges - hungarian)));
  }
  return c;
}

/// crossing_count equals the number of pairs of an actual optimal matching
/// whose least common ancestor is the node; n <= 6.
inline CheckResult check_crossing_formula(int instances = 200, std::uint64_t seed = 2) {
  auto c = detail::make_check("opt", "crossing_count_matches_optimum", 0.0);
  Rng rng(seed, 0);
  for (int i = 0; i < instances; ++i) {
    const HstTopology t(2 + static_cast<int>(rng.below(2)), 2.0, 1 + static_cast<int>(rng.below(3)));
    const std::size_t n = 1 + rng.below(6);
    const auto s = detail::random_leaves(t, n, rng);
    const auto r = detail::random_leaves(t, n, rng);
    const Matching m = detail::tree_matching(t, s, r);
    const auto counts = subtree_counts(t, s, r);
    std::vector<std::vector<long long>> crossing(static_cast<std::size_t>(t.height()) + 1);
    for (int k = 0; k <= t.height(); ++k) crossing[static_cast<std::size_t>(k)].assign(t.level_size(k), 0);
    for (auto [si, ri] : m.pairs) {
      const int k = lca_height(t, NodeId::leaf(s[si]), NodeId::leaf(r[ri]));
      if (k > 0) ++crossing[static_cast<std::size_t>(k)][t.ancestor(NodeId::leaf(s[si]), k).index];
    }
    const auto delta = static_cast<std::uint64_t>(t.delta());
    long long worst = 0;
    for (int k = 1; k <= t.height(); ++k) {
      for (std::uint64_t v = 0; v < t.level_size(k); ++v) {
        std::vector<long long> cs, cr;
        for (std::uint64_t ch = 0; ch < delta; ++ch) {
          cs.push_back(counts.s_hat[static_cast<std::size_t>(k - 1)][v * delta + ch]);
          cr.push_back(counts.r_hat[static_cast<std::size_t>(k - 1)][v * delta + ch]);
        }
        worst = std::max(worst, std::llabs(crossing_count(cs, cr) - crossing[static_cast<std::size_t>(k)][v]));
      }
    }
    c.observe(-static_cast<double>(worst));
  }
  return c;
}

/// On the line the assignment solver agrees with the sorted matching; n <= 64.
inline CheckResult check_line_sorted(int instances = 200, std::uint64_t seed = 3) {
  auto c = detail::make_check("opt", "line_assignment_equals_sorted", 1e-9);
  Rng rng(seed, 0);
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(64);
    const auto s = detail::random_line_points(n, rng);
    const auto r = detail::random_line_points(n, rng);
    c.observe(-std::abs(min_cost_matching(s, r).total_cost - sorted_matching_cost_1d(s, r)));
  }
  return c;
}

/// Obstacle integral is at most twice the line optimum; n <= 128, L = sigma/4
/// with sigma uniform in (0, 1].
inline CheckResult check_obstacle_bound(int instances = 200, std::uint64_t seed = 4) {
  auto c = detail::make_check("opt", "obstacle_at_most_twice_opt", 1e-9);
  Rng rng(seed, 0);
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(128);
    const auto s = detail::random_line_points(n, rng);
    const auto r = detail::random_line_points(n, rng);
    const double window = (1.0 - rng.uniform()) / 4.0;
    c.observe(2.0 * sorted_matching_cost_1d(s, r) - obstacle_integral_d1(s, r, window));
  }
  return c;
}

/// Integral of W over [0, 1-L] is at least L*n/2 for heterogeneous sigma-smooth
/// suites with L = sigma/4.
inline CheckResult check_window_mass(int suites = 50, std::uint64_t seed = 5) {
  auto c = detail::make_check("opt", "window_mass_at_least_half_Ln", 1e-9);
  Rng rng(seed, 0);
  for (int i = 0; i < suites; ++i) {
    const double sigma = 0.05 + 0.95 * rng.uniform();
    const std::size_t n = 1 + rng.below(64);
    std::vector<SmoothDistribution> dists;
    for (std::size_t k = 0; k < n; ++k) dists.push_back(random_box_histogram(1, sigma, rng));
    const double window = sigma / 4.0;
    c.observe(integrated_window_mass(dists, window) - window * static_cast<double>(n) / 2.0);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Random-Subtree suite

/// Empirical mean RS cost over `runs` coin sequences stays below the
/// per-instance bound plus 3 standard errors; Delta = alpha = 2, h <= 3, n <= 16.
inline CheckResult check_rs_instance_bound(int instances = 50, int runs = 2000, std::uint64_t seed = 6) {
  auto c = detail::make_check("rs", "instance_bound_3se", 1e-9);
  Rng rng(seed, 0);
  for (int i = 0; i < instances; ++i) {
    const HstTopology t(2, 2.0, 1 + static_cast<int>(rng.below(3)));
    const std::size_t n = 1 + rng.below(16);
    const auto s = detail::random_leaves(t, n, rng);
    const auto r = detail::random_leaves(t, n, rng);
    const double bound = rs_instance_bound(t, subtree_counts(t, s, r));
    std::vector<double> costs;
    costs.reserve(static_cast<std::size_t>(runs));
    for (int run = 0; run < runs; ++run) {
      Rng coins(seed, 1 + static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(runs) +
                          static_cast<std::uint64_t>(run));
      RandomSubtree alg(t, s);
      costs.push_back(run_online_tree(alg, t, s, r, coins).matching.total_cost);
    }
    const MeanStat m = mean_stat(costs);
    c.observe(bound + 3.0 * m.std_error - m.mean);
  }
  return c;
}

/// Closed-form bound in expectation: S, R i.i.d. uniform on [0,1], embedded
/// at choose_height; mean tree cost of RS <= rs_theorem_bound + 3 SE.
inline CheckResult check_rs_theorem_bound(std::vector<long long> sizes = {64, 256, 1024}, int trials = 50,
                                          std::uint64_t seed = 7) {
  auto c = detail::make_check("rs", "theorem_bound_3se", 1e-9);
  std::ostringstream detail;
  for (long long n : sizes) {
    const int h = choose_height(n, 1, HeightVariant::kRs);
    const DyadicEmbedding e(1, h);
    std::vector<double> costs;
    for (int trial = 0; trial < trials; ++trial) {
      Rng rng(seed, static_cast<std::uint64_t>(n) * 1000 + static_cast<std::uint64_t>(trial));
      const auto s = e.leaves(detail::random_line_points(static_cast<std::size_t>(n), rng));
      const auto r = e.leaves(detail::random_line_points(static_cast<std::size_t>(n), rng));
      RandomSubtree alg(e.topology(), s);
      costs.push_back(run_online_tree(alg, e.topology(), s, r, rng).matching.total_cost);
    }
    const MeanStat m = mean_stat(costs);
    const double bound = rs_theorem_bound(BoundParams::make(2, 2.0, h, static_cast<double>(n)));
    c.observe(bound + 3.0 * m.std_error - m.mean);
    detail << "n=" << n << " h=" << h << " mean=" << format_double(m.mean) << " bound=" << format_double(bound)
           << "; ";
  }
  c.detail = detail.str();
  return c;
}

/// A request whose own leaf still holds a server is served there at cost 0.
inline CheckResult check_rs_no_bypass(int instances = 200, std::uint64_t seed = 8) {
  auto c = detail::make_check("rs", "never_bypasses_own_leaf", 0.0);
  Rng rng(seed, 0);
  for (int i = 0; i < instances; ++i) {
    const HstTopology t(2 + static_cast<int>(rng.below(3)), 2.0, 1 + static_cast<int>(rng.below(3)));
    const std::size_t n = 1 + rng.below(32);
    const auto s = detail::random_leaves(t, n, rng);
    const auto r = detail::random_leaves(t, n, rng);
    RandomSubtree alg(t, s);
    double worst = 0.0;
    for (auto leaf : r) {
      const bool local = alg.available(NodeId::leaf(leaf)) > 0;
      const NodeId got = alg.serve(NodeId::leaf(leaf), rng);
      if (local) worst = std::max(worst, node_distance(t, NodeId::leaf(leaf), got));
    }
    c.observe(-worst);
  }
  return c;
}

/// Delta = 2, h = 2, servers at leaves {2, 3}, request at leaf 0: each of
/// leaves 2 and 3 is chosen with frequency in [0.45, 0.55] over 2000 runs.
inline CheckResult check_rs_uniform_choice(int runs = 2000, std::uint64_t seed = 9) {
  auto c = detail::make_check("rs", "uniform_child_choice", 0.0);
  const HstTopology t(2, 2.0, 2);
  const std::vector<std::uint64_t> servers{2, 3};
  int hits = 0;
  for (int run = 0; run < runs; ++run) {
    Rng rng(seed, static_cast<std::uint64_t>(run));
    RandomSubtree alg(t, servers);
    if (alg.serve(NodeId::leaf(0), rng).index == 2) ++hits;
  }
  const double freq = static_cast<double>(hits) / runs;
  c.observe(0.05 - std::abs(freq - 0.5));
  c.detail = "frequency of leaf 2: " + format_double(freq);
  return c;
}

// ---------------------------------------------------------------------------
// Embedding suite

/// ||s - r|| <= sqrt(d) * (tree_dist / 4 + 2^-h) on random pairs,
/// d in {1,2,3}, h in {2..6}.
inline CheckResult check_embedding_pairs(int pairs = 10000, std::uint64_t seed = 10) {
  auto c = detail::make_check("embedding", "pointwise_translation", 1e-9);
  for (int d = 1; d <= 3; ++d) {
    for (int h = 2; h <= 6; ++h) {
      const DyadicEmbedding e(d, h);
      Rng rng(seed, static_cast<std::uint64_t>(d * 16 + h));
      for (int i = 0; i < pairs; ++i) {
        // Every fourth pair is drawn inside one leaf cell to stress the slack term.
        const auto pts = detail::random_cube_points(d, 2, rng);
        Point s = pts[0], r = pts[1];
        if (i % 4 == 0) {
          const auto cell = e.cell_of(s);
          std::vector<double> rc(static_cast<std::size_t>(d));
          for (int a = 0; a < d; ++a) {
            rc[static_cast<std::size_t>(a)] =
                std::ldexp(static_cast<double>(cell[static_cast<std::size_t>(a)]) + rng.uniform(), -h);
          }
          r = Point(rc);
        }
        c.observe(pair_cost_bound(e, s, r) - euclid_dist(s, r));
      }
    }
  }
  return c;
}

/// Euclidean cost of the lifted Random-Subtree run is at most translate_cost of
/// its tree cost.
inline CheckResult check_embedding_runs(int runs = 60, std::uint64_t seed = 11) {
  auto c = detail::make_check("embedding", "lifted_cost_translation", 1e-9);
  Rng rng(seed, 0);
  for (int i = 0; i < runs; ++i) {
    const int d = 1 + i % 3;
    const auto n = static_cast<long long>(2 + rng.below(255));
    const int h = choose_height(n, d, HeightVariant::kRs);
    const auto s = detail::random_cube_points(d, static_cast<std::size_t>(n), rng);
    const auto r = detail::random_cube_points(d, static_cast<std::size_t>(n), rng);
    LiftedRandomSubtree alg(DyadicEmbedding(d, h), s);
    const double cost = run_online(alg, s, r, rng).matching.total_cost;
    c.observe(translate_cost(d, h, n, alg.tree_cost()) - cost);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Reduction suite

/// Per trial: cost(A') <= cost(inner; T, R) + cost(M0), and A' is perfect.
/// Cycles d over {1,2,3} with random presets, sigma and sizes.
inline CheckResult check_reduction_decomposition(int trials = 100, std::uint64_t seed = 12) {
  auto c = detail::make_check("reduction", "per_trial_decomposition", 1e-9);
  Rng rng(seed, 0);
  for (int i = 0; i < trials; ++i) {
    ScenarioConfig cfg;
    cfg.d = 1 + i % 3;
    cfg.n = 1 + static_cast<long long>(rng.below(96));
    cfg.sigma = rng.below(2) == 0 ? 1.0 : 0.25 + 0.75 * rng.uniform();
    cfg.request_spec = rng.below(2) == 0 ? RequestSpec::kIdentical : RequestSpec::kHeterogeneous;
    cfg.server_preset = static_cast<ServerPreset>(rng.below(4));
    cfg.algorithm = Algorithm::kRsReduced;
    cfg.seed = seed * 1000 + static_cast<std::uint64_t>(i);
    cfg.validate();
    const auto dists = make_request_distributions(cfg);
    const ExperimentRecord rec = run_trial(cfg, dists, 0);
    c.observe(rec.inner_cost + rec.proxy_cost - rec.cost_alg);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Suites

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"pb", "rs", "opt", "embedding", "reduction"};
  return names;
}

inline VerifyReport verify_bounds(const std::string& suite) {
  VerifyReport report;
  auto want = [&](const char* name) { return suite == "all" || suite == name; };
  if (suite != "all" &&
      std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end()) {
    throw std::invalid_argument("verify_bounds: unknown suite '" + suite + "'");
  }
  if (want("pb")) {
    report.checks.push_back(check_convex_order());
    report.checks.push_back(check_mad_majorization());
    report.checks.push_back(check_binomial_mad());
    report.checks.push_back(check_pb_std_and_normalization());
  }
  if (want("opt")) {
    report.checks.push_back(check_hst_opt_equivalence());
    report.checks.push_back(check_crossing_formula());
    report.checks.push_back(check_line_sorted());
    report.checks.push_back(check_obstacle_bound());
    report.checks.push_back(check_window_mass());
  }
  if (want("rs")) {
    report.checks.push_back(check_rs_instance_bound());
    report.checks.push_back(check_rs_theorem_bound());
    report.checks.push_back(check_rs_no_bypass());
    report.checks.push_back(check_rs_uniform_choice());
  }
  if (want("embedding")) {
    report.checks.push_back(check_embedding_pairs());
    report.checks.push_back(check_embedding_runs());
  }
  if (want("reduction")) report.checks.push_back(check_reduction_decomposition());
  return report;
}

}  // namespace smoothmatch
