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

// Offline optima: exact min-cost perfect matching under an arbitrary metric,
// the closed-form HST optimum, and one-dimensional lower-bound diagnostics.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "smoothmatch/hst.hpp"
#include "smoothmatch/metric_core.hpp"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {

struct Matching {
  /// (server index, request index), sorted by server index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;

  /// Every server and every request in [0, n) appears exactly once.
  bool is_perfect(std::size_t n) const {
    if (pairs.size() != n) return false;
    std::vector<char> seen_s(n, 0), seen_r(n, 0);
    for (auto [s, r] : pairs) {
      if (s >= n || r >= n || seen_s[s] || seen_r[r]) return false;
      seen_s[s] = seen_r[r] = 1;
    }
    return true;
  }
};

inline constexpr std::size_t kMaxAssignmentSize = 4096;
// Up to this size the Euclidean solver keeps the full cost matrix in memory.
inline constexpr std::size_t kCachedAssignmentSize = 2048;

namespace detail {

// Shortest augmenting paths with dual potentials (Kuhn-Munkres, O(n^3)).
// `cost_row(i, scratch)` either fills scratch with row i or returns a pointer
// to it. Returns the optimal assignment row -> column and leaves feasible duals in
// u, v with cost(i, j) - u[i] - v[j] >= 0 and equality on matched pairs.
template <typename CostRow>
std::vector<std::size_t> solve_assignment(std::size_t n, CostRow&& cost_row,
                                          std::vector<double>& u, std::vector<double>& v) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0);  // column -> row, 1-based, 0 = free
  std::vector<std::size_t> way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);
  std::vector<double> row(n);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      const double* costs = row.data();
      if constexpr (std::is_same_v<std::invoke_result_t<CostRow&, std::size_t, std::vector<double>&>,
                                   const double*>) {
        costs = cost_row(i0 - 1, row);
      } else {
        cost_row(i0 - 1, row);
      }
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = costs[j - 1] - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[owner[j] - 1] = j - 1;
  return assign;
}

// Among optimal assignments (perfect matchings on dual-tight edges), moves to
// the lexicographically smallest one by fixing rows in order and rotating
// along alternating cycles of tight edges.
template <typename CostRow>
void lexicographic_optimum(std::size_t n, CostRow&& cost_row, const std::vector<double>& u,
                           const std::vector<double>& v, std::vector<std::size_t>& assign) {
  std::vector<double> row(n);
  std::vector<std::vector<std::size_t>> tight_by_row(n), tight_by_col(n);
  for (std::size_t i = 0; i < n; ++i) {
    cost_row(i, row);
    double scale = 1.0;
    for (double c : row) scale = std::max(scale, std::abs(c));
    const double tol = 1e-12 * scale;
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] - u[i + 1] - v[j + 1] <= tol) {
        tight_by_row[i].push_back(j);
        tight_by_col[j].push_back(i);
      }
    }
  }
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) owner[assign[i]] = i;
  std::vector<char> fixed_row(n, 0), fixed_col(n, 0);
  std::vector<std::size_t> mark(n, 0), next_col(n, 0), queue;
  std::size_t epoch = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t target = assign[i];
    bool has_smaller = false;
    for (std::size_t j : tight_by_row[i]) {
      if (j < target && !fixed_col[j]) has_smaller = true;
    }
    if (has_smaller) {
      ++epoch;
      queue.assign(1, target);
      for (std::size_t q = 0; q < queue.size(); ++q) {
        const std::size_t col = queue[q];
        for (std::size_t s : tight_by_col[col]) {
          if (s == i || fixed_row[s] || mark[s] == epoch) continue;
          mark[s] = epoch;
          next_col[s] = col;
          queue.push_back(assign[s]);
        }
      }
      for (std::size_t j : tight_by_row[i]) {
        if (j >= target) break;
        if (fixed_col[j] || mark[owner[j]] != epoch) continue;
        std::size_t s = owner[j];
        assign[i] = j;
        owner[j] = i;
        while (true) {
          const std::size_t col = next_col[s];
          const std::size_t prev = owner[col];
          assign[s] = col;
          owner[col] = s;
          if (col == target) break;
          s = prev;
        }
        break;
      }
    }
    fixed_row[i] = 1;
    fixed_col[assign[i]] = 1;
  }
}

}  // namespace detail

/// Exact min-cost perfect matching between `servers` and `requests` under
/// `metric`. Among optimal matchings, returns the lexicographically smallest
/// pair list.
template <typename PointT, typename Metric>
Matching min_cost_matching(std::span<const PointT> servers, std::span<const PointT> requests,
                           Metric&& metric) {
  if (servers.size() != requests.size()) {
    throw std::invalid_argument("min_cost_matching: " + std::to_string(servers.size()) +
                                " servers vs " + std::to_string(requests.size()) + " requests");
  }
  const std::size_t n = servers.size();
  if (n > kMaxAssignmentSize) {
    throw std::length_error("min_cost_matching: n = " + std::to_string(n) + " exceeds 4096");
  }
  Matching out;
  if (n == 0) return out;
  auto cost_row = [&](std::size_t i, std::vector<double>& row) {
    for (std::size_t j = 0; j < n; ++j) row[j] = metric(servers[i], requests[j]);
  };
  std::vector<double> u, v;
  auto assign = detail::solve_assignment(n, cost_row, u, v);
  const auto hungarian = assign;
  detail::lexicographic_optimum(n, cost_row, u, v, assign);

  auto total = [&](const std::vector<std::size_t>& a) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += metric(servers[i], requests[a[i]]);
    return sum;
  };
  const double base = total(hungarian);
  double cost = total(assign);
  if (cost > base + 1e-9 * std::max(1.0, base)) {
    assign = hungarian;
    cost = base;
  }
  out.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.pairs.emplace_back(i, assign[i]);
  out.total_cost = cost;
  return out;
}

inline Matching min_cost_matching(const Points& servers, const Points& requests) {
  return min_cost_matching(std::span<const Point>(servers), std::span<const Point>(requests),
                           EuclideanMetric{});
}

inline double sorted_matching_cost_1d(std::span<const Point> servers, std::span<const Point> requests);

namespace detail {

/// Optimal assignment row -> column under the Euclidean metric, solved on
/// flattened coordinates. No tie-breaking pass.
inline std::vector<std::size_t> euclidean_assignment(std::span<const Point> servers,
                                                     std::span<const Point> requests) {
  const std::size_t n = servers.size();
  if (n > kMaxAssignmentSize) {
    throw std::length_error("euclidean_assignment: n = " + std::to_string(n) + " exceeds 4096");
  }
  if (n == 0) return {};
  const std::size_t dim = servers[0].dim();
  std::vector<double> s(n * dim), r(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (servers[i].dim() != dim || requests[i].dim() != dim) {
      throw std::invalid_argument("euclidean_assignment: mixed point dimensions");
    }
    for (std::size_t a = 0; a < dim; ++a) {
      s[i * dim + a] = servers[i][a];
      r[i * dim + a] = requests[i][a];
    }
  }
  auto fill_row = [&](std::size_t i, double* row) {
    const double* si = &s[i * dim];
    for (std::size_t j = 0; j < n; ++j) {
      const double* rj = &r[j * dim];
      double sq = 0.0;
      for (std::size_t a = 0; a < dim; ++a) sq += (si[a] - rj[a]) * (si[a] - rj[a]);
      row[j] = std::sqrt(sq);
    }
  };
  std::vector<double> u, v;
  if (n <= kCachedAssignmentSize) {
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) fill_row(i, &cost[i * n]);
    auto cached_row = [&](std::size_t i, std::vector<double>&) -> const double* { return &cost[i * n]; };
    return solve_assignment(n, cached_row, u, v);
  }
  auto cost_row = [&](std::size_t i, std::vector<double>& row) { fill_row(i, row.data()); };
  return solve_assignment(n, cost_row, u, v);
}

}  // namespace detail

/// Euclidean optimum value only. Uses the sorted identity on the line and the
/// assignment solver otherwise.
inline double optimal_cost(std::span<const Point> servers, std::span<const Point> requests) {
  if (servers.size() != requests.size()) {
    throw std::invalid_argument("optimal_cost: " + std::to_string(servers.size()) + " servers vs " +
                                std::to_string(requests.size()) + " requests");
  }
  if (servers.empty()) return 0.0;
  if (servers[0].dim() == 1) return sorted_matching_cost_1d(servers, requests);
  const auto assign = detail::euclidean_assignment(servers, requests);
  double total = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i) total += euclid_dist(servers[i], requests[assign[i]]);
  return total;
}

/// Line optimum: the i-th smallest server pairs with the i-th smallest request.
inline double sorted_matching_cost_1d(std::span<const Point> servers, std::span<const Point> requests) {
  if (servers.size() != requests.size()) {
    throw std::invalid_argument("sorted_matching_cost_1d: size mismatch");
  }
  std::vector<double> s, r;
  s.reserve(servers.size());
  r.reserve(requests.size());
  for (const auto& p : servers) {
    if (p.dim() != 1) throw std::invalid_argument("sorted_matching_cost_1d: points must be 1-d");
    s.push_back(p[0]);
  }
  for (const auto& p : requests) {
    if (p.dim() != 1) throw std::invalid_argument("sorted_matching_cost_1d: points must be 1-d");
    r.push_back(p[0]);
  }
  std::sort(s.begin(), s.end());
  std::sort(r.begin(), r.end());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) total += std::abs(s[i] - r[i]);
  return total;
}

/// Optimal line matching as explicit pairs; ties in coordinate keep index order.
inline Matching sorted_matching_1d(std::span<const Point> servers, std::span<const Point> requests) {
  const double cost = sorted_matching_cost_1d(servers, requests);
  const std::size_t n = servers.size();
  auto order = [](std::span<const Point> pts) {
    std::vector<std::size_t> idx(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pts[a][0] < pts[b][0]; });
    return idx;
  };
  const auto s = order(servers);
  const auto r = order(requests);
  Matching out;
  out.pairs.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.pairs.emplace_back(s[k], r[k]);
  std::sort(out.pairs.begin(), out.pairs.end());
  out.total_cost = cost;
  return out;
}

// ---------------------------------------------------------------------------
// HST optimum

/// Matches crossing between children of one node in any optimal matching:
/// min{ sum (r - s)^+, sum (s - r)^+ } over the children.
inline long long crossing_count(std::span<const long long> child_servers,
                                std::span<const long long> child_requests) {
  if (child_servers.size() != child_requests.size()) {
    throw std::invalid_argument("crossing_count: child count mismatch");
  }
  long long excess_requests = 0;
  long long excess_servers = 0;
  for (std::size_t c = 0; c < child_servers.size(); ++c) {
    if (child_servers[c] < 0 || child_requests[c] < 0) {
      throw std::invalid_argument("crossing_count: negative count");
    }
    const long long diff = child_requests[c] - child_servers[c];
    if (diff > 0) excess_requests += diff;
    if (diff < 0) excess_servers -= diff;
  }
  return std::min(excess_requests, excess_servers);
}

namespace detail {

inline void check_balanced(const HstTopology& t, const NodeCounts& counts) {
  if (counts.s_hat.size() != static_cast<std::size_t>(t.height()) + 1 ||
      counts.r_hat.size() != counts.s_hat.size()) {
    throw std::invalid_argument("hst_opt_cost: counts do not match the topology height");
  }
  if (counts.servers(t.root()) != counts.requests(t.root())) {
    throw std::invalid_argument("hst_opt_cost: unbalanced instance (" +
                                std::to_string(counts.servers(t.root())) + " servers, " +
                                std::to_string(counts.requests(t.root())) + " requests)");
  }
}

}  // namespace detail

/// Optimal tree cost: each node at height k contributes its crossing count
/// times the leaf-to-leaf distance through a height-k ancestor.
inline double hst_opt_cost(const HstTopology& t, const NodeCounts& counts) {
  detail::check_balanced(t, counts);
  const auto delta = static_cast<std::size_t>(t.delta());
  double total = 0.0;
  for (int k = 1; k <= t.height(); ++k) {
    const auto& s_below = counts.s_hat[static_cast<std::size_t>(k - 1)];
    const auto& r_below = counts.r_hat[static_cast<std::size_t>(k - 1)];
    long long crossings = 0;
    for (std::size_t v = 0; v < t.level_size(k); ++v) {
      crossings += crossing_count(std::span(s_below).subspan(v * delta, delta),
                                  std::span(r_below).subspan(v * delta, delta));
    }
    total += static_cast<double>(crossings) * t.lca_distance(k);
  }
  return total;
}

/// Same optimum via the edge form: sum over non-root nodes of
/// |s_hat - r_hat| times the length of the edge above.
inline double hst_opt_cost_by_edges(const HstTopology& t, const NodeCounts& counts) {
  detail::check_balanced(t, counts);
  double total = 0.0;
  for (int j = 0; j < t.height(); ++j) {
    long long imbalance = 0;
    const auto& s = counts.s_hat[static_cast<std::size_t>(j)];
    const auto& r = counts.r_hat[static_cast<std::size_t>(j)];
    for (std::size_t v = 0; v < s.size(); ++v) imbalance += std::llabs(s[v] - r[v]);
    total += static_cast<double>(imbalance) * t.edge_above(j);
  }
  return total;
}

// ---------------------------------------------------------------------------
// One-dimensional obstacle diagnostics

namespace detail {

inline std::vector<double> line_coords(std::span<const Point> pts, const char* who) {
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    if (p.dim() != 1) throw std::invalid_argument(std::string(who) + ": requires d = 1");
    out.push_back(p[0]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline long long count_in_window(const std::vector<double>& sorted, double lo, double hi) {
  return std::upper_bound(sorted.begin(), sorted.end(), hi) -
         std::lower_bound(sorted.begin(), sorted.end(), lo);
}

}  // namespace detail

/// Integral over x in [0, 1-L] of |#S in [x,x+L] - #R in [x,x+L]|, evaluated
/// exactly: the integrand is constant between consecutive points of
/// {p - L, p : p in S u R}.
inline double obstacle_integral_d1(std::span<const Point> servers, std::span<const Point> requests,
                                   double window) {
  if (!(window > 0.0 && window < 1.0)) {
    throw std::invalid_argument("obstacle_integral_d1: window length must lie in (0,1)");
  }
  const auto s = detail::line_coords(servers, "obstacle_integral_d1");
  const auto r = detail::line_coords(requests, "obstacle_integral_d1");
  const double end = 1.0 - window;
  std::vector<double> breaks{0.0, end};
  for (const auto* pts : {&s, &r}) {
    for (double p : *pts) {
      for (double b : {p - window, p}) {
        if (b > 0.0 && b < end) breaks.push_back(b);
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double len = breaks[k + 1] - breaks[k];
    if (len <= 0.0) continue;
    const double mid = 0.5 * (breaks[k] + breaks[k + 1]);
    const long long diff = detail::count_in_window(s, mid, mid + window) -
                           detail::count_in_window(r, mid, mid + window);
    total += len * static_cast<double>(std::llabs(diff));
  }
  return total;
}

/// W(x) = sum_i Pr_{D_i}[x <= y <= x + L].
inline double window_expected_mass(std::span<const SmoothDistribution> dists, double x, double window) {
  if (!(window > 0.0) || x < -kExactTol || x + window > 1.0 + kExactTol) {
    throw std::invalid_argument("window_expected_mass: [x, x+L] must lie inside [0,1]");
  }
  double total = 0.0;
  for (const auto& d : dists) {
    if (d.dim() != 1) throw std::invalid_argument("window_expected_mass: distributions must be 1-d");
    total += d.cdf_1d(x + window) - d.cdf_1d(x);
  }
  return total;
}

/// Integral of W over [0, 1-L]. W is piecewise linear with kinks at
/// histogram cell edges e and e - L, so the trapezoid rule on those kinks is
/// exact.
inline double integrated_window_mass(std::span<const SmoothDistribution> dists, double window) {
  if (!(window > 0.0 && window < 1.0)) {
    throw std::invalid_argument("integrated_window_mass: window length must lie in (0,1)");
  }
  const double end = 1.0 - window;
  std::vector<double> knots{0.0, end};
  for (const auto& d : dists) {
    if (d.dim() != 1) throw std::invalid_argument("integrated_window_mass: distributions must be 1-d");
    for (int c = 0; c <= d.resolution(); ++c) {
      const double edge = static_cast<double>(c) / d.resolution();
      for (double k : {edge, edge - window}) {
        if (k > 0.0 && k < end) knots.push_back(k);
      }
    }
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  double total = 0.0;
  double prev = window_expected_mass(dists, knots[0], window);
  for (std::size_t k = 1; k < knots.size(); ++k) {
    const double cur = window_expected_mass(dists, knots[k], window);
    total += 0.5 * (prev + cur) * (knots[k] - knots[k - 1]);
    prev = cur;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Lower-bound references

/// c*sigma*sqrt(n) for d = 1, c*sigma^(1/d)*n^(1-1/d) for d >= 2. The constant
/// c is a fit parameter.
inline double lb_reference(int dim, double sigma, double n, double c) {
  if (!(sigma > 0.0 && sigma <= 1.0)) throw std::invalid_argument("lb_reference: sigma outside (0,1]");
  if (n < 1.0) throw std::invalid_argument("lb_reference: n must be at least 1");
  if (dim < 1) throw std::invalid_argument("lb_reference: dimension must be at least 1");
  if (dim == 1) return c * sigma * std::sqrt(n);
  const double inv = 1.0 / dim;
  return c * std::pow(sigma, inv) * std::pow(n, 1.0 - inv);
}

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of E_{r ~ dist}[min_s ||s - r||].
inline Estimate nearest_neighbor_mean(std::span<const Point> servers, const SmoothDistribution& dist,
                                      long long trials, Rng& rng) {
  if (servers.empty()) throw std::invalid_argument("nearest_neighbor_mean: no servers");
  if (trials < 2) throw std::invalid_argument("nearest_neighbor_mean: need at least 2 trials");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long long t = 0; t < trials; ++t) {
    const Point r = dist.sample(rng);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : servers) best = std::min(best, euclid_dist(s, r));
    sum += best;
    sum_sq += best * best;
  }
  const auto m = static_cast<double>(trials);
  const double mean = sum / m;
  const double var = std::max(0.0, (sum_sq - m * mean * mean) / (m - 1.0));
  return {mean, std::sqrt(var / m)};
}

}  // namespace smoothmatch
