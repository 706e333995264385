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

// Online matching on HST metrics (Random-Subtree), a Euclidean greedy
// baseline, the execution harness, and closed-form cost bounds.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smoothmatch/embedding.hpp"
#include "smoothmatch/hst.hpp"
#include "smoothmatch/metric_core.hpp"
#include "smoothmatch/offline_opt.hpp"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {

/// Thrown when an online algorithm breaks the harness contract.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Random-Subtree

/// Availability mirror of the unmatched servers: avail(v) is the number of
/// unmatched servers in the subtree of v, for every node v.
class RandomSubtree {
 public:
  RandomSubtree(const HstTopology& topology, std::span<const std::uint64_t> server_leaves)
      : topology_(topology) {
    std::vector<long long> leaves(topology_.num_leaves(), 0);
    for (auto leaf : server_leaves) {
      if (leaf >= leaves.size()) throw std::out_of_range("RandomSubtree: server leaf out of range");
      ++leaves[leaf];
    }
    avail_ = detail::aggregate_up(topology_, std::move(leaves));
  }

  long long available(const NodeId& v) const {
    return avail_.at(static_cast<std::size_t>(v.height)).at(v.index);
  }
  long long total_available() const { return available(topology_.root()); }
  const HstTopology& topology() const noexcept { return topology_; }

  /// Climbs to the lowest ancestor of the request with an available server,
  /// then descends choosing uniformly among children with availability.
  NodeId serve(NodeId request_leaf, Rng& rng) {
    topology_.check(request_leaf);
    if (!request_leaf.is_leaf()) throw std::invalid_argument("RandomSubtree::serve: request must be a leaf");
    if (total_available() == 0) throw std::logic_error("RandomSubtree::serve: no available server");
    const auto delta = static_cast<std::uint64_t>(topology_.delta());
    NodeId v = request_leaf;
    while (available(v) == 0) v = {v.height + 1, v.index / delta};
    std::vector<std::uint64_t> open;
    open.reserve(delta);
    while (v.height > 0) {
      open.clear();
      const auto& below = avail_[static_cast<std::size_t>(v.height - 1)];
      for (std::uint64_t c = 0; c < delta; ++c) {
        if (below[v.index * delta + c] > 0) open.push_back(v.index * delta + c);
      }
      const std::uint64_t pick = open.size() == 1 ? open[0] : open[rng.below(open.size())];
      v = {v.height - 1, pick};
    }
    std::uint64_t idx = v.index;
    for (auto& level : avail_) {
      --level[idx];
      idx /= delta;
    }
    return v;
  }

 private:
  HstTopology topology_;
  std::vector<std::vector<long long>> avail_;
};

/// Functional form: serve one request against a Random-Subtree state.
inline NodeId rs_serve(RandomSubtree& state, NodeId request_leaf, Rng& rng) {
  return state.serve(request_leaf, rng);
}

// ---------------------------------------------------------------------------
// Greedy baseline

/// Nearest available server by Euclidean distance; lowest index wins ties.
inline std::size_t greedy_serve(std::span<const Point> servers, std::span<const char> available,
                                const Point& request) {
  std::size_t best = servers.size();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (!available[i]) continue;
    const double dist = euclid_dist(servers[i], request);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  if (best == servers.size()) throw std::logic_error("greedy_serve: no available server");
  return best;
}

class GreedyAlgorithm {
 public:
  explicit GreedyAlgorithm(Points servers) : servers_(std::move(servers)), available_(servers_.size(), 1) {}

  std::size_t serve(const Point& request, Rng& /*rng*/) {
    const std::size_t pick = greedy_serve(servers_, available_, request);
    available_[pick] = 0;
    return pick;
  }

 private:
  Points servers_;
  std::vector<char> available_;
};

using LiftedRandomSubtree = LiftedAlgorithm<RandomSubtree>;

// ---------------------------------------------------------------------------
// Harness

struct OnlineRun {
  Matching matching;
  std::vector<double> request_costs;  // in arrival order
};

/// Feeds `requests` in order to `alg` (exposing `std::size_t serve(const
/// Point&, Rng&)`) and enforces irrevocability: a consumed server may never be
/// returned again.
template <typename Algorithm>
OnlineRun run_online(Algorithm& alg, std::span<const Point> servers, std::span<const Point> requests,
                     Rng& rng) {
  if (servers.size() != requests.size()) {
    throw std::invalid_argument("run_online: " + std::to_string(servers.size()) + " servers vs " +
                                std::to_string(requests.size()) + " requests");
  }
  const std::size_t n = servers.size();
  std::vector<char> used(n, 0);
  std::vector<std::size_t> server_of(n);
  OnlineRun run;
  run.request_costs.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t s = alg.serve(requests[t], rng);
    if (s >= n || used[s]) {
      throw ContractViolation("run_online: algorithm returned unavailable server " + std::to_string(s) +
                              " for request " + std::to_string(t));
    }
    used[s] = 1;
    server_of[t] = s;
    run.request_costs.push_back(euclid_dist(servers[s], requests[t]));
  }
  run.matching.pairs.resize(n);
  for (std::size_t t = 0; t < n; ++t) run.matching.pairs[t] = {server_of[t], t};
  std::sort(run.matching.pairs.begin(), run.matching.pairs.end());
  for (double c : run.request_costs) run.matching.total_cost += c;
  return run;
}

/// Tree-metric harness: `alg` exposes `NodeId serve(NodeId, Rng&)`; servers
/// are ids grouped by leaf and handed out lowest id first.
template <typename TreeAlgorithm>
OnlineRun run_online_tree(TreeAlgorithm& alg, const HstTopology& t,
                          std::span<const std::uint64_t> server_leaves,
                          std::span<const std::uint64_t> request_leaves, Rng& rng) {
  if (server_leaves.size() != request_leaves.size()) {
    throw std::invalid_argument("run_online_tree: size mismatch");
  }
  const std::size_t n = server_leaves.size();
  LeafServerPool pool(server_leaves);
  OnlineRun run;
  run.request_costs.reserve(n);
  run.matching.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId r = NodeId::leaf(request_leaves[i]);
    const NodeId leaf = alg.serve(r, rng);
    if (!leaf.is_leaf() || !pool.has(leaf.index)) {
      throw ContractViolation("run_online_tree: algorithm chose a leaf with no available server");
    }
    const std::size_t s = pool.take(leaf.index);
    const double cost = node_distance(t, r, leaf);
    run.request_costs.push_back(cost);
    run.matching.pairs.emplace_back(s, i);
    run.matching.total_cost += cost;
  }
  std::sort(run.matching.pairs.begin(), run.matching.pairs.end());
  return run;
}

// ---------------------------------------------------------------------------
// Bounds

/// H_k = 1 + 1/2 + ... + 1/k.
inline double harmonic(int k) {
  if (k < 1) throw std::invalid_argument("harmonic: k must be at least 1");
  double sum = 0.0;
  for (int i = k; i >= 1; --i) sum += 1.0 / i;
  return sum;
}

struct BoundParams {
  int delta = 2;
  double alpha = 2.0;
  int height = 1;
  double n = 0.0;
  double harmonic = 1.5;  // H_delta
  double xi = 0.75;       // H_delta / alpha

  static BoundParams make(int delta, double alpha, int height, double n) {
    if (delta < 2) throw std::invalid_argument("BoundParams: arity must be at least 2");
    if (height < 1) throw std::invalid_argument("BoundParams: height must be at least 1");
    if (n < 0) throw std::invalid_argument("BoundParams: n must be nonnegative");
    BoundParams b;
    b.delta = delta;
    b.alpha = alpha;
    b.height = height;
    b.n = n;
    b.harmonic = smoothmatch::harmonic(delta);
    b.xi = b.harmonic / alpha;
    return b;
  }
};

namespace detail {

inline double geometric_sum(double ratio, int terms_through) {
  double sum = 0.0;
  double power = 1.0;
  for (int l = 0; l <= terms_through; ++l) {
    sum += power;
    power *= ratio;
  }
  return sum;
}

}  // namespace detail

/// 6 H sqrt(n) sum_{j<h} sqrt(Delta^(h-j)) / alpha^(h-j-1) * sum_{l<=j} xi^l.
inline double rs_theorem_bound(const BoundParams& b) {
  if (!(b.alpha >= 2.0)) throw std::invalid_argument("rs_theorem_bound: requires alpha >= 2");
  double sum = 0.0;
  for (int j = 0; j < b.height; ++j) {
    sum += std::pow(static_cast<double>(b.delta), 0.5 * (b.height - j)) /
           std::pow(b.alpha, b.height - j - 1) * detail::geometric_sum(b.xi, j);
  }
  return 6.0 * b.harmonic * std::sqrt(b.n) * sum;
}

/// 3 H sum_{j<h} sum_{v in V_j} (r_hat(v) - s_hat(v))^+ / alpha^(h-j-1) *
/// sum_{l<=j} xi^l: an upper bound on the expected Random-Subtree cost for
/// this exact server/request configuration.
inline double rs_instance_bound(const HstTopology& t, const NodeCounts& counts) {
  if (counts.servers(t.root()) != counts.requests(t.root())) {
    throw std::invalid_argument("rs_instance_bound: unbalanced instance");
  }
  const double h_delta = harmonic(t.delta());
  const double xi = h_delta / t.alpha();
  double sum = 0.0;
  for (int j = 0; j < t.height(); ++j) {
    long long excess = 0;
    const auto& s = counts.s_hat[static_cast<std::size_t>(j)];
    const auto& r = counts.r_hat[static_cast<std::size_t>(j)];
    for (std::size_t v = 0; v < s.size(); ++v) excess += std::max(0LL, r[v] - s[v]);
    sum += static_cast<double>(excess) / std::pow(t.alpha(), t.height() - j - 1) *
           detail::geometric_sum(xi, j);
  }
  return 3.0 * h_delta * sum;
}

/// C sqrt(n) sum_{j=1}^{h} sqrt(Delta^(h-j+1)) / alpha^(h-j) * log2(2n / Delta^(h-j)).
/// Requires Delta^(h-1) <= n/2.
inline double bbgn_theorem_bound(const BoundParams& b, double constant) {
  if (!(b.alpha >= 2.0)) throw std::invalid_argument("bbgn_theorem_bound: requires alpha >= 2");
  const double delta = b.delta;
  if (std::pow(delta, b.height - 1) > b.n / 2.0) {
    throw std::invalid_argument("bbgn_theorem_bound: requires Delta^(h-1) <= n/2");
  }
  double sum = 0.0;
  for (int j = 1; j <= b.height; ++j) {
    sum += std::pow(delta, 0.5 * (b.height - j + 1)) / std::pow(b.alpha, b.height - j) *
           std::log2(2.0 * b.n / std::pow(delta, b.height - j));
  }
  return constant * std::sqrt(b.n) * sum;
}

/// Per-instance form of the BBGN bound with unit-free constant C:
/// C sum_{j=1}^{h} alpha^(j-h) sum_{v in V_j, s_hat(v) >= 2} log2(s_hat(v)) *
/// sum_children (r_hat - s_hat)^+.
inline double bbgn_instance_bound(const HstTopology& t, const NodeCounts& counts, double constant) {
  const auto delta = static_cast<std::uint64_t>(t.delta());
  double sum = 0.0;
  for (int j = 1; j <= t.height(); ++j) {
    double level = 0.0;
    for (const NodeId& v : counts.nodes_with_two_servers(j)) {
      long long excess = 0;
      for (std::uint64_t c = 0; c < delta; ++c) excess += counts.excess({j - 1, v.index * delta + c});
      level += std::log2(static_cast<double>(counts.servers(v))) * static_cast<double>(excess);
    }
    sum += std::pow(t.alpha(), j - t.height()) * level;
  }
  return constant * sum;
}

/// Closed forms for the dyadic 2^d-ary 2-HST. The Random-Subtree value is
/// exact (no hidden constant) and `constant` is ignored; the BBGN value is
/// C sqrt(n) log2 n (d = 1), C sqrt(n) log2^2 n (d = 2), C d n^(1-1/d) (d >= 3).
inline double corollary_bounds(long long n, int dim, HeightVariant variant, double constant) {
  if (n < 2) throw std::invalid_argument("corollary_bounds: n must be at least 2");
  if (dim < 1) throw std::invalid_argument("corollary_bounds: dimension must be at least 1");
  const auto nd = static_cast<double>(n);
  if (variant == HeightVariant::kRs) {
    const int h = choose_height(n, dim, HeightVariant::kRs);
    return rs_theorem_bound(BoundParams::make(1 << dim, 2.0, h, nd));
  }
  switch (dim) {
    case 1:
      return constant * std::sqrt(nd) * std::log2(nd);
    case 2:
      return constant * std::sqrt(nd) * std::log2(nd) * std::log2(nd);
    default:
      return constant * dim * std::pow(nd, 1.0 - 1.0 / dim);
  }
}

}  // namespace smoothmatch
