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

// Sample-based reduction from adversarial servers to stochastic servers.
//
// One sample t_i is drawn from each request distribution and the pool T is
// matched offline to the real servers S (proxy matching M0). The inner
// algorithm runs as if T were the server set; when it picks sample t the
// reduced algorithm commits to the real server M0(t). By the triangle
// inequality, cost(reduced) <= cost(inner; T, R) + cost(M0) on every run.

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smoothmatch/metric_core.hpp"
#include "smoothmatch/offline_opt.hpp"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {

struct ProxyMap {
  Points samples;                          // T, unlabeled
  Matching matching;                       // pairs (server index, sample index)
  std::vector<std::size_t> server_of_sample;

  std::size_t size() const noexcept { return samples.size(); }
  double cost() const noexcept { return matching.total_cost; }
};

namespace detail {

inline ProxyMap finish_proxy(Points samples, Matching m) {
  ProxyMap proxy;
  proxy.samples = std::move(samples);
  proxy.server_of_sample.assign(proxy.samples.size(), 0);
  for (auto [s, t] : m.pairs) proxy.server_of_sample[t] = s;
  proxy.matching = std::move(m);
  return proxy;
}

}  // namespace detail

template <typename Metric>
ProxyMap build_proxy(const Points& servers, Points samples, Metric&& metric) {
  if (servers.size() != samples.size()) {
    throw std::invalid_argument("build_proxy: " + std::to_string(servers.size()) + " servers vs " +
                                std::to_string(samples.size()) + " samples");
  }
  Matching m = min_cost_matching(std::span<const Point>(servers), std::span<const Point>(samples),
                                 std::forward<Metric>(metric));
  return detail::finish_proxy(std::move(samples), std::move(m));
}

/// Euclidean proxy. On the line the sorted pairing is used; otherwise the
/// assignment solver without the lexicographic tie-break pass.
inline ProxyMap build_proxy(const Points& servers, Points samples) {
  if (servers.size() != samples.size()) {
    throw std::invalid_argument("build_proxy: " + std::to_string(servers.size()) + " servers vs " +
                                std::to_string(samples.size()) + " samples");
  }
  if (!servers.empty() && servers.front().dim() == 1) {
    Matching m = sorted_matching_1d(servers, samples);
    return detail::finish_proxy(std::move(samples), std::move(m));
  }
  Matching m;
  const auto assign = detail::euclidean_assignment(servers, samples);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    m.pairs.emplace_back(i, assign[i]);
    m.total_cost += euclid_dist(servers[i], samples[assign[i]]);
  }
  return detail::finish_proxy(std::move(samples), std::move(m));
}

/// Wraps an online algorithm `Inner` that was built over the sample pool and
/// exposes `std::size_t serve(const Point&, Rng&)` returning a sample index.
template <typename Inner>
class ReducedAlgorithm {
 public:
  ReducedAlgorithm(ProxyMap proxy, Inner inner)
      : proxy_(std::move(proxy)), inner_(std::move(inner)), consumed_(proxy_.size(), 0) {}

  std::size_t serve(const Point& request, Rng& rng) {
    const std::size_t t = inner_.serve(request, rng);
    if (t >= proxy_.size() || consumed_[t]) {
      throw std::logic_error("reduced_serve: inner algorithm returned sample " + std::to_string(t) +
                             " which is not an available member of the pool");
    }
    consumed_[t] = 1;
    inner_cost_ += euclid_dist(request, proxy_.samples[t]);
    return proxy_.server_of_sample[t];
  }

  /// Cost the inner algorithm paid against the sample pool so far.
  double inner_cost() const noexcept { return inner_cost_; }
  double proxy_cost() const noexcept { return proxy_.cost(); }
  const ProxyMap& proxy() const noexcept { return proxy_; }
  Inner& inner() noexcept { return inner_; }

 private:
  ProxyMap proxy_;
  Inner inner_;
  std::vector<char> consumed_;
  double inner_cost_ = 0.0;
};

template <typename Inner>
std::size_t reduced_serve(ReducedAlgorithm<Inner>& alg, const Point& request, Rng& rng) {
  return alg.serve(request, rng);
}

}  // namespace smoothmatch
