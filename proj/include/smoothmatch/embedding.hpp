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

// Dyadic decomposition of [0,1]^d as a 2^d-ary 2-HST.
//
// Level-i cubes have side 2^(i-h); along each axis the cells are half-open
// except the last, which is closed, so every point of the closed cube has a
// unique leaf. Child digits are Z-order: bit a of a digit is the next bit of
// the cell coordinate on axis a. A leaf index is therefore the bit
// interleaving of the d cell coordinates, most significant level first.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smoothmatch/hst.hpp"
#include "smoothmatch/metric_core.hpp"

namespace smoothmatch {

class DyadicEmbedding {
 public:
  DyadicEmbedding(int dim, int height)
      : dim_(dim), height_(height), topology_(checked_arity(dim, height), 2.0, height) {}

  int dim() const noexcept { return dim_; }
  int height() const noexcept { return height_; }
  const HstTopology& topology() const noexcept { return topology_; }
  long long cells_per_axis() const noexcept { return 1LL << height_; }

  /// Per-axis cell coordinates of the leaf cube containing x.
  std::vector<long long> cell_of(const Point& x) const {
    if (x.dim() != static_cast<std::size_t>(dim_)) {
      throw std::invalid_argument("dyadic_leaf: point dimension " + std::to_string(x.dim()) +
                                  " differs from embedding dimension " + std::to_string(dim_));
    }
    const long long side = cells_per_axis();
    std::vector<long long> cell(static_cast<std::size_t>(dim_));
    for (int a = 0; a < dim_; ++a) {
      const double c = x[static_cast<std::size_t>(a)];
      if (!(c >= 0.0 && c <= 1.0)) throw std::out_of_range("dyadic_leaf: coordinate outside [0,1]");
      const auto idx = static_cast<long long>(std::floor(c * static_cast<double>(side)));
      cell[static_cast<std::size_t>(a)] = std::min(idx, side - 1);
    }
    return cell;
  }

  std::uint64_t leaf_of_cell(std::span<const long long> cell) const {
    std::uint64_t leaf = 0;
    for (int level = height_ - 1; level >= 0; --level) {
      std::uint64_t digit = 0;
      for (int a = 0; a < dim_; ++a) {
        digit |= static_cast<std::uint64_t>((cell[static_cast<std::size_t>(a)] >> level) & 1) << a;
      }
      leaf = (leaf << dim_) | digit;
    }
    return leaf;
  }

  std::vector<long long> cell_of_leaf(std::uint64_t leaf) const {
    std::vector<long long> cell(static_cast<std::size_t>(dim_), 0);
    for (int level = 0; level < height_; ++level) {
      const std::uint64_t digit = leaf & ((std::uint64_t{1} << dim_) - 1);
      leaf >>= dim_;
      for (int a = 0; a < dim_; ++a) {
        cell[static_cast<std::size_t>(a)] |= static_cast<long long>((digit >> a) & 1) << level;
      }
    }
    return cell;
  }

  NodeId leaf(const Point& x) const { return NodeId::leaf(leaf_of_cell(cell_of(x))); }

  std::vector<std::uint64_t> leaves(std::span<const Point> points) const {
    std::vector<std::uint64_t> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(leaf(p).index);
    return out;
  }

  /// Probability of each leaf cube under `dist`, indexed by leaf id.
  std::vector<double> leaf_masses(const SmoothDistribution& dist) const {
    if (dist.dim() != static_cast<std::size_t>(dim_)) {
      throw std::invalid_argument("leaf_masses: distribution dimension mismatch");
    }
    const std::uint64_t count = topology_.num_leaves();
    std::vector<double> out(count, 0.0);
    if (dist.kind() == DistributionKind::kUniform) {
      std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(count));
      return out;
    }
    if (dist.resolution() % cells_per_axis() != 0) {
      throw std::invalid_argument("leaf_masses: histogram resolution " +
                                  std::to_string(dist.resolution()) + " is not a multiple of 2^" +
                                  std::to_string(height_));
    }
    std::vector<long long> hi(static_cast<std::size_t>(dim_));
    for (std::uint64_t leaf = 0; leaf < count; ++leaf) {
      const auto lo = cell_of_leaf(leaf);
      for (std::size_t a = 0; a < lo.size(); ++a) hi[a] = lo[a] + 1;
      out[leaf] = dist.box_mass(lo, hi, cells_per_axis());
    }
    return out;
  }

 private:
  static int checked_arity(int dim, int height) {
    if (dim < 1) throw std::invalid_argument("DyadicEmbedding: dimension must be at least 1");
    if (height < 1) throw std::invalid_argument("DyadicEmbedding: height must be at least 1");
    if (dim * height > 26) throw std::invalid_argument("DyadicEmbedding: 2^(d*h) leaves is too many");
    return 1 << dim;
  }

  int dim_;
  int height_;
  HstTopology topology_;
};

inline NodeId dyadic_leaf(const DyadicEmbedding& e, const Point& x) { return e.leaf(x); }

enum class HeightVariant { kRs, kBbgn };

/// Tree height balancing tree cost against the per-pair cell slack. Base-2
/// logarithms throughout; clamped below at 1.
inline int choose_height(long long n, int dim, HeightVariant variant) {
  if (n < 2) throw std::invalid_argument("choose_height: n must be at least 2");
  if (dim < 1) throw std::invalid_argument("choose_height: dimension must be at least 1");
  int h = 0;
  if (variant == HeightVariant::kRs && dim == 2) {
    const double ratio = std::log2(static_cast<double>(n)) / (2.0 * std::log2(25.0 / 12.0));
    h = static_cast<int>(std::floor(ratio + 1e-12));
  } else {
    // floor(log2(n) / d) == floor(floor(log2 n) / d) for integer d.
    const int log2n = std::bit_width(static_cast<unsigned long long>(n)) - 1;
    h = log2n / dim;
  }
  return std::max(h, 1);
}

/// Upper bound on the Euclidean cost of the lifted algorithm given its tree
/// cost: sqrt(d) * (hst_cost / 4 + n * 2^-h).
inline double translate_cost(int dim, int height, long long n, double hst_cost) {
  if (dim < 0 || height < 0 || n < 0 || hst_cost < 0.0) {
    throw std::invalid_argument("translate_cost: inputs must be nonnegative");
  }
  return std::sqrt(static_cast<double>(dim)) *
         (hst_cost / 4.0 + static_cast<double>(n) * std::ldexp(1.0, -height));
}

/// Pointwise slack: ||s - r|| <= sqrt(d) * (tree_dist / 4 + 2^-h).
inline double pair_cost_bound(const DyadicEmbedding& e, const Point& s, const Point& r) {
  const double tree = node_distance(e.topology(), e.leaf(s), e.leaf(r));
  return std::sqrt(static_cast<double>(e.dim())) * (tree / 4.0 + std::ldexp(1.0, -e.height()));
}

/// Runs an HST online algorithm on the leaves of the dyadic tree and maps its
/// decisions back to the original servers. `Inner` is constructible from
/// (const HstTopology&, span of server leaves) and exposes
/// `NodeId serve(NodeId request_leaf, Rng&)`.
template <typename Inner>
class LiftedAlgorithm {
 public:
  LiftedAlgorithm(DyadicEmbedding embedding, const Points& servers)
      : embedding_(std::move(embedding)),
        server_leaves_(embedding_.leaves(servers)),
        pool_(server_leaves_),
        inner_(embedding_.topology(), std::span<const std::uint64_t>(server_leaves_)) {}

  std::size_t serve(const Point& request, Rng& rng) {
    const NodeId request_leaf = embedding_.leaf(request);
    const NodeId matched = inner_.serve(request_leaf, rng);
    if (!pool_.has(matched.index)) {
      throw std::logic_error("lift_algorithm: inner algorithm chose leaf " +
                             std::to_string(matched.index) + " with no available server");
    }
    tree_cost_ += node_distance(embedding_.topology(), request_leaf, matched);
    return pool_.take(matched.index);
  }

  /// Total tree-metric cost incurred by the inner algorithm so far.
  double tree_cost() const noexcept { return tree_cost_; }
  const DyadicEmbedding& embedding() const noexcept { return embedding_; }

 private:
  DyadicEmbedding embedding_;
  std::vector<std::uint64_t> server_leaves_;
  LeafServerPool pool_;
  Inner inner_;
  double tree_cost_ = 0.0;
};

template <typename Inner>
LiftedAlgorithm<Inner> lift_algorithm(const DyadicEmbedding& e, const Points& servers) {
  return LiftedAlgorithm<Inner>(e, servers);
}

}  // namespace smoothmatch
