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

// Delta-ary alpha-HST topology with uniform-depth leaves and unit root edges.
//
// Nodes are addressed by (height, index). Height 0 holds the Delta^h leaves,
// height h the root. The index of a node at height j is the base-Delta number
// formed by the child indices on the path from the root, most significant
// digit first, so parent(index) = index / Delta and child c = index*Delta + c.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace smoothmatch {

struct NodeId {
  int height = 0;
  std::uint64_t index = 0;

  static NodeId leaf(std::uint64_t index) { return {0, index}; }
  bool is_leaf() const noexcept { return height == 0; }
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

class HstTopology {
 public:
  /// Hard cap on the number of leaves so counts stay addressable in memory.
  static constexpr std::uint64_t kMaxLeaves = std::uint64_t{1} << 26;

  HstTopology(int delta, double alpha, int height) : delta_(delta), alpha_(alpha), height_(height) {
    if (delta < 2) throw std::invalid_argument("HstTopology: arity must be at least 2");
    if (!(alpha >= 2.0)) throw std::invalid_argument("HstTopology: alpha must be at least 2");
    if (height < 1) throw std::invalid_argument("HstTopology: height must be at least 1");
    level_sizes_.resize(static_cast<std::size_t>(height) + 1);
    std::uint64_t size = 1;
    for (int j = height; j >= 0; --j) {
      level_sizes_[static_cast<std::size_t>(j)] = size;
      if (j > 0) {
        if (size > kMaxLeaves / static_cast<std::uint64_t>(delta)) {
          throw std::invalid_argument("HstTopology: too many leaves");
        }
        size *= static_cast<std::uint64_t>(delta);
      }
    }
    // lca_distance_[k] = 2 * sum_{j<k} edge_above(j).
    lca_distance_.assign(static_cast<std::size_t>(height) + 1, 0.0);
    for (int k = 1; k <= height; ++k) {
      lca_distance_[static_cast<std::size_t>(k)] =
          lca_distance_[static_cast<std::size_t>(k - 1)] + 2.0 * edge_above(k - 1);
    }
  }

  int delta() const noexcept { return delta_; }
  double alpha() const noexcept { return alpha_; }
  int height() const noexcept { return height_; }
  std::uint64_t num_leaves() const noexcept { return level_sizes_[0]; }
  std::uint64_t level_size(int height) const { return level_sizes_.at(static_cast<std::size_t>(height)); }
  NodeId root() const noexcept { return {height_, 0}; }

  bool contains(const NodeId& v) const noexcept {
    return v.height >= 0 && v.height <= height_ &&
           v.index < level_sizes_[static_cast<std::size_t>(v.height)];
  }

  NodeId parent(const NodeId& v) const {
    check(v);
    if (v.height == height_) throw std::invalid_argument("HstTopology::parent: root has no parent");
    return {v.height + 1, v.index / static_cast<std::uint64_t>(delta_)};
  }

  NodeId child(const NodeId& v, int c) const {
    check(v);
    if (v.height == 0) throw std::invalid_argument("HstTopology::child: leaves have no children");
    if (c < 0 || c >= delta_) throw std::out_of_range("HstTopology::child: child index out of range");
    return {v.height - 1, v.index * static_cast<std::uint64_t>(delta_) + static_cast<std::uint64_t>(c)};
  }

  NodeId ancestor(const NodeId& v, int height) const {
    check(v);
    if (height < v.height || height > height_) {
      throw std::out_of_range("HstTopology::ancestor: height out of range");
    }
    std::uint64_t idx = v.index;
    for (int j = v.height; j < height; ++j) idx /= static_cast<std::uint64_t>(delta_);
    return {height, idx};
  }

  /// Length of the edge joining a node at `height` to its parent: alpha^(height+1-h).
  double edge_above(int height) const { return std::pow(alpha_, height + 1 - height_); }

  /// Leaf-to-leaf distance when the least common ancestor sits at height k.
  double lca_distance(int k) const { return lca_distance_.at(static_cast<std::size_t>(k)); }

  void check(const NodeId& v) const {
    if (!contains(v)) {
      throw std::out_of_range("HstTopology: node (height " + std::to_string(v.height) + ", index " +
                              std::to_string(v.index) + ") does not belong to this tree");
    }
  }

  friend bool operator==(const HstTopology& a, const HstTopology& b) {
    return a.delta_ == b.delta_ && a.alpha_ == b.alpha_ && a.height_ == b.height_;
  }

 private:
  int delta_;
  double alpha_;
  int height_;
  std::vector<std::uint64_t> level_sizes_;
  std::vector<double> lca_distance_;
};

inline int lca_height(const HstTopology& t, NodeId u, NodeId v) {
  t.check(u);
  t.check(v);
  if (!u.is_leaf() || !v.is_leaf()) throw std::invalid_argument("lca_height: arguments must be leaves");
  int k = 0;
  const auto delta = static_cast<std::uint64_t>(t.delta());
  while (u.index != v.index) {
    u.index /= delta;
    v.index /= delta;
    ++k;
  }
  return k;
}

/// Tree-path length between two nodes (leaves or internal).
inline double node_distance(const HstTopology& t, NodeId u, NodeId v) {
  t.check(u);
  t.check(v);
  if (u.is_leaf() && v.is_leaf()) return t.lca_distance(lca_height(t, u, v));
  double total = 0.0;
  const auto delta = static_cast<std::uint64_t>(t.delta());
  while (u.height < v.height) {
    total += t.edge_above(u.height);
    u = {u.height + 1, u.index / delta};
  }
  while (v.height < u.height) {
    total += t.edge_above(v.height);
    v = {v.height + 1, v.index / delta};
  }
  while (u.index != v.index) {
    total += 2.0 * t.edge_above(u.height);
    u = {u.height + 1, u.index / delta};
    v = {v.height + 1, v.index / delta};
  }
  return total;
}

/// Per-node server/request counts; levels are indexed by height.
struct NodeCounts {
  std::vector<std::vector<long long>> s_hat;
  std::vector<std::vector<long long>> r_hat;
  std::optional<std::vector<std::vector<double>>> mu;

  long long servers(const NodeId& v) const { return s_hat.at(static_cast<std::size_t>(v.height)).at(v.index); }
  long long requests(const NodeId& v) const { return r_hat.at(static_cast<std::size_t>(v.height)).at(v.index); }
  long long excess(const NodeId& v) const {
    const long long diff = requests(v) - servers(v);
    return diff > 0 ? diff : 0;
  }
  double expected(const NodeId& v) const {
    if (!mu) throw std::logic_error("NodeCounts: expected counts were not computed");
    return mu->at(static_cast<std::size_t>(v.height)).at(v.index);
  }

  /// Nodes at `height` whose subtree holds at least two servers.
  std::vector<NodeId> nodes_with_two_servers(int height) const {
    std::vector<NodeId> out;
    const auto& level = s_hat.at(static_cast<std::size_t>(height));
    for (std::uint64_t i = 0; i < level.size(); ++i) {
      if (level[i] >= 2) out.push_back({height, i});
    }
    return out;
  }
};

namespace detail {

template <typename T>
std::vector<std::vector<T>> aggregate_up(const HstTopology& t, std::vector<T> leaves) {
  std::vector<std::vector<T>> levels(static_cast<std::size_t>(t.height()) + 1);
  levels[0] = std::move(leaves);
  const auto delta = static_cast<std::uint64_t>(t.delta());
  for (int j = 1; j <= t.height(); ++j) {
    auto& cur = levels[static_cast<std::size_t>(j)];
    const auto& below = levels[static_cast<std::size_t>(j - 1)];
    cur.assign(t.level_size(j), T{});
    for (std::uint64_t i = 0; i < below.size(); ++i) cur[i / delta] += below[i];
  }
  return levels;
}

inline std::vector<long long> leaf_histogram(const HstTopology& t, std::span<const std::uint64_t> leaves) {
  std::vector<long long> hist(t.num_leaves(), 0);
  for (auto leaf : leaves) {
    if (leaf >= t.num_leaves()) {
      throw std::out_of_range("subtree_counts: leaf " + std::to_string(leaf) + " out of range");
    }
    ++hist[leaf];
  }
  return hist;
}

}  // namespace detail

inline NodeCounts subtree_counts(const HstTopology& t, std::span<const std::uint64_t> server_leaves,
                                 std::span<const std::uint64_t> request_leaves) {
  NodeCounts counts;
  counts.s_hat = detail::aggregate_up(t, detail::leaf_histogram(t, server_leaves));
  counts.r_hat = detail::aggregate_up(t, detail::leaf_histogram(t, request_leaves));
  return counts;
}

/// mu(v) = sum_i Pr[r_i in subtree(v)]. `Embedding` supplies
/// `leaf_masses(dist)`: the probability of each leaf cell under `dist`.
template <typename Embedding, typename Distribution>
std::vector<std::vector<double>> expected_counts(const HstTopology& t,
                                                 std::span<const Distribution> dists,
                                                 const Embedding& emb) {
  if (!(emb.topology() == t)) {
    throw std::invalid_argument("expected_counts: embedding uses a different topology");
  }
  std::vector<double> leaves(t.num_leaves(), 0.0);
  for (const auto& dist : dists) {
    const auto masses = emb.leaf_masses(dist);
    for (std::size_t i = 0; i < leaves.size(); ++i) leaves[i] += masses[i];
  }
  return detail::aggregate_up(t, std::move(leaves));
}

/// Server ids grouped by leaf; a leaf hands out its lowest unused id first.
class LeafServerPool {
 public:
  explicit LeafServerPool(std::span<const std::uint64_t> server_leaves) {
    for (std::size_t id = server_leaves.size(); id-- > 0;) by_leaf_[server_leaves[id]].push_back(id);
  }

  bool has(std::uint64_t leaf) const {
    auto it = by_leaf_.find(leaf);
    return it != by_leaf_.end() && !it->second.empty();
  }

  std::size_t take(std::uint64_t leaf) {
    auto it = by_leaf_.find(leaf);
    if (it == by_leaf_.end() || it->second.empty()) {
      throw std::logic_error("LeafServerPool: no available server at leaf " + std::to_string(leaf));
    }
    const std::size_t id = it->second.back();
    it->second.pop_back();
    return id;
  }

 private:
  // Ids stored in descending order so the lowest sits at the back.
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_leaf_;
};

}  // namespace smoothmatch
