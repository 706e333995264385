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

#include "smoothmatch/hst.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include "gtest/gtest.h"
#include "smoothmatch/embedding.hpp"
#include "smoothmatch/metric_core.hpp"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {
namespace {

// Oracle: walk both leaves up to their common ancestor summing edge lengths
// alpha^(1-k) for an edge into depth k (depth = h - height).
double path_oracle(double alpha, int delta, int height, std::uint64_t a, std::uint64_t b) {
  double total = 0.0;
  int depth = height;
  while (a != b) {
    total += 2.0 * std::pow(alpha, 1 - depth);
    a /= static_cast<std::uint64_t>(delta);
    b /= static_cast<std::uint64_t>(delta);
    --depth;
  }
  return total;
}

TEST(HstTopologyTest, ShapeAndValidation) {
  const HstTopology t(3, 2.5, 4);
  EXPECT_EQ(t.num_leaves(), 81u);
  EXPECT_EQ(t.level_size(4), 1u);
  EXPECT_EQ(t.level_size(1), 27u);
  EXPECT_EQ(t.root(), (NodeId{4, 0}));
  EXPECT_THROW(HstTopology(1, 2.0, 2), std::invalid_argument);
  EXPECT_THROW(HstTopology(2, 1.5, 2), std::invalid_argument);
  EXPECT_THROW(HstTopology(2, 2.0, 0), std::invalid_argument);
  EXPECT_THROW(HstTopology(2, 2.0, 40), std::invalid_argument);
}

TEST(HstTopologyTest, RootEdgesHaveUnitLengthAndShrinkByAlpha) {
  const HstTopology t(2, 3.0, 4);
  EXPECT_DOUBLE_EQ(t.edge_above(3), 1.0);
  for (int j = 0; j + 1 < 4; ++j) EXPECT_DOUBLE_EQ(t.edge_above(j + 1), 3.0 * t.edge_above(j));
}

TEST(HstTopologyTest, ParentChildAncestor) {
  const HstTopology t(4, 2.0, 3);
  const NodeId leaf{0, 27};
  EXPECT_EQ(t.parent(leaf), (NodeId{1, 6}));
  EXPECT_EQ(t.ancestor(leaf, 2), (NodeId{2, 1}));
  EXPECT_EQ(t.ancestor(leaf, 3), t.root());
  EXPECT_EQ(t.child(NodeId{1, 6}, 3), leaf);
  EXPECT_THROW(t.parent(t.root()), std::invalid_argument);
  EXPECT_THROW(t.child(leaf, 0), std::invalid_argument);
  EXPECT_THROW(t.child(NodeId{1, 6}, 4), std::out_of_range);
  EXPECT_THROW(t.check(NodeId{0, 64}), std::out_of_range);
}

TEST(LcaHeightTest, Examples) {
  const HstTopology t2(2, 2.0, 2), t3(2, 2.0, 3);
  EXPECT_EQ(lca_height(t2, NodeId::leaf(3), NodeId::leaf(3)), 0);
  EXPECT_EQ(lca_height(t2, NodeId::leaf(0), NodeId::leaf(1)), 1);
  EXPECT_EQ(lca_height(t3, NodeId::leaf(0), NodeId::leaf(7)), 3);
  EXPECT_THROW(lca_height(t3, NodeId{1, 0}, NodeId::leaf(0)), std::invalid_argument);
}

TEST(NodeDistanceTest, Examples) {
  const HstTopology t(2, 2.0, 3);
  EXPECT_DOUBLE_EQ(node_distance(t, NodeId::leaf(5), NodeId::leaf(5)), 0.0);
  EXPECT_DOUBLE_EQ(node_distance(t, NodeId::leaf(0), NodeId::leaf(7)), 3.5);  // k = 3
  EXPECT_DOUBLE_EQ(node_distance(t, NodeId::leaf(0), NodeId::leaf(1)), 0.5);  // k = 1
}

TEST(NodeDistanceTest, InternalNodes) {
  const HstTopology t(2, 2.0, 3);
  EXPECT_DOUBLE_EQ(node_distance(t, NodeId::leaf(0), t.root()), 1.75);
  EXPECT_DOUBLE_EQ(node_distance(t, NodeId{1, 0}, NodeId{1, 3}), 3.0);
  EXPECT_DOUBLE_EQ(node_distance(t, NodeId{2, 1}, NodeId::leaf(0)), 2.75);
  EXPECT_THROW(node_distance(t, NodeId{4, 0}, t.root()), std::out_of_range);
}

TEST(NodeDistanceTest, MatchesPathOracle) {
  for (int delta : {2, 3}) {
    for (double alpha : {2.0, 3.5}) {
      const HstTopology t(delta, alpha, 3);
      for (std::uint64_t a = 0; a < t.num_leaves(); ++a) {
        for (std::uint64_t b = 0; b < t.num_leaves(); ++b) {
          EXPECT_NEAR(node_distance(t, NodeId::leaf(a), NodeId::leaf(b)),
                      path_oracle(alpha, delta, 3, a, b), 1e-12);
        }
      }
    }
  }
}

TEST(NodeDistanceTest, MetricOnAllLeafTriples) {
  for (int h = 1; h <= 3; ++h) {
    const HstTopology t(2, 2.0, h);
    const auto n = t.num_leaves();
    for (std::uint64_t a = 0; a < n; ++a) {
      for (std::uint64_t b = 0; b < n; ++b) {
        const double ab = node_distance(t, NodeId::leaf(a), NodeId::leaf(b));
        EXPECT_GE(ab, 0.0);
        EXPECT_EQ(ab == 0.0, a == b);
        EXPECT_DOUBLE_EQ(ab, node_distance(t, NodeId::leaf(b), NodeId::leaf(a)));
        for (std::uint64_t c = 0; c < n; ++c) {
          EXPECT_LE(ab, node_distance(t, NodeId::leaf(a), NodeId::leaf(c)) +
                            node_distance(t, NodeId::leaf(c), NodeId::leaf(b)) + 1e-12);
        }
      }
    }
  }
}

TEST(NodeDistanceTest, DependsOnlyOnLcaHeightAndIncreases) {
  const HstTopology t(3, 2.0, 3);
  for (std::uint64_t a = 0; a < t.num_leaves(); ++a) {
    for (std::uint64_t b = 0; b < t.num_leaves(); ++b) {
      const int k = lca_height(t, NodeId::leaf(a), NodeId::leaf(b));
      EXPECT_DOUBLE_EQ(node_distance(t, NodeId::leaf(a), NodeId::leaf(b)), t.lca_distance(k));
    }
  }
  for (int k = 1; k <= 3; ++k) EXPECT_GT(t.lca_distance(k), t.lca_distance(k - 1));
}

TEST(SubtreeCountsTest, Examples) {
  const HstTopology t(2, 2.0, 1);
  const auto empty = subtree_counts(t, {}, {});
  EXPECT_EQ(empty.servers(t.root()), 0);
  EXPECT_EQ(empty.requests(NodeId::leaf(1)), 0);

  const std::vector<std::uint64_t> s{0, 0}, r{0, 1};
  const auto c = subtree_counts(t, s, r);
  EXPECT_EQ(c.servers(t.root()), 2);
  EXPECT_EQ(c.requests(t.root()), 2);
  EXPECT_EQ(c.servers(NodeId::leaf(0)), 2);
  EXPECT_EQ(c.requests(NodeId::leaf(0)), 1);
  EXPECT_EQ(c.servers(NodeId::leaf(1)), 0);
  EXPECT_EQ(c.requests(NodeId::leaf(1)), 1);
  EXPECT_EQ(c.excess(NodeId::leaf(1)), 1);
  EXPECT_EQ(c.excess(NodeId::leaf(0)), 0);
}

TEST(SubtreeCountsTest, SingleServerPath) {
  const HstTopology t(3, 2.0, 3);
  const std::vector<std::uint64_t> s{14};
  const auto c = subtree_counts(t, s, {});
  for (int j = 0; j <= 3; ++j) {
    for (std::uint64_t v = 0; v < t.level_size(j); ++v) {
      const bool on_path = t.ancestor(NodeId::leaf(14), j).index == v;
      EXPECT_EQ(c.servers(NodeId{j, v}), on_path ? 1 : 0);
    }
  }
  EXPECT_THROW(subtree_counts(t, std::vector<std::uint64_t>{27}, {}), std::out_of_range);
}

TEST(SubtreeCountsTest, ConservationAndParentSums) {
  Rng rng(21, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const HstTopology t(2 + static_cast<int>(rng.below(3)), 2.0, 1 + static_cast<int>(rng.below(4)));
    const std::size_t n = rng.below(40);
    std::vector<std::uint64_t> s(n), r(n);
    for (auto& x : s) x = rng.below(t.num_leaves());
    for (auto& x : r) x = rng.below(t.num_leaves());
    const auto c = subtree_counts(t, s, r);
    for (int j = 0; j <= t.height(); ++j) {
      long long ss = 0, rr = 0;
      for (std::uint64_t v = 0; v < t.level_size(j); ++v) {
        ss += c.servers(NodeId{j, v});
        rr += c.requests(NodeId{j, v});
        if (j > 0) {
          long long cs = 0;
          for (int ch = 0; ch < t.delta(); ++ch) cs += c.servers(t.child(NodeId{j, v}, ch));
          EXPECT_EQ(cs, c.servers(NodeId{j, v}));
        }
      }
      EXPECT_EQ(ss, static_cast<long long>(n));
      EXPECT_EQ(rr, static_cast<long long>(n));
    }
  }
}

TEST(SubtreeCountsTest, NodesWithTwoServers) {
  const HstTopology t(2, 2.0, 2);
  const std::vector<std::uint64_t> s{0, 1, 3};
  const auto c = subtree_counts(t, s, s);
  const auto v1 = c.nodes_with_two_servers(1);
  ASSERT_EQ(v1.size(), 1u);
  EXPECT_EQ(v1[0], (NodeId{1, 0}));
  EXPECT_EQ(c.nodes_with_two_servers(2).size(), 1u);
  EXPECT_TRUE(c.nodes_with_two_servers(0).empty());
}

TEST(ExpectedCountsTest, UniformIsSymmetric) {
  const DyadicEmbedding e(2, 2);
  const std::vector<SmoothDistribution> dists(32, SmoothDistribution::uniform(2));
  const auto mu = expected_counts(e.topology(), std::span<const SmoothDistribution>(dists), e);
  for (double m : mu[0]) EXPECT_NEAR(m, 32.0 / 16.0, 1e-12);
  EXPECT_NEAR(mu[2][0], 32.0, 1e-12);
}

TEST(ExpectedCountsTest, HalfIntervalHoldsHalf) {
  const DyadicEmbedding e(1, 2);
  const std::vector<SmoothDistribution> dists(8, SmoothDistribution::uniform(1));
  const auto mu = expected_counts(e.topology(), std::span<const SmoothDistribution>(dists), e);
  EXPECT_NEAR(mu[1][0], 4.0, 1e-12);
}

TEST(ExpectedCountsTest, DegenerateHistogram) {
  const DyadicEmbedding e(1, 2);
  // Resolution 8; all mass in [0.5, 0.75), which is leaf 2.
  std::vector<double> masses(8, 0.0);
  masses[4] = 0.5;
  masses[5] = 0.5;
  const std::vector<SmoothDistribution> dists(5, SmoothDistribution::histogram(1, 0.25, 8, masses));
  const auto mu = expected_counts(e.topology(), std::span<const SmoothDistribution>(dists), e);
  EXPECT_NEAR(mu[0][2], 5.0, 1e-12);
  EXPECT_NEAR(mu[0][0] + mu[0][1] + mu[0][3], 0.0, 1e-12);
}

TEST(ExpectedCountsTest, IncompatibleResolutionErrors) {
  const DyadicEmbedding e(1, 3);
  const std::vector<SmoothDistribution> dists(1, SmoothDistribution::histogram(1, 1.0, 6, std::vector<double>(6, 1.0 / 6)));
  EXPECT_THROW(expected_counts(e.topology(), std::span<const SmoothDistribution>(dists), e), std::invalid_argument);
  const HstTopology other(2, 2.0, 2);
  EXPECT_THROW(expected_counts(other, std::span<const SmoothDistribution>(dists), e), std::invalid_argument);
}

TEST(ExpectedCountsTest, ConservationOnRandomHistograms) {
  Rng rng(22, 0);
  const DyadicEmbedding e(2, 3);
  std::vector<SmoothDistribution> dists;
  for (int i = 0; i < 7; ++i) {
    std::vector<double> m(16 * 16);
    double total = 0.0;
    for (auto& x : m) total += (x = 1.0 + rng.uniform());
    for (auto& x : m) x /= total;
    dists.push_back(SmoothDistribution::histogram(2, 0.5, 16, m));
  }
  const auto mu = expected_counts(e.topology(), std::span<const SmoothDistribution>(dists), e);
  for (const auto& level : mu) {
    double sum = 0.0;
    for (double x : level) sum += x;
    EXPECT_NEAR(sum, 7.0, 1e-12);
  }
}

TEST(LeafServerPoolTest, LowestIdFirst) {
  const std::vector<std::uint64_t> leaves{3, 1, 3, 3};
  LeafServerPool pool(leaves);
  EXPECT_TRUE(pool.has(3));
  EXPECT_FALSE(pool.has(0));
  EXPECT_EQ(pool.take(3), 0u);
  EXPECT_EQ(pool.take(3), 2u);
  EXPECT_EQ(pool.take(3), 3u);
  EXPECT_FALSE(pool.has(3));
  EXPECT_THROW(pool.take(3), std::logic_error);
  EXPECT_EQ(pool.take(1), 1u);
}

}  // namespace
}  // namespace smoothmatch
