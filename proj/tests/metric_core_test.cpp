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

#include "smoothmatch/metric_core.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gtest/gtest.h"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {
namespace {

// Brute-force oracle: enumerate all 2^n outcomes.
std::vector<double> enumerate_pb(const std::vector<double>& p) {
  const std::size_t n = p.size();
  std::vector<double> pmf(n + 1, 0.0);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double prob = 1.0;
    int ones = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        prob *= p[i];
        ++ones;
      } else {
        prob *= 1.0 - p[i];
      }
    }
    pmf[static_cast<std::size_t>(ones)] += prob;
  }
  return pmf;
}

TEST(PointTest, RejectsOutOfRangeAndEmpty) {
  EXPECT_THROW(Point({1.5}), std::out_of_range);
  EXPECT_THROW(Point({-0.1, 0.2}), std::out_of_range);
  EXPECT_THROW(Point(std::vector<double>{}), std::invalid_argument);
  EXPECT_NO_THROW(Point({0.0, 1.0}));
}

TEST(EuclidDistTest, Examples) {
  EXPECT_DOUBLE_EQ(euclid_dist(Point({0.0, 0.0}), Point({0.0, 0.0})), 0.0);
  EXPECT_NEAR(euclid_dist(Point({0.0, 0.0}), Point({1.0, 1.0})), 1.41421356, 1e-8);
  EXPECT_NEAR(euclid_dist(Point({0.1}), Point({0.9})), 0.8, 1e-15);
}

TEST(EuclidDistTest, DimensionMismatchThrows) {
  EXPECT_THROW(euclid_dist(Point({0.1}), Point({0.1, 0.2})), std::invalid_argument);
}

TEST(EuclidDistTest, SymmetricAndTriangle) {
  Rng rng(11, 0);
  for (int i = 0; i < 1000; ++i) {
    auto pt = [&] { return Point({rng.uniform(), rng.uniform(), rng.uniform()}); };
    const Point a = pt(), b = pt(), c = pt();
    EXPECT_DOUBLE_EQ(euclid_dist(a, b), euclid_dist(b, a));
    EXPECT_LE(euclid_dist(a, c), euclid_dist(a, b) + euclid_dist(b, c) + 1e-15);
  }
}

TEST(SmoothDistributionTest, UniformSamplesInCubeWithMeanHalf) {
  const auto u = SmoothDistribution::uniform(1);
  Rng rng(1, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Point p = sample(u, rng);
    ASSERT_GE(p[0], 0.0);
    ASSERT_LE(p[0], 1.0);
    sum += p[0];
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(SmoothDistributionTest, DegenerateSupportStaysInCell) {
  // All mass in the cell [0, 0.5)^2 of a 2x2 grid: density 4, so sigma = 1/4.
  const auto h = SmoothDistribution::histogram(2, 0.25, 2, {1.0, 0.0, 0.0, 0.0});
  Rng rng(2, 0);
  for (int i = 0; i < 1000; ++i) {
    const Point p = h.sample(rng);
    ASSERT_LT(p[0], 0.5);
    ASSERT_LT(p[1], 0.5);
  }
}

TEST(SmoothDistributionTest, CellFrequenciesMatchMasses) {
  const std::vector<double> masses{0.1, 0.2, 0.3, 0.4};
  const auto h = SmoothDistribution::histogram(1, 0.6, 4, masses);
  Rng rng(3, 0);
  const int n = 100000;
  std::vector<int> hits(4, 0);
  for (int i = 0; i < n; ++i) ++hits[std::min<std::size_t>(3, static_cast<std::size_t>(h.sample(rng)[0] * 4))];
  for (std::size_t c = 0; c < 4; ++c) {
    const double se = std::sqrt(masses[c] * (1 - masses[c]) / n);
    EXPECT_NEAR(static_cast<double>(hits[c]) / n, masses[c], 3 * se) << "cell " << c;
  }
}

TEST(SmoothDistributionTest, SamplingIsReproducible) {
  const auto h = SmoothDistribution::histogram(2, 0.5, 2, {0.5, 0.0, 0.0, 0.5});
  Rng a(9, 4), b(9, 4);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(h.sample(a), h.sample(b));
}

TEST(SmoothDistributionTest, DensityCapEnforced) {
  // Mass 0.5 in one of four cells is density 2, which needs sigma <= 0.5.
  EXPECT_THROW(SmoothDistribution::histogram(1, 0.6, 4, {0.5, 0.5, 0.0, 0.0}), std::invalid_argument);
  const auto ok = SmoothDistribution::histogram(1, 0.5, 4, {0.5, 0.5, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(ok.max_density(), 2.0);
  EXPECT_TRUE(ok.density_cap_holds());
}

TEST(SmoothDistributionTest, RejectsBadMassVectors) {
  EXPECT_THROW(SmoothDistribution::histogram(1, 1.0, 4, {0.25, 0.25, 0.25}), std::invalid_argument);
  EXPECT_THROW(SmoothDistribution::histogram(1, 1.0, 2, {0.6, 0.6}), std::invalid_argument);
  EXPECT_THROW(SmoothDistribution::histogram(1, 1.0, 2, {1.5, -0.5}), std::invalid_argument);
  EXPECT_THROW(SmoothDistribution::histogram(1, 0.0, 2, {0.5, 0.5}), std::invalid_argument);
}

TEST(SmoothDistributionTest, JsonRoundTrip) {
  const auto h = SmoothDistribution::histogram(2, 0.5, 2, {0.5, 0.0, 0.0, 0.5});
  const auto j = h.to_json();
  EXPECT_EQ(j.at("kind"), "histogram");
  EXPECT_EQ(j.at("resolution"), 2);
  const auto back = SmoothDistribution::from_json(j);
  EXPECT_EQ(back.dim(), 2u);
  EXPECT_EQ(back.sigma(), 0.5);
  EXPECT_EQ(std::vector<double>(back.masses().begin(), back.masses().end()),
            std::vector<double>(h.masses().begin(), h.masses().end()));
  const auto u = SmoothDistribution::from_json(nlohmann::json{{"kind", "uniform"}, {"sigma", 1.0}}, 3);
  EXPECT_EQ(u.kind(), DistributionKind::kUniform);
  EXPECT_EQ(u.dim(), 3u);
  EXPECT_THROW(SmoothDistribution::from_json(nlohmann::json{{"kind", "gaussian"}}), std::invalid_argument);
}

TEST(SmoothDistributionTest, BoxMassBothRefinementDirections) {
  const auto h = SmoothDistribution::histogram(1, 0.25, 4, {0.0, 0.0, 1.0, 0.0});
  const std::vector<long long> lo{1}, hi{2};
  // Coarser grid of 2: upper half holds all mass.
  EXPECT_DOUBLE_EQ(h.box_mass(lo, hi, 2), 1.0);
  // Finer grid of 8: cell [0.5, 0.625) holds half of the occupied cell.
  const std::vector<long long> flo{4}, fhi{5};
  EXPECT_DOUBLE_EQ(h.box_mass(flo, fhi, 8), 0.5);
  EXPECT_THROW(h.box_mass(lo, hi, 3), std::invalid_argument);
}

TEST(SmoothDistributionTest, Cdf1d) {
  const auto h = SmoothDistribution::histogram(1, 0.5, 2, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(h.cdf_1d(0.25), 0.0);
  EXPECT_DOUBLE_EQ(h.cdf_1d(0.75), 0.5);
  EXPECT_DOUBLE_EQ(h.cdf_1d(1.0), 1.0);
  EXPECT_DOUBLE_EQ(SmoothDistribution::uniform(1).cdf_1d(0.3), 0.3);
}

TEST(PoissonBinomialTest, Examples) {
  const auto a = poisson_binomial_pmf(ProbVector{0.5, 0.5});
  ASSERT_EQ(a.size(), 3u);
  EXPECT_NEAR(a[0], 0.25, 1e-15);
  EXPECT_NEAR(a[1], 0.5, 1e-15);
  EXPECT_NEAR(a[2], 0.25, 1e-15);
  const auto b = poisson_binomial_pmf(ProbVector{1.0});
  EXPECT_EQ(b, (std::vector<double>{0.0, 1.0}));
  const auto c = poisson_binomial_pmf(ProbVector{0.3, 0.6});
  EXPECT_NEAR(c[0], 0.28, 1e-15);
  EXPECT_NEAR(c[1], 0.54, 1e-15);
  EXPECT_NEAR(c[2], 0.18, 1e-15);
}

TEST(PoissonBinomialTest, TooLargeDirectsToMonteCarlo) {
  try {
    poisson_binomial_pmf(ProbVector(std::vector<double>(31, 0.5)));
    FAIL() << "expected length_error";
  } catch (const std::length_error& e) {
    EXPECT_NE(std::string(e.what()).find("Monte Carlo"), std::string::npos);
  }
  EXPECT_NO_THROW(poisson_binomial_pmf(ProbVector(std::vector<double>(30, 0.5))));
}

TEST(PoissonBinomialTest, MatchesEnumerationAndIsNormalized) {
  Rng rng(5, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + rng.below(12));
    for (auto& x : p) x = rng.uniform();
    const auto pmf = poisson_binomial_pmf(ProbVector(p));
    const auto oracle = enumerate_pb(p);
    double total = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      EXPECT_NEAR(pmf[k], oracle[k], 1e-12);
      EXPECT_GE(pmf[k], 0.0);
      total += pmf[k];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    // std <= sqrt(sum p).
    EXPECT_LE(pmf_stddev(pmf), std::sqrt(std::accumulate(p.begin(), p.end(), 0.0)) + 1e-12);
  }
}

TEST(MeanAbsDevTest, Examples) {
  EXPECT_DOUBLE_EQ(mean_abs_dev(poisson_binomial_pmf(ProbVector{1.0}), 1.0), 0.0);
  EXPECT_NEAR(mean_abs_dev(binomial_pmf(4, 0.5), 2.0), 0.75, 1e-15);
  EXPECT_NEAR(mean_abs_dev(poisson_binomial_pmf(ProbVector{0.5, 0.5}), 1.0), 0.5, 1e-15);
}

TEST(MajorizesTest, Examples) {
  EXPECT_TRUE(majorizes(ProbVector{0.5, 0.5, 0.0}, ProbVector{0.4, 0.3, 0.3}));
  EXPECT_TRUE(majorizes(ProbVector{0.4, 0.3, 0.3}, ProbVector{0.4, 0.3, 0.3}));
  EXPECT_FALSE(majorizes(ProbVector{0.4, 0.3, 0.3}, ProbVector{0.5, 0.5, 0.0}));
}

TEST(MajorizesTest, UnequalTotalsAndLengths) {
  EXPECT_FALSE(majorizes(ProbVector{0.5, 0.5}, ProbVector{0.5, 0.4}));
  EXPECT_THROW(majorizes(ProbVector{0.5}, ProbVector{0.5, 0.0}), std::invalid_argument);
}

TEST(MajorizesTest, OrderIndependent) {
  EXPECT_TRUE(majorizes(ProbVector{0.0, 0.5, 0.5}, ProbVector{0.3, 0.3, 0.4}));
}

TEST(BinomialMadTest, Examples) {
  EXPECT_TRUE(binomial_mad_bound_check(4, 0.5));
  EXPECT_NEAR(binomial_mad_gap(4, 0.5), 0.75 - 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_TRUE(binomial_mad_bound_check(2, 0.5));
  EXPECT_NEAR(binomial_mad_gap(2, 0.5), 0.0, 1e-15);
  EXPECT_TRUE(binomial_mad_bound_check(20, 0.1));
}

TEST(BinomialMadTest, PreconditionErrors) {
  EXPECT_THROW(binomial_mad_bound_check(1, 0.5), std::invalid_argument);
  EXPECT_THROW(binomial_mad_bound_check(10, 0.05), std::invalid_argument);
  EXPECT_THROW(binomial_mad_bound_check(10, 0.95), std::invalid_argument);
}

// Convex order under majorization on random pairs built by Robin Hood
// transfers (moving mass from a larger to a smaller entry yields a vector
// majorized by the original).
TEST(ConvexOrderProperty, RandomTransfers) {
  Rng rng(6, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    std::vector<double> p(n);
    for (auto& x : p) x = rng.uniform();
    std::vector<double> q = p;
    const std::size_t i = rng.below(n), j = rng.below(n);
    if (q[i] < q[j]) continue;
    const double t = rng.uniform() * (q[i] - q[j]) / 2.0;
    q[i] -= t;
    q[j] += t;
    ASSERT_TRUE(majorizes(ProbVector(p), ProbVector(q)));
    const auto pp = poisson_binomial_pmf(ProbVector(p));
    const auto pq = poisson_binomial_pmf(ProbVector(q));
    const double mean = std::accumulate(p.begin(), p.end(), 0.0);
    EXPECT_LE(mean_abs_dev(pp, mean), mean_abs_dev(pq, mean) + 1e-12);
    for (double c = 0.0; c <= static_cast<double>(n); c += 0.5) {
      EXPECT_LE(pmf_expectation(pp, [c](double k) { return (k - c) * (k - c); }),
                pmf_expectation(pq, [c](double k) { return (k - c) * (k - c); }) + 1e-12);
    }
  }
}

}  // namespace
}  // namespace smoothmatch
