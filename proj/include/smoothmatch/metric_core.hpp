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

// Ground-metric primitives: points of [0,1]^d, Euclidean distance, sigma-smooth
// request distributions, and Poisson-binomial / majorization utilities.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "smoothmatch/rng.hpp"

namespace smoothmatch {

/// Tolerance used for identities that hold exactly in real arithmetic.
inline constexpr double kExactTol = 1e-12;

class Point {
 public:
  Point() = default;
  explicit Point(std::vector<double> coords) : coords_(std::move(coords)) { validate(); }
  Point(std::initializer_list<double> coords) : coords_(coords) { validate(); }

  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t axis) const { return coords_[axis]; }
  std::span<const double> coords() const noexcept { return coords_; }

  friend bool operator==(const Point&, const Point&) = default;

 private:
  void validate() const {
    if (coords_.empty()) throw std::invalid_argument("Point: dimension must be at least 1");
    for (double c : coords_) {
      if (!(c >= 0.0 && c <= 1.0)) {
        throw std::out_of_range("Point: coordinate " + std::to_string(c) + " outside [0,1]");
      }
    }
  }

  std::vector<double> coords_;
};

using Points = std::vector<Point>;

inline double euclid_dist(const Point& a, const Point& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("euclid_dist: dimension mismatch (" + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

/// Euclidean metric as a callable, for algorithms templated on the metric.
struct EuclideanMetric {
  double operator()(const Point& a, const Point& b) const { return euclid_dist(a, b); }
};

// ---------------------------------------------------------------------------
// Smooth distributions

enum class DistributionKind { kUniform, kHistogram };

/// A request distribution over [0,1]^d that is sigma-smooth: its density with
/// respect to the uniform measure never exceeds 1/sigma. Histograms live on a
/// regular grid of `resolution` cells per axis; cell (c_0, ..., c_{d-1}) has
/// flat index c_0 + g*c_1 + g^2*c_2 + ... (axis 0 varies fastest).
class SmoothDistribution {
 public:
  static constexpr int kDefaultResolution = 64;

  static SmoothDistribution uniform(std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("SmoothDistribution: dimension must be at least 1");
    SmoothDistribution out;
    out.kind_ = DistributionKind::kUniform;
    out.dim_ = dim;
    out.sigma_ = 1.0;
    out.resolution_ = 1;
    out.masses_ = {1.0};
    out.cumulative_ = {1.0};
    return out;
  }

  /// Validates total mass and the per-cell density certificate.
  static SmoothDistribution histogram(std::size_t dim, double sigma, int resolution,
                                      std::vector<double> masses) {
    if (dim == 0) throw std::invalid_argument("SmoothDistribution: dimension must be at least 1");
    if (!(sigma > 0.0 && sigma <= 1.0)) {
      throw std::invalid_argument("SmoothDistribution: sigma must lie in (0,1]");
    }
    if (resolution < 1) throw std::invalid_argument("SmoothDistribution: resolution must be >= 1");
    const double cells = std::pow(static_cast<double>(resolution), static_cast<double>(dim));
    if (static_cast<double>(masses.size()) != cells) {
      throw std::invalid_argument("SmoothDistribution: expected " +
                                  std::to_string(static_cast<long long>(cells)) +
                                  " cell masses, got " + std::to_string(masses.size()));
    }
    SmoothDistribution out;
    out.kind_ = DistributionKind::kHistogram;
    out.dim_ = dim;
    out.sigma_ = sigma;
    out.resolution_ = resolution;
    out.masses_ = std::move(masses);
    double total = 0.0;
    for (double m : out.masses_) {
      if (!(m >= 0.0)) throw std::invalid_argument("SmoothDistribution: negative cell mass");
      total += m;
    }
    if (std::abs(total - 1.0) > kExactTol) {
      throw std::invalid_argument("SmoothDistribution: total mass " + std::to_string(total) +
                                  " differs from 1");
    }
    if (!out.density_cap_holds()) {
      throw std::invalid_argument("SmoothDistribution: a cell density exceeds 1/sigma");
    }
    out.cumulative_.resize(out.masses_.size());
    std::partial_sum(out.masses_.begin(), out.masses_.end(), out.cumulative_.begin());
    return out;
  }

  DistributionKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  double sigma() const noexcept { return sigma_; }
  int resolution() const noexcept { return resolution_; }
  std::span<const double> masses() const noexcept { return masses_; }

  /// Largest cell density (mass * g^d). Equals 1 for the uniform kind.
  double max_density() const {
    const double cells = static_cast<double>(masses_.size());
    double best = 0.0;
    for (double m : masses_) best = std::max(best, m * cells);
    return best;
  }

  /// The smoothness certificate checked on grid cells.
  bool density_cap_holds() const { return max_density() <= (1.0 / sigma_) * (1.0 + kExactTol); }

  /// Mass of the axis-aligned box of grid cells [lo_a, hi_a) per axis, with
  /// cell indices taken at resolution `grid`. One of `grid` and the histogram
  /// resolution must divide the other so the answer is exact.
  double box_mass(std::span<const long long> lo, std::span<const long long> hi,
                  long long grid) const {
    if (kind_ == DistributionKind::kUniform) {
      double vol = 1.0;
      for (std::size_t a = 0; a < dim_; ++a) {
        vol *= static_cast<double>(hi[a] - lo[a]) / static_cast<double>(grid);
      }
      return vol;
    }
    const long long res = resolution_;
    long long fine = 0;
    if (grid % res == 0) {
      fine = grid;
    } else if (res % grid == 0) {
      fine = res;
    } else {
      throw std::invalid_argument("box_mass: grid " + std::to_string(grid) +
                                  " is incompatible with histogram resolution " +
                                  std::to_string(res));
    }
    const long long to_fine = fine / grid;
    const long long scale = fine / res;  // fine cells per histogram cell
    std::vector<long long> flo(dim_), fhi(dim_), clo(dim_), chi(dim_);
    for (std::size_t a = 0; a < dim_; ++a) {
      flo[a] = lo[a] * to_fine;
      fhi[a] = hi[a] * to_fine;
      clo[a] = flo[a] / scale;
      chi[a] = (fhi[a] + scale - 1) / scale;
      if (clo[a] >= chi[a]) return 0.0;
    }
    double total = 0.0;
    std::vector<long long> cell(clo);
    while (true) {
      double frac = 1.0;
      std::size_t flat = 0;
      std::size_t stride = 1;
      for (std::size_t a = 0; a < dim_; ++a) {
        const long long cell_lo = cell[a] * scale;
        const long long overlap = std::min(cell_lo + scale, fhi[a]) - std::max(cell_lo, flo[a]);
        frac *= static_cast<double>(overlap) / static_cast<double>(scale);
        flat += static_cast<std::size_t>(cell[a]) * stride;
        stride *= static_cast<std::size_t>(res);
      }
      total += frac * masses_[flat];
      std::size_t a = 0;
      for (; a < dim_; ++a) {
        if (++cell[a] < chi[a]) break;
        cell[a] = clo[a];
      }
      if (a == dim_) break;
    }
    return total;
  }

  /// Cumulative distribution function of a one-dimensional distribution.
  double cdf_1d(double x) const {
    if (dim_ != 1) throw std::invalid_argument("cdf_1d: distribution is not one-dimensional");
    x = std::clamp(x, 0.0, 1.0);
    if (kind_ == DistributionKind::kUniform) return x;
    const double scaled = x * resolution_;
    const auto cell = std::min(static_cast<std::size_t>(scaled), masses_.size() - 1);
    const double below = cell == 0 ? 0.0 : cumulative_[cell - 1];
    return below + masses_[cell] * (scaled - static_cast<double>(cell));
  }

  Point sample(Rng& rng) const {
    std::vector<double> coords(dim_);
    if (kind_ == DistributionKind::kUniform) {
      for (auto& c : coords) c = rng.uniform();
      return Point(std::move(coords));
    }
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    auto flat = static_cast<std::size_t>(it - cumulative_.begin());
    // Rounding can leave u at the very top of the cumulative array.
    if (flat >= masses_.size()) flat = last_positive_cell();
    const auto g = static_cast<std::size_t>(resolution_);
    for (std::size_t a = 0; a < dim_; ++a) {
      const std::size_t c = flat % g;
      flat /= g;
      coords[a] = (static_cast<double>(c) + rng.uniform()) / static_cast<double>(resolution_);
    }
    return Point(std::move(coords));
  }

  nlohmann::json to_json() const {
    return {{"kind", kind_ == DistributionKind::kUniform ? "uniform" : "histogram"},
            {"sigma", sigma_},
            {"resolution", resolution_},
            {"masses", masses_}};
  }

  /// `dim` is required for the uniform kind, whose serialized form does not
  /// carry a dimension; an explicit "d" key takes precedence when present.
  static SmoothDistribution from_json(const nlohmann::json& j, std::size_t dim = 0) {
    const std::string kind = j.at("kind").get<std::string>();
    if (j.contains("d")) dim = j.at("d").get<std::size_t>();
    if (kind == "uniform") return uniform(dim == 0 ? 1 : dim);
    if (kind != "histogram") {
      throw std::invalid_argument("SmoothDistribution: unknown kind '" + kind + "'");
    }
    const int resolution = j.value("resolution", kDefaultResolution);
    auto masses = j.at("masses").get<std::vector<double>>();
    if (dim == 0) {
      // Infer d from resolution^d == |masses|.
      std::size_t cells = 1;
      dim = 0;
      while (cells < masses.size()) {
        cells *= static_cast<std::size_t>(resolution);
        ++dim;
        if (resolution == 1) break;
      }
      if (cells != masses.size() || dim == 0) {
        throw std::invalid_argument("SmoothDistribution: masses length is not a power of resolution");
      }
    }
    return histogram(dim, j.at("sigma").get<double>(), resolution, std::move(masses));
  }

 private:
  SmoothDistribution() = default;

  std::size_t last_positive_cell() const {
    for (std::size_t i = masses_.size(); i-- > 0;) {
      if (masses_[i] > 0.0) return i;
    }
    return 0;
  }

  DistributionKind kind_ = DistributionKind::kUniform;
  std::size_t dim_ = 1;
  double sigma_ = 1.0;
  int resolution_ = 1;
  std::vector<double> masses_;
  std::vector<double> cumulative_;
};

inline Point sample(const SmoothDistribution& dist, Rng& rng) { return dist.sample(rng); }

// ---------------------------------------------------------------------------
// Poisson binomial and majorization

class ProbVector {
 public:
  ProbVector() = default;
  explicit ProbVector(std::vector<double> p) : p_(std::move(p)) {
    for (double v : p_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::out_of_range("ProbVector: entry " + std::to_string(v) + " outside [0,1]");
      }
    }
  }
  ProbVector(std::initializer_list<double> p) : ProbVector(std::vector<double>(p)) {}

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> values() const noexcept { return p_; }
  double sum() const { return std::accumulate(p_.begin(), p_.end(), 0.0); }

 private:
  std::vector<double> p_;
};

/// Largest vector length accepted by the exact convolution.
inline constexpr std::size_t kMaxExactPoissonBinomial = 30;

namespace detail {

inline std::vector<double> bernoulli_convolution(std::span<const double> p) {
  std::vector<double> pmf(p.size() + 1, 0.0);
  pmf[0] = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t k = i + 1; k > 0; --k) {
      pmf[k] = pmf[k] * (1.0 - p[i]) + pmf[k - 1] * p[i];
    }
    pmf[0] *= 1.0 - p[i];
  }
  return pmf;
}

}  // namespace detail

/// Exact distribution of a sum of independent Bernoulli(p_i), by convolution.
inline std::vector<double> poisson_binomial_pmf(const ProbVector& p) {
  if (p.size() > kMaxExactPoissonBinomial) {
    throw std::length_error("poisson_binomial_pmf: n = " + std::to_string(p.size()) +
                            " exceeds the exact limit of 30; estimate by Monte Carlo instead");
  }
  return detail::bernoulli_convolution(p.values());
}

inline std::vector<double> binomial_pmf(std::size_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::out_of_range("binomial_pmf: p outside [0,1]");
  const std::vector<double> probs(n, p);
  return detail::bernoulli_convolution(probs);
}

/// E|K - center| for K distributed by `pmf` on {0, 1, ...}.
inline double mean_abs_dev(std::span<const double> pmf, double center) {
  double total = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    total += pmf[k] * std::abs(static_cast<double>(k) - center);
  }
  return total;
}

/// E f(K) for K distributed by `pmf`.
inline double pmf_expectation(std::span<const double> pmf,
                              const std::function<double(double)>& f) {
  double total = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) total += pmf[k] * f(static_cast<double>(k));
  return total;
}

inline double pmf_mean(std::span<const double> pmf) {
  return pmf_expectation(pmf, [](double k) { return k; });
}

inline double pmf_stddev(std::span<const double> pmf) {
  const double mean = pmf_mean(pmf);
  const double var = pmf_expectation(pmf, [mean](double k) { return (k - mean) * (k - mean); });
  return std::sqrt(std::max(0.0, var));
}

/// p majorizes q: descending prefix sums of p dominate those of q for
/// k = 1..n-1, and the totals agree to within 1e-12.
inline bool majorizes(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("majorizes: length mismatch (" + std::to_string(p.size()) +
                                " vs " + std::to_string(q.size()) + ")");
  }
  std::vector<double> ps(p.values().begin(), p.values().end());
  std::vector<double> qs(q.values().begin(), q.values().end());
  std::sort(ps.begin(), ps.end(), std::greater<>());
  std::sort(qs.begin(), qs.end(), std::greater<>());
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t k = 0; k + 1 < ps.size(); ++k) {
    sp += ps[k];
    sq += qs[k];
    if (sp < sq - kExactTol) return false;
  }
  if (ps.empty()) return true;
  sp += ps.back();
  sq += qs.back();
  return std::abs(sp - sq) <= kExactTol;
}

/// E|Z - EZ| - std(Z)/sqrt(2) for Z ~ Bin(n, p); nonnegative whenever
/// n >= 2 and p in [1/n, 1 - 1/n].
inline double binomial_mad_gap(int n, double p) {
  if (n < 2) throw std::invalid_argument("binomial_mad_bound_check: n must be at least 2");
  const double lo = 1.0 / n;
  if (p < lo - kExactTol || p > 1.0 - lo + kExactTol) {
    throw std::invalid_argument("binomial_mad_bound_check: p must lie in [1/n, 1-1/n]");
  }
  const auto pmf = binomial_pmf(static_cast<std::size_t>(n), p);
  const double mad = mean_abs_dev(pmf, n * p);
  const double sd = std::sqrt(n * p * (1.0 - p));
  return mad - sd / std::sqrt(2.0);
}

inline bool binomial_mad_bound_check(int n, double p) {
  return binomial_mad_gap(n, p) >= -kExactTol;
}

}  // namespace smoothmatch
