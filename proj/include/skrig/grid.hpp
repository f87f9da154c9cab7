// Copyright 2026 The skrig Authors
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

#pragma once

// Site-set construction and lag combinatorics on planar site sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "skrig/csv.hpp"
#include "skrig/errors.hpp"
#include "skrig/geometry.hpp"
#include "skrig/rng.hpp"

namespace skrig {

inline const double kSqrt2 = std::sqrt(2.0);

/// Dyadic grid at scale J: (1+2^J)^2 sites in lexicographic order.
inline SiteSet dyadic_grid(int scale) { return SiteSet::dyadic(scale); }

/// 1-based index of grid point (k 2^-J, l 2^-J): k(1+2^J) + (l+1).
inline std::int64_t lexicographic_index(std::int64_t k, std::int64_t l, int scale) {
  return k * ((std::int64_t{1} << scale) + 1) + (l + 1);
}

/// Regular side x side grid of the closed unit square, x as the slow index.
inline SiteSet regular_grid(int side) {
  detail::require(side >= 2, "regular grid needs at least 2 points per side");
  std::vector<Site> pts;
  pts.reserve(static_cast<std::size_t>(side) * side);
  for (int k = 0; k < side; ++k) {
    for (int l = 0; l < side; ++l) {
      pts.push_back({static_cast<double>(k) / (side - 1), static_cast<double>(l) / (side - 1)});
    }
  }
  return SiteSet(std::move(pts));
}

/// Observed lags of a site set with, per lag h, the ordered pairs N(h) (each unordered
/// pair appears in both orders, lag 0 pairs every site with itself), n_h and the
/// per-site degrees n_h(i).
class LagTable {
 public:
  using Pair = std::pair<std::uint32_t, std::uint32_t>;

  [[nodiscard]] std::size_t size() const noexcept { return lags_.size(); }
  [[nodiscard]] std::size_t n_sites() const noexcept { return n_; }
  [[nodiscard]] std::span<const double> lags() const noexcept { return lags_; }
  [[nodiscard]] double lag(std::size_t k) const { return lags_.at(k); }
  [[nodiscard]] std::int64_t key(std::size_t k) const { return keys_.at(k); }
  /// Exact grids key lags by d^2 in units of 4^-J; otherwise by round(d^2 / tolerance).
  [[nodiscard]] bool exact_keys() const noexcept { return exact_; }

  [[nodiscard]] std::size_t count(std::size_t k) const { return offsets_.at(k + 1) - offsets_.at(k); }

  [[nodiscard]] std::span<const Pair> pairs(std::size_t k) const {
    return std::span<const Pair>(pairs_).subspan(offsets_.at(k), count(k));
  }

  [[nodiscard]] std::span<const std::uint32_t> degrees(std::size_t k) const {
    return std::span<const std::uint32_t>(degrees_).subspan(k * n_, n_);
  }

  [[nodiscard]] std::uint32_t degree(std::size_t k, std::size_t i) const { return degrees(k)[i]; }

  /// Index of the stored lag equal to h (relative tolerance 1e-12), if any.
  [[nodiscard]] std::optional<std::size_t> find(double h) const {
    const auto k = nearest(h);
    if (std::abs(lags_[k] - h) <= 1e-12 * std::max(1.0, h)) return k;
    return std::nullopt;
  }

  /// Index of the stored lag closest to h; ties go to the smaller lag.
  [[nodiscard]] std::size_t nearest(double h) const {
    const auto it = std::lower_bound(lags_.begin(), lags_.end(), h);
    if (it == lags_.begin()) return 0;
    if (it == lags_.end()) return lags_.size() - 1;
    const auto hi = static_cast<std::size_t>(it - lags_.begin());
    return (h - lags_[hi - 1] <= lags_[hi] - h) ? hi - 1 : hi;
  }

  /// min over positive lags h < cutoff of n_h / n; 1 when no such lag exists.
  [[nodiscard]] double nu(double cutoff) const {
    double out = 1.0;
    for (std::size_t k = 0; k < size(); ++k) {
      if (lags_[k] > 0.0 && lags_[k] < cutoff) {
        out = std::min(out, static_cast<double>(count(k)) / static_cast<double>(n_));
      }
    }
    return out;
  }

 private:
  friend LagTable lag_table(const SiteSet& sites, double tolerance);

  std::size_t n_ = 0;
  bool exact_ = false;
  std::vector<double> lags_;
  std::vector<std::int64_t> keys_;
  std::vector<std::size_t> offsets_;
  std::vector<Pair> pairs_;
  std::vector<std::uint32_t> degrees_;
};

inline LagTable lag_table(const SiteSet& sites, double tolerance = 1e-9) {
  const std::size_t n = sites.size();
  detail::require(n >= 1, "lag table needs at least one site");
  detail::require(n <= 20000, "lag table: too many sites for exhaustive pair enumeration");
  const auto scale = sites.grid_scale();
  if (!scale) detail::require(tolerance > 0.0, "lag table: tolerance must be positive off-grid");

  LagTable t;
  t.n_ = n;
  t.exact_ = scale.has_value();

  const double unit = scale ? std::ldexp(1.0, *scale) : 0.0;
  std::vector<std::int64_t> key_of(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = sites[i].x - sites[j].x;
      const double dy = sites[i].y - sites[j].y;
      std::int64_t key;
      if (scale) {
        const auto dk = static_cast<std::int64_t>(std::llround(dx * unit));
        const auto dl = static_cast<std::int64_t>(std::llround(dy * unit));
        key = dk * dk + dl * dl;
      } else {
        key = static_cast<std::int64_t>(std::llround((dx * dx + dy * dy) / tolerance));
      }
      key_of[i * n + j] = key;
    }
  }

  std::vector<std::int64_t> keys(key_of);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::unordered_map<std::int64_t, std::size_t> slot;
  slot.reserve(keys.size() * 2);
  for (std::size_t k = 0; k < keys.size(); ++k) slot.emplace(keys[k], k);

  const std::size_t n_lags = keys.size();
  std::vector<std::size_t> counts(n_lags, 0);
  for (auto key : key_of) ++counts[slot.at(key)];

  t.keys_ = keys;
  t.offsets_.assign(n_lags + 1, 0);
  for (std::size_t k = 0; k < n_lags; ++k) t.offsets_[k + 1] = t.offsets_[k] + counts[k];
  t.pairs_.resize(n * n);
  t.degrees_.assign(n_lags * n, 0);
  t.lags_.assign(n_lags, -1.0);

  std::vector<std::size_t> cursor(t.offsets_.begin(), t.offsets_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = slot.at(key_of[i * n + j]);
      t.pairs_[cursor[k]++] = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
      ++t.degrees_[k * n + i];
      if (t.lags_[k] < 0.0) {
        t.lags_[k] = scale ? std::sqrt(static_cast<double>(keys[k])) / unit : distance(sites[i], sites[j]);
      }
    }
  }
  // Off-grid the representative distance could break the sort at bin edges; keys are sorted.
  for (std::size_t k = 1; k < n_lags; ++k) {
    if (!(t.lags_[k] > t.lags_[k - 1])) {
      throw ValidationError("lag table: tolerance too coarse, lag bins overlap");
    }
  }
  return t;
}

/// Laplacian L(n,h) of the graph "at distance h" and its degree matrix D(n,h).
struct LagGraphMatrices {
  Eigen::MatrixXd laplacian;
  Eigen::VectorXd degrees;

  [[nodiscard]] Eigen::MatrixXd degree_matrix() const { return degrees.asDiagonal(); }
};

inline LagGraphMatrices lag_graph(const SiteSet& sites, const LagTable& table, double h) {
  detail::require(sites.size() == table.n_sites(), "lag graph: site set does not match lag table");
  detail::require(h > 0.0, "lag graph: lag must be positive");
  const auto found = table.find(h);
  if (!found) {
    throw ValidationError("lag " + csv::format(h) + " is not observed; nearest available lag is " +
                          csv::format(table.lag(table.nearest(h))));
  }
  const std::size_t k = *found;
  const auto n = static_cast<Eigen::Index>(sites.size());
  LagGraphMatrices g{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (const auto& [i, j] : table.pairs(k)) g.laplacian(i, j) = -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    g.degrees(i) = table.degree(k, static_cast<std::size_t>(i));
    g.laplacian(i, i) = g.degrees(i);
  }
  return g;
}

/// Keeps each site independently with probability p. p = 1 returns the input unchanged.
inline SiteSet bernoulli_thin(const SiteSet& sites, double p, std::uint64_t seed) {
  detail::require(p > 0.0 && p <= 1.0, "thinning probability must lie in (0, 1]");
  if (p == 1.0) return sites;
  auto rng = make_engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Site> kept;
  for (const auto& s : sites) {
    if (u(rng) < p) kept.push_back(s);
  }
  if (kept.size() < 2) {
    throw ValidationError("thinned site set has " + std::to_string(kept.size()) +
                          " sites; at least 2 are needed for estimation");
  }
  return SiteSet(std::move(kept));
}

enum class SiteLayout { kUniform, kCorner, kRing };

/// Fixed sub-regions for the Corner and Ring layouts.
inline constexpr double kCornerSide = 0.25;
inline constexpr double kRingInner = 0.30;
inline constexpr double kRingOuter = 0.45;

inline bool in_corner(const Site& s) { return s.x <= kCornerSide && s.y <= kCornerSide; }

inline bool in_ring(const Site& s) {
  const double r = std::hypot(s.x - 0.5, s.y - 0.5);
  return r >= kRingInner && r <= kRingOuter;
}

struct SiteSplit {
  int in_region = 0;
  int elsewhere = 0;
};

/// d prediction-input sites in the unit square. Corner/Ring draw `split.in_region` sites
/// in their sub-region and the rest uniformly outside it.
inline SiteSet sample_prediction_sites(int d, SiteLayout layout, SiteSplit split, std::uint64_t seed) {
  detail::require(d >= 1, "number of prediction sites must be positive");
  if (layout != SiteLayout::kUniform) {
    detail::require(split.in_region >= 0 && split.elsewhere >= 0 && split.in_region + split.elsewhere == d,
                    "site split must be non-negative and sum to d");
  }
  auto rng = make_engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform_site = [&] { return Site{u(rng), u(rng)}; };
  std::vector<Site> pts;
  pts.reserve(static_cast<std::size_t>(d));

  if (layout == SiteLayout::kUniform) {
    for (int i = 0; i < d; ++i) pts.push_back(uniform_site());
    return SiteSet(std::move(pts));
  }

  auto region = layout == SiteLayout::kCorner ? in_corner : in_ring;
  for (int i = 0; i < split.in_region; ++i) {
    if (layout == SiteLayout::kCorner) {
      pts.push_back({kCornerSide * u(rng), kCornerSide * u(rng)});
    } else {
      const double r2 = kRingInner * kRingInner + u(rng) * (kRingOuter * kRingOuter - kRingInner * kRingInner);
      const double angle = 2.0 * std::numbers::pi * u(rng);
      pts.push_back({0.5 + std::sqrt(r2) * std::cos(angle), 0.5 + std::sqrt(r2) * std::sin(angle)});
    }
  }
  for (int i = 0; i < split.elsewhere; ++i) {
    Site s = uniform_site();
    while (region(s)) s = uniform_site();
    pts.push_back(s);
  }
  return SiteSet(std::move(pts));
}

inline void write_sites_csv(std::ostream& out, const SiteSet& sites) {
  out << "index,x,y\n";
  for (std::size_t i = 0; i < sites.size(); ++i) {
    out << (i + 1) << ',' << csv::format(sites[i].x) << ',' << csv::format(sites[i].y) << '\n';
  }
}

inline SiteSet read_sites_csv(std::istream& in, const std::string& source = "sites.csv") {
  const auto table = csv::read(in, source);
  detail::require(table.header == std::vector<std::string>{"index", "x", "y"},
                  source + ": expected header index,x,y");
  std::vector<Site> pts;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = source + ":" + std::to_string(table.line_numbers[r]);
    pts.push_back({csv::parse_double(row[1], where), csv::parse_double(row[2], where)});
  }
  return SiteSet(std::move(pts));
}

inline void write_lag_table_csv(std::ostream& out, const LagTable& t) {
  out << "h,n_h\n";
  for (std::size_t k = 0; k < t.size(); ++k) out << csv::format(t.lag(k)) << ',' << t.count(k) << '\n';
}

}  // namespace skrig
