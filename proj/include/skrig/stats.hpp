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

// Small descriptive statistics used by the Monte Carlo studies.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "skrig/errors.hpp"

namespace skrig::stats {

/// Pairwise (fixed-topology tree) sum, so a reduction does not depend on thread count.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double mean(std::span<const double> v) {
  detail::require(!v.empty(), "mean of an empty sample");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

/// Sample variance, divisor n - 1.
inline double variance(std::span<const double> v) {
  detail::require(v.size() >= 2, "variance needs at least two values");
  const double m = mean(v);
  std::vector<double> sq(v.size());
  std::transform(v.begin(), v.end(), sq.begin(), [m](double x) { return (x - m) * (x - m); });
  return pairwise_sum(sq) / static_cast<double>(v.size() - 1);
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

/// Linear interpolation between order statistics (type 7), q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  detail::require(!v.empty(), "percentile of an empty sample");
  detail::require(q >= 0.0 && q <= 1.0, "percentile level must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  detail::require(!a.empty() && !b.empty(), "KS statistic needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "line fit needs two or more paired values");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  detail::require(sxx > 0.0, "line fit needs distinct abscissae");
  return {sxy / sxx, my - sxy / sxx * mx};
}

/// Slope of log y against log x.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::require(x[i] > 0.0 && y[i] > 0.0, "log-log slope needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly).slope;
}

}  // namespace skrig::stats
