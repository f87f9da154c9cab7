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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skrig/errors.hpp"

namespace skrig {

/// A point of the unit square.
struct Site {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Site&, const Site&) = default;
};

inline double distance(const Site& a, const Site& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Ordered, pairwise-distinct collection of sites.
///
/// When `grid_scale()` is set the set is exactly the dyadic grid at that scale in
/// lexicographic order (see `dyadic_grid`); any other construction drops it.
class SiteSet {
 public:
  SiteSet() = default;

  explicit SiteSet(std::vector<Site> sites) : sites_(std::move(sites)) { validate(); }

  [[nodiscard]] std::size_t size() const noexcept { return sites_.size(); }
  [[nodiscard]] bool empty() const noexcept { return sites_.empty(); }
  [[nodiscard]] const Site& operator[](std::size_t i) const { return sites_[i]; }
  [[nodiscard]] std::span<const Site> sites() const noexcept { return sites_; }
  [[nodiscard]] auto begin() const noexcept { return sites_.begin(); }
  [[nodiscard]] auto end() const noexcept { return sites_.end(); }
  [[nodiscard]] std::optional<int> grid_scale() const noexcept { return grid_scale_; }

  /// Concatenation; the result must still be pairwise distinct.
  [[nodiscard]] SiteSet concat(const SiteSet& other) const {
    std::vector<Site> all(sites_);
    all.insert(all.end(), other.sites_.begin(), other.sites_.end());
    return SiteSet(std::move(all));
  }

  /// FNV-1a over the raw coordinate bytes, used to log which site sets a study used.
  [[nodiscard]] std::uint64_t hash() const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](double v) {
      const auto* p = reinterpret_cast<const unsigned char*>(&v);
      for (std::size_t k = 0; k < sizeof(double); ++k) {
        h ^= p[k];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& s : sites_) {
      mix(s.x);
      mix(s.y);
    }
    return h;
  }

  friend bool operator==(const SiteSet& a, const SiteSet& b) { return a.sites_ == b.sites_; }

  /// The (1+2^J)^2 points (k 2^-J, l 2^-J) with k as the slow index.
  static SiteSet dyadic(int scale) {
    detail::require(scale >= 0, "grid scale must be non-negative");
    detail::require(scale <= 14, "grid scale too large: site count overflows");
    const int side = (1 << scale) + 1;
    const double step = std::ldexp(1.0, -scale);
    SiteSet out;
    out.sites_.reserve(static_cast<std::size_t>(side) * side);
    for (int k = 0; k < side; ++k) {
      for (int l = 0; l < side; ++l) out.sites_.push_back({k * step, l * step});
    }
    out.grid_scale_ = scale;
    return out;
  }

 private:
  void validate() const {
    for (const auto& s : sites_) {
      detail::require(std::isfinite(s.x) && std::isfinite(s.y), "site coordinates must be finite");
    }
    std::vector<Site> sorted(sites_);
    std::sort(sorted.begin(), sorted.end(),
              [](const Site& a, const Site& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
      throw ValidationError("duplicate site (" + std::to_string(dup->x) + ", " +
                            std::to_string(dup->y) + ")");
    }
  }

  std::vector<Site> sites_;
  std::optional<int> grid_scale_;
};

}  // namespace skrig
