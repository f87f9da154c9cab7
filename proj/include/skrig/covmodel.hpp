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

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Core>
#include "json.hpp"

#include "skrig/errors.hpp"
#include "skrig/geometry.hpp"

namespace skrig {

enum class Family { kTPL, kGaussian, kCubic, kSpherical, kExponential, kMatern };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::kTPL: return "tpl";
    case Family::kGaussian: return "gaussian";
    case Family::kCubic: return "cubic";
    case Family::kSpherical: return "spherical";
    case Family::kExponential: return "exponential";
    case Family::kMatern: return "matern";
  }
  return "?";
}

inline Family parse_family(const std::string& name) {
  if (name == "tpl" || name == "TPL") return Family::kTPL;
  if (name == "gaussian" || name == "Gaussian") return Family::kGaussian;
  if (name == "cubic" || name == "Cubic") return Family::kCubic;
  if (name == "spherical" || name == "Spherical") return Family::kSpherical;
  if (name == "exponential" || name == "Exponential") return Family::kExponential;
  if (name == "matern" || name == "Matern") return Family::kMatern;
  throw ValidationError("unknown covariance family '" + name + "'");
}

/// Unit-variance isotropic covariance families, optionally with the y axis compressed by
/// an anisotropy ratio alpha in (0, 1]. theta is in domain units (the unit square).
struct CovModel {
  Family family = Family::kTPL;
  double theta = 1.0;
  double nu = 1.5;  // Matern smoothness; ignored by the other families
  double alpha = 1.0;
  std::optional<double> gradient_bound;  // D: sup |c'| on the support, when known
  std::optional<double> sup_bound;       // B: sup |c|

  CovModel() = default;
  CovModel(Family f, double theta_, double nu_ = 1.5, double alpha_ = 1.0)
      : family(f), theta(theta_), nu(nu_), alpha(alpha_) {
    validate();
  }

  void validate() const {
    detail::require(std::isfinite(theta) && theta > 0.0, "theta must be positive");
    detail::require(family != Family::kMatern || (std::isfinite(nu) && nu > 0.0),
                    "Matern smoothness nu must be positive");
    detail::require(alpha > 0.0 && alpha <= 1.0, "anisotropy ratio must lie in (0, 1]");
  }

  /// Zero beyond theta.
  [[nodiscard]] bool compact() const noexcept {
    return family == Family::kTPL || family == Family::kCubic || family == Family::kSpherical;
  }
};

namespace detail {

inline double matern_general(double r, double nu) {
  const double z = std::sqrt(2.0 * nu) * r;
  if (z < 1e-10) return 1.0;
  if (z > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(z, nu) * std::cyl_bessel_k(nu, z);
}

inline double isotropic(const CovModel& m, double h) {
  const double r = h / m.theta;
  switch (m.family) {
    case Family::kTPL: return r < 1.0 ? std::pow(1.0 - r, 1.5) : 0.0;
    case Family::kGaussian: return std::exp(-r * r);
    case Family::kCubic: {
      if (r >= 1.0) return 0.0;
      const double r2 = r * r, r3 = r2 * r, r5 = r3 * r2, r7 = r5 * r2;
      return 1.0 - (7.0 * r2 - 8.75 * r3 + 3.5 * r5 - 0.75 * r7);
    }
    case Family::kSpherical: return r < 1.0 ? 1.0 - (1.5 * r - 0.5 * r * r * r) : 0.0;
    case Family::kExponential: return std::exp(-r);
    case Family::kMatern: {
      if (m.nu == 1.5) {
        const double z = std::numbers::sqrt3 * r;
        return (1.0 + z) * std::exp(-z);
      }
      if (m.nu == 2.5) {
        const double z = std::sqrt(5.0) * r;
        return (1.0 + z + 5.0 / 3.0 * r * r) * std::exp(-z);
      }
      return matern_general(r, m.nu);
    }
  }
  return 0.0;
}

}  // namespace detail

inline double cov(const CovModel& m, double h) {
  detail::require(h >= 0.0, "covariance lag must be non-negative");
  return detail::isotropic(m, h);
}

inline double semivariogram(const CovModel& m, double h) {
  detail::require(h >= 0.0, "semivariogram lag must be non-negative");
  return detail::isotropic(m, 0.0) - detail::isotropic(m, h);
}

/// Covariance at displacement (dx, dy): the isotropic form at |(dx, dy/alpha)|.
inline double cov_vec(const CovModel& m, double dx, double dy) {
  if (m.alpha == 1.0) return detail::isotropic(m, std::hypot(dx, dy));
  return detail::isotropic(m, std::hypot(dx, dy / m.alpha));
}

inline double cov_between(const CovModel& m, const Site& a, const Site& b) {
  return cov_vec(m, a.x - b.x, a.y - b.y);
}

inline Eigen::MatrixXd cov_matrix(const CovModel& m, const SiteSet& sites) {
  const auto d = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    out(i, i) = detail::isotropic(m, 0.0);
    for (Eigen::Index j = 0; j < i; ++j) {
      out(i, j) = out(j, i) = cov_between(m, sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

inline Eigen::VectorXd cov_vector(const CovModel& m, const Site& s, const SiteSet& sites) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(sites.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) out(static_cast<Eigen::Index>(i)) = cov_between(m, s, sites[i]);
  return out;
}

/// How a configured theta maps to domain units.
///  - cells:      theta * 2^-J of the training grid
///  - eval_cells: theta / sqrt(N_eval) of the evaluation grid
///  - domain:     as given
enum class ThetaUnits { kCells, kEvalCells, kDomain };

inline const char* theta_units_name(ThetaUnits u) {
  switch (u) {
    case ThetaUnits::kCells: return "cells";
    case ThetaUnits::kEvalCells: return "eval_cells";
    case ThetaUnits::kDomain: return "domain";
  }
  return "?";
}

inline ThetaUnits parse_theta_units(const std::string& s) {
  if (s == "cells") return ThetaUnits::kCells;
  if (s == "eval_cells") return ThetaUnits::kEvalCells;
  if (s == "domain") return ThetaUnits::kDomain;
  throw ValidationError("unknown theta_units '" + s + "' (expected cells|eval_cells|domain)");
}

/// A covariance model as configured, before theta is resolved to domain units.
struct ModelSpec {
  Family family = Family::kTPL;
  double theta = 5.0;
  double nu = 1.5;
  double alpha = 1.0;
  ThetaUnits units = ThetaUnits::kCells;

  [[nodiscard]] double theta_domain(int train_scale, int eval_points = 0) const {
    switch (units) {
      case ThetaUnits::kCells: return theta * std::ldexp(1.0, -train_scale);
      case ThetaUnits::kEvalCells:
        detail::require(eval_points > 0, "eval_cells theta units need an evaluation grid size");
        return theta / std::sqrt(static_cast<double>(eval_points));
      case ThetaUnits::kDomain: return theta;
    }
    return theta;
  }

  [[nodiscard]] CovModel resolve(int train_scale, int eval_points = 0) const {
    return CovModel(family, theta_domain(train_scale, eval_points), nu, alpha);
  }
};

inline ModelSpec parse_model_spec(const nlohmann::json& j) {
  detail::require(j.is_object(), "model must be an object");
  detail::require(j.contains("family") && j.contains("theta"), "model needs 'family' and 'theta'");
  ModelSpec spec;
  try {
    spec.family = parse_family(j.at("family").get<std::string>());
    spec.theta = j.at("theta").get<double>();
    if (j.contains("nu")) spec.nu = j.at("nu").get<double>();
    if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
    if (j.contains("theta_units")) spec.units = parse_theta_units(j.at("theta_units").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
  CovModel(spec.family, spec.theta, spec.nu, spec.alpha);  // validates ranges
  return spec;
}

inline nlohmann::json to_json(const ModelSpec& s) {
  nlohmann::json j{{"family", family_name(s.family)},
                   {"theta", s.theta},
                   {"theta_units", theta_units_name(s.units)}};
  if (s.family == Family::kMatern) j["nu"] = s.nu;
  if (s.alpha != 1.0) j["alpha"] = s.alpha;
  return j;
}

}  // namespace skrig
