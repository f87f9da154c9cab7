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

// Nonparametric covariance and semivariogram estimation from one realization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include "json.hpp"

#include "skrig/covmodel.hpp"
#include "skrig/csv.hpp"
#include "skrig/errors.hpp"
#include "skrig/gaussfield.hpp"
#include "skrig/geometry.hpp"
#include "skrig/grid.hpp"
#include "skrig/linalg.hpp"
#include "skrig/parallel.hpp"
#include "skrig/rng.hpp"
#include "skrig/stats.hpp"

namespace skrig {

enum class KrigingVariant { kSimple, kOrdinary };

inline const char* variant_name(KrigingVariant v) { return v == KrigingVariant::kSimple ? "simple" : "ordinary"; }

inline KrigingVariant parse_variant(const std::string& s) {
  if (s == "simple") return KrigingVariant::kSimple;
  if (s == "ordinary") return KrigingVariant::kOrdinary;
  throw ValidationError("unknown mode '" + s + "' (expected simple|ordinary)");
}

/// Where the estimators are truncated.
///  - kJ1:      sqrt(2) - 2^-j1
///  - kFixed:   a given lag
///  - kSupport: the model range theta for compactly supported models, none otherwise
///  - kNone:    no truncation
enum class CutoffRule { kJ1, kFixed, kSupport, kNone };

struct EstimationConfig {
  CutoffRule rule = CutoffRule::kJ1;
  double j1 = 1.0;
  double fixed_cutoff = 0.0;
  std::optional<double> nu_min;  // drop lags with n_h < nu_min * n
  KrigingVariant mode = KrigingVariant::kSimple;

  static EstimationConfig from_j1(double j1) {
    EstimationConfig c;
    c.rule = CutoffRule::kJ1;
    c.j1 = j1;
    c.validate();
    return c;
  }
  static EstimationConfig at_cutoff(double h) {
    EstimationConfig c;
    c.rule = CutoffRule::kFixed;
    c.fixed_cutoff = h;
    c.validate();
    return c;
  }
  static EstimationConfig untruncated() {
    EstimationConfig c;
    c.rule = CutoffRule::kNone;
    return c;
  }
  static EstimationConfig at_support() {
    EstimationConfig c;
    c.rule = CutoffRule::kSupport;
    return c;
  }

  void validate() const {
    if (rule == CutoffRule::kJ1) {
      detail::require(std::isfinite(j1) && j1 > -0.5, "j1 must exceed -1/2 so the cutoff is positive");
    }
    if (rule == CutoffRule::kFixed) {
      detail::require(std::isfinite(fixed_cutoff) && fixed_cutoff > 0.0, "cutoff lag must be positive");
    }
    if (nu_min) detail::require(*nu_min >= 0.0 && *nu_min <= 1.0, "nu_min must lie in [0, 1]");
  }

  /// Cutoff lag; +inf when nothing is truncated. The support rule needs the model range,
  /// which is the only place the configured model enters estimation.
  [[nodiscard]] double cutoff(std::optional<CovModel> model = std::nullopt) const {
    constexpr double none = std::numeric_limits<double>::infinity();
    switch (rule) {
      case CutoffRule::kJ1: return kSqrt2 - std::exp2(-j1);
      case CutoffRule::kFixed: return fixed_cutoff;
      case CutoffRule::kNone: return none;
      case CutoffRule::kSupport:
        detail::require(model.has_value(), "support cutoff needs a covariance model");
        return model->compact() && model->theta < kSqrt2 ? model->theta : none;
    }
    return none;
  }
};

/// Parses `{j1} | {cutoff: <lag>|"support"} | {truncate: false}` plus optional nu_min, mode.
inline EstimationConfig parse_estimation_config(const nlohmann::json& j, EstimationConfig base = {}) {
  detail::require(j.is_object(), "estimation must be an object");
  try {
    if (j.contains("j1")) {
      base.rule = CutoffRule::kJ1;
      base.j1 = j.at("j1").get<double>();
    }
    if (j.contains("cutoff")) {
      const auto& c = j.at("cutoff");
      if (c.is_string()) {
        detail::require(c.get<std::string>() == "support", "cutoff must be a lag or \"support\"");
        base.rule = CutoffRule::kSupport;
      } else {
        base.rule = CutoffRule::kFixed;
        base.fixed_cutoff = c.get<double>();
      }
    }
    if (j.contains("truncate") && !j.at("truncate").get<bool>()) base.rule = CutoffRule::kNone;
    if (j.contains("nu_min")) {
      if (j.at("nu_min").is_null()) {
        base.nu_min.reset();
      } else {
        base.nu_min = j.at("nu_min").get<double>();
      }
    }
    if (j.contains("mode")) base.mode = parse_variant(j.at("mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("estimation: ") + e.what());
  }
  base.validate();
  return base;
}

inline nlohmann::json to_json(const EstimationConfig& c, std::optional<CovModel> model = std::nullopt) {
  nlohmann::json j;
  switch (c.rule) {
    case CutoffRule::kJ1: j["j1"] = c.j1; break;
    case CutoffRule::kFixed: j["cutoff"] = c.fixed_cutoff; break;
    case CutoffRule::kSupport: j["cutoff"] = "support"; break;
    case CutoffRule::kNone: j["truncate"] = false; break;
  }
  if (c.rule == CutoffRule::kSupport && !model) {
    j["cutoff_lag"] = nullptr;
  } else {
    const double h = c.cutoff(model);
    j["cutoff_lag"] = std::isfinite(h) ? nlohmann::json(h) : nlohmann::json(nullptr);
  }
  j["nu_min"] = c.nu_min ? nlohmann::json(*c.nu_min) : nlohmann::json(nullptr);
  j["mode"] = variant_name(c.mode);
  return j;
}

struct LagEstimate {
  double h = 0.0;
  std::size_t n_h = 0;
  double chat = 0.0;
  double gammahat = 0.0;
  double chat0 = 0.0;
  bool in_cutoff = false;
  bool retained = true;
};

/// Estimates over the observed lags plus the 1-NN rule that extends them to any lag.
class EmpiricalCovariance {
 public:
  EmpiricalCovariance(std::vector<LagEstimate> lags, EstimationConfig config, double cutoff, std::size_t n,
                      double nu)
      : lags_(std::move(lags)), config_(config), cutoff_(cutoff), n_(n), nu_(nu) {
    for (const auto& l : lags_) {
      if (!l.retained) continue;
      retained_h_.push_back(l.h);
      retained_c_.push_back(l.chat);
      retained_g_.push_back(l.gammahat);
    }
    detail::require(!retained_h_.empty(), "empirical covariance retains no lag");
  }

  [[nodiscard]] std::span<const LagEstimate> lags() const noexcept { return lags_; }
  [[nodiscard]] const EstimationConfig& config() const noexcept { return config_; }
  [[nodiscard]] double cutoff() const noexcept { return cutoff_; }
  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  /// min n_h / n over positive in-cutoff lags.
  [[nodiscard]] double nu() const noexcept { return nu_; }

  [[nodiscard]] std::vector<double> dropped_lags() const {
    std::vector<double> out;
    for (const auto& l : lags_) {
      if (!l.retained) out.push_back(l.h);
    }
    return out;
  }

  /// Index into the retained lags of the one nearest h; ties go to the smaller lag.
  [[nodiscard]] std::size_t nearest_retained(double h) const {
    const auto it = std::lower_bound(retained_h_.begin(), retained_h_.end(), h);
    if (it == retained_h_.begin()) return 0;
    if (it == retained_h_.end()) return retained_h_.size() - 1;
    const auto hi = static_cast<std::size_t>(it - retained_h_.begin());
    return (h - retained_h_[hi - 1] <= retained_h_[hi] - h) ? hi - 1 : hi;
  }

  [[nodiscard]] double nearest_lag(double h) const { return retained_h_[nearest_retained(h)]; }

  /// 1-NN covariance estimate at any lag; 0 at and beyond the cutoff.
  [[nodiscard]] double extrapolate(double h) const {
    if (h >= cutoff_) return 0.0;
    return retained_c_[nearest_retained(h)];
  }

  /// 1-NN semivariogram estimate at any lag; 0 at and beyond the cutoff.
  [[nodiscard]] double extrapolate_gamma(double h) const {
    if (h >= cutoff_) return 0.0;
    return retained_g_[nearest_retained(h)];
  }

 private:
  std::vector<LagEstimate> lags_;
  EstimationConfig config_;
  double cutoff_;
  std::size_t n_;
  double nu_;
  std::vector<double> retained_h_, retained_c_, retained_g_;
};

/// Raw pair statistics at one lag: sum X_i X_j, sum (X_i - X_j)^2 over N(h), and
/// sum n_h(i) X_i^2.
struct PairSums {
  double cross = 0.0;
  double increments = 0.0;
  double weighted_squares = 0.0;
};

inline PairSums pair_sums(const Eigen::VectorXd& x, const LagTable& table, std::size_t k) {
  PairSums s;
  for (const auto& [i, j] : table.pairs(k)) {
    s.cross += x(i) * x(j);
    const double dlt = x(i) - x(j);
    s.increments += dlt * dlt;
  }
  const auto deg = table.degrees(k);
  for (std::size_t i = 0; i < deg.size(); ++i) {
    s.weighted_squares += deg[i] * x(static_cast<Eigen::Index>(i)) * x(static_cast<Eigen::Index>(i));
  }
  return s;
}

/// `cutoff` overrides the configured one (used when the cutoff depends on a model range).
inline EmpiricalCovariance empirical_cov(const Eigen::VectorXd& values, const LagTable& table,
                                         const EstimationConfig& config, double cutoff) {
  config.validate();
  detail::require(static_cast<std::size_t>(values.size()) == table.n_sites(),
                  "empirical covariance: field and lag table have different site counts");
  detail::require(cutoff > 0.0, "cutoff lag must be positive");
  const std::size_t n = table.n_sites();
  std::vector<LagEstimate> out(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    auto& e = out[k];
    e.h = table.lag(k);
    e.n_h = table.count(k);
    e.in_cutoff = e.h < cutoff;
    if (config.nu_min) e.retained = static_cast<double>(e.n_h) >= *config.nu_min * static_cast<double>(n);
    const auto s = pair_sums(values, table, k);
    const double nh = static_cast<double>(e.n_h);
    e.chat0 = s.weighted_squares / nh;
    if (e.in_cutoff) {
      e.chat = s.cross / nh;
      e.gammahat = s.increments / (2.0 * nh);
    }
  }
  return EmpiricalCovariance(std::move(out), config, cutoff, n, table.nu(cutoff));
}

inline EmpiricalCovariance empirical_cov(const FieldSample& field, const LagTable& table,
                                         const EstimationConfig& config,
                                         std::optional<CovModel> model = std::nullopt) {
  return empirical_cov(field.values, table, config, config.cutoff(model));
}

inline Eigen::MatrixXd sigma_hat(const EmpiricalCovariance& emp, const SiteSet& inputs) {
  const auto d = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    out(i, i) = emp.extrapolate(0.0);
    for (Eigen::Index j = 0; j < i; ++j) {
      out(i, j) = out(j, i) =
          emp.extrapolate(distance(inputs[static_cast<std::size_t>(i)], inputs[static_cast<std::size_t>(j)]));
    }
  }
  return out;
}

inline Eigen::VectorXd c_hat_vector(const EmpiricalCovariance& emp, const Site& s, const SiteSet& inputs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) out(static_cast<Eigen::Index>(i)) = emp.extrapolate(distance(s, inputs[i]));
  return out;
}

inline Eigen::MatrixXd gamma_hat_matrix(const EmpiricalCovariance& emp, const SiteSet& inputs) {
  const auto d = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      out(i, j) = out(j, i) = emp.extrapolate_gamma(
          distance(inputs[static_cast<std::size_t>(i)], inputs[static_cast<std::size_t>(j)]));
    }
  }
  return out;
}

inline Eigen::VectorXd gamma_hat_vector(const EmpiricalCovariance& emp, const Site& s, const SiteSet& inputs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = emp.extrapolate_gamma(distance(s, inputs[i]));
  }
  return out;
}

inline constexpr std::array<double, 5> kRidgeLadder{0.0, 1e-8, 1e-6, 1e-4, 1e-2};

/// Factorized (Sigma_hat + eta I)^-1 with eta the first rung of {0, 1e-8, ..., 1e-2} * max
/// diagonal that yields a positive definite, accurately invertible system.
inline RegularizedSolver precision_hat(const Eigen::MatrixXd& sigma) {
  detail::require(sigma.rows() > 0, "precision: empty matrix");
  double scale = sigma.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  std::array<double, kRidgeLadder.size()> ladder{};
  for (std::size_t i = 0; i < ladder.size(); ++i) ladder[i] = kRidgeLadder[i] * scale;
  return RegularizedSolver(sigma, ladder);
}

inline void write_empirical_csv(std::ostream& out, const EmpiricalCovariance& emp) {
  out << "h,n_h,c_hat,gamma_hat,c_hat0,in_cutoff\n";
  for (const auto& l : emp.lags()) {
    out << csv::format(l.h) << ',' << l.n_h << ',' << csv::format(l.chat) << ',' << csv::format(l.gammahat) << ','
        << csv::format(l.chat0) << ',' << (l.in_cutoff ? 1 : 0) << '\n';
  }
}

// Monte Carlo checks -------------------------------------------------------------------

struct LagMoments {
  double h = 0.0;
  std::size_t n_h = 0;
  double gamma_true = 0.0;
  double mean = 0.0;
  double variance = 0.0;       // Monte Carlo, divisor reps - 1
  double variance_iid = 0.0;   // 2 gamma(h)^2 / n_h
  double variance_exact = 0.0; // 2 tr((L Sigma)^2) / n_h^2
  double band = 0.0;           // 4 sqrt(variance_iid / reps)
  double mc_se = 0.0;          // sqrt(variance / reps)
  bool within_band = false;
  bool within_mc_band = false;

  [[nodiscard]] double variance_ratio() const { return variance / variance_iid; }
};

struct UnbiasednessReport {
  std::size_t reps = 0;
  double cutoff = 0.0;
  std::vector<LagMoments> lags;  // positive lags only
  std::vector<double> beyond_cutoff_means;
};

/// Mean and variance of gamma_hat(h) over `reps` independent fields on `sites`.
inline UnbiasednessReport unbiasedness_check(const CovModel& model, const SiteSet& sites,
                                             const EstimationConfig& config, std::size_t reps, std::uint64_t seed,
                                             unsigned jobs = 1) {
  detail::require(reps >= 2, "unbiasedness check needs at least two replications");
  const auto table = lag_table(sites);
  const double cutoff = config.cutoff(model);
  const FieldSampler sampler(model, sites);
  const Eigen::MatrixXd sigma = cov_matrix(model, sites);

  const std::size_t n_lags = table.size();
  std::vector<double> gam(reps * n_lags);
  parallel_for(reps, jobs, [&](std::size_t r) {
    const auto x = sampler.draw_values(stream_seed(seed, r, Stream::kTrain));
    const auto emp = empirical_cov(x, table, config, cutoff);
    for (std::size_t k = 0; k < n_lags; ++k) gam[r * n_lags + k] = emp.lags()[k].gammahat;
  });

  UnbiasednessReport rep{reps, cutoff, {}, {}};
  std::vector<double> col(reps);
  for (std::size_t k = 0; k < n_lags; ++k) {
    const double h = table.lag(k);
    if (h == 0.0) continue;
    for (std::size_t r = 0; r < reps; ++r) col[r] = gam[r * n_lags + k];
    if (h >= cutoff) {
      rep.beyond_cutoff_means.push_back(stats::mean(col));
      continue;
    }
    LagMoments m;
    m.h = h;
    m.n_h = table.count(k);
    m.gamma_true = semivariogram(model, h);
    m.mean = stats::mean(col);
    m.variance = stats::variance(col);
    const double nh = static_cast<double>(m.n_h);
    m.variance_iid = 2.0 * m.gamma_true * m.gamma_true / nh;
    const Eigen::MatrixXd ls = lag_graph(sites, table, h).laplacian * sigma;
    m.variance_exact = 2.0 * ls.cwiseProduct(ls.transpose()).sum() / (nh * nh);
    m.band = 4.0 * std::sqrt(m.variance_iid / static_cast<double>(reps));
    m.mc_se = std::sqrt(m.variance / static_cast<double>(reps));
    m.within_band = std::abs(m.mean - m.gamma_true) <= m.band;
    m.within_mc_band = std::abs(m.mean - m.gamma_true) <= 4.0 * m.mc_se;
    rep.lags.push_back(m);
  }
  return rep;
}

/// Sup of |c_hat - c| over the stored lags, their midpoints and the cutoff.
inline double sup_error(const EmpiricalCovariance& emp, const CovModel& model, std::span<const double> probe) {
  double out = 0.0;
  for (double h : probe) out = std::max(out, std::abs(emp.extrapolate(h) - cov(model, h)));
  return out;
}

inline std::vector<double> probe_lags(const LagTable& table, double cutoff) {
  std::vector<double> out(table.lags().begin(), table.lags().end());
  for (std::size_t k = 1; k < table.size(); ++k) out.push_back(0.5 * (table.lag(k - 1) + table.lag(k)));
  if (std::isfinite(cutoff) && cutoff <= table.lags().back()) out.push_back(cutoff);
  std::sort(out.begin(), out.end());
  return out;
}

struct AccuracyPoint {
  int scale = 0;
  std::size_t n = 0;
  double theta_domain = 0.0;
  double cutoff = 0.0;
  double p90 = 0.0;
  double median = 0.0;
  double jitter = 0.0;
};

struct AccuracyReport {
  std::vector<AccuracyPoint> points;
  double slope = 0.0;  // log p90 against log n
};

/// 90th percentile of the sup covariance error at one grid scale.
inline AccuracyPoint estimator_accuracy_at(const CovModel& model, int scale, const EstimationConfig& config,
                                           std::size_t reps, std::uint64_t seed, unsigned jobs = 1) {
  detail::require(reps >= 1, "accuracy study needs at least one replication");
  const auto sites = dyadic_grid(scale);
  const auto table = lag_table(sites);
  const double cutoff = config.cutoff(model);
  const auto probe = probe_lags(table, cutoff);
  const FieldSampler sampler(model, sites);
  std::vector<double> errs(reps);
  parallel_for(reps, jobs, [&](std::size_t r) {
    const auto x = sampler.draw_values(stream_seed(seed, r, Stream::kTrain));
    errs[r] = sup_error(empirical_cov(x, table, config, cutoff), model, probe);
  });
  return {scale,           sites.size(),           model.theta, cutoff, stats::percentile(errs, 0.9),
          stats::median(errs), sampler.jitter_used()};
}

/// Sweep over grid scales; theta is resolved per scale from `spec`.
inline AccuracyReport estimator_accuracy(const ModelSpec& spec, std::span<const int> scales,
                                         const EstimationConfig& config, std::size_t reps, std::uint64_t seed,
                                         unsigned jobs = 1) {
  detail::require(scales.size() >= 2, "accuracy sweep needs at least two grid scales");
  AccuracyReport rep;
  std::vector<double> ns, p90s;
  for (int j : scales) {
    const auto model = spec.resolve(j);
    rep.points.push_back(estimator_accuracy_at(model, j, config, reps, stream_seed(seed, static_cast<std::uint64_t>(j), Stream::kTrain), jobs));
    ns.push_back(static_cast<double>(rep.points.back().n));
    p90s.push_back(rep.points.back().p90);
  }
  rep.slope = stats::loglog_slope(ns, p90s);
  return rep;
}

struct QuadraticFormReport {
  double h = 0.0;
  std::size_t n_h = 0;
  std::size_t reps = 0;
  Eigen::VectorXd ell;  // eigenvalues of L Sigma, ascending
  Eigen::VectorXd rho;  // eigenvalues of D Sigma, ascending
  double min_ell = 0.0, min_rho = 0.0;
  std::size_t positive_ell = 0, positive_rho = 0;
  std::size_t laplacian_rank = 0, nonzero_degrees = 0;
  double xi1_laplacian = 0.0;
  double max_degree = 0.0;
  double gamma_true = 0.0;
  double gamma_theory_mean = 0.0, gamma_theory_var = 0.0;
  double gamma_mean = 0.0, gamma_var = 0.0;
  double c0_theory_mean = 0.0, c0_theory_var = 0.0;
  double c0_mean = 0.0, c0_var = 0.0;
  double ks_gamma = 0.0, ks_c0 = 0.0;

  /// No eigenvalue below -1e-8, and exactly rank-many of them positive.
  [[nodiscard]] bool positivity_ok() const {
    return min_ell >= -1e-8 && min_rho >= -1e-8 && positive_ell == laplacian_rank && positive_rho == nonzero_degrees;
  }
  [[nodiscard]] bool eigen_bound_ok() const { return xi1_laplacian <= 2.0 * max_degree * (1.0 + 1e-12); }
};

namespace detail {

inline std::size_t count_above(const Eigen::VectorXd& v, double tol) {
  return static_cast<std::size_t>((v.array() > tol).count());
}

/// Draws (1/n_h) sum_i w_i Z_i^2 with Z_i i.i.d. N(0,1).
inline std::vector<double> weighted_chi2_sample(const Eigen::VectorXd& w, double nh, std::size_t reps,
                                                std::uint64_t seed) {
  auto rng = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(reps);
  for (auto& v : out) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double z = normal(rng);
      s += w(i) * z * z;
    }
    v = s / nh;
  }
  return out;
}

}  // namespace detail

/// Weighted chi-square laws of gamma_hat(h) and c_hat_h(0) against Monte Carlo draws.
/// Throws NumericalError if an eigenvalue is below -1e-8.
inline QuadraticFormReport quadratic_form_check(const CovModel& model, const SiteSet& sites, double h,
                                                std::size_t reps, std::uint64_t seed, unsigned jobs = 1) {
  detail::require(reps >= 2, "quadratic form check needs at least two replications");
  const auto table = lag_table(sites);
  const auto g = lag_graph(sites, table, h);
  const std::size_t k = *table.find(h);
  const FieldSampler sampler(model, sites);
  const Eigen::MatrixXd& c = sampler.factor().lower;

  QuadraticFormReport rep;
  rep.h = table.lag(k);
  rep.n_h = table.count(k);
  rep.reps = reps;
  const double nh = static_cast<double>(rep.n_h);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_l(c.transpose() * g.laplacian * c, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_d(c.transpose() * g.degrees.asDiagonal() * c,
                                                      Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_graph(g.laplacian, Eigen::EigenvaluesOnly);
  rep.ell = es_l.eigenvalues();
  rep.rho = es_d.eigenvalues();
  rep.min_ell = rep.ell.minCoeff();
  rep.min_rho = rep.rho.minCoeff();
  if (rep.min_ell < -1e-8 || rep.min_rho < -1e-8) {
    throw NumericalError("quadratic form at lag " + csv::format(rep.h) + " has a negative eigenvalue " +
                         csv::format(std::min(rep.min_ell, rep.min_rho)));
  }
  const double tol_l = 1e-9 * std::max(1.0, rep.ell.maxCoeff());
  const double tol_d = 1e-9 * std::max(1.0, rep.rho.maxCoeff());
  rep.positive_ell = detail::count_above(rep.ell, tol_l);
  rep.positive_rho = detail::count_above(rep.rho, tol_d);
  rep.xi1_laplacian = es_graph.eigenvalues().maxCoeff();
  rep.laplacian_rank = detail::count_above(es_graph.eigenvalues(), 1e-9 * std::max(1.0, rep.xi1_laplacian));
  rep.max_degree = g.degrees.maxCoeff();
  rep.nonzero_degrees = static_cast<std::size_t>((g.degrees.array() > 0.0).count());

  rep.gamma_true = semivariogram(model, rep.h);
  rep.gamma_theory_mean = rep.ell.sum() / nh;
  rep.gamma_theory_var = 2.0 * rep.ell.squaredNorm() / (nh * nh);
  rep.c0_theory_mean = rep.rho.sum() / nh;
  rep.c0_theory_var = 2.0 * rep.rho.squaredNorm() / (nh * nh);

  std::vector<double> gam(reps), c0(reps);
  parallel_for(reps, jobs, [&](std::size_t r) {
    const auto x = sampler.draw_values(stream_seed(seed, r, Stream::kTrain));
    const auto s = pair_sums(x, table, k);
    gam[r] = s.increments / (2.0 * nh);
    c0[r] = s.weighted_squares / nh;
  });
  rep.gamma_mean = stats::mean(gam);
  rep.gamma_var = stats::variance(gam);
  rep.c0_mean = stats::mean(c0);
  rep.c0_var = stats::variance(c0);
  rep.ks_gamma = stats::ks_two_sample(gam, detail::weighted_chi2_sample(rep.ell, nh, reps, stream_seed(seed, 0, Stream::kOracle)));
  rep.ks_c0 = stats::ks_two_sample(c0, detail::weighted_chi2_sample(rep.rho, nh, reps, stream_seed(seed, 1, Stream::kOracle)));
  return rep;
}

}  // namespace skrig
