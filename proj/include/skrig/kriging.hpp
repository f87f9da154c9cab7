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

// Simple and ordinary kriging predictors and their risk functionals.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Core>
#include <Eigen/LU>

#include "skrig/covmodel.hpp"
#include "skrig/csv.hpp"
#include "skrig/errors.hpp"
#include "skrig/estimate.hpp"
#include "skrig/gaussfield.hpp"
#include "skrig/geometry.hpp"
#include "skrig/linalg.hpp"

namespace skrig {

enum class PredictorMode { kTheoretical, kEmpirical };

inline const char* mode_name(PredictorMode m) { return m == PredictorMode::kTheoretical ? "theoretical" : "empirical"; }

/// Kriging weights at one site. `multiplier` is the Lagrange multiplier of the ordinary
/// system and 0 for simple kriging.
struct Weights {
  Eigen::VectorXd lambda;
  double multiplier = 0.0;
};

/// A solved kriging system over fixed input sites.
///
/// Theoretical predictors take covariances from a model, empirical ones from an
/// EmpiricalCovariance only. When the system needed a ridge eta, eta is also added to the
/// zero-lag entries of the right-hand side, so the predictor still interpolates its inputs.
class KrigingPredictor {
 public:
  static KrigingPredictor theoretical(const CovModel& model, SiteSet inputs,
                                      KrigingVariant variant = KrigingVariant::kSimple) {
    return KrigingPredictor(PredictorMode::kTheoretical, model, std::move(inputs), variant);
  }

  static KrigingPredictor empirical(const EmpiricalCovariance& emp, SiteSet inputs,
                                    KrigingVariant variant = KrigingVariant::kSimple) {
    return KrigingPredictor(PredictorMode::kEmpirical, emp, std::move(inputs), variant);
  }

  [[nodiscard]] PredictorMode mode() const noexcept { return mode_; }
  [[nodiscard]] KrigingVariant variant() const noexcept { return variant_; }
  [[nodiscard]] const SiteSet& inputs() const noexcept { return inputs_; }
  [[nodiscard]] std::size_t d() const noexcept { return inputs_.size(); }
  [[nodiscard]] double regularization() const noexcept { return eta_; }

  [[nodiscard]] Weights weights_full(const Site& s) const {
    const auto d = static_cast<Eigen::Index>(inputs_.size());
    if (variant_ == KrigingVariant::kSimple) return {simple_solver_.solve(rhs(s)), 0.0};
    Eigen::VectorXd b(d + 1);
    b.head(d) = rhs(s);
    b(d) = 1.0;
    const Eigen::VectorXd x = ordinary_inverse_ * b;
    return {x.head(d), x(d)};
  }

  [[nodiscard]] Eigen::VectorXd weights(const Site& s) const { return weights_full(s).lambda; }

  /// d x N matrix whose column t holds the weights at targets[t].
  [[nodiscard]] Eigen::MatrixXd weight_matrix(const SiteSet& targets) const {
    const auto d = static_cast<Eigen::Index>(inputs_.size());
    const auto nt = static_cast<Eigen::Index>(targets.size());
    if (variant_ == KrigingVariant::kSimple) {
      Eigen::MatrixXd b(d, nt);
      for (Eigen::Index t = 0; t < nt; ++t) b.col(t) = rhs(targets[static_cast<std::size_t>(t)]);
      return simple_solver_.solve(b);
    }
    Eigen::MatrixXd b(d + 1, nt);
    for (Eigen::Index t = 0; t < nt; ++t) {
      b.col(t).head(d) = rhs(targets[static_cast<std::size_t>(t)]);
      b(d, t) = 1.0;
    }
    return (ordinary_inverse_ * b).topRows(d);
  }

  [[nodiscard]] double predict(const Site& s, const Eigen::VectorXd& observations) const {
    check_observations(observations);
    return weights(s).dot(observations);
  }

  [[nodiscard]] Eigen::VectorXd predict(const SiteSet& targets, const Eigen::VectorXd& observations) const {
    check_observations(observations);
    return weight_matrix(targets).transpose() * observations;
  }

 private:
  using Source = std::variant<CovModel, EmpiricalCovariance>;

  KrigingPredictor(PredictorMode mode, Source source, SiteSet inputs, KrigingVariant variant)
      : mode_(mode), variant_(variant), source_(std::move(source)), inputs_(std::move(inputs)) {
    detail::require(!inputs_.empty(), "kriging needs at least one input site");
    if (variant_ == KrigingVariant::kSimple) {
      build_simple();
    } else {
      build_ordinary();
    }
  }

  // Covariance (simple) or semivariogram (ordinary) between two sites, from the source.
  [[nodiscard]] double structure(const Site& a, const Site& b) const {
    if (const auto* m = std::get_if<CovModel>(&source_)) {
      const double c = cov_between(*m, a, b);
      return variant_ == KrigingVariant::kSimple ? c : cov_vec(*m, 0.0, 0.0) - c;
    }
    const auto& emp = std::get<EmpiricalCovariance>(source_);
    const double h = distance(a, b);
    return variant_ == KrigingVariant::kSimple ? emp.extrapolate(h) : emp.extrapolate_gamma(h);
  }

  [[nodiscard]] Eigen::MatrixXd system_matrix() const {
    const auto d = static_cast<Eigen::Index>(inputs_.size());
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        a(i, j) = a(j, i) = structure(inputs_[static_cast<std::size_t>(i)], inputs_[static_cast<std::size_t>(j)]);
      }
    }
    return a;
  }

  // Right-hand side at s. The ridge enters with the sign it has in the system matrix.
  [[nodiscard]] Eigen::VectorXd rhs(const Site& s) const {
    Eigen::VectorXd b(static_cast<Eigen::Index>(inputs_.size()));
    const double nugget = variant_ == KrigingVariant::kSimple ? eta_ : -eta_;
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
      double v = structure(s, inputs_[i]);
      if (eta_ != 0.0 && s == inputs_[i]) v += nugget;
      b(static_cast<Eigen::Index>(i)) = v;
    }
    return b;
  }

  void build_simple() {
    const Eigen::MatrixXd a = system_matrix();
    if (mode_ == PredictorMode::kTheoretical) {
      simple_solver_ = RegularizedSolver(a, kJitterLadder);
    } else {
      simple_solver_ = precision_hat(a);
    }
    eta_ = simple_solver_.eta();
  }

  // [Gamma - eta I, 1; 1^T, 0] [lambda; mu] = [gamma(s) - eta 1{s = s_i}; 1]
  void build_ordinary() {
    const Eigen::MatrixXd gam = system_matrix();
    const auto d = gam.rows();
    double scale = gam.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) scale = 1.0;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d + 1, d + 1);
    for (double rung : kRidgeLadder) {
      const double eta = rung * scale;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d + 1, d + 1);
      a.topLeftCorner(d, d) = gam - eta * Eigen::MatrixXd::Identity(d, d);
      a.topRightCorner(d, 1).setOnes();
      a.bottomLeftCorner(1, d).setOnes();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (!lu.isInvertible()) continue;
      Eigen::MatrixXd inv = lu.inverse();
      if (!((a * inv - id).cwiseAbs().maxCoeff() <= RegularizedSolver::kResidualTolerance)) continue;
      ordinary_inverse_ = std::move(inv);
      eta_ = eta;
      return;
    }
    throw NumericalError("ordinary kriging system is singular even after regularization");
  }

  void check_observations(const Eigen::VectorXd& obs) const {
    detail::require(static_cast<std::size_t>(obs.size()) == inputs_.size(),
                    "expected " + std::to_string(inputs_.size()) + " observations, got " + std::to_string(obs.size()));
  }

  PredictorMode mode_;
  KrigingVariant variant_;
  Source source_;
  SiteSet inputs_;
  RegularizedSolver simple_solver_;
  Eigen::MatrixXd ordinary_inverse_;
  double eta_ = 0.0;
};

/// d x N matrix of true covariances c(s_t - s_i) between inputs and targets.
inline Eigen::MatrixXd cross_cov(const CovModel& model, const SiteSet& inputs, const SiteSet& targets) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(targets.size()));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = cov_between(model, targets[t], inputs[i]);
    }
  }
  return out;
}

/// c(0) - c_d(s)^T Sigma^-1 c_d(s).
inline double pointwise_mse_theoretical(const CovModel& model, const Site& s, const SiteSet& inputs) {
  const RegularizedSolver solver(cov_matrix(model, inputs), kJitterLadder);
  const Eigen::VectorXd c = cov_vector(model, s, inputs);
  return cov_vec(model, 0.0, 0.0) - c.dot(solver.solve(c));
}

/// Exact conditional MSE c(0) + L^T Sigma L - 2 c^T L of the weights in column t of `w`,
/// under the true model.
inline Eigen::VectorXd conditional_mse(const CovModel& model, const SiteSet& inputs, const SiteSet& targets,
                                       const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd sigma = cov_matrix(model, inputs);
  const Eigen::MatrixXd c = cross_cov(model, inputs, targets);
  const double c0 = cov_vec(model, 0.0, 0.0);
  const Eigen::MatrixXd sw = sigma * w;
  Eigen::VectorXd out(w.cols());
  for (Eigen::Index t = 0; t < w.cols(); ++t) out(t) = c0 + w.col(t).dot(sw.col(t)) - 2.0 * c.col(t).dot(w.col(t));
  return out;
}

inline Eigen::VectorXd mse_surface(const CovModel& model, const KrigingPredictor& pred, const SiteSet& grid) {
  return conditional_mse(model, pred.inputs(), grid, pred.weight_matrix(grid));
}

/// Grid average of the conditional MSE; the true model is used whatever built `pred`.
inline double imse(const CovModel& model, const KrigingPredictor& pred, const SiteSet& eval_grid) {
  detail::require(!eval_grid.empty(), "imse: evaluation grid is empty");
  return mse_surface(model, pred, eval_grid).mean();
}

/// Weights-only variant, for arbitrary linear rules.
inline double imse(const CovModel& model, const SiteSet& inputs, const SiteSet& eval_grid, const Eigen::MatrixXd& w) {
  detail::require(!eval_grid.empty(), "imse: evaluation grid is empty");
  return conditional_mse(model, inputs, eval_grid, w).mean();
}

struct ExcessRisk {
  double difference = 0.0;  // imse(emp) - imse(theo)
  double integrand = 0.0;   // grid mean of L^T S L - L*^T S L* - 2 c^T (L - L*)
  double imse_empirical = 0.0;
  double imse_theoretical = 0.0;

  [[nodiscard]] bool forms_agree(double tol = 1e-8) const { return std::abs(difference - integrand) <= tol; }
};

inline ExcessRisk excess_risk(const CovModel& model, const Eigen::MatrixXd& w_emp, const Eigen::MatrixXd& w_theo,
                              const SiteSet& inputs, const SiteSet& eval_grid) {
  detail::require(!eval_grid.empty(), "excess risk: evaluation grid is empty");
  detail::require(w_emp.rows() == w_theo.rows() && w_emp.cols() == w_theo.cols(),
                  "excess risk: weight matrices differ in shape");
  const Eigen::MatrixXd sigma = cov_matrix(model, inputs);
  const Eigen::MatrixXd c = cross_cov(model, inputs, eval_grid);
  const Eigen::MatrixXd se = sigma * w_emp, st = sigma * w_theo;
  ExcessRisk r;
  r.imse_empirical = conditional_mse(model, inputs, eval_grid, w_emp).mean();
  r.imse_theoretical = conditional_mse(model, inputs, eval_grid, w_theo).mean();
  r.difference = r.imse_empirical - r.imse_theoretical;
  double acc = 0.0;
  for (Eigen::Index t = 0; t < w_emp.cols(); ++t) {
    acc += w_emp.col(t).dot(se.col(t)) - w_theo.col(t).dot(st.col(t)) - 2.0 * c.col(t).dot(w_emp.col(t) - w_theo.col(t));
  }
  r.integrand = acc / static_cast<double>(w_emp.cols());
  return r;
}

inline ExcessRisk excess_risk(const CovModel& model, const KrigingPredictor& emp, const KrigingPredictor& theo,
                              const SiteSet& eval_grid) {
  detail::require(emp.inputs() == theo.inputs(), "excess risk: predictors use different input sites");
  return excess_risk(model, emp.weight_matrix(eval_grid), theo.weight_matrix(eval_grid), emp.inputs(), eval_grid);
}

/// (1/N) sum (prediction - truth)^2.
inline double amse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
  detail::require(predictions.size() == truth.size(), "amse: predictions and truth differ in length");
  detail::require(predictions.size() > 0, "amse: empty input");
  return (predictions - truth).squaredNorm() / static_cast<double>(predictions.size());
}

inline void write_prediction_csv(std::ostream& out, const SiteSet& sites, const Eigen::VectorXd& values,
                                 const std::string& column = "prediction") {
  detail::require(static_cast<std::size_t>(values.size()) == sites.size(), "surface and sites differ in length");
  out << "x,y," << column << '\n';
  for (std::size_t i = 0; i < sites.size(); ++i) {
    out << csv::format(sites[i].x) << ',' << csv::format(sites[i].y) << ','
        << csv::format(values(static_cast<Eigen::Index>(i))) << '\n';
  }
}

/// Binary 8-bit PGM of a side x side surface sampled on `regular_grid(side)` (x slow).
/// Columns run along x, rows along y from top (y = 1) to bottom; pixel = round(255 v / max).
inline void write_pgm(std::ostream& out, const Eigen::VectorXd& surface, int side) {
  detail::require(side >= 2 && surface.size() == static_cast<Eigen::Index>(side) * side,
                  "raster size does not match its side length");
  const double vmax = std::max(0.0, surface.maxCoeff());
  out << "P5\n# max-normalized: value = pixel / 255 * " << csv::format(vmax) << '\n'
      << side << ' ' << side << "\n255\n";
  for (int row = 0; row < side; ++row) {
    const int l = side - 1 - row;
    for (int k = 0; k < side; ++k) {
      const double v = surface(static_cast<Eigen::Index>(k) * side + l);
      const double scaled = vmax > 0.0 ? std::clamp(v / vmax, 0.0, 1.0) : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * scaled))));
    }
  }
}

}  // namespace skrig
