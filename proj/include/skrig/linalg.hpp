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
#include <span>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "skrig/csv.hpp"
#include "skrig/errors.hpp"

namespace skrig {

/// Cholesky solver for A + eta * I, where eta is the first rung of a ladder at which the
/// factorization succeeds and its explicit inverse P satisfies |(A + eta I) P - I|_max <= 1e-8.
class RegularizedSolver {
 public:
  static constexpr double kResidualTolerance = 1e-8;

  RegularizedSolver() = default;

  /// `ladder` holds absolute ridge values; the first one is usually 0.
  RegularizedSolver(const Eigen::MatrixXd& a, std::span<const double> ladder) {
    detail::require(a.rows() == a.cols(), "solver: matrix must be square");
    detail::require(a.rows() > 0, "solver: matrix must be non-empty");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    detail::require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "solver: matrix must be symmetric");
    const auto n = a.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    double last_residual = INFINITY;
    for (double eta : ladder) {
      Eigen::MatrixXd shifted = a + eta * id;
      Eigen::LLT<Eigen::MatrixXd> llt(shifted);
      if (llt.info() != Eigen::Success) continue;
      Eigen::MatrixXd inv = llt.solve(id);
      last_residual = (shifted * inv - id).cwiseAbs().maxCoeff();
      if (!(last_residual <= kResidualTolerance)) continue;
      llt_ = std::move(llt);
      inverse_ = std::move(inv);
      eta_ = eta;
      return;
    }
    throw NumericalError("matrix could not be regularized to a well-conditioned positive definite system" +
                         std::string(std::isfinite(last_residual)
                                         ? " (last inverse residual " + csv::format(last_residual) + ")"
                                         : ""));
  }

  [[nodiscard]] double eta() const noexcept { return eta_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return inverse_.rows(); }
  [[nodiscard]] const Eigen::MatrixXd& inverse() const noexcept { return inverse_; }

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }
  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd inverse_;
  double eta_ = 0.0;
};

}  // namespace skrig
