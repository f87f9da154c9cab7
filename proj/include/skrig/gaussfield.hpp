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

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "skrig/covmodel.hpp"
#include "skrig/csv.hpp"
#include "skrig/errors.hpp"
#include "skrig/geometry.hpp"
#include "skrig/rng.hpp"

namespace skrig {

/// One realization of the field at a site set.
struct FieldSample {
  SiteSet sites;
  Eigen::VectorXd values;
  std::uint64_t seed = 0;
};

/// Lower factor of Sigma + jitter * I.
struct CholFactor {
  Eigen::MatrixXd lower;
  double jitter_used = 0.0;
};

inline constexpr std::array<double, 5> kJitterLadder{0.0, 1e-12, 1e-10, 1e-8, 1e-6};

inline CholFactor factorize(const Eigen::MatrixXd& sigma) {
  detail::require(sigma.rows() == sigma.cols(), "factorize: matrix must be square");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  detail::require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                  "factorize: matrix must be symmetric");
  const auto n = sigma.rows();
  for (double jitter : kJitterLadder) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  throw NumericalError("covariance matrix is not positive definite even with jitter " +
                       csv::format(kJitterLadder.back()) + "; smallest eigenvalue " +
                       csv::format(eig.eigenvalues().minCoeff()));
}

/// Exact sampler for a fixed (model, sites): the factor is computed once and every draw
/// is factor * z with z i.i.d. N(0,1) from the seeded engine.
class FieldSampler {
 public:
  FieldSampler(const CovModel& model, SiteSet sites)
      : sites_(std::move(sites)), factor_(factorize(cov_matrix(model, sites_))) {}

  [[nodiscard]] const SiteSet& sites() const noexcept { return sites_; }
  [[nodiscard]] double jitter_used() const noexcept { return factor_.jitter_used; }
  [[nodiscard]] const CholFactor& factor() const noexcept { return factor_; }

  [[nodiscard]] Eigen::VectorXd draw_values(std::uint64_t seed) const {
    auto rng = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(factor_.lower.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return factor_.lower.triangularView<Eigen::Lower>() * z;
  }

  [[nodiscard]] FieldSample draw(std::uint64_t seed) const { return {sites_, draw_values(seed), seed}; }

 private:
  SiteSet sites_;
  CholFactor factor_;
};

inline FieldSample simulate(const CovModel& model, const SiteSet& sites, std::uint64_t seed) {
  return FieldSampler(model, sites).draw(seed);
}

/// Independent training draw X' on `train_sites` and test draw X on `test_sites`, from the
/// train and test streams of `seed`. The test draw is one joint sample over all test sites.
inline std::pair<FieldSample, FieldSample> simulate_pair(const CovModel& model, const SiteSet& train_sites,
                                                         const SiteSet& test_sites, std::uint64_t seed) {
  return {FieldSampler(model, train_sites).draw(stream_seed(seed, 0, Stream::kTrain)),
          FieldSampler(model, test_sites).draw(stream_seed(seed, 0, Stream::kTest))};
}

inline void write_field_csv(std::ostream& out, const FieldSample& f) {
  out << "index,x,y,value\n";
  for (std::size_t i = 0; i < f.sites.size(); ++i) {
    out << (i + 1) << ',' << csv::format(f.sites[i].x) << ',' << csv::format(f.sites[i].y) << ','
        << csv::format(f.values(static_cast<Eigen::Index>(i))) << '\n';
  }
}

inline FieldSample read_field_csv(std::istream& in, const std::string& source = "field.csv") {
  const auto table = csv::read(in, source);
  detail::require(table.header == std::vector<std::string>{"index", "x", "y", "value"},
                  source + ": expected header index,x,y,value");
  std::vector<Site> pts;
  Eigen::VectorXd values(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = source + ":" + std::to_string(table.line_numbers[r]);
    pts.push_back({csv::parse_double(row[1], where), csv::parse_double(row[2], where)});
    values(static_cast<Eigen::Index>(r)) = csv::parse_double(row[3], where);
  }
  return {SiteSet(std::move(pts)), std::move(values), 0};
}

}  // namespace skrig
