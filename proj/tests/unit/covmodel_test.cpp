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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "skrig/covmodel.hpp"
#include "skrig/grid.hpp"

#include "skrig/gaussfield.hpp"

namespace skrig {
namespace {

std::vector<CovModel> all_families(double theta) {
  return {CovModel(Family::kTPL, theta),         CovModel(Family::kGaussian, theta),
          CovModel(Family::kCubic, theta),       CovModel(Family::kSpherical, theta),
          CovModel(Family::kExponential, theta), CovModel(Family::kMatern, theta, 1.5),
          CovModel(Family::kMatern, theta, 2.5), CovModel(Family::kMatern, theta, 0.7)};
}

TEST(Cov, BasicValues) {
  const CovModel tpl(Family::kTPL, 5.0);
  EXPECT_EQ(cov(tpl, 0.0), 1.0);
  EXPECT_EQ(cov(tpl, 5.0), 0.0);
  EXPECT_EQ(cov(tpl, 7.0), 0.0);
  EXPECT_NEAR(cov(tpl, 2.0), std::pow(0.6, 1.5), 1e-15);
  EXPECT_NEAR(cov(CovModel(Family::kGaussian, 5.0), 5.0), std::exp(-1.0), 1e-15);
  const double r = 2.0 / 5.0;
  EXPECT_NEAR(cov(CovModel(Family::kMatern, 5.0, 1.5), 2.0), (1 + std::sqrt(3.0) * r) * std::exp(-std::sqrt(3.0) * r),
              1e-15);
  EXPECT_THROW(cov(tpl, -0.1), ValidationError);
  EXPECT_THROW(semivariogram(tpl, -0.1), ValidationError);
}

TEST(Cov, ParameterValidation) {
  EXPECT_THROW(CovModel(Family::kTPL, 0.0), ValidationError);
  EXPECT_THROW(CovModel(Family::kMatern, 1.0, -1.0), ValidationError);
  EXPECT_THROW(CovModel(Family::kTPL, 1.0, 1.5, 0.0), ValidationError);
  EXPECT_THROW(CovModel(Family::kTPL, 1.0, 1.5, 1.5), ValidationError);
  EXPECT_THROW(parse_family("powerlaw"), ValidationError);
}

TEST(Cov, UnitVarianceMonotoneAndSemivariogram) {
  for (double theta : {0.2, 1.0, 5.0}) {
    for (const auto& m : all_families(theta)) {
      EXPECT_EQ(cov(m, 0.0), 1.0) << family_name(m.family);
      double prev = 1.0;
      for (int i = 0; i <= 2000; ++i) {
        const double h = theta * i / 2000.0;
        const double c = cov(m, h);
        EXPECT_LE(c, prev + 1e-14) << family_name(m.family) << " h=" << h;
        EXPECT_GE(c, -1.0);
        EXPECT_EQ(semivariogram(m, h) + c, cov(m, 0.0));
        prev = c;
      }
      if (m.compact()) {
        EXPECT_EQ(cov(m, theta), 0.0);
        EXPECT_EQ(cov(m, 1.5 * theta), 0.0);
        EXPECT_EQ(semivariogram(m, 2.0 * theta), 1.0);
      }
    }
  }
}

TEST(Cov, SemivariogramValues) {
  EXPECT_EQ(semivariogram(CovModel(Family::kTPL, 5.0), 0.0), 0.0);
  EXPECT_EQ(semivariogram(CovModel(Family::kTPL, 5.0), 6.0), 1.0);
  EXPECT_NEAR(semivariogram(CovModel(Family::kGaussian, 5.0), 5.0), 1.0 - std::exp(-1.0), 1e-15);
}

TEST(Cov, GeneralMaternMatchesClosedForms) {
  for (double nu : {1.5, 2.5}) {
    const CovModel closed(Family::kMatern, 0.3, nu);
    for (double h : {1e-6, 0.01, 0.1, 0.3, 0.8, 2.0}) {
      EXPECT_NEAR(detail::matern_general(h / 0.3, nu), cov(closed, h), 1e-12) << "nu=" << nu << " h=" << h;
    }
  }
  // nu = 1/2 is the exponential model.
  for (double h : {0.05, 0.2, 1.0}) {
    EXPECT_NEAR(cov(CovModel(Family::kMatern, 0.4, 0.5), h), std::exp(-h / 0.4), 1e-12);
  }
}

TEST(Cov, Anisotropy) {
  const CovModel iso(Family::kGaussian, 0.5);
  EXPECT_EQ(cov_vec(iso, 0.3, 0.4), cov(iso, std::hypot(0.3, 0.4)));
  const CovModel an(Family::kGaussian, 0.5, 1.5, 0.5);
  for (double h : {0.05, 0.1, 0.2}) {
    EXPECT_EQ(cov_vec(an, h, 0.0), cov(iso, h));
    EXPECT_NEAR(cov_vec(an, 0.0, h), cov(iso, 2.0 * h), 1e-15);
    // Reference metric: sqrt(dx^2 + (dy/alpha)^2).
    EXPECT_NEAR(cov_vec(an, h, h), std::exp(-(h * h + 4.0 * h * h) / 0.25), 1e-15);
  }
}

TEST(CovMatrix, Structure) {
  const CovModel tpl(Family::kTPL, 0.2);
  EXPECT_EQ(cov_matrix(tpl, SiteSet({{0.5, 0.5}})), Eigen::MatrixXd::Ones(1, 1));
  EXPECT_EQ(cov_matrix(tpl, SiteSet({{0.0, 0.0}, {0.3, 0.0}})), Eigen::MatrixXd::Identity(2, 2));

  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u;
  for (const auto& m : all_families(0.4)) {
    std::vector<Site> pts;
    for (int i = 0; i < 4; ++i) pts.push_back({u(rng), u(rng)});
    const SiteSet s(pts);
    const auto c = cov_matrix(m, s);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double h = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
        EXPECT_NEAR(c(i, j), cov(m, h), 1e-15);
      }
    }
  }
}

TEST(CovVector, Components) {
  const CovModel tpl(Family::kTPL, 0.2);
  const SiteSet s({{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.2}});
  EXPECT_EQ(cov_vector(tpl, s[1], s)(1), 1.0);
  EXPECT_EQ(cov_vector(tpl, {0.1, 0.9}, s), Eigen::VectorXd::Zero(3));
  const Site q{0.45, 0.4};
  const auto v = cov_vector(CovModel(Family::kExponential, 0.3), q, s);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(v(i), std::exp(-distance(q, s[static_cast<std::size_t>(i)]) / 0.3), 1e-15);
}

TEST(CovMatrix, FactorizesOnExperimentGrids) {
  for (int scale : {1, 2, 3}) {
    const auto g = dyadic_grid(scale);
    for (double cells : {2.5, 5.0, 7.5, 10.0}) {
      for (const auto& m : all_families(cells * std::ldexp(1.0, -scale))) {
        EXPECT_NO_THROW(factorize(cov_matrix(m, g))) << family_name(m.family) << " J=" << scale << " theta=" << cells;
      }
    }
  }
}

TEST(ModelSpec, UnitsAndJson) {
  const auto spec = parse_model_spec(nlohmann::json{{"family", "tpl"}, {"theta", 5}});
  EXPECT_EQ(spec.units, ThetaUnits::kCells);
  EXPECT_DOUBLE_EQ(spec.theta_domain(3), 5.0 / 8.0);
  auto ev = parse_model_spec(nlohmann::json{{"family", "gaussian"}, {"theta", 2.5}, {"theta_units", "eval_cells"}});
  EXPECT_DOUBLE_EQ(ev.theta_domain(3, 1681), 2.5 / 41.0);
  EXPECT_THROW((void)ev.theta_domain(3), ValidationError);
  EXPECT_DOUBLE_EQ(parse_model_spec(nlohmann::json{{"family", "tpl"}, {"theta", 0.3}, {"theta_units", "domain"}})
                       .theta_domain(4),
                   0.3);
  EXPECT_THROW(parse_model_spec(nlohmann::json{{"family", "tpl"}}), ValidationError);
  EXPECT_THROW(parse_model_spec(nlohmann::json{{"family", "tpl"}, {"theta", -1}}), ValidationError);
  EXPECT_THROW(parse_model_spec(nlohmann::json{{"family", "tpl"}, {"theta", 1}, {"theta_units", "km"}}),
               ValidationError);
  const auto round = parse_model_spec(to_json(ev));
  EXPECT_EQ(round.family, ev.family);
  EXPECT_EQ(round.units, ev.units);
}

}  // namespace
}  // namespace skrig
