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
#include <sstream>

#include <Eigen/LU>

#include "skrig/kriging.hpp"

namespace skrig {
namespace {

SiteSet random_sites(int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  std::vector<Site> pts;
  for (int i = 0; i < d; ++i) pts.push_back({u(rng), u(rng)});
  return SiteSet(pts);
}

// Explicit 3x3 inverse via cofactors.
Eigen::Matrix3d cofactor_inverse(const Eigen::Matrix3d& a) {
  Eigen::Matrix3d c;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int r0 = (i + 1) % 3, r1 = (i + 2) % 3, c0 = (j + 1) % 3, c1 = (j + 2) % 3;
      c(j, i) = a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0);
    }
  }
  const double det = a(0, 0) * c(0, 0) + a(0, 1) * c(1, 0) + a(0, 2) * c(2, 0);
  return c / det;
}

TEST(SimpleKriging, ScalarSystem) {
  const CovModel m(Family::kGaussian, 0.4);
  const SiteSet in({{0.2, 0.3}});
  const auto p = KrigingPredictor::theoretical(m, in);
  const Site s{0.5, 0.7};
  EXPECT_NEAR(p.weights(s)(0), cov(m, distance(s, in[0])), 1e-15);
  const double h = distance(s, in[0]);
  EXPECT_NEAR(pointwise_mse_theoretical(m, s, in), 1.0 - cov(m, h) * cov(m, h), 1e-15);
}

TEST(SimpleKriging, MatchesCofactorOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CovModel m(Family::kExponential, 0.5);
    const auto in = random_sites(3, seed);
    const auto p = KrigingPredictor::theoretical(m, in);
    const Eigen::Matrix3d inv = cofactor_inverse(cov_matrix(m, in));
    const Site s{0.37, 0.61};
    const Eigen::Vector3d expected = inv * cov_vector(m, s, in);
    EXPECT_LE((p.weights(s) - Eigen::VectorXd(expected)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SimpleKriging, ConditionalExpectationCoefficients) {
  // Block formula for E[X_s | X_1..X_d]: the Schur complement of the joint covariance.
  const CovModel m(Family::kMatern, 0.3, 2.5);
  for (int d = 1; d <= 3; ++d) {
    const auto in = random_sites(d, 100 + static_cast<std::uint64_t>(d));
    const Site s{0.5, 0.5};
    std::vector<Site> all{s};
    all.insert(all.end(), in.begin(), in.end());
    const Eigen::MatrixXd joint = cov_matrix(m, SiteSet(all));
    const Eigen::MatrixXd prec = joint.inverse();
    // E[X_s | rest] = -(P_ss)^-1 P_s,rest x_rest
    const Eigen::VectorXd coef = -prec.block(0, 1, 1, d).transpose() / prec(0, 0);
    EXPECT_LE((KrigingPredictor::theoretical(m, in).weights(s) - coef).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(pointwise_mse_theoretical(m, s, in), 1.0 / prec(0, 0), 1e-10);
  }
}

TEST(Kriging, ExactInterpolationAllVariants) {
  const auto g = dyadic_grid(3);
  const auto t = lag_table(g);
  std::vector<CovModel> models{CovModel(Family::kTPL, 0.5),         CovModel(Family::kGaussian, 0.2),
                               CovModel(Family::kCubic, 0.5),       CovModel(Family::kSpherical, 0.5),
                               CovModel(Family::kExponential, 0.3), CovModel(Family::kMatern, 0.2, 1.5)};
  auto check = [](const KrigingPredictor& p, const SiteSet& in, const Eigen::VectorXd& x) {
    const auto pred = p.predict(in, x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      EXPECT_LE(std::abs(pred(i) - x(i)), 1e-8 * (1 + std::abs(x(i))));
      EXPECT_LE(std::abs(p.predict(in[static_cast<std::size_t>(i)], x) - x(i)), 1e-8 * (1 + std::abs(x(i))));
    }
  };
  int built = 0;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    for (std::uint64_t rep = 0; rep < 4; ++rep) {
      const auto in = random_sites(6, 10 * k + rep);
      const auto x = simulate(m, in, k).values;
      const auto emp = empirical_cov(simulate(m, g, 50 + k + rep), t, EstimationConfig::at_support(), m);
      for (auto variant : {KrigingVariant::kSimple, KrigingVariant::kOrdinary}) {
        check(KrigingPredictor::theoretical(m, in, variant), in, x);
        try {
          check(KrigingPredictor::empirical(emp, in, variant), in, x);
          ++built;
        } catch (const NumericalError&) {
          EXPECT_EQ(variant, KrigingVariant::kSimple);  // indefinite plug-in covariance
        }
      }
    }
  }
  EXPECT_GE(built, 30);
}

TEST(Kriging, InterpolatesThroughRidge) {
  // Two inputs closer than the first stored lag share the same estimated covariance row,
  // so the estimated matrix is singular and needs the ridge.
  const auto g = dyadic_grid(2);
  const auto emp = empirical_cov(simulate(CovModel(Family::kTPL, 0.8), g, 3), lag_table(g),
                                 EstimationConfig::untruncated());
  const SiteSet in({{0.50, 0.50}, {0.52, 0.50}, {0.1, 0.9}});
  const auto p = KrigingPredictor::empirical(emp, in);
  EXPECT_GT(p.regularization(), 0.0);
  const Eigen::Vector3d x(0.3, -1.1, 0.8);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.predict(in[static_cast<std::size_t>(i)], x), x(i), 1e-8);
}

TEST(OrdinaryKriging, WeightsSumToOneAndConstantField) {
  const CovModel m(Family::kSpherical, 0.6);
  const auto in = random_sites(8, 4);
  const auto p = KrigingPredictor::theoretical(m, in, KrigingVariant::kOrdinary);
  const auto grid = regular_grid(11);
  const auto w = p.weight_matrix(grid);
  for (Eigen::Index c = 0; c < w.cols(); ++c) EXPECT_NEAR(w.col(c).sum(), 1.0, 1e-10);
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(8, 2.5);
  EXPECT_LE((p.predict(grid, a).array() - 2.5).abs().maxCoeff(), 1e-10);
  const auto wf = p.weights_full({0.3, 0.3});
  EXPECT_NEAR(wf.lambda.sum(), 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(wf.multiplier));

  // Constant training field: the estimated semivariogram vanishes.
  const auto g = dyadic_grid(2);
  const auto emp = empirical_cov(Eigen::VectorXd::Constant(25, 4.0), lag_table(g), EstimationConfig::untruncated(),
                                 INFINITY);
  const auto q = KrigingPredictor::empirical(emp, in, KrigingVariant::kOrdinary);
  EXPECT_LE((q.predict(grid, Eigen::VectorXd::Constant(8, -1.5)).array() + 1.5).abs().maxCoeff(), 1e-10);
}

TEST(Predict, LinearityAndLengthCheck) {
  const auto p = KrigingPredictor::theoretical(CovModel(Family::kTPL, 0.5), random_sites(4, 9));
  EXPECT_EQ(p.predict(Site{0.5, 0.5}, Eigen::VectorXd::Zero(4)), 0.0);
  EXPECT_THROW((void)p.predict(Site{0.5, 0.5}, Eigen::VectorXd::Zero(3)), ValidationError);
}

TEST(Mse, PointwiseValues) {
  const CovModel m(Family::kTPL, 0.2);
  const auto in = random_sites(5, 21);
  EXPECT_NEAR(pointwise_mse_theoretical(m, in[2], in), 0.0, 1e-12);
  const SiteSet corner({{0.0, 0.0}});
  EXPECT_EQ(pointwise_mse_theoretical(m, {1.0, 1.0}, corner), 1.0);
}

TEST(Imse, TheoreticalEqualsPointwiseAverageAndZeroWeights) {
  const CovModel m(Family::kGaussian, 0.3);
  const auto in = random_sites(6, 2);
  const auto grid = regular_grid(9);
  const auto p = KrigingPredictor::theoretical(m, in);
  double avg = 0.0;
  for (const auto& s : grid) avg += pointwise_mse_theoretical(m, s, in);
  avg /= static_cast<double>(grid.size());
  EXPECT_NEAR(imse(m, p, grid), avg, 1e-12);
  EXPECT_NEAR(imse(m, in, grid, Eigen::MatrixXd::Zero(6, static_cast<Eigen::Index>(grid.size()))), 1.0, 1e-15);
  EXPECT_GE(mse_surface(m, p, grid).minCoeff(), -1e-10);
}

TEST(Imse, OptimalAgainstPerturbations) {
  const CovModel m(Family::kTPL, 0.4);
  const auto in = random_sites(8, 5);
  const auto grid = regular_grid(15);
  const auto p = KrigingPredictor::theoretical(m, in);
  const double best = imse(m, p, grid);
  const Eigen::MatrixXd w = p.weight_matrix(grid);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int r = 0; r < 20; ++r) {
    Eigen::MatrixXd v(w.rows(), w.cols());
    for (auto& x : v.reshaped()) x = normal(rng);
    EXPECT_GE(imse(m, in, grid, w + 0.05 * v), best - 1e-8);
  }
}

TEST(ExcessRisk, FormsAgreeAndQuadraticGrowth) {
  const CovModel m(Family::kCubic, 0.5);
  const auto in = random_sites(7, 33);
  const auto grid = regular_grid(13);
  const auto theo = KrigingPredictor::theoretical(m, in);
  const Eigen::MatrixXd w = theo.weight_matrix(grid);
  EXPECT_NEAR(excess_risk(m, w, w, in, grid).difference, 0.0, 1e-15);
  EXPECT_NEAR(excess_risk(m, theo, theo, grid).difference, 0.0, 1e-15);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd v(w.rows(), w.cols());
  for (auto& x : v.reshaped()) x = normal(rng);
  const auto e2 = excess_risk(m, w + 1e-2 * v, w, in, grid);
  const auto e3 = excess_risk(m, w + 1e-3 * v, w, in, grid);
  EXPECT_TRUE(e2.forms_agree());
  EXPECT_TRUE(e3.forms_agree());
  EXPECT_GT(e2.difference, 0.0);
  EXPECT_NEAR(e2.difference / e3.difference, 100.0, 1.0);

  const auto g = dyadic_grid(3);
  const auto emp = empirical_cov(simulate(m, g, 4), lag_table(g), EstimationConfig::at_support(), m);
  const auto e = excess_risk(m, KrigingPredictor::empirical(emp, in), theo, grid);
  EXPECT_GE(e.difference, -1e-8);
  EXPECT_TRUE(e.forms_agree());
}

TEST(Imse, MatchesMonteCarlo) {
  const CovModel m(Family::kExponential, 0.3);
  const SiteSet in({{0.2, 0.2}, {0.7, 0.4}, {0.4, 0.8}});
  const auto grid = regular_grid(4);
  const auto p = KrigingPredictor::theoretical(m, in);
  const double exact = imse(m, p, grid);
  const FieldSampler joint(m, in.concat(grid));
  const int reps = 5000;
  std::vector<double> per(reps);
  for (int r = 0; r < reps; ++r) {
    const auto x = joint.draw_values(stream_seed(2, static_cast<std::uint64_t>(r), Stream::kTest));
    per[static_cast<std::size_t>(r)] = amse(p.predict(grid, x.head(3)), x.tail(static_cast<Eigen::Index>(grid.size())));
  }
  const double mc = stats::mean(per), se = stats::stddev(per) / std::sqrt(reps);
  EXPECT_NEAR(mc, exact, 3.0 * se);
}

TEST(Amse, Arithmetic) {
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(5, 0, 4);
  EXPECT_EQ(amse(a, a), 0.0);
  EXPECT_EQ(amse(a.array() + 1.0, a), 1.0);
  Eigen::VectorXd p(5), q(5);
  p << 1, 2, 3, 4, 5;
  q << 0.5, 2.5, 2, 5, 5;
  EXPECT_NEAR(amse(p, q), (0.25 + 0.25 + 1 + 1 + 0) / 5.0, 1e-15);
  EXPECT_THROW(amse(p, a.head(4)), ValidationError);
}

TEST(Raster, PgmLayout) {
  const auto grid = regular_grid(3);
  Eigen::VectorXd v(9);
  for (std::size_t i = 0; i < 9; ++i) v(static_cast<Eigen::Index>(i)) = grid[i].x + 2 * grid[i].y;
  std::stringstream ss;
  write_pgm(ss, v, 3);
  std::string magic, comment;
  std::getline(ss, magic);
  std::getline(ss, comment);
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(comment, "# max-normalized: value = pixel / 255 * 3");
  int w, h, maxv;
  ss >> w >> h >> maxv;
  ss.get();
  std::string px(9, '\0');
  ss.read(px.data(), 9);
  EXPECT_EQ(static_cast<unsigned char>(px[2]), 255);  // top right: x = 1, y = 1
  EXPECT_EQ(static_cast<unsigned char>(px[6]), 0);    // bottom left: origin
  std::stringstream csvout;
  write_prediction_csv(csvout, grid, v);
  EXPECT_EQ(csvout.str().substr(0, 19), "x,y,prediction\n0,0,");
}

}  // namespace
}  // namespace skrig
