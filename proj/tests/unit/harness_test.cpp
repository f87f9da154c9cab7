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
#include <set>
#include <sstream>
#include <string>

#include "skrig/harness/config.hpp"
#include "skrig/harness/experiment.hpp"
#include "skrig/harness/realdata.hpp"
#include "skrig/harness/reports.hpp"
#include "skrig/harness/toml_lite.hpp"

namespace skrig {
namespace {

ExperimentConfig small_config(double theta = 5.0, std::size_t reps = 12) {
  nlohmann::json j{{"model", {{"family", "tpl"}, {"theta", theta}, {"theta_units", "eval_cells"}}},
                   {"train_scale", 2},
                   {"d", 8},
                   {"n_eval", 121},
                   {"reps", reps},
                   {"seed", 3}};
  return parse_experiment_config(j);
}

std::string amse_text(const std::vector<ReplicationReport>& runs) {
  std::ostringstream out;
  write_amse_csv(out, runs);
  return out.str();
}

TEST(Toml, TablesArraysAndScalars) {
  const auto j = toml::parse(std::string(R"(
seed = 7            # master seed
theta_sweep = [2.5, 5, 7.5,]
mode = "simple"
[model]
family = "tpl"
theta = 5
[convergence]
scales = [2, 3, 4]
flag = true
)"),
                             "t.toml");
  EXPECT_EQ(j.at("seed").get<int>(), 7);
  EXPECT_EQ(j.at("theta_sweep").size(), 3u);
  EXPECT_DOUBLE_EQ(j.at("theta_sweep")[2].get<double>(), 7.5);
  EXPECT_EQ(j.at("model").at("family"), "tpl");
  EXPECT_TRUE(j.at("model").at("theta").is_number_integer());
  EXPECT_TRUE(j.at("convergence").at("flag").get<bool>());
  const auto cfg = parse_experiment_config(j);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.convergence.scales, (std::vector<int>{2, 3, 4}));
}

TEST(Toml, RejectsDuplicatesAndGarbage) {
  EXPECT_THROW((void)toml::parse(std::string("a = 1\na = 2\n"), "t"), ValidationError);
  EXPECT_THROW((void)toml::parse(std::string("a 1\n"), "t"), ValidationError);
  EXPECT_THROW((void)toml::parse(std::string("a = \"open\n"), "t"), ValidationError);
  EXPECT_THROW((void)toml::parse(std::string("a = 1x\n"), "t"), ValidationError);
  EXPECT_THROW((void)toml::parse(std::string("[a\n"), "t"), ValidationError);
}

TEST(Config, Defaults) {
  const auto j3 = parse_experiment_config(nlohmann::json::object());
  EXPECT_EQ(j3.eval_points(), 1681);
  EXPECT_EQ(j3.eval_side(), 41);
  EXPECT_EQ(j3.reps, 100u);
  EXPECT_EQ(j3.estimation.rule, CutoffRule::kSupport);
  const auto j4 = parse_experiment_config({{"train_scale", 4}});
  EXPECT_EQ(j4.eval_points(), 2401);
  const auto ok = parse_experiment_config({{"mode", "ordinary"}});
  EXPECT_EQ(ok.estimation.rule, CutoffRule::kNone);
  ASSERT_TRUE(ok.estimation.nu_min.has_value());
  EXPECT_DOUBLE_EQ(*ok.estimation.nu_min, 0.35);
  const auto corner = parse_experiment_config({{"layout", "corner"}, {"d", 12}});
  EXPECT_EQ(corner.split.in_region + corner.split.elsewhere, 12);
}

TEST(Config, Validation) {
  EXPECT_THROW((void)parse_experiment_config({{"reps", 0}}), ValidationError);
  EXPECT_THROW((void)parse_experiment_config({{"n_eval", 1680}}), ValidationError);
  EXPECT_THROW((void)parse_experiment_config({{"layout", "spiral"}}), ValidationError);
  EXPECT_THROW((void)parse_experiment_config({{"mode", "universal"}}), ValidationError);
  EXPECT_THROW((void)parse_experiment_config({{"convergence", {{"scales", {2, 3}}}}}), ValidationError);
  EXPECT_THROW((void)parse_experiment_config({{"thinning_p", 1.5}}), ValidationError);
  EXPECT_THROW((void)parse_experiment_config({{"d", "ten"}}), ValidationError);
  EXPECT_THROW((void)parse_experiment_config(
                   {{"layout", {{"type", "ring"}, {"in_region", 3}, {"elsewhere", 3}}}, {"d", 10}}),
               ValidationError);
}

TEST(Ingest, LongFormatTwoDays) {
  std::istringstream in(
      "day,index,x,y,value\n"
      "d1,1,10,100,0.5\nd1,2,20,100,1.5\nd1,3,10,300,2.5\nd1,4,20,300,3.5\n"
      "d2,1,10,100,-1\nd2,2,20,100,-2\nd2,3,10,300,-3\nd2,4,20,300,-4\n");
  const auto ds = ingest_grid_csv(in, "long.csv");
  ASSERT_EQ(ds.days.size(), 2u);
  const auto samples = ds.samples();
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].values.size(), 4);
  EXPECT_EQ(samples[1].values(3), -4.0);
  EXPECT_EQ(ds.day_labels, (std::vector<std::string>{"d1", "d2"}));
  EXPECT_EQ(ds.sites[3].x, 1.0);
  EXPECT_EQ(ds.sites[3].y, 1.0);
  EXPECT_EQ(ds.sites[0].x, 0.0);
  EXPECT_DOUBLE_EQ(ds.map.x_span, 10.0);
}

TEST(Ingest, WideFormatMatchesLong) {
  std::istringstream wide("index,x,y,v_1,v_2\n1,0,0,1,5\n2,1,0,2,6\n3,0,1,3,7\n");
  const auto ds = ingest_grid_csv(wide, "wide.csv");
  ASSERT_EQ(ds.days.size(), 2u);
  std::ostringstream long_out;
  write_grid_csv(long_out, ds.sites, ds.days);
  std::istringstream back(long_out.str());
  const auto again = ingest_grid_csv(back, "long.csv");
  ASSERT_EQ(again.days.size(), ds.days.size());
  for (std::size_t t = 0; t < ds.days.size(); ++t) EXPECT_EQ(again.days[t], ds.days[t]);
  for (std::size_t i = 0; i < ds.sites.size(); ++i) EXPECT_EQ(again.sites[i], ds.sites[i]);
}

TEST(Ingest, NormalizedExtentIsExact) {
  std::ostringstream text;
  text << "index,x,y,v\n";
  for (int i = 0; i < 7; ++i) text << i << ',' << 0.1 * i + 1234.567 << ',' << -3.3 * (i % 3) << ",1\n";
  std::istringstream in(text.str());
  const auto ds = ingest_grid_csv(in, "w.csv");
  double x0 = 1, x1 = 0, y0 = 1, y1 = 0;
  for (const auto& s : ds.sites) {
    x0 = std::min(x0, s.x);
    x1 = std::max(x1, s.x);
    y0 = std::min(y0, s.y);
    y1 = std::max(y1, s.y);
  }
  EXPECT_EQ(x0, 0.0);
  EXPECT_EQ(x1, 1.0);
  EXPECT_EQ(y0, 0.0);
  EXPECT_EQ(y1, 1.0);
}

std::string ingest_error(const std::string& text) {
  std::istringstream in(text);
  try {
    (void)ingest_grid_csv(in, "bad.csv");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(Ingest, Errors) {
  const auto dup = ingest_error("day,index,x,y,value\nmon,1,0,0,1\nmon,2,1,1,1\nmon,2,1,1,3\n");
  EXPECT_NE(dup.find("mon"), std::string::npos) << dup;
  EXPECT_NE(dup.find("index 2"), std::string::npos) << dup;
  EXPECT_NE(ingest_error("day,index,x,y,value\na,1,0,0,1\na,2,1,1,1\nb,1,0,0,1\nb,2,1,0.5,1\n").find("differ"),
            std::string::npos);
  EXPECT_NE(ingest_error("day,index,x,y,value\na,1,0,0,1\na,2,1,1,1\nb,1,0,0,1\n").find("day b"), std::string::npos);
  EXPECT_NE(ingest_error("index,x,y,v\n1,0,0,abc\n2,1,1,2\n").find("bad.csv:2"), std::string::npos);
  EXPECT_NE(ingest_error("index,x,y,v\n1,0,0,1\n").find("at least 2"), std::string::npos);
  EXPECT_NE(ingest_error("a,b,c\n1,2,3\n").find("header"), std::string::npos);
}

TEST(Replication, ByteIdenticalAcrossThreadCounts) {
  auto cfg = small_config();
  cfg.theta_sweep = {2.5, 5.0};
  const auto a = amse_text(run_replication_sweep(cfg, 1));
  const auto b = amse_text(run_replication_sweep(cfg, 4));
  const auto c = amse_text(run_replication_sweep(cfg, 3));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_NE(a.find("theta,rep,theoretical,empirical\n2.5,0,"), std::string::npos);
}

TEST(Replication, SitesFixedAcrossStudy) {
  auto cfg = small_config();
  cfg.theta_sweep = {2.5, 5.0, 7.5};
  cfg.max_failure_fraction = 0.5;
  const auto runs = run_replication_sweep(cfg, 2);
  std::set<std::string> inputs, eval;
  for (const auto& r : runs) {
    inputs.insert(r.metadata.at("site_hashes").at("inputs").get<std::string>());
    eval.insert(r.metadata.at("site_hashes").at("eval").get<std::string>());
  }
  EXPECT_EQ(inputs.size(), 1u);
  EXPECT_EQ(eval.size(), 1u);
  EXPECT_EQ(study_sites(cfg).inputs.hash(), runs[0].inputs.hash());
}

TEST(Replication, ProvenanceAndRasters) {
  const auto cfg = small_config();
  const auto r = run_replication_study(cfg, 2);
  EXPECT_EQ(r.raster_empirical.size(), 121);
  EXPECT_EQ(r.raster_theoretical.size(), 121);
  for (const char* key : {"seed", "jitter_used", "eta", "dropped_lags", "nu", "theta_units", "std_convention"}) {
    EXPECT_TRUE(r.metadata.contains(key)) << key;
  }
  EXPECT_EQ(r.metadata.at("theta_units"), "eval_cells");
  EXPECT_DOUBLE_EQ(r.theta_domain, 5.0 / 11.0);
  // Sample standard deviation.
  const auto t = r.ok_values(&RepRecord::amse_theoretical);
  double m = 0.0, ss = 0.0;
  for (double v : t) m += v;
  m /= static_cast<double>(t.size());
  for (double v : t) ss += (v - m) * (v - m);
  EXPECT_NEAR(r.theoretical.std, std::sqrt(ss / static_cast<double>(t.size() - 1)), 1e-12);
  for (const auto& rec : r.reps) {
    if (rec.ok) EXPECT_GE(rec.excess, -1e-8);
  }
}

TEST(Replication, EmpiricalNotBetterThanOracleOnAverage) {
  const auto cfg = small_config(5.0, 40);
  const auto r = run_replication_study(cfg, 4);
  const double n = static_cast<double>(r.reps.size() - r.failures);
  const double pooled = std::sqrt((r.theoretical.std * r.theoretical.std + r.empirical.std * r.empirical.std) / n);
  EXPECT_GE(r.empirical.mean, r.theoretical.mean - 2.0 * pooled);
}

TEST(MseMap, NullAtInputsAndBounded) {
  auto cfg = small_config(2.5, 20);
  cfg.n_eval = 1681;
  cfg.train_scale = 3;
  cfg.d = 10;
  cfg.seed = 1;
  const auto map = run_mse_map(cfg, 4);
  EXPECT_EQ(map.side(), 41);
  EXPECT_EQ(map.raster().size(), 41 * 41);
  EXPECT_LE(map.study.input_mse_empirical.maxCoeff(), 1e-6);
  EXPECT_TRUE(std::isfinite(map.raster().maxCoeff()));
  EXPECT_LT(map.raster().maxCoeff(), 5.0);
  std::ostringstream csv_out;
  write_mse_map_csv(csv_out, map.study);
  const auto text = csv_out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 1681 + 10);
  EXPECT_EQ(text.substr(text.size() - 3), ",1\n");
}

TEST(Convergence, RequiresThreeScales) {
  auto cfg = small_config();
  cfg.convergence.scales = {2, 3};
  EXPECT_THROW((void)run_convergence_study(cfg), ValidationError);
}

TEST(Convergence, ExcessNonNegative) {
  nlohmann::json j{{"model", {{"family", "tpl"}, {"theta", 5}}},
                   {"d", 6},
                   {"n_eval", 121},
                   {"convergence", {{"scales", {2, 3, 4}}, {"reps", 12}}}};
  const auto rep = run_convergence_study(parse_experiment_config(j), 4);
  ASSERT_EQ(rep.points.size(), 3u);
  for (const auto& p : rep.points) {
    EXPECT_GE(p.min_excess, -1e-8);
    EXPECT_LE(p.max_form_gap, 1e-8 * std::max(1.0, p.median_excess));
  }
  EXPECT_LT(rep.sup_error_slope, 0.0);
}

TEST(Distcheck, EigenvalueChecksPassOnAllLags) {
  nlohmann::json j{{"model", {{"family", "tpl"}, {"theta", 5}}}, {"distcheck", {{"scale", 2}, {"reps", 400}, {"ks_lags", 1}}}};
  const auto rep = run_distribution_checks(parse_experiment_config(j), 4);
  ASSERT_FALSE(rep.lags.empty());
  for (const auto& l : rep.lags) {
    EXPECT_TRUE(l.positivity) << l.h;
    EXPECT_TRUE(l.eigen_bound) << l.h;
  }
  EXPECT_TRUE(rep.lags[0].sampled.has_value());
  EXPECT_FALSE(rep.lags.back().sampled.has_value() && rep.lags.size() > 1);
}

GridDataset constant_days(const SiteSet& sites, std::size_t days, double level) {
  std::vector<Eigen::VectorXd> v(days, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(sites.size()), level));
  return make_grid_dataset(sites, v);
}

ExperimentConfig realdata_config(int scale) {
  nlohmann::json j{{"mode", "ordinary"}, {"d", 6}, {"seed", 4}, {"realdata", {{"scale", scale}}}};
  return parse_experiment_config(j);
}

TEST(RealData, ConstantFieldHasZeroAmse) {
  const auto sites = regular_grid(9);
  auto train_days = std::vector<Eigen::VectorXd>{};
  const auto train = make_grid_dataset(sites, {simulate(CovModel(Family::kTPL, 0.4), sites, 5).values});
  const auto test = constant_days(sites, 1, 2.75);
  const auto rep = run_real_data_study(train, test, realdata_config(3));
  ASSERT_EQ(rep.days.size(), 1u);
  ASSERT_TRUE(rep.days[0].ok) << rep.days[0].error;
  EXPECT_LE(rep.days[0].amse_nonparametric, 1e-20);
  EXPECT_LE(rep.days[0].amse_parametric, 1e-20);
}

TEST(RealData, CsvRoundTripMatchesInMemory) {
  const auto sites = regular_grid(17);
  const CovModel m(Family::kTPL, 0.3);
  std::vector<Eigen::VectorXd> train_v, test_v;
  const FieldSampler sampler(m, sites);
  for (std::uint64_t t = 0; t < 3; ++t) {
    train_v.push_back(sampler.draw_values(stream_seed(11, t, Stream::kTrain)));
    test_v.push_back(sampler.draw_values(stream_seed(11, t, Stream::kTest)));
  }
  const auto cfg = realdata_config(3);
  const auto direct = run_real_data_study(make_grid_dataset(sites, train_v), make_grid_dataset(sites, test_v), cfg);
  std::ostringstream a, b;
  write_grid_csv(a, sites, train_v);
  write_grid_csv(b, sites, test_v);
  std::istringstream ia(a.str()), ib(b.str());
  const auto via_csv = run_real_data_study(ingest_grid_csv(ia, "train.csv"), ingest_grid_csv(ib, "test.csv"), cfg);
  ASSERT_EQ(direct.failures, 0u);
  EXPECT_EQ(via_csv.nonparametric.mean, direct.nonparametric.mean);
  EXPECT_EQ(via_csv.parametric.mean, direct.parametric.mean);
}

TEST(RealData, Validation) {
  const auto sites = regular_grid(9);
  const auto one = constant_days(sites, 1, 0.0);
  const auto two = constant_days(sites, 2, 0.0);
  EXPECT_THROW((void)run_real_data_study(one, two, realdata_config(3)), ValidationError);
  auto simple = realdata_config(3);
  simple.mode = KrigingVariant::kSimple;
  EXPECT_THROW((void)run_real_data_study(one, one, simple), ValidationError);
  // A 9x9 grid holds the scale-3 dyadic grid but not the scale-4 one.
  EXPECT_THROW((void)run_real_data_study(one, one, realdata_config(4)), ValidationError);
}

TEST(RealData, TplFitMatchesGridSearchOracle) {
  const auto sites = dyadic_grid(4);
  const auto table = lag_table(sites);
  const CovModel m(Family::kTPL, 0.5);
  auto config = EstimationConfig::untruncated();
  config.mode = KrigingVariant::kOrdinary;
  config.nu_min = 0.35;
  const auto emp = empirical_cov(FieldSampler(m, sites).draw_values(21), table, config, INFINITY);
  std::vector<double> grid;
  for (int i = 1; i <= 40; ++i) grid.push_back(0.05 * i);
  const auto fit = fit_tpl(emp, grid);

  // Brute force: sill and loss from an explicit minimisation over a fine sill grid per theta.
  double best = INFINITY, best_theta = 0.0;
  for (double theta : grid) {
    const CovModel c(Family::kTPL, theta);
    double lo = INFINITY;
    for (int k = 0; k <= 4000; ++k) {
      const double sill = 0.001 * k;
      double loss = 0.0;
      for (const auto& l : emp.lags()) {
        if (l.h <= 0.0 || !l.retained) continue;
        const double r = l.gammahat - sill * semivariogram(c, l.h);
        loss += static_cast<double>(l.n_h) * r * r;
      }
      lo = std::min(lo, loss);
    }
    if (lo < best) {
      best = lo;
      best_theta = theta;
    }
  }
  EXPECT_DOUBLE_EQ(fit.theta, best_theta);
  EXPECT_GT(fit.sill, 0.0);
  EXPECT_GT(fit.theta, 0.2);
  EXPECT_LT(fit.theta, 1.2);
}

}  // namespace
}  // namespace skrig
