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

// Monte Carlo studies: replication tables, MSE maps, convergence rates and the
// distribution checks of the quadratic-form estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "skrig/covmodel.hpp"
#include "skrig/estimate.hpp"
#include "skrig/gaussfield.hpp"
#include "skrig/grid.hpp"
#include "skrig/harness/config.hpp"
#include "skrig/kriging.hpp"
#include "skrig/parallel.hpp"
#include "skrig/rng.hpp"
#include "skrig/stats.hpp"

namespace skrig {

inline constexpr const char* kStdConvention = "sample (divisor reps - 1)";

struct RepRecord {
  std::size_t rep = 0;
  bool ok = false;
  std::string error;
  double amse_theoretical = 0.0;
  double amse_empirical = 0.0;
  double excess = 0.0;            // imse(emp) - imse(theo), true model
  double excess_integrand = 0.0;  // same via the integrand form
  double eta = 0.0;
  std::size_t dropped_lags = 0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

inline Summary summarize(std::span<const double> v) {
  if (v.empty()) return {NAN, NAN};
  return {stats::mean(v), v.size() >= 2 ? stats::stddev(v) : 0.0};
}

struct ReplicationReport {
  double theta = 0.0;  // as configured
  double theta_domain = 0.0;
  double cutoff = 0.0;
  std::vector<RepRecord> reps;
  Summary theoretical, empirical, excess;
  std::size_t failures = 0;
  SiteSet train_sites, inputs, eval_grid;
  int eval_side = 0;
  Eigen::VectorXd raster_empirical;    // per eval site mean squared error
  Eigen::VectorXd raster_theoretical;
  Eigen::VectorXd input_mse_empirical; // per input site mean squared error
  double jitter_train = 0.0, jitter_test = 0.0, eta_theoretical = 0.0;
  nlohmann::json metadata;

  [[nodiscard]] std::vector<double> ok_values(double RepRecord::*field) const {
    std::vector<double> out;
    for (const auto& r : reps) {
      if (r.ok) out.push_back(r.*field);
    }
    return out;
  }
};

struct StudySites {
  SiteSet train, inputs, eval;
};

/// The three site sets of a study, drawn once from the sites and thinning streams.
inline StudySites study_sites(const ExperimentConfig& cfg) {
  SiteSet train = dyadic_grid(cfg.train_scale);
  if (cfg.thinning_p) train = bernoulli_thin(train, *cfg.thinning_p, stream_seed(cfg.seed, 0, Stream::kThinning));
  auto inputs = sample_prediction_sites(cfg.d, cfg.layout, cfg.split, stream_seed(cfg.seed, 0, Stream::kSites));
  return {std::move(train), std::move(inputs), regular_grid(cfg.eval_side())};
}

inline nlohmann::json hex_hash(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return s;
}

/// One row of a replication table: fixed sites, `cfg.reps` independent (X', X) pairs.
inline ReplicationReport run_replication_study(const ExperimentConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  ReplicationReport rep;
  auto sites = study_sites(cfg);
  const bool grid_train = sites.train.grid_scale().has_value();
  const CovModel model = cfg.model.resolve(cfg.train_scale, cfg.eval_points());
  rep.theta = cfg.model.theta;
  rep.theta_domain = model.theta;
  rep.cutoff = cfg.estimation.cutoff(model);
  rep.eval_side = cfg.eval_side();

  const auto table = lag_table(sites.train);
  const FieldSampler train_sampler(model, sites.train);
  const SiteSet test_sites = sites.inputs.concat(sites.eval);
  const FieldSampler test_sampler(model, test_sites);
  const auto theo = KrigingPredictor::theoretical(model, sites.inputs, cfg.mode);
  const Eigen::MatrixXd w_theo = theo.weight_matrix(sites.eval);
  const auto d = static_cast<Eigen::Index>(sites.inputs.size());
  const auto n_eval = static_cast<Eigen::Index>(sites.eval.size());

  std::vector<RepRecord> records(cfg.reps);
  std::vector<Eigen::VectorXd> sq_emp(cfg.reps), sq_theo(cfg.reps), sq_inputs(cfg.reps);
  parallel_for(cfg.reps, jobs, [&](std::size_t r) {
    auto& rec = records[r];
    rec.rep = r;
    try {
      const auto xtrain = train_sampler.draw_values(stream_seed(cfg.seed, r, Stream::kTrain));
      const auto xtest = test_sampler.draw_values(stream_seed(cfg.seed, r, Stream::kTest));
      const Eigen::VectorXd xin = xtest.head(d);
      const Eigen::VectorXd truth = xtest.tail(n_eval);
      const auto emp = empirical_cov(xtrain, table, cfg.estimation, rep.cutoff);
      const auto empirical = KrigingPredictor::empirical(emp, sites.inputs, cfg.mode);
      const Eigen::MatrixXd w_emp = empirical.weight_matrix(sites.eval);
      const Eigen::VectorXd p_emp = w_emp.transpose() * xin;
      const Eigen::VectorXd p_theo = w_theo.transpose() * xin;
      rec.amse_empirical = amse(p_emp, truth);
      rec.amse_theoretical = amse(p_theo, truth);
      const auto ex = excess_risk(model, w_emp, w_theo, sites.inputs, sites.eval);
      rec.excess = ex.difference;
      rec.excess_integrand = ex.integrand;
      rec.eta = empirical.regularization();
      rec.dropped_lags = emp.dropped_lags().size();
      sq_emp[r] = (p_emp - truth).array().square();
      sq_theo[r] = (p_theo - truth).array().square();
      sq_inputs[r] = (empirical.predict(sites.inputs, xin) - xin).array().square();
      rec.ok = true;
    } catch (const NumericalError& e) {
      rec.error = e.what();
    }
  });

  rep.reps = std::move(records);
  for (const auto& r : rep.reps) rep.failures += r.ok ? 0 : 1;
  const auto allowed = static_cast<std::size_t>(std::floor(cfg.max_failure_fraction * static_cast<double>(cfg.reps)));
  if (rep.failures > allowed) {
    std::string first;
    for (const auto& r : rep.reps) {
      if (!r.ok) {
        first = r.error;
        break;
      }
    }
    throw NumericalError(std::to_string(rep.failures) + " of " + std::to_string(cfg.reps) +
                         " replications failed (limit " + std::to_string(allowed) + "); first error: " + first);
  }

  const auto t = rep.ok_values(&RepRecord::amse_theoretical);
  const auto e = rep.ok_values(&RepRecord::amse_empirical);
  const auto x = rep.ok_values(&RepRecord::excess);
  rep.theoretical = summarize(t);
  rep.empirical = summarize(e);
  rep.excess = summarize(x);

  // Rasters: per-site means over successful replications, accumulated in replication order.
  rep.raster_empirical = Eigen::VectorXd::Zero(n_eval);
  rep.raster_theoretical = Eigen::VectorXd::Zero(n_eval);
  rep.input_mse_empirical = Eigen::VectorXd::Zero(d);
  const double ok = static_cast<double>(cfg.reps - rep.failures);
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    if (!rep.reps[r].ok) continue;
    rep.raster_empirical += sq_emp[r];
    rep.raster_theoretical += sq_theo[r];
    rep.input_mse_empirical += sq_inputs[r];
  }
  if (ok > 0) {
    rep.raster_empirical /= ok;
    rep.raster_theoretical /= ok;
    rep.input_mse_empirical /= ok;
  }

  rep.jitter_train = train_sampler.jitter_used();
  rep.jitter_test = test_sampler.jitter_used();
  rep.eta_theoretical = theo.regularization();

  double eta_max = 0.0;
  std::size_t eta_count = 0;
  for (const auto& r : rep.reps) {
    if (!r.ok) continue;
    eta_max = std::max(eta_max, r.eta);
    eta_count += r.eta > 0.0 ? 1 : 0;
  }
  // One representative estimate for the dropped-lag list and nu (both depend on the
  // geometry alone, not on the draw).
  const auto probe = empirical_cov(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sites.train.size())), table,
                                   cfg.estimation, rep.cutoff);
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : rep.reps) {
    if (!r.ok) failures.push_back({{"rep", r.rep}, {"error", r.error}});
  }
  rep.metadata = {
      {"config", to_json(cfg)},
      {"seed", cfg.seed},
      {"streams", "stream_seed(seed, rep, role), roles train=1 test=2 sites=3 thinning=4"},
      {"rng", kRngDescription},
      {"theta_units", theta_units_name(cfg.model.units)},
      {"theta", cfg.model.theta},
      {"theta_domain", model.theta},
      {"cutoff", std::isfinite(rep.cutoff) ? nlohmann::json(rep.cutoff) : nlohmann::json(nullptr)},
      {"training_grid", grid_train ? nlohmann::json(*sites.train.grid_scale()) : nlohmann::json("thinned")},
      {"n_train", sites.train.size()},
      {"nu", probe.nu()},
      {"dropped_lags", probe.dropped_lags()},
      {"jitter_used", {{"train", rep.jitter_train}, {"test", rep.jitter_test}}},
      {"eta", {{"theoretical", rep.eta_theoretical}, {"empirical_max", eta_max}, {"empirical_regularized_reps", eta_count}}},
      {"site_hashes",
       {{"train", hex_hash(sites.train.hash())}, {"inputs", hex_hash(sites.inputs.hash())}, {"eval", hex_hash(sites.eval.hash())}}},
      {"std_convention", kStdConvention},
      {"failures", failures},
  };
  rep.train_sites = std::move(sites.train);
  rep.inputs = std::move(sites.inputs);
  rep.eval_grid = std::move(sites.eval);
  return rep;
}

/// Runs the study once per theta in the sweep (or once for the configured theta). Every
/// row reuses the same sites and seeds.
inline std::vector<ReplicationReport> run_replication_sweep(const ExperimentConfig& cfg, unsigned jobs = 1) {
  std::vector<ReplicationReport> out;
  if (cfg.theta_sweep.empty()) {
    out.push_back(run_replication_study(cfg, jobs));
    return out;
  }
  for (double theta : cfg.theta_sweep) {
    auto row = cfg;
    row.model.theta = theta;
    out.push_back(run_replication_study(row, jobs));
  }
  return out;
}

/// Per-site mean MSE of the empirical predictor on the evaluation grid, plus its value at
/// the input sites.
struct MseMap {
  ReplicationReport study;
  [[nodiscard]] const Eigen::VectorXd& raster() const { return study.raster_empirical; }
  [[nodiscard]] int side() const { return study.eval_side; }
};

inline MseMap run_mse_map(const ExperimentConfig& cfg, unsigned jobs = 1) { return {run_replication_study(cfg, jobs)}; }

// Convergence -------------------------------------------------------------------------

struct ConvergencePoint {
  AccuracyPoint accuracy;
  double median_excess = 0.0;
  double min_excess = 0.0;
  double max_form_gap = 0.0;  // |difference - integrand| over reps
  std::size_t failures = 0;
};

struct ConvergenceReport {
  std::vector<ConvergencePoint> points;
  double sup_error_slope = 0.0;
  double excess_slope = 0.0;
  bool excess_non_increasing = false;
  nlohmann::json metadata;
};

/// Per grid scale: the 90th percentile sup covariance error and the median excess risk of
/// the plug-in predictor at fixed inputs (d = cfg.d) on the evaluation grid.
inline ConvergenceReport run_convergence_study(const ExperimentConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  ConvergenceReport rep;
  const auto inputs = sample_prediction_sites(cfg.d, cfg.layout, cfg.split, stream_seed(cfg.seed, 0, Stream::kSites));
  const auto eval = regular_grid(cfg.eval_side());
  const std::size_t reps = cfg.convergence.reps;
  std::vector<double> ns, p90s, med;
  for (int scale : cfg.convergence.scales) {
    const CovModel model = cfg.model.resolve(scale, cfg.eval_points());
    const std::uint64_t seed = stream_seed(cfg.seed, static_cast<std::uint64_t>(scale), Stream::kTrain);
    ConvergencePoint pt;
    pt.accuracy = estimator_accuracy_at(model, scale, cfg.estimation, reps, seed, jobs);

    const auto sites = dyadic_grid(scale);
    const auto table = lag_table(sites);
    const FieldSampler sampler(model, sites);
    const double cutoff = cfg.estimation.cutoff(model);
    const auto theo = KrigingPredictor::theoretical(model, inputs, cfg.mode);
    const Eigen::MatrixXd w_theo = theo.weight_matrix(eval);
    std::vector<double> excess(reps, NAN), gap(reps, 0.0);
    parallel_for(reps, jobs, [&](std::size_t r) {
      // Same training draws as the accuracy study at this scale.
      const auto x = sampler.draw_values(stream_seed(seed, r, Stream::kTrain));
      try {
        const auto emp = empirical_cov(x, table, cfg.estimation, cutoff);
        const auto p = KrigingPredictor::empirical(emp, inputs, cfg.mode);
        const auto ex = excess_risk(model, p.weight_matrix(eval), w_theo, inputs, eval);
        excess[r] = ex.difference;
        gap[r] = std::abs(ex.difference - ex.integrand);
      } catch (const NumericalError&) {
      }
    });
    std::vector<double> ok;
    for (double v : excess) {
      if (std::isfinite(v)) ok.push_back(v);
    }
    pt.failures = reps - ok.size();
    detail::require(!ok.empty(), "convergence: every replication failed at scale " + std::to_string(scale));
    pt.median_excess = stats::median(ok);
    pt.min_excess = *std::min_element(ok.begin(), ok.end());
    pt.max_form_gap = *std::max_element(gap.begin(), gap.end());
    ns.push_back(static_cast<double>(pt.accuracy.n));
    p90s.push_back(pt.accuracy.p90);
    med.push_back(pt.median_excess);
    rep.points.push_back(pt);
  }
  rep.sup_error_slope = stats::loglog_slope(ns, p90s);
  rep.excess_non_increasing = true;
  for (std::size_t i = 1; i < med.size(); ++i) rep.excess_non_increasing &= med[i] <= med[i - 1];
  if (std::all_of(med.begin(), med.end(), [](double v) { return v > 0.0; })) rep.excess_slope = stats::loglog_slope(ns, med);
  rep.metadata = {{"config", to_json(cfg)},
                  {"seed", cfg.seed},
                  {"rng", kRngDescription},
                  {"theta_units", theta_units_name(cfg.model.units)},
                  {"site_hashes", {{"inputs", hex_hash(inputs.hash())}, {"eval", hex_hash(eval.hash())}}},
                  {"sup_error_probe", "stored lags, midpoints of consecutive lags and the cutoff"}};
  return rep;
}

// Distribution checks -----------------------------------------------------------------

struct DistcheckLag {
  double h = 0.0;
  std::size_t n_h = 0;
  bool positivity = false;
  bool eigen_bound = false;
  double min_ell = 0.0, min_rho = 0.0;
  double xi1 = 0.0, max_degree = 0.0;
  std::optional<QuadraticFormReport> sampled;  // filled for the first ks_lags lags
};

struct DistcheckReport {
  std::vector<DistcheckLag> lags;
  bool all_pass = false;
  nlohmann::json metadata;
};

/// Eigenvalue checks at every positive in-cutoff lag of the grid, Monte Carlo moment and
/// KS checks at the first `ks_lags` of them.
inline DistcheckReport run_distribution_checks(const ExperimentConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  const int scale = cfg.distcheck.scale;
  const CovModel model = cfg.model.resolve(scale, cfg.eval_points());
  const auto sites = dyadic_grid(scale);
  const auto table = lag_table(sites);
  const double cutoff = cfg.estimation.cutoff(model);
  DistcheckReport rep;
  rep.all_pass = true;
  std::size_t sampled = 0;
  for (std::size_t k = 1; k < table.size(); ++k) {
    const double h = table.lag(k);
    if (h >= cutoff) break;
    const bool mc = sampled < cfg.distcheck.ks_lags;
    const auto q = quadratic_form_check(model, sites, h, mc ? cfg.distcheck.reps : 2,
                                        stream_seed(cfg.seed, k, Stream::kOracle), jobs);
    DistcheckLag l{h, q.n_h, q.positivity_ok(), q.eigen_bound_ok(), q.min_ell, q.min_rho, q.xi1_laplacian,
                   q.max_degree, std::nullopt};
    bool pass = l.positivity && l.eigen_bound;
    if (mc) {
      l.sampled = q;
      pass = pass && q.ks_gamma < 0.05 && q.ks_c0 < 0.05;
      ++sampled;
    }
    rep.all_pass = rep.all_pass && pass;
    rep.lags.push_back(std::move(l));
  }
  rep.metadata = {{"seed", cfg.seed},
                  {"rng", kRngDescription},
                  {"model", to_json(cfg.model)},
                  {"theta_domain", model.theta},
                  {"scale", scale},
                  {"reps", cfg.distcheck.reps},
                  {"positivity_rule",
                   "no eigenvalue below -1e-8; positive count equals rank L (ell) or the number of sites with "
                   "non-zero degree (rho)"}};
  return rep;
}

}  // namespace skrig
