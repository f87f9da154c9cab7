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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "skrig/covmodel.hpp"
#include "skrig/errors.hpp"
#include "skrig/estimate.hpp"
#include "skrig/gaussfield.hpp"
#include "skrig/grid.hpp"
#include "skrig/harness/config.hpp"
#include "skrig/harness/experiment.hpp"
#include "skrig/harness/realdata.hpp"
#include "skrig/harness/reports.hpp"
#include "skrig/kriging.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  unsigned jobs = 0;
  bool check = false;
};

skrig::ExperimentConfig load_config(const Globals& g) {
  json j = g.config.empty() ? json::object() : skrig::read_config_file(g.config);
  if (g.seed) j["seed"] = *g.seed;
  return skrig::parse_experiment_config(j);
}

fs::path out_dir(const Globals& g) {
  fs::path dir(g.out);
  fs::create_directories(dir);
  return dir;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  skrig::detail::require(static_cast<bool>(in), "cannot open " + path);
  return in;
}

// Each `check` entry is `metric = {min = .., max = ..}`; every listed metric must be present.
std::vector<std::string> evaluate_checks(const json& check, const std::vector<json>& metrics) {
  std::vector<std::string> breaches;
  for (const auto& [name, bounds] : check.items()) {
    for (const auto& m : metrics) {
      const std::string tag = m.contains("theta") ? " (theta " + m.at("theta").dump() + ")" : "";
      if (!m.contains(name)) {
        breaches.push_back(name + ": metric not produced by this command");
        continue;
      }
      const auto& v = m.at(name);
      if (v.is_boolean()) {
        if (bounds.is_boolean() && v.get<bool>() != bounds.get<bool>()) breaches.push_back(name + tag + " is " + v.dump());
        continue;
      }
      const double x = v.is_number() ? v.get<double>() : NAN;
      if (bounds.contains("min") && !(x >= bounds.at("min").get<double>())) {
        breaches.push_back(name + tag + " = " + v.dump() + " below " + bounds.at("min").dump());
      }
      if (bounds.contains("max") && !(x <= bounds.at("max").get<double>())) {
        breaches.push_back(name + tag + " = " + v.dump() + " above " + bounds.at("max").dump());
      }
    }
  }
  return breaches;
}

int finish(const Globals& g, const skrig::ExperimentConfig& cfg, const std::vector<json>& metrics) {
  if (!g.check) return 0;
  const auto breaches = evaluate_checks(cfg.check, metrics);
  for (const auto& b : breaches) std::cerr << "check failed: " << b << '\n';
  if (!breaches.empty()) return kExitCheck;
  std::cerr << "all checks passed\n";
  return 0;
}

int cmd_simulate(const Globals& g) {
  const auto cfg = load_config(g);
  const auto sites = skrig::dyadic_grid(cfg.train_scale);
  const auto model = cfg.model.resolve(cfg.train_scale, cfg.eval_points());
  const skrig::FieldSampler sampler(model, sites);
  const auto field = sampler.draw(skrig::stream_seed(cfg.seed, 0, skrig::Stream::kTrain));
  const auto dir = out_dir(g);
  skrig::write_file(dir / "field.csv", [&](std::ostream& o) { skrig::write_field_csv(o, field); });
  skrig::write_report_json(dir / "report.json", {{"kind", "simulate"},
                                                 {"config", skrig::to_json(cfg)},
                                                 {"theta_domain", model.theta},
                                                 {"n", sites.size()},
                                                 {"jitter_used", sampler.jitter_used()},
                                                 {"rng", skrig::kRngDescription}});
  return finish(g, cfg, {});
}

int cmd_estimate(const Globals& g, const std::string& field_path) {
  const auto cfg = load_config(g);
  const auto model = cfg.model.resolve(cfg.train_scale, cfg.eval_points());
  skrig::FieldSample field;
  if (field_path.empty()) {
    field = skrig::simulate(model, skrig::dyadic_grid(cfg.train_scale), skrig::stream_seed(cfg.seed, 0, skrig::Stream::kTrain));
  } else {
    auto in = open_input(field_path);
    field = skrig::read_field_csv(in, field_path);
  }
  const auto table = skrig::lag_table(field.sites);
  const auto emp = skrig::empirical_cov(field, table, cfg.estimation, model);
  const auto dir = out_dir(g);
  skrig::write_file(dir / "covariance.csv", [&](std::ostream& o) { skrig::write_empirical_csv(o, emp); });
  skrig::write_report_json(dir / "report.json", {{"kind", "estimate"},
                                                 {"source", field_path.empty() ? "simulated" : field_path},
                                                 {"estimation", skrig::to_json(cfg.estimation, model)},
                                                 {"n", emp.n()},
                                                 {"nu", emp.nu()},
                                                 {"dropped_lags", emp.dropped_lags()}});
  return finish(g, cfg, {});
}

int cmd_krige(const Globals& g, const std::string& inputs_path, const std::string& targets_path,
              const std::string& train_path) {
  const auto cfg = load_config(g);
  skrig::detail::require(!inputs_path.empty(), "krige needs --inputs <field.csv>");
  auto in = open_input(inputs_path);
  const auto obs = skrig::read_field_csv(in, inputs_path);
  const bool on_grid = targets_path.empty();
  skrig::SiteSet targets;
  if (on_grid) {
    targets = skrig::regular_grid(cfg.eval_side());
  } else {
    auto t = open_input(targets_path);
    targets = skrig::read_sites_csv(t, targets_path);
  }
  const auto model = cfg.model.resolve(cfg.train_scale, cfg.eval_points());
  std::optional<skrig::KrigingPredictor> pred;
  json meta{{"kind", "krige"}, {"mode", skrig::variant_name(cfg.mode)}};
  if (train_path.empty()) {
    pred = skrig::KrigingPredictor::theoretical(model, obs.sites, cfg.mode);
    meta["predictor"] = "theoretical";
  } else {
    auto t = open_input(train_path);
    const auto train = skrig::read_field_csv(t, train_path);
    const auto emp = skrig::empirical_cov(train, skrig::lag_table(train.sites), cfg.estimation, model);
    pred = skrig::KrigingPredictor::empirical(emp, obs.sites, cfg.mode);
    meta["predictor"] = "empirical";
    meta["dropped_lags"] = emp.dropped_lags();
  }
  meta["eta"] = pred->regularization();
  const auto values = pred->predict(targets, obs.values);
  const auto dir = out_dir(g);
  skrig::write_file(dir / "prediction.csv", [&](std::ostream& o) { skrig::write_prediction_csv(o, targets, values); });
  if (on_grid) {
    const auto mse = skrig::mse_surface(model, *pred, targets);
    skrig::write_file(dir / "mse_map.pgm", [&](std::ostream& o) { skrig::write_pgm(o, mse, cfg.eval_side()); });
  }
  skrig::write_report_json(dir / "report.json", meta);
  return finish(g, cfg, {});
}

json replication_metrics(const skrig::ReplicationReport& s) {
  double min_excess = INFINITY;
  for (const auto& r : s.reps) {
    if (r.ok) min_excess = std::min(min_excess, r.excess);
  }
  return {{"theta", s.theta},
          {"theoretical_mean", s.theoretical.mean},
          {"empirical_mean", s.empirical.mean},
          {"gap", s.empirical.mean - s.theoretical.mean},
          {"min_excess", min_excess},
          {"failures", s.failures}};
}

int cmd_replicate(const Globals& g) {
  const auto cfg = load_config(g);
  const auto studies = skrig::run_replication_sweep(cfg, g.jobs);
  const auto dir = out_dir(g);
  skrig::write_file(dir / "amse.csv", [&](std::ostream& o) { skrig::write_amse_csv(o, studies); });
  skrig::write_report_json(dir / "report.json", skrig::replication_json(studies));
  std::vector<json> metrics;
  for (const auto& s : studies) {
    metrics.push_back(replication_metrics(s));
    std::cout << "theta " << s.theta << ": theoretical " << s.theoretical.mean << " (" << s.theoretical.std
              << "), empirical " << s.empirical.mean << " (" << s.empirical.std << "), failures " << s.failures << '\n';
  }
  return finish(g, cfg, metrics);
}

int cmd_map(const Globals& g) {
  const auto cfg = load_config(g);
  const auto map = skrig::run_mse_map(cfg, g.jobs);
  const auto& s = map.study;
  const auto dir = out_dir(g);
  skrig::write_file(dir / "amse.csv", [&](std::ostream& o) { skrig::write_amse_csv(o, {s}); });
  skrig::write_file(dir / "mse_map.csv", [&](std::ostream& o) { skrig::write_mse_map_csv(o, s); });
  skrig::write_file(dir / "mse_map.pgm", [&](std::ostream& o) { skrig::write_pgm(o, s.raster_empirical, s.eval_side); });
  auto report = skrig::replication_json({s});
  report["kind"] = "map";
  report["raster_max"] = s.raster_empirical.maxCoeff();
  report["input_mse_max"] = s.input_mse_empirical.maxCoeff();
  skrig::write_report_json(dir / "report.json", report);
  auto m = replication_metrics(s);
  m["raster_max"] = s.raster_empirical.maxCoeff();
  m["input_mse_max"] = s.input_mse_empirical.maxCoeff();
  return finish(g, cfg, {m});
}

int cmd_converge(const Globals& g) {
  const auto cfg = load_config(g);
  const auto c = skrig::run_convergence_study(cfg, g.jobs);
  const auto dir = out_dir(g);
  skrig::write_file(dir / "convergence.csv", [&](std::ostream& o) { skrig::write_convergence_csv(o, c); });
  skrig::write_report_json(dir / "report.json", skrig::convergence_json(c));
  double min_excess = INFINITY;
  for (const auto& p : c.points) min_excess = std::min(min_excess, p.min_excess);
  std::cout << "sup-error slope " << c.sup_error_slope << ", median excess non-increasing "
            << (c.excess_non_increasing ? "yes" : "no") << '\n';
  return finish(g, cfg, {{{"sup_error_slope", c.sup_error_slope},
                          {"excess_non_increasing", c.excess_non_increasing},
                          {"min_excess", min_excess}}});
}

int cmd_distcheck(const Globals& g) {
  const auto cfg = load_config(g);
  const auto d = skrig::run_distribution_checks(cfg, g.jobs);
  const auto dir = out_dir(g);
  skrig::write_file(dir / "distcheck.csv", [&](std::ostream& o) { skrig::write_distcheck_csv(o, d); });
  skrig::write_report_json(dir / "report.json", skrig::distcheck_json(d));
  for (const auto& l : d.lags) {
    std::cout << "h " << l.h << ": " << (l.positivity && l.eigen_bound ? "pass" : "FAIL");
    if (l.sampled) std::cout << " ks_gamma " << l.sampled->ks_gamma << " ks_c0 " << l.sampled->ks_c0;
    std::cout << '\n';
  }
  const int rc = finish(g, cfg, {{{"all_pass", d.all_pass}}});
  return rc != 0 ? rc : (g.check && !d.all_pass ? kExitCheck : 0);
}

int cmd_realdata(const Globals& g, std::string train, std::string test, std::optional<double> theta_fixed) {
  auto cfg = load_config(g);
  if (train.empty()) train = cfg.realdata.train_path;
  if (test.empty()) test = cfg.realdata.test_path;
  skrig::detail::require(!train.empty() && !test.empty(), "realdata needs --train and --test");
  if (theta_fixed) cfg.realdata.theta_fixed = *theta_fixed;
  const auto r = skrig::run_real_data_study(skrig::ingest_grid_csv(train), skrig::ingest_grid_csv(test), cfg);
  const auto dir = out_dir(g);
  skrig::write_file(dir / "amse.csv", [&](std::ostream& o) { skrig::write_realdata_csv(o, r); });
  skrig::write_report_json(dir / "report.json", skrig::realdata_json(r));
  std::cout << "parametric " << r.parametric.mean << " (" << r.parametric.std << "), nonparametric "
            << r.nonparametric.mean << " (" << r.nonparametric.std << "), failed days " << r.failures << '\n';
  return finish(g, cfg, {{{"parametric_mean", r.parametric.mean},
                          {"nonparametric_mean", r.nonparametric.mean},
                          {"failures", r.failures}}});
}

// Scale J when the normalized sites are exactly the (2^J + 1)^2 dyadic lattice points.
std::optional<int> detect_dyadic_scale(const skrig::SiteSet& sites) {
  for (int j = 0; j <= 12; ++j) {
    const std::size_t side = (std::size_t{1} << j) + 1;
    if (side * side != sites.size()) continue;
    const double unit = std::ldexp(1.0, j);
    for (const auto& s : sites) {
      if (std::abs(s.x * unit - std::round(s.x * unit)) > 1e-9 || std::abs(s.y * unit - std::round(s.y * unit)) > 1e-9)
        return std::nullopt;
    }
    return j;
  }
  return std::nullopt;
}

int cmd_ingest_check(const std::string& path) {
  const auto ds = skrig::ingest_grid_csv(path);
  json out{{"sites", ds.sites.size()}, {"days", ds.days.size()}, {"normalization", ds.map.to_json()}};
  const auto scale = detect_dyadic_scale(ds.sites);
  out["dyadic_scale"] = scale ? json(*scale) : json(nullptr);
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skrig: kriging with empirical covariance estimates on dyadic grids"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config (.toml or .json)");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads (0: hardware concurrency)")->capture_default_str();
  app.add_flag("--check", g.check, "compare results against the config's check thresholds");

  auto* simulate = app.add_subcommand("simulate", "draw one field on the training grid");
  auto* estimate = app.add_subcommand("estimate", "empirical covariance and semivariogram by lag");
  std::string field_path;
  estimate->add_option("--field", field_path, "field CSV (index,x,y,value); simulated when omitted");

  auto* krige = app.add_subcommand("krige", "predict from observed input sites");
  std::string inputs_path, targets_path, train_path;
  krige->add_option("--inputs", inputs_path, "observations CSV (index,x,y,value)")->required();
  krige->add_option("--targets", targets_path, "target sites CSV (index,x,y); evaluation grid when omitted");
  krige->add_option("--train", train_path, "training field CSV; switches to the empirical predictor");

  auto* study = app.add_subcommand("study", "Monte Carlo studies");
  study->require_subcommand(1);
  auto* replicate = study->add_subcommand("replicate", "AMSE of theoretical vs empirical kriging");
  auto* map = study->add_subcommand("map", "per-site MSE raster of empirical kriging");
  auto* converge = study->add_subcommand("converge", "estimation error and excess risk across grid scales");
  auto* distcheck = study->add_subcommand("distcheck", "quadratic-form distribution checks");
  auto* realdata = study->add_subcommand("realdata", "ordinary kriging on gridded multi-day data");
  std::string train, test;
  std::optional<double> theta_fixed;
  realdata->add_option("--train", train, "training CSV");
  realdata->add_option("--test", test, "test CSV");
  realdata->add_option("--theta-fixed", theta_fixed, "parametric TPL theta (domain units) instead of the fit");

  auto* ingest = app.add_subcommand("ingest-check", "validate a gridded CSV and print its summary");
  std::string ingest_path;
  ingest->add_option("path", ingest_path, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) return cmd_simulate(g);
    if (*estimate) return cmd_estimate(g, field_path);
    if (*krige) return cmd_krige(g, inputs_path, targets_path, train_path);
    if (*replicate) return cmd_replicate(g);
    if (*map) return cmd_map(g);
    if (*converge) return cmd_converge(g);
    if (*distcheck) return cmd_distcheck(g);
    if (*realdata) return cmd_realdata(g, train, test, theta_fixed);
    if (*ingest) return cmd_ingest_check(ingest_path);
  } catch (const skrig::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const skrig::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
