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

// Gridded multi-day datasets: CSV ingestion and the ordinary-kriging comparison between a
// nonparametric semivariogram and a fitted parametric (TPL) model.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "skrig/covmodel.hpp"
#include "skrig/csv.hpp"
#include "skrig/errors.hpp"
#include "skrig/estimate.hpp"
#include "skrig/geometry.hpp"
#include "skrig/grid.hpp"
#include "skrig/harness/config.hpp"
#include "skrig/harness/experiment.hpp"
#include "skrig/kriging.hpp"
#include "skrig/rng.hpp"
#include "skrig/stats.hpp"

namespace skrig {

/// Per-axis min-max map from the file's coordinates onto [0, 1]^2.
struct AffineMap {
  double x_min = 0.0, x_span = 1.0, y_min = 0.0, y_span = 1.0;

  [[nodiscard]] Site apply(double x, double y) const { return {(x - x_min) / x_span, (y - y_min) / y_span}; }
  [[nodiscard]] nlohmann::json to_json() const {
    return {{"x_min", x_min}, {"x_span", x_span}, {"y_min", y_min}, {"y_span", y_span}};
  }
};

/// One site set observed on several days; days[t](i) is the value at sites[i] on day t.
struct GridDataset {
  SiteSet sites;
  std::vector<std::string> day_labels;
  std::vector<Eigen::VectorXd> days;
  std::vector<long long> indices;  // file index of each site
  AffineMap map;

  [[nodiscard]] std::vector<FieldSample> samples() const {
    std::vector<FieldSample> out;
    for (const auto& v : days) out.push_back({sites, v, 0});
    return out;
  }
};

namespace detail {

struct RawSite {
  double x, y;
};

inline GridDataset assemble(const std::vector<long long>& order, const std::map<long long, RawSite>& coords,
                            std::vector<std::string> labels, const std::vector<std::map<long long, double>>& values,
                            const std::string& source) {
  if (coords.size() < 2) throw ValidationError(source + ": at least 2 sites are needed, found " + std::to_string(coords.size()));
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& [idx, p] : coords) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  if (!(x1 > x0) || !(y1 > y0)) throw ValidationError(source + ": sites must span both axes");
  GridDataset ds;
  ds.map = {x0, x1 - x0, y0, y1 - y0};
  std::vector<Site> pts;
  for (auto idx : order) {
    const auto& p = coords.at(idx);
    Site s = ds.map.apply(p.x, p.y);
    // Pin the extremes so the normalized extent is exactly [0, 1].
    if (p.x == x1) s.x = 1.0;
    if (p.y == y1) s.y = 1.0;
    pts.push_back(s);
  }
  ds.sites = SiteSet(std::move(pts));
  ds.indices = order;
  ds.day_labels = std::move(labels);
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (values[t].size() != order.size()) {
      throw ValidationError(source + ": day " + ds.day_labels[t] + " has " + std::to_string(values[t].size()) +
                            " sites, expected " + std::to_string(order.size()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto it = values[t].find(order[i]);
      if (it == values[t].end()) {
        throw ValidationError(source + ": day " + ds.day_labels[t] + " is missing site index " + std::to_string(order[i]));
      }
      v(static_cast<Eigen::Index>(i)) = it->second;
    }
    ds.days.push_back(std::move(v));
  }
  return ds;
}

}  // namespace detail

/// Long format `day,index,x,y,value` or wide format `index,x,y,v_1,...,v_T`.
inline GridDataset ingest_grid_csv(std::istream& in, const std::string& source = "grid.csv") {
  const auto table = csv::read(in, source);
  const auto& h = table.header;
  const bool long_format = h == std::vector<std::string>{"day", "index", "x", "y", "value"};
  const bool wide_format = h.size() >= 4 && h[0] == "index" && h[1] == "x" && h[2] == "y";
  if (!long_format && !wide_format) {
    throw ValidationError(source + ": expected header day,index,x,y,value or index,x,y,v_1,...");
  }
  std::vector<long long> order;
  std::map<long long, detail::RawSite> coords;
  std::vector<std::string> labels;
  std::vector<std::map<long long, double>> values;
  std::unordered_map<std::string, std::size_t> day_slot;

  auto register_site = [&](long long idx, double x, double y, const std::string& where) {
    const auto it = coords.find(idx);
    if (it == coords.end()) {
      coords.emplace(idx, detail::RawSite{x, y});
      order.push_back(idx);
    } else if (it->second.x != x || it->second.y != y) {
      throw ValidationError(where + ": site index " + std::to_string(idx) + " has coordinates that differ across days");
    }
  };

  if (wide_format) {
    for (std::size_t c = 3; c < h.size(); ++c) labels.push_back(h[c]);
    values.resize(labels.size());
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = source + ":" + std::to_string(table.line_numbers[r]);
    if (long_format) {
      const std::string& day = row[0];
      const long long idx = csv::parse_int(row[1], where);
      const double x = csv::parse_double(row[2], where), y = csv::parse_double(row[3], where);
      const double v = csv::parse_double(row[4], where);
      auto [slot, fresh] = day_slot.emplace(day, labels.size());
      if (fresh) {
        labels.push_back(day);
        values.emplace_back();
      }
      register_site(idx, x, y, where);
      if (!values[slot->second].emplace(idx, v).second) {
        throw ValidationError(where + ": duplicate site for day " + day + ", index " + std::to_string(idx));
      }
    } else {
      const long long idx = csv::parse_int(row[0], where);
      if (coords.count(idx)) throw ValidationError(where + ": duplicate site index " + std::to_string(idx));
      register_site(idx, csv::parse_double(row[1], where), csv::parse_double(row[2], where), where);
      for (std::size_t c = 3; c < row.size(); ++c) values[c - 3].emplace(idx, csv::parse_double(row[c], where));
    }
  }
  return detail::assemble(order, coords, std::move(labels), values, source);
}

inline GridDataset ingest_grid_csv(const std::string& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), "cannot open " + path);
  return ingest_grid_csv(in, path);
}

/// In-memory counterpart of ingest_grid_csv: same normalization, indices 1..n, days 1..T.
inline GridDataset make_grid_dataset(const SiteSet& sites, const std::vector<Eigen::VectorXd>& days) {
  std::vector<long long> order;
  std::map<long long, detail::RawSite> coords;
  std::vector<std::string> labels;
  std::vector<std::map<long long, double>> values(days.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto idx = static_cast<long long>(i + 1);
    order.push_back(idx);
    coords.emplace(idx, detail::RawSite{sites[i].x, sites[i].y});
  }
  for (std::size_t t = 0; t < days.size(); ++t) {
    labels.push_back(std::to_string(t + 1));
    detail::require(static_cast<std::size_t>(days[t].size()) == sites.size(), "day values must match the site count");
    for (std::size_t i = 0; i < sites.size(); ++i) values[t].emplace(order[i], days[t](static_cast<Eigen::Index>(i)));
  }
  return detail::assemble(order, coords, std::move(labels), values, "dataset");
}

inline void write_grid_csv(std::ostream& out, const SiteSet& sites, const std::vector<Eigen::VectorXd>& days) {
  out << "day,index,x,y,value\n";
  for (std::size_t t = 0; t < days.size(); ++t) {
    for (std::size_t i = 0; i < sites.size(); ++i) {
      out << (t + 1) << ',' << (i + 1) << ',' << csv::format(sites[i].x) << ',' << csv::format(sites[i].y) << ','
          << csv::format(days[t](static_cast<Eigen::Index>(i))) << '\n';
    }
  }
}

/// Positions within `sites` of the dyadic grid points at `scale` (lexicographic order).
inline std::vector<std::size_t> dyadic_subgrid(const SiteSet& sites, int scale) {
  std::map<std::pair<double, double>, std::size_t> where;
  for (std::size_t i = 0; i < sites.size(); ++i) where.emplace(std::make_pair(sites[i].x, sites[i].y), i);
  const auto grid = dyadic_grid(scale);
  std::vector<std::size_t> out;
  out.reserve(grid.size());
  for (const auto& g : grid) {
    // Exact lookup first, then the nearest site within a rounding tolerance.
    auto it = where.find({g.x, g.y});
    if (it != where.end()) {
      out.push_back(it->second);
      continue;
    }
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const double dist = distance(sites[i], g);
      if (dist < best_d) {
        best_d = dist;
        best = i;
      }
    }
    if (best_d > 1e-9) {
      throw ValidationError("dataset sites do not contain the dyadic grid at scale " + std::to_string(scale) +
                            " (no site at (" + csv::format(g.x) + ", " + csv::format(g.y) + "))");
    }
    out.push_back(best);
  }
  return out;
}

struct TplFit {
  double theta = 0.0;
  double sill = 0.0;
  double loss = 0.0;
};

/// Weighted least squares of sill * (1 - c_TPL(h; theta)) against gamma_hat over the
/// positive retained lags below the cutoff, weights n_h. The sill is closed-form per theta.
inline TplFit fit_tpl(const EmpiricalCovariance& emp, std::span<const double> theta_grid) {
  detail::require(!theta_grid.empty(), "TPL fit needs candidate theta values");
  TplFit best{0.0, 0.0, INFINITY};
  for (double theta : theta_grid) {
    const CovModel m(Family::kTPL, theta);
    double sgg = 0.0, sgy = 0.0, syy = 0.0;
    for (const auto& l : emp.lags()) {
      if (l.h <= 0.0 || !l.in_cutoff || !l.retained) continue;
      const double w = static_cast<double>(l.n_h), g = semivariogram(m, l.h);
      sgg += w * g * g;
      sgy += w * g * l.gammahat;
      syy += w * l.gammahat * l.gammahat;
    }
    if (!(sgg > 0.0)) continue;
    const double sill = sgy / sgg;
    const double loss = syy - sgy * sgy / sgg;
    if (loss < best.loss) best = {theta, sill, loss};
  }
  detail::require(std::isfinite(best.loss), "TPL fit: no usable lag");
  return best;
}

inline std::vector<double> default_theta_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 60; ++i) out.push_back(0.025 * i);
  return out;
}

struct DayRecord {
  std::string day;
  bool ok = false;
  std::string error;
  double amse_parametric = 0.0;
  double amse_nonparametric = 0.0;
  double theta = 0.0;
  double sill = 0.0;
  std::size_t dropped_lags = 0;
};

struct RealDataReport {
  std::vector<DayRecord> days;
  Summary parametric, nonparametric;
  std::size_t failures = 0;
  std::vector<std::size_t> input_positions;
  nlohmann::json metadata;
};

/// Day t: estimate from the training day's dyadic subgrid, predict the test day's sites
/// from its values at d fixed input sites (drawn once), score on all other sites.
inline RealDataReport run_real_data_study(const GridDataset& train, const GridDataset& test,
                                          const ExperimentConfig& cfg) {
  detail::require(cfg.mode == KrigingVariant::kOrdinary, "real-data study runs ordinary kriging (mode = ordinary)");
  detail::require(train.days.size() == test.days.size(), "training and test files have different day counts (" +
                                                             std::to_string(train.days.size()) + " vs " +
                                                             std::to_string(test.days.size()) + ")");
  detail::require(!train.days.empty(), "real-data study needs at least one day");
  detail::require(static_cast<std::size_t>(cfg.d) < test.sites.size(), "d must be smaller than the test site count");

  const auto sub = dyadic_subgrid(train.sites, cfg.realdata.scale);
  const auto grid = dyadic_grid(cfg.realdata.scale);
  const auto table = lag_table(grid);

  // Input positions: d distinct test sites, fixed for the whole study.
  std::vector<std::size_t> perm(test.sites.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_engine(stream_seed(cfg.seed, 0, Stream::kSites));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> in_pos(perm.begin(), perm.begin() + cfg.d);
  std::sort(in_pos.begin(), in_pos.end());
  std::vector<std::size_t> out_pos;
  std::vector<Site> in_pts, out_pts;
  {
    std::vector<bool> is_input(test.sites.size(), false);
    for (auto p : in_pos) is_input[p] = true;
    for (std::size_t i = 0; i < test.sites.size(); ++i) {
      if (is_input[i]) {
        in_pts.push_back(test.sites[i]);
      } else {
        out_pos.push_back(i);
        out_pts.push_back(test.sites[i]);
      }
    }
  }
  const SiteSet inputs(std::move(in_pts)), targets(std::move(out_pts));
  const auto theta_grid = cfg.realdata.theta_grid.empty() ? default_theta_grid() : cfg.realdata.theta_grid;
  const double cutoff = cfg.estimation.cutoff();

  RealDataReport rep;
  rep.input_positions = in_pos;
  for (std::size_t t = 0; t < train.days.size(); ++t) {
    DayRecord rec;
    rec.day = test.day_labels[t];
    try {
      Eigen::VectorXd xs(static_cast<Eigen::Index>(sub.size()));
      for (std::size_t i = 0; i < sub.size(); ++i) xs(static_cast<Eigen::Index>(i)) = train.days[t](static_cast<Eigen::Index>(sub[i]));
      const auto emp = empirical_cov(xs, table, cfg.estimation, cutoff);
      rec.dropped_lags = emp.dropped_lags().size();
      const auto& day = test.days[t];
      Eigen::VectorXd xin(static_cast<Eigen::Index>(in_pos.size())), truth(static_cast<Eigen::Index>(out_pos.size()));
      for (std::size_t i = 0; i < in_pos.size(); ++i) xin(static_cast<Eigen::Index>(i)) = day(static_cast<Eigen::Index>(in_pos[i]));
      for (std::size_t i = 0; i < out_pos.size(); ++i) truth(static_cast<Eigen::Index>(i)) = day(static_cast<Eigen::Index>(out_pos[i]));

      const auto nonpar = KrigingPredictor::empirical(emp, inputs, KrigingVariant::kOrdinary);
      rec.amse_nonparametric = amse(nonpar.predict(targets, xin), truth);

      if (cfg.realdata.theta_fixed) {
        rec.theta = *cfg.realdata.theta_fixed;
        rec.sill = NAN;
      } else {
        const auto fit = fit_tpl(emp, theta_grid);
        rec.theta = fit.theta;
        rec.sill = fit.sill;
      }
      // Ordinary kriging weights do not depend on the sill.
      const auto par = KrigingPredictor::theoretical(CovModel(Family::kTPL, rec.theta), inputs, KrigingVariant::kOrdinary);
      rec.amse_parametric = amse(par.predict(targets, xin), truth);
      rec.ok = true;
    } catch (const NumericalError& e) {
      rec.error = e.what();
    }
    rep.failures += rec.ok ? 0 : 1;
    rep.days.push_back(std::move(rec));
  }
  std::vector<double> p, np;
  for (const auto& r : rep.days) {
    if (!r.ok) continue;
    p.push_back(r.amse_parametric);
    np.push_back(r.amse_nonparametric);
  }
  rep.parametric = summarize(p);
  rep.nonparametric = summarize(np);
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : rep.days) {
    if (!r.ok) failures.push_back({{"day", r.day}, {"error", r.error}});
  }
  rep.metadata = {{"seed", cfg.seed},
                  {"rng", kRngDescription},
                  {"subgrid_scale", cfg.realdata.scale},
                  {"d", cfg.d},
                  {"estimation", to_json(cfg.estimation)},
                  {"theta_fixed", cfg.realdata.theta_fixed ? nlohmann::json(*cfg.realdata.theta_fixed) : nlohmann::json(nullptr)},
                  {"theta_fit", "weighted least squares on gamma_hat, weights n_h, sill closed-form"},
                  {"normalization", {{"train", train.map.to_json()}, {"test", test.map.to_json()}}},
                  {"site_hashes", {{"inputs", hex_hash(inputs.hash())}, {"train", hex_hash(train.sites.hash())}}},
                  {"std_convention", kStdConvention},
                  {"failures", failures}};
  return rep;
}

}  // namespace skrig
