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

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "skrig/csv.hpp"
#include "skrig/errors.hpp"
#include "skrig/harness/experiment.hpp"
#include "skrig/harness/realdata.hpp"
#include "skrig/kriging.hpp"

namespace skrig {

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

/// Per-rep AMSE in sweep order; failed reps are omitted (they are listed in report.json).
inline void write_amse_csv(std::ostream& out, const std::vector<ReplicationReport>& studies) {
  out << "theta,rep,theoretical,empirical\n";
  for (const auto& s : studies) {
    for (const auto& r : s.reps) {
      if (!r.ok) continue;
      out << csv::format(s.theta) << ',' << r.rep << ',' << csv::format(r.amse_theoretical) << ','
          << csv::format(r.amse_empirical) << '\n';
    }
  }
}

/// Grid rows (input = 0) followed by the input sites (input = 1).
inline void write_mse_map_csv(std::ostream& out, const ReplicationReport& s) {
  out << "x,y,mse,input\n";
  for (std::size_t i = 0; i < s.eval_grid.size(); ++i) {
    out << csv::format(s.eval_grid[i].x) << ',' << csv::format(s.eval_grid[i].y) << ','
        << csv::format(s.raster_empirical(static_cast<Eigen::Index>(i))) << ",0\n";
  }
  for (std::size_t i = 0; i < s.inputs.size(); ++i) {
    out << csv::format(s.inputs[i].x) << ',' << csv::format(s.inputs[i].y) << ','
        << csv::format(s.input_mse_empirical(static_cast<Eigen::Index>(i))) << ",1\n";
  }
}

inline void write_convergence_csv(std::ostream& out, const ConvergenceReport& c) {
  out << "scale,n,theta_domain,cutoff,p90_sup_error,median_sup_error,median_excess,min_excess,failures\n";
  for (const auto& p : c.points) {
    out << p.accuracy.scale << ',' << p.accuracy.n << ',' << csv::format(p.accuracy.theta_domain) << ','
        << csv::format(p.accuracy.cutoff) << ',' << csv::format(p.accuracy.p90) << ','
        << csv::format(p.accuracy.median) << ',' << csv::format(p.median_excess) << ',' << csv::format(p.min_excess)
        << ',' << p.failures << '\n';
  }
}

inline void write_distcheck_csv(std::ostream& out, const DistcheckReport& d) {
  out << "h,n_h,positivity,eigen_bound,min_ell,min_rho,xi1,max_degree,gamma_mean,gamma_theory_mean,gamma_var,"
         "gamma_theory_var,ks_gamma,ks_c0\n";
  for (const auto& l : d.lags) {
    out << csv::format(l.h) << ',' << l.n_h << ',' << (l.positivity ? 1 : 0) << ',' << (l.eigen_bound ? 1 : 0) << ','
        << csv::format(l.min_ell) << ',' << csv::format(l.min_rho) << ',' << csv::format(l.xi1) << ','
        << csv::format(l.max_degree);
    if (l.sampled) {
      const auto& q = *l.sampled;
      out << ',' << csv::format(q.gamma_mean) << ',' << csv::format(q.gamma_theory_mean) << ','
          << csv::format(q.gamma_var) << ',' << csv::format(q.gamma_theory_var) << ',' << csv::format(q.ks_gamma)
          << ',' << csv::format(q.ks_c0);
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
}

inline void write_realdata_csv(std::ostream& out, const RealDataReport& r) {
  out << "day,ok,theta,sill,parametric,nonparametric,dropped_lags\n";
  for (const auto& d : r.days) {
    out << d.day << ',' << (d.ok ? 1 : 0);
    if (d.ok) {
      out << ',' << csv::format(d.theta) << ',' << (std::isfinite(d.sill) ? csv::format(d.sill) : "") << ','
          << csv::format(d.amse_parametric) << ',' << csv::format(d.amse_nonparametric) << ',' << d.dropped_lags;
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
}

inline nlohmann::json replication_json(const std::vector<ReplicationReport>& studies) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : studies) {
    runs.push_back({{"theta", s.theta},
                    {"theoretical", detail::summary_json(s.theoretical)},
                    {"empirical", detail::summary_json(s.empirical)},
                    {"excess", detail::summary_json(s.excess)},
                    {"ok_reps", s.reps.size() - s.failures},
                    {"metadata", s.metadata}});
  }
  return {{"kind", "replicate"}, {"runs", runs}};
}

inline nlohmann::json convergence_json(const ConvergenceReport& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : c.points) {
    pts.push_back({{"scale", p.accuracy.scale},
                   {"n", p.accuracy.n},
                   {"p90_sup_error", p.accuracy.p90},
                   {"median_excess", p.median_excess},
                   {"min_excess", p.min_excess},
                   {"max_form_gap", p.max_form_gap},
                   {"jitter_used", p.accuracy.jitter},
                   {"failures", p.failures}});
  }
  return {{"kind", "converge"},
          {"points", pts},
          {"sup_error_slope", c.sup_error_slope},
          {"excess_slope", detail::finite_or_null(c.excess_slope)},
          {"excess_non_increasing", c.excess_non_increasing},
          {"metadata", c.metadata}};
}

inline nlohmann::json distcheck_json(const DistcheckReport& d) {
  nlohmann::json lags = nlohmann::json::array();
  for (const auto& l : d.lags) {
    nlohmann::json e{{"h", l.h}, {"n_h", l.n_h}, {"positivity", l.positivity}, {"eigen_bound", l.eigen_bound}};
    if (l.sampled) {
      e["ks_gamma"] = l.sampled->ks_gamma;
      e["ks_c0"] = l.sampled->ks_c0;
      e["gamma_mean"] = l.sampled->gamma_mean;
      e["gamma_theory_mean"] = l.sampled->gamma_theory_mean;
    }
    lags.push_back(std::move(e));
  }
  return {{"kind", "distcheck"}, {"lags", lags}, {"all_pass", d.all_pass}, {"metadata", d.metadata}};
}

inline nlohmann::json realdata_json(const RealDataReport& r) {
  return {{"kind", "realdata"},
          {"parametric", detail::summary_json(r.parametric)},
          {"nonparametric", detail::summary_json(r.nonparametric)},
          {"days", r.days.size()},
          {"failures", r.failures},
          {"metadata", r.metadata}};
}

/// Adds the wall-clock `timestamp` field; it is the only non-deterministic entry.
inline void write_report_json(const std::filesystem::path& path, nlohmann::json report) {
  report["timestamp"] = detail::utc_timestamp();
  std::ofstream out(path);
  detail::require(static_cast<bool>(out), "cannot write " + path.string());
  out << report.dump(2) << '\n';
}

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  detail::require(static_cast<bool>(out), "cannot write " + path.string());
  fn(out);
}

}  // namespace skrig
