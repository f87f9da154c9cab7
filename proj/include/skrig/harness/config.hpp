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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "skrig/covmodel.hpp"
#include "skrig/errors.hpp"
#include "skrig/estimate.hpp"
#include "skrig/grid.hpp"
#include "skrig/harness/toml_lite.hpp"

namespace skrig {

inline const char* layout_name(SiteLayout l) {
  switch (l) {
    case SiteLayout::kUniform: return "uniform";
    case SiteLayout::kCorner: return "corner";
    case SiteLayout::kRing: return "ring";
  }
  return "?";
}

inline SiteLayout parse_layout(const std::string& s) {
  if (s == "uniform") return SiteLayout::kUniform;
  if (s == "corner") return SiteLayout::kCorner;
  if (s == "ring") return SiteLayout::kRing;
  throw ValidationError("unknown site layout '" + s + "' (expected uniform|corner|ring)");
}

struct ConvergenceSettings {
  std::vector<int> scales{2, 3, 4, 5};
  std::size_t reps = 200;
};

struct DistcheckSettings {
  int scale = 2;
  std::size_t reps = 5000;
  std::size_t ks_lags = 3;
};

struct RealDataSettings {
  std::string train_path;
  std::string test_path;
  int scale = 4;
  std::optional<double> theta_fixed;  // domain units
  std::vector<double> theta_grid;     // candidate theta values (domain units) for the fit
};

/// Everything a study needs; parsed from JSON or the TOML subset.
struct ExperimentConfig {
  ModelSpec model;
  int train_scale = 3;
  int d = 10;
  SiteLayout layout = SiteLayout::kUniform;
  SiteSplit split{};
  int n_eval = 0;  // 0: 1681 for train_scale <= 3, 2401 above
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::vector<double> theta_sweep;
  KrigingVariant mode = KrigingVariant::kSimple;
  std::optional<double> thinning_p;
  EstimationConfig estimation = EstimationConfig::at_support();
  double max_failure_fraction = 0.05;
  ConvergenceSettings convergence;
  DistcheckSettings distcheck;
  RealDataSettings realdata;
  nlohmann::json check = nlohmann::json::object();  // thresholds used by --check

  [[nodiscard]] int eval_points() const { return n_eval > 0 ? n_eval : (train_scale <= 3 ? 1681 : 2401); }

  [[nodiscard]] int eval_side() const {
    const int n = eval_points();
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    detail::require(side * side == n, "n_eval must be a perfect square");
    return side;
  }

  void validate() const {
    detail::require(train_scale >= 0 && train_scale <= 6, "train_scale must lie in [0, 6]");
    detail::require(d >= 1, "d must be positive");
    detail::require(reps >= 1, "reps must be at least 1");
    (void)eval_side();
    detail::require(eval_side() >= 2, "evaluation grid needs at least 2 points per side");
    if (layout != SiteLayout::kUniform) {
      detail::require(split.in_region >= 0 && split.elsewhere >= 0 && split.in_region + split.elsewhere == d,
                      "site split must sum to d");
    }
    if (thinning_p) detail::require(*thinning_p > 0.0 && *thinning_p <= 1.0, "thinning_p must lie in (0, 1]");
    detail::require(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0,
                    "max_failure_fraction must lie in [0, 1)");
    for (double t : theta_sweep) detail::require(t > 0.0, "theta_sweep values must be positive");
    detail::require(convergence.scales.size() >= 3, "convergence needs at least three grid scales");
    detail::require(convergence.reps >= 1, "convergence reps must be positive");
    detail::require(distcheck.reps >= 2, "distcheck reps must be at least 2");
    estimation.validate();
  }
};

namespace detail {

template <class T>
T get(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  detail::require(j.is_object(), "config must be an object");
  ExperimentConfig c;
  try {
    if (j.contains("model")) c.model = parse_model_spec(j.at("model"));
    c.train_scale = detail::get(j, "train_scale", c.train_scale);
    c.d = detail::get(j, "d", c.d);
    if (j.contains("layout")) {
      const auto& l = j.at("layout");
      if (l.is_string()) {
        c.layout = parse_layout(l.get<std::string>());
      } else {
        c.layout = parse_layout(l.at("type").get<std::string>());
        c.split.in_region = detail::get(l, "in_region", 0);
        c.split.elsewhere = detail::get(l, "elsewhere", 0);
      }
      if (c.layout != SiteLayout::kUniform && c.split.in_region + c.split.elsewhere == 0) {
        c.split = {c.d - c.d / 6, c.d / 6};
      }
    }
    c.n_eval = detail::get(j, "n_eval", c.n_eval);
    c.reps = detail::get<std::size_t>(j, "reps", c.reps);
    c.seed = detail::get<std::uint64_t>(j, "seed", c.seed);
    c.theta_sweep = detail::get(j, "theta_sweep", c.theta_sweep);
    if (j.contains("mode")) c.mode = parse_variant(j.at("mode").get<std::string>());
    if (j.contains("thinning_p") && !j.at("thinning_p").is_null()) c.thinning_p = j.at("thinning_p").get<double>();
    c.max_failure_fraction = detail::get(j, "max_failure_fraction", c.max_failure_fraction);

    // Ordinary kriging defaults to untruncated estimation with sparse-lag dropping.
    EstimationConfig base = EstimationConfig::at_support();
    if (c.mode == KrigingVariant::kOrdinary) {
      base = EstimationConfig::untruncated();
      base.nu_min = 0.35;
    }
    base.mode = c.mode;
    c.estimation = j.contains("estimation") ? parse_estimation_config(j.at("estimation"), base) : base;
    detail::require(c.estimation.mode == c.mode, "estimation.mode must match mode");

    if (j.contains("convergence")) {
      const auto& v = j.at("convergence");
      c.convergence.scales = detail::get(v, "scales", c.convergence.scales);
      c.convergence.reps = detail::get<std::size_t>(v, "reps", c.convergence.reps);
    }
    if (j.contains("distcheck")) {
      const auto& v = j.at("distcheck");
      c.distcheck.scale = detail::get(v, "scale", c.distcheck.scale);
      c.distcheck.reps = detail::get<std::size_t>(v, "reps", c.distcheck.reps);
      c.distcheck.ks_lags = detail::get<std::size_t>(v, "ks_lags", c.distcheck.ks_lags);
    }
    if (j.contains("realdata")) {
      const auto& v = j.at("realdata");
      c.realdata.train_path = detail::get<std::string>(v, "train", "");
      c.realdata.test_path = detail::get<std::string>(v, "test", "");
      c.realdata.scale = detail::get(v, "scale", c.realdata.scale);
      if (v.contains("theta_fixed") && !v.at("theta_fixed").is_null()) {
        c.realdata.theta_fixed = v.at("theta_fixed").get<double>();
      }
      c.realdata.theta_grid = detail::get(v, "theta_grid", c.realdata.theta_grid);
    }
    if (j.contains("check")) c.check = j.at("check");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json layout{{"type", layout_name(c.layout)}};
  if (c.layout != SiteLayout::kUniform) {
    layout["in_region"] = c.split.in_region;
    layout["elsewhere"] = c.split.elsewhere;
  }
  nlohmann::json j{{"model", to_json(c.model)},
                   {"train_scale", c.train_scale},
                   {"d", c.d},
                   {"layout", layout},
                   {"n_eval", c.eval_points()},
                   {"reps", c.reps},
                   {"seed", c.seed},
                   {"theta_sweep", c.theta_sweep},
                   {"mode", variant_name(c.mode)},
                   {"thinning_p", c.thinning_p ? nlohmann::json(*c.thinning_p) : nlohmann::json(nullptr)},
                   {"estimation", to_json(c.estimation)},
                   {"max_failure_fraction", c.max_failure_fraction}};
  return j;
}

/// Reads a .toml file with the subset parser, anything else as JSON.
inline nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), "cannot open config file " + path.string());
  if (path.extension() == ".toml") return toml::parse(in, path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace skrig
