#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "eigenshape/analytic.hpp"
#include "eigenshape/io.hpp"
#include "eigenshape/optimize.hpp"
#include "eigenshape/shapes.hpp"

namespace eigenshape {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reference-domain validation settings for the `eig` subcommand.
struct EigConfig {
  AnalyticDomain domain = AnalyticDomain::square;
  double size = 1.0;
  double h = 1.0 / 128;
  int n = 3;
  double tol = 1e-8;
  double threshold = 0.005;  // relative eigenvalue error gate
};

/// Full run configuration parsed from one JSON document.
struct RunConfig {
  Grid grid;
  json shape_spec;
  ObjectiveSpec objective;
  OptConfig opt;
  DiagnosticsConfig diagnostics;
  json thresholds;  // optional diagnose gates
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int checkpoint_period = 0;  // 0 disables intermediate checkpoints
  int threads = 1;
  std::optional<EigConfig> eig;
};

namespace detail {

inline Grid parse_grid(const json& j) {
  if (!j.contains("dims") || !j.contains("h") || !j.contains("origin"))
    throw ConfigError("grid needs dims, h, origin");
  const auto& jd = j.at("dims");
  if (jd.size() != 2 && jd.size() != 3) throw ConfigError("grid dims must have 2 or 3 entries");
  std::array<index_t, 3> dims{1, 1, 1};
  for (std::size_t a = 0; a < jd.size(); ++a) dims[a] = jd[a].get<index_t>();
  Point origin{0, 0, 0};
  for (std::size_t a = 0; a < j.at("origin").size() && a < 3; ++a)
    origin[a] = j.at("origin")[a].get<double>();
  try {
    return Grid(dims, j.at("h").get<double>(), origin, static_cast<int>(jd.size()));
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

inline Point parse_point(const json& j) {
  Point p{0, 0, 0};
  for (std::size_t a = 0; a < j.size() && a < 3; ++a) p[a] = j[a].get<double>();
  return p;
}

inline Field build_shape_field(const Grid& g, const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "disk") return disk_field(g, parse_point(spec.at("center")), spec.at("radius"));
  if (kind == "square") return square_field(g, parse_point(spec.at("center")), spec.at("side"));
  if (kind == "half_plane")
    return half_plane_field(g, parse_point(spec.at("normal")), spec.at("offset"));
  if (kind == "union") {
    std::vector<Field> parts;
    for (const auto& part : spec.at("parts")) parts.push_back(build_shape_field(g, part));
    return union_fields(parts);
  }
  if (kind == "checkpoint") {
    const std::string path = spec.at("path").get<std::string>();
    if (!std::filesystem::exists(path)) throw ConfigError("checkpoint does not exist: " + path);
    auto shape = load_shape(path);
    if (!shape.grid.same_layout(g)) throw ConfigError("checkpoint grid mismatch: " + path);
    return shape.phi;
  }
  throw ConfigError("unknown shape kind: " + kind);
}

inline ObjectiveSpec parse_objective(const json& j) {
  const std::string form = j.value("form", "linear");
  const double xi0 = j.value("xi0", 1.0);
  ObjectiveSpec spec;
  if (form == "linear") {
    spec = linear_objective(j.at("mu").get<std::vector<double>>(), xi0);
  } else if (form == "powersum") {
    spec = powersum_objective(j.at("n").get<int>(), j.at("q").get<double>(), xi0);
  } else if (form == "sum_fp") {
    const int n = j.at("n").get<int>();
    spec = linear_objective(std::vector<double>(static_cast<std::size_t>(n), 1.0), xi0);
    spec = smooth_p(spec, j.at("p").get<double>());
  } else {
    throw ConfigError("unknown objective form: " + form);
  }
  if (j.contains("derivative_lb")) spec.derivative_lb = j.at("derivative_lb").get<double>();
  if (j.contains("derivative_ub")) spec.derivative_ub = j.at("derivative_ub").get<double>();
  if (j.contains("cluster_tol")) spec.cluster_tol = j.at("cluster_tol").get<double>();
  spec.validate();
  return spec;
}

inline OptConfig parse_opt(const json& j) {
  OptConfig cfg;
  cfg.max_steps = j.value("max_steps", cfg.max_steps);
  cfg.cfl = j.value("cfl", cfg.cfl);
  cfg.reinit_period = j.value("reinit_period", cfg.reinit_period);
  cfg.switch_tol = j.value("switch_tol", cfg.switch_tol);
  cfg.stop_tol = j.value("stop_tol", cfg.stop_tol);
  cfg.residual_target = j.value("residual_target", cfg.residual_target);
  cfg.eig_tol = j.value("eig_tol", cfg.eig_tol);
  cfg.smoothing_width = j.value("smoothing_width", cfg.smoothing_width);
  if (j.contains("p_schedule")) {
    cfg.p_schedule.clear();
    for (const auto& v : j.at("p_schedule")) {
      if (v.is_string()) {
        if (v.get<std::string>() != "inf") throw ConfigError("p_schedule entries are numbers or \"inf\"");
        cfg.p_schedule.push_back(kNoSmoothing);
      } else {
        cfg.p_schedule.push_back(v.get<double>());
      }
    }
  }
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline DiagnosticsConfig parse_diag(const json& j) {
  DiagnosticsConfig cfg;
  if (j.contains("radii")) cfg.radii = j.at("radii").get<std::vector<double>>();
  cfg.sample_cap = j.value("sample_cap", cfg.sample_cap);
  cfg.cluster_tol = j.value("cluster_tol", cfg.cluster_tol);
  cfg.weiss_tol_frac = j.value("weiss_tol_frac", cfg.weiss_tol_frac);
  cfg.weiss_c_max = j.value("weiss_c_max", cfg.weiss_c_max);
  cfg.flatness_threshold = j.value("flatness_threshold", cfg.flatness_threshold);
  cfg.density_warn_lo = j.value("density_warn_lo", cfg.density_warn_lo);
  cfg.density_warn_hi = j.value("density_warn_hi", cfg.density_warn_hi);
  cfg.nm_max_evals = j.value("nm_max_evals", cfg.nm_max_evals);
  return cfg;
}

inline EigConfig parse_eig(const json& j) {
  EigConfig cfg;
  const std::string d = j.value("domain", "square");
  if (d == "square") {
    cfg.domain = AnalyticDomain::square;
  } else if (d == "disk") {
    cfg.domain = AnalyticDomain::disk;
  } else {
    throw ConfigError("unknown eig domain: " + d);
  }
  cfg.size = j.value("size", cfg.size);
  cfg.h = j.value("h", cfg.h);
  cfg.n = j.value("n", cfg.n);
  cfg.tol = j.value("tol", cfg.tol);
  cfg.threshold = j.value("threshold", cfg.threshold);
  return cfg;
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  if (j.contains("grid")) cfg.grid = detail::parse_grid(j.at("grid"));
  if (j.contains("shape")) cfg.shape_spec = j.at("shape");
  if (j.contains("objective")) {
    try {
      cfg.objective = detail::parse_objective(j.at("objective"));
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("opt")) cfg.opt = detail::parse_opt(j.at("opt"));
  if (j.contains("diagnostics")) cfg.diagnostics = detail::parse_diag(j.at("diagnostics"));
  if (j.contains("thresholds")) cfg.thresholds = j.at("thresholds");
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.checkpoint_period = j.value("checkpoint_period", cfg.checkpoint_period);
  cfg.threads = j.value("threads", cfg.threads);
  if (j.contains("eig")) cfg.eig = detail::parse_eig(j.at("eig"));
  cfg.opt.seed = cfg.seed;
  cfg.diagnostics.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config json: ") + e.what());
  }
  return parse_run_config(j);
}

inline LevelSetShape build_shape(const RunConfig& cfg) {
  if (cfg.shape_spec.is_null()) throw ConfigError("config has no shape");
  try {
    return make_shape(cfg.grid, detail::build_shape_field(cfg.grid, cfg.shape_spec));
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad shape spec: ") + e.what());
  }
}

}  // namespace eigenshape
