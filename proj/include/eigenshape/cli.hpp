#pragma once

#include <cstdio>
#include <filesystem>

#include "eigenshape/config.hpp"

namespace eigenshape {

// exit codes: 0 success, 1 threshold failure, 2 usage/IO error, 3 stall
enum ExitCode : int { kOk = 0, kThresholdFailure = 1, kUsageError = 2, kStalled = 3 };

/// Solves a reference domain and prints computed vs analytic eigenvalues as
/// CSV. Returns 0 iff every relative error is below the config threshold.
inline int cmd_eig(const RunConfig& cfg) {
  if (!cfg.eig) {
    std::fprintf(stderr, "eig: config has no \"eig\" section\n");
    return kUsageError;
  }
  const EigConfig& e = *cfg.eig;
  std::vector<double> reference;
  try {
    reference = analytic_spectrum(e.domain, e.size, e.n);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "eig: %s\n", ex.what());
    return kUsageError;
  }

  Spectrum sp;
  try {
    LevelSetShape shape = [&] {
      if (e.domain == AnalyticDomain::square) {
        const index_t n = static_cast<index_t>(std::llround(e.size / e.h)) + 1;
        const Grid g({n, n, 1}, e.h, {0.0, 0.0, 0.0});
        return make_shape(g, square_field(g, {0.5 * e.size, 0.5 * e.size, 0}, e.size));
      }
      const double half = e.size + 16.0 * e.h;
      const index_t n = static_cast<index_t>(std::llround(2.0 * half / e.h)) + 1;
      const Grid g({n, n, 1}, e.h, {-half, -half, 0.0});
      return make_shape(g, disk_field(g, {0, 0, 0}, e.size));
    }();
    sp = lowest_eigenpairs(assemble(shape), e.n, e.tol, cfg.seed);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "eig: solver failure: %s\n", ex.what());
    return kUsageError;
  }
  if (!sp.converged) {
    std::fprintf(stderr, "eig: eigensolver did not reach tolerance\n");
    return kUsageError;
  }

  std::printf("k,computed,analytic,rel_error\n");
  bool pass = true;
  for (int k = 0; k < e.n; ++k) {
    const double got = sp.eigenvalues[static_cast<std::size_t>(k)];
    const double want = reference[static_cast<std::size_t>(k)];
    const double rel = std::abs(got - want) / want;
    std::printf("%d,%.10g,%.10g,%.3e\n", k + 1, got, want, rel);
    if (rel > e.threshold) pass = false;
  }
  return pass ? kOk : kThresholdFailure;
}

/// Prints the analytic spectrum of a named domain as CSV.
inline int cmd_baseline(const std::string& domain, double size, int n) {
  AnalyticDomain d;
  if (domain == "square") {
    d = AnalyticDomain::square;
  } else if (domain == "disk") {
    d = AnalyticDomain::disk;
  } else {
    std::fprintf(stderr, "baseline: unknown domain '%s'\n", domain.c_str());
    return kUsageError;
  }
  std::vector<double> v;
  try {
    v = analytic_spectrum(d, size, n);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "baseline: %s\n", ex.what());
    return kUsageError;
  }
  std::printf("k,lambda\n");
  for (std::size_t k = 0; k < v.size(); ++k) std::printf("%zu,%.12g\n", k + 1, v[k]);
  return kOk;
}

namespace detail {

inline void write_report_files(const std::filesystem::path& dir, const DiagnosticsReport& rep) {
  write_text((dir / "report.json").string(), report_to_json(rep).dump(2) + "\n");
  write_text((dir / "profiles.csv").string(), report_profiles_csv(rep));
  write_text((dir / "flatness.svg").string(), flatness_svg(rep.flatness));
  write_text((dir / "weiss.svg").string(), weiss_svg(rep.weiss, rep.weiss_c));
}

// applies the optional threshold gates from the config
inline bool thresholds_pass(const json& th, const DiagnosticsReport& rep) {
  if (th.is_null() || th.empty()) return true;
  bool ok = true;
  auto gate = [&](const char* key, bool cond) {
    if (th.contains(key) && !cond) {
      log::warn(std::string("threshold failed: ") + key);
      ok = false;
    }
  };
  if (th.contains("fb_residual_sup"))
    gate("fb_residual_sup", std::isfinite(rep.fb_residual_sup) &&
                                rep.fb_residual_sup <= th.at("fb_residual_sup").get<double>());
  if (th.contains("nondegeneracy_min"))
    gate("nondegeneracy_min",
         rep.nondegeneracy.c0_estimate >= th.at("nondegeneracy_min").get<double>());
  if (th.contains("density_lo") || th.contains("density_hi")) {
    const double lo = th.value("density_lo", 0.0), hi = th.value("density_hi", 1.0);
    bool in = !rep.density.range.empty();
    for (const auto& r : rep.density.range)
      if (r.lo < lo || r.hi > hi) in = false;
    gate(th.contains("density_lo") ? "density_lo" : "density_hi", in);
  }
  if (th.contains("weiss_c_max"))
    gate("weiss_c_max", std::isfinite(rep.weiss_c) && rep.weiss_c <= th.at("weiss_c_max").get<double>() &&
                            rep.weiss_violations_at_fit == 0);
  if (th.contains("flatness_alpha_min"))
    gate("flatness_alpha_min", rep.flatness.saturated ||
                                   (std::isfinite(rep.flatness.alpha) &&
                                    rep.flatness.alpha >= th.at("flatness_alpha_min").get<double>()));
  if (th.contains("components_max"))
    gate("components_max", rep.components <= th.at("components_max").get<int>());
  return ok;
}

}  // namespace detail

/// Runs the optimizer: history CSV, periodic checkpoints, final checkpoint,
/// spectrum export, and the diagnostics report land in the output directory.
inline int cmd_optimize(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  try {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    LevelSetShape init = build_shape(cfg);

    auto on_step = [&](const OptState& st) {
      if (cfg.checkpoint_period > 0 && st.step > 0 && st.step % cfg.checkpoint_period == 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "shape_%05d.ckpt", st.step);
        save_shape((dir / name).string(), st.shape, st.step);
      }
    };
    auto [state, report] = run(init, cfg.objective, cfg.opt, cfg.diagnostics, on_step);

    write_text((dir / "history.csv").string(), history_csv(state.history));
    save_shape((dir / "final_shape.ckpt").string(), state.shape, state.step,
               json{{"converged", state.converged}, {"stalled", state.stalled}});
    save_spectrum((dir / "final_spectrum").string(), state.spectrum, state.shape.grid);
    detail::write_report_files(dir, report);

    std::printf("steps=%d objective=%.10g volume=%.10g converged=%d stalled=%d\n", state.step,
                state.objective_value, state.volume_value, state.converged ? 1 : 0,
                state.stalled ? 1 : 0);
    if (state.stalled) return kStalled;
    return state.converged ? kOk : kThresholdFailure;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "optimize: config error: %s\n", e.what());
    return kUsageError;
  } catch (const IoError& e) {
    std::fprintf(stderr, "optimize: io error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "optimize: %s\n", e.what());
    return kUsageError;
  }
}

/// Loads a checkpoint (and a spectrum, or recomputes it), runs the full
/// diagnostics report, and applies the configured threshold gates.
inline int cmd_diagnose(const RunConfig& cfg, const std::string& checkpoint_path,
                        const std::string& spectrum_path, bool recompute) {
  namespace fs = std::filesystem;
  try {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    LevelSetShape shape = load_shape(checkpoint_path);

    Spectrum sp;
    if (recompute || spectrum_path.empty()) {
      sp = lowest_eigenpairs(assemble(shape), cfg.objective.num_eigenvalues, cfg.opt.eig_tol,
                             cfg.seed);
      if (!sp.converged) {
        std::fprintf(stderr, "diagnose: eigensolver did not reach tolerance\n");
        return kUsageError;
      }
    } else {
      sp = load_spectrum(spectrum_path, shape.grid);
    }

    DiagnosticsConfig dcfg = cfg.diagnostics;
    if (dcfg.radii.empty()) dcfg.radii = default_radii(shape.grid);
    auto report = full_report(shape, sp, cfg.objective, dcfg);
    detail::write_report_files(dir, report);
    std::printf("fb_residual_sup=%.6g components=%d weiss_c=%.3g flatness_alpha=%.3g\n",
                report.fb_residual_sup, report.components, report.weiss_c, report.flatness.alpha);
    return detail::thresholds_pass(cfg.thresholds, report) ? kOk : kThresholdFailure;
  } catch (const IoError& e) {
    std::fprintf(stderr, "diagnose: io error: %s\n", e.what());
    return kUsageError;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "diagnose: config error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "diagnose: %s\n", e.what());
    return kUsageError;
  }
}

}  // namespace eigenshape
