// Acceptance suite: prints one pass/fail line per criterion and exits
// nonzero if any criterion in the selected group fails.
//
//   acceptance [--group analytic|faber_krahn|two_eigenvalues] [--out DIR]
//
// analytic:        1 square spectrum, 2 disk spectrum, 5 F_p consistency,
//                  6a Weiss half-plane closed form, 8 ACF closed form
// faber_krahn:     3 ball reproduction, 4 stationarity, 6b Weiss on the
//                  converged disk, 7 density/nondegeneracy, 9 flatness decay,
//                  11 determinism
// two_eigenvalues: 10 connectedness of the lambda_1 + lambda_2 minimizer

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "eigenshape/analytic.hpp"
#include "eigenshape/cli.hpp"
#include "eigenshape/diagnostics.hpp"
#include "eigenshape/io.hpp"
#include "eigenshape/optimize.hpp"
#include "eigenshape/shapes.hpp"

using namespace eigenshape;

namespace {

constexpr double kPi = std::numbers::pi;

struct CheckResult {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CheckResult> g_results;

void run_check(const std::string& id, const std::function<std::pair<bool, std::string>()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult res;
  res.id = id;
  try {
    auto [pass, detail] = fn();
    res.pass = pass;
    res.detail = detail;
  } catch (const std::exception& e) {
    res.pass = false;
    res.detail = std::string("exception: ") + e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] criterion %s: %s (%.1fs)\n", res.pass ? "PASS" : "FAIL", res.id.c_str(),
              res.detail.c_str(), res.seconds);
  std::fflush(stdout);
  g_results.push_back(res);
}

Grid box_grid(double half, double h) {
  const index_t n = static_cast<index_t>(std::llround(2.0 * half / h)) + 1;
  return Grid({n, n, 1}, h, {-half, -half, 0.0});
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------
// analytic group

void criterion_1() {
  run_check("1 (square spectrum)", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const double h = 1.0 / 128;
    const index_t n = static_cast<index_t>(std::llround(1.0 / h)) + 1;
    const Grid g({n, n, 1}, h, {0.0, 0.0, 0.0});
    auto shape = make_shape(g, square_field(g, {0.5, 0.5, 0}, 1.0));
    auto sp = lowest_eigenpairs(assemble(shape), 3, 1e-8, 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double t1 = 2 * kPi * kPi, t23 = 5 * kPi * kPi;
    const double e1 = std::abs(sp.eigenvalues[0] - t1) / t1;
    const double e2 = std::abs(sp.eigenvalues[1] - t23) / t23;
    const double e3 = std::abs(sp.eigenvalues[2] - t23) / t23;
    const double split = (sp.eigenvalues[2] - sp.eigenvalues[1]) / sp.eigenvalues[1];
    const bool pass = sp.converged && e1 <= 5e-3 && e2 <= 5e-3 && e3 <= 5e-3 && split < 5e-3 &&
                      secs < 30.0;
    return std::make_pair(pass, fmt("rel err %.2e / %.2e / %.2e, split %.2e, %.1fs < 30s", e1, e2,
                                    e3, split, secs));
  });
}

void criterion_2() {
  run_check("2 (disk eigenvalue)", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const double h = 1.0 / 128;
    const Grid g = box_grid(1.0 + 16 * h, h);
    auto shape = make_shape(g, disk_field(g, {0, 0, 0}, 1.0));
    auto sp = lowest_eigenpairs(assemble(shape), 1, 1e-8, 2);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double target = analytic_spectrum(AnalyticDomain::disk, 1.0, 1)[0];
    const double err = std::abs(sp.eigenvalues[0] - target) / target;
    const bool pass = sp.converged && err <= 1e-2 && secs < 30.0;
    return std::make_pair(pass, fmt("lambda1 %.5f vs %.5f, rel err %.2e, %.1fs < 30s",
                                    sp.eigenvalues[0], target, err, secs));
  });
}

ObjectiveSpec sum_objective(int N) {
  return linear_objective(std::vector<double>(static_cast<std::size_t>(N), 1.0));
}

void criterion_5() {
  run_check("5 (F_p consistency)", [] {
    auto base = sum_objective(2);
    auto s64 = smooth_p(base, 64.0);
    // pointwise limit of the nested-norm family on ascending input is F itself
    const double f12 = evaluate(s64, SpectrumPoint({1.0, 2.0}), 0.0);
    const double f22 = evaluate(s64, SpectrumPoint({2.0, 2.0}), 0.0);
    const double rel12 = std::abs(f12 - 3.0) / 3.0;
    const double rel22 = std::abs(f22 - 4.0) / 4.0;
    const double closed22 = 2.0 + 2.0 * std::pow(2.0, 1.0 / 64.0);
    bool pass = rel12 <= 1e-2 && rel22 <= 1e-2 && std::abs(f22 - closed22) <= 1e-12;

    // gradient vs central finite differences at 20 random ascending points
    std::mt19937_64 rng(20170614);
    std::uniform_real_distribution<double> dist(0.5, 30.0);
    double worst_fd = 0.0;
    auto s8 = smooth_p(sum_objective(3), 8.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> lam(3);
      for (double& v : lam) v = dist(rng);
      std::sort(lam.begin(), lam.end());
      if (lam[1] - lam[0] < 1e-3 || lam[2] - lam[1] < 1e-3) {
        --trial;
        continue;
      }
      auto xi = gradient(s8, SpectrumPoint(lam));
      for (std::size_t k = 0; k < 3; ++k) {
        const double fd_h = 1e-6 * lam[k];
        auto hi = lam, lo = lam;
        hi[k] += fd_h;
        lo[k] -= fd_h;
        const double fd =
            (evaluate(s8, SpectrumPoint(hi), 0.0) - evaluate(s8, SpectrumPoint(lo), 0.0)) /
            (2 * fd_h);
        worst_fd = std::max(worst_fd, std::abs(xi[k] - fd) / std::abs(fd));
      }
    }
    pass = pass && worst_fd <= 1e-5;

    // strict derivative gap at tied points for p in {1, 4, 64}
    bool gaps = true;
    for (double p : {1.0, 4.0, 64.0}) {
      auto res = strict_gap_check(smooth_p(base, p), SpectrumPoint({2.0, 2.0}));
      gaps = gaps && res.tied && res.strict;
    }
    pass = pass && gaps;
    return std::make_pair(pass, fmt("limit rel %.1e / %.1e, worst FD mismatch %.1e, gaps %s",
                                    rel12, rel22, worst_fd, gaps ? "strict" : "violated"));
  });
}

void criterion_6a() {
  run_check("6a (Weiss half-plane)", [] {
    const double h = 1.0 / 256;
    const Grid g = box_grid(1.0, h);
    const double b = 0.3 * h;
    const std::vector<double> xi{0.7, 1.3};
    const double a2 = std::sqrt((1.0 - 0.7 * 0.36) / 1.3);
    Spectrum sp;
    sp.converged = true;
    for (double a : {0.6, a2}) {
      Field u(static_cast<std::size_t>(g.node_count()), 0.0);
      for (index_t i = 0; i < g.node_count(); ++i)
        u[static_cast<std::size_t>(i)] = a * std::max(b - g.position(i)[1], 0.0);
      sp.eigenfunctions.push_back(std::move(u));
      sp.eigenvalues.push_back(1.0 + static_cast<double>(sp.eigenvalues.size()));
      sp.residuals.push_back(0.0);
    }
    auto shape = make_shape(g, half_plane_field(g, {0, 1, 0}, b));
    DiagnosticsConfig cfg;
    cfg.radii = {0.5, 0.25, 0.125, 0.0625, 0.03125};
    auto res = weiss_energy(shape, sp, xi, 1.0, {0.0, b, 0.0}, cfg);
    if (res.samples.size() != 5) return std::make_pair(false, std::string("missing radii"));
    double worst = 0.0;
    for (const auto& s : res.samples)
      worst = std::max(worst, std::abs(s.phi_r - kPi / 2.0) / (kPi / 2.0));
    return std::make_pair(worst <= 0.02,
                          fmt("phi(r) vs pi/2 xi0: worst rel dev %.2e over 5 dyadic radii", worst));
  });
}

void criterion_8() {
  run_check("8 (ACF closed form)", [] {
    const double h = 1.0 / 128;
    const Grid g = box_grid(1.0, h);
    Field w1(static_cast<std::size_t>(g.node_count()));
    Field w2(static_cast<std::size_t>(g.node_count()));
    for (index_t i = 0; i < g.node_count(); ++i) {
      const double y = g.position(i)[1];
      w1[static_cast<std::size_t>(i)] = std::max(y, 0.0);
      w2[static_cast<std::size_t>(i)] = std::max(-y, 0.0);
    }
    DiagnosticsConfig cfg;
    cfg.radii = {0.4, 0.2, 0.1, 0.0625};  // all >= 8h
    auto res = acf_functional(g, w1, w2, {0, 0, 0}, cfg);
    if (res.samples.size() != cfg.radii.size())
      return std::make_pair(false, std::string("missing radii"));
    double worst = 0.0;
    for (const auto& s : res.samples)
      worst = std::max(worst, std::abs(s.value - kPi * kPi / 4.0) / (kPi * kPi / 4.0));
    return std::make_pair(worst <= 0.10, fmt("J(r) vs pi^2/4: worst rel dev %.2e", worst));
  });
}

// ---------------------------------------------------------------------------
// faber_krahn group: criterion 3 state feeds 4, 6b, 7, 9; 11 reruns it

struct FaberKrahnRun {
  OptState state;
  DiagnosticsReport report;
  std::string history;
  double seconds = 0.0;
};

FaberKrahnRun faber_krahn_run() {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 1.0 / 128;
  const Grid g = box_grid(2.0, h);
  auto init = make_shape(g, square_field(g, {0, 0, 0}, 2.2));
  auto spec = linear_objective({1.0});
  OptConfig cfg;
  cfg.max_steps = 400;
  cfg.p_schedule = {kNoSmoothing};
  cfg.stop_tol = 1e-6;
  cfg.residual_target = 0.045;
  cfg.seed = 2024;
  DiagnosticsConfig dcfg;
  dcfg.radii = {0.2, 0.125, 0.0625};
  FaberKrahnRun out;
  auto [st, rep] = run(init, spec, cfg, dcfg);
  out.state = std::move(st);
  out.report = std::move(rep);
  out.history = history_csv(out.state.history);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::optional<FaberKrahnRun> g_fk;

void criterion_3(const std::string& out_dir) {
  run_check("3 (Faber-Krahn reproduction)", [&] {
    g_fk = faber_krahn_run();
    if (!out_dir.empty()) {
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      write_text((fs::path(out_dir) / "faber_krahn_history.csv").string(), g_fk->history);
      save_shape((fs::path(out_dir) / "faber_krahn_final.ckpt").string(), g_fk->state.shape,
                 g_fk->state.step);
    }
    const double target = 2.0 * 2.404825557695773 * std::sqrt(kPi);
    const double rel = std::abs(g_fk->state.objective_value - target) / target;
    const double per = perimeter(g_fk->state.shape);
    const double defect = per * per / (4.0 * kPi * g_fk->state.volume_value) - 1.0;
    const bool pass = g_fk->state.converged && rel <= 1e-2 && defect <= 0.05 &&
                      g_fk->seconds < 600.0;
    return std::make_pair(
        pass, fmt("objective %.5f vs %.5f (rel %.2e), isoperimetric defect %.3f, %d steps, %.0fs < 600s",
                  g_fk->state.objective_value, target, rel, defect, g_fk->state.step,
                  g_fk->seconds));
  });
}

void criterion_4() {
  run_check("4 (stationarity on the converged shape)", [] {
    if (!g_fk) return std::make_pair(false, std::string("criterion 3 run unavailable"));
    const auto& st = g_fk->state;
    auto xi = gradient(linear_objective({1.0}), SpectrumPoint(st.spectrum.eigenvalues));
    auto clusters = multiplicity_clusters(st.spectrum.eigenvalues, 1e-3);
    auto fb = fb_residual(st.trace, xi, 1.0, clusters);
    // coefficient of variation of (u1)_nu^2 across boundary samples
    double mean = 0.0;
    std::vector<double> sq(st.trace.samples.size());
    for (std::size_t i = 0; i < st.trace.samples.size(); ++i) {
      const double d = st.trace.normal_deriv(i, 0);
      sq[i] = d * d;
      mean += sq[i];
    }
    mean /= static_cast<double>(sq.size());
    double var = 0.0;
    for (double v : sq) var += (v - mean) * (v - mean);
    var /= static_cast<double>(sq.size());
    const double cv = std::sqrt(var) / mean;
    const bool pass = fb.sup <= 0.05 && cv <= 0.05;
    return std::make_pair(pass, fmt("fb residual sup %.4f <= 0.05, CV of (u1)_nu^2 %.4f <= 0.05",
                                    fb.sup, cv));
  });
}

void criterion_6b() {
  run_check("6b (Weiss monotonicity on the converged disk)", [] {
    if (!g_fk) return std::make_pair(false, std::string("criterion 3 run unavailable"));
    const auto& st = g_fk->state;
    auto xi = gradient(linear_objective({1.0}), SpectrumPoint(st.spectrum.eigenvalues));
    DiagnosticsConfig cfg;
    cfg.radii = {0.3, 0.2, 0.15, 0.1, 0.075, 0.05};
    auto pts = boundary_points(st.shape);
    auto centers = farthest_point_centers(pts, 4, st.shape.grid.ndim);
    if (centers.empty()) return std::make_pair(false, std::string("no boundary points"));
    auto res = weiss_energy(st.shape, st.spectrum, xi, 1.0, centers[0], cfg);
    if (res.samples.size() < 3) return std::make_pair(false, std::string("too few radii"));
    std::vector<double> mags;
    for (const auto& s : res.samples) mags.push_back(std::abs(s.phi_r));
    std::sort(mags.begin(), mags.end());
    const double tol = 0.05 * mags[mags.size() / 2];
    const double C = fit_weiss_constant(res.samples, tol, 32.0);
    const int viol = std::isfinite(C) ? weiss_monotonicity_check(res.samples, C, tol).violations : -1;
    const bool pass = std::isfinite(C) && C <= 8.0 && viol == 0;
    return std::make_pair(pass, fmt("fitted C %.1f <= 8, violations %d at tol 0.05|phi| = %.4f", C,
                                    viol, tol));
  });
}

void criterion_7() {
  run_check("7 (density and nondegeneracy)", [] {
    if (!g_fk) return std::make_pair(false, std::string("criterion 3 run unavailable"));
    const auto& st = g_fk->state;
    DiagnosticsConfig cfg;
    cfg.radii = {0.2, 0.125, 0.0625};  // [8h, 0.2] at h = 1/128
    auto dens = density_profile(st.shape, cfg);
    auto nondeg = nondegeneracy_profile(st.shape, st.spectrum, cfg);
    double dlo = 1.0, dhi = 0.0, nmin = 1e300, nmax = 0.0;
    for (const auto& r : dens.range) {
      dlo = std::min(dlo, r.lo);
      dhi = std::max(dhi, r.hi);
    }
    for (const auto& r : nondeg.min_ratio) {
      nmin = std::min(nmin, r.value);
      nmax = std::max(nmax, r.value);
    }
    const bool pass = !dens.range.empty() && dlo >= 0.3 && dhi <= 0.7 && nmin >= 0.1 &&
                      nmax <= 2.0 * nmin;
    return std::make_pair(pass, fmt("density in [%.3f, %.3f] (need [0.3,0.7]), nondegeneracy in [%.3f, %.3f] (min >= 0.1, spread <= 2x)",
                                    dlo, dhi, nmin, nmax));
  });
}

void criterion_9() {
  run_check("9 (flatness decay)", [] {
    if (!g_fk) return std::make_pair(false, std::string("criterion 3 run unavailable"));
    // resample the converged shape to h = 1/320 so the flatness ladder can
    // reach r = 0.025 = 8h, then re-solve the spectrum there
    const double hf = 1.0 / 320;
    const Grid gf = box_grid(1.6, hf);
    Field phi(static_cast<std::size_t>(gf.node_count()));
    for (index_t i = 0; i < gf.node_count(); ++i)
      phi[static_cast<std::size_t>(i)] = interpolate(g_fk->state.shape.grid,
                                                     g_fk->state.shape.phi, gf.position(i));
    auto shape = reinitialize(make_shape(gf, phi));
    auto sp = lowest_eigenpairs(assemble(shape), 1, 1e-8, 5);
    if (!sp.converged) return std::make_pair(false, std::string("refined eigensolve failed"));
    auto xi = gradient(linear_objective({1.0}), SpectrumPoint(sp.eigenvalues));
    DiagnosticsConfig cfg;
    cfg.radii.clear();
    for (int j = 0; j <= 6; ++j) cfg.radii.push_back(0.2 * std::pow(2.0, -0.5 * j));
    auto pts = boundary_points(shape);
    auto centers = farthest_point_centers(pts, 4, gf.ndim);
    if (centers.empty()) return std::make_pair(false, std::string("no boundary points"));
    auto dec = flatness_decay(shape, sp, xi, 1.0, centers[0], cfg);
    double f_big = 0.0, f_small = 0.0;
    for (const auto& row : dec.table) {
      if (std::abs(row.r - 0.2) < 1e-9) f_big = row.value;
      if (std::abs(row.r - 0.025) < 1e-9) f_small = row.value;
    }
    const bool pass = !dec.saturated && f_big > 0.0 && f_small > 0.0 && f_big / f_small >= 2.0 &&
                      dec.alpha >= 0.3 && dec.r2 >= 0.7;
    return std::make_pair(pass, fmt("f(0.2)=%.4f, f(0.025)=%.4f (ratio %.1f >= 2), alpha %.2f >= 0.3, R2 %.2f >= 0.7",
                                    f_big, f_small, f_small > 0 ? f_big / f_small : 0.0, dec.alpha,
                                    dec.r2));
  });
}

void criterion_11() {
  run_check("11 (determinism)", [] {
    if (!g_fk) return std::make_pair(false, std::string("criterion 3 run unavailable"));
    auto second = faber_krahn_run();
    const bool pass = second.history == g_fk->history;
    return std::make_pair(pass, fmt("history CSVs byte-identical across reruns: %s (%zu bytes)",
                                    pass ? "yes" : "no", g_fk->history.size()));
  });
}

// ---------------------------------------------------------------------------
// two_eigenvalues group

void criterion_10(const std::string& out_dir) {
  run_check("10 (N=2 connectedness)", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const double h = 1.0 / 64;
    const Grid g = box_grid(2.6, h);
    auto init = make_shape(
        g, union_fields({disk_field(g, {-0.85, 0, 0}, 0.8), disk_field(g, {0.85, 0, 0}, 0.8)}));
    auto spec = linear_objective({1.0, 1.0});
    OptConfig cfg;
    cfg.max_steps = 500;
    cfg.p_schedule = {2.0, 4.0, 8.0, 16.0, kNoSmoothing};
    cfg.stop_tol = 1e-6;
    cfg.residual_target = 0.09;
    cfg.seed = 77;
    auto [st, rep] = run(init, spec, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out_dir.empty()) {
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      write_text((fs::path(out_dir) / "two_disk_history.csv").string(), history_csv(st.history));
      save_shape((fs::path(out_dir) / "two_disk_final.ckpt").string(), st.shape, st.step);
    }
    const int comps = interior_components(st.shape);
    const double fb = rep.fb_residual_sup;
    const bool pass = comps == 1 && std::isfinite(fb) && fb <= 0.1 && secs < 900.0;
    return std::make_pair(pass,
                          fmt("components %d (need 1), fb residual %.4f <= 0.1, %d steps, %.0fs < 900s",
                              comps, fb, st.step, secs));
  });
}

}  // namespace

int main(int argc, char** argv) {
  std::string group = "all";
  std::string out_dir;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--group" && i + 1 < argc) group = argv[++i];
    else if (arg == "--out" && i + 1 < argc) out_dir = argv[++i];
    else {
      std::fprintf(stderr, "usage: acceptance [--group analytic|faber_krahn|two_eigenvalues] [--out DIR]\n");
      return 2;
    }
  }

  if (group == "analytic" || group == "all") {
    criterion_1();
    criterion_2();
    criterion_5();
    criterion_6a();
    criterion_8();
  }
  if (group == "faber_krahn" || group == "all") {
    criterion_3(out_dir);
    criterion_4();
    criterion_6b();
    criterion_7();
    criterion_9();
    criterion_11();
  }
  if (group == "two_eigenvalues" || group == "all") {
    criterion_10(out_dir);
  }

  int failed = 0;
  for (const auto& r : g_results)
    if (!r.pass) ++failed;
  std::printf("%zu criteria run, %d failed\n", g_results.size(), failed);
  return failed == 0 ? 0 : 1;
}
