#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "eigenshape/boundary_trace.hpp"
#include "eigenshape/fast_marching.hpp"
#include "eigenshape/level_set.hpp"
#include "eigenshape/objective.hpp"

namespace eigenshape {

struct DiagnosticsConfig {
  std::vector<double> radii;  // descending, each >= 4h
  std::size_t sample_cap = 48;
  double cluster_tol = 1e-3;
  double weiss_tol_frac = 0.05;   // monotonicity tolerance as a fraction of |phi|
  double weiss_c_max = 32.0;      // grid-search cap for the fitted constant
  double flatness_threshold = 0.25;  // samples above this count as non-flat
  double density_warn_lo = 0.05;
  double density_warn_hi = 0.95;
  int nm_max_evals = 200;
  std::uint64_t seed = 0;
};

/// Default dyadic radius ladder 0.2 * 2^-j clipped at 4h.
inline std::vector<double> default_radii(const Grid& g, double r0 = 0.2, int levels = 6) {
  std::vector<double> out;
  for (int j = 0; j < levels; ++j) {
    const double r = r0 * std::pow(2.0, -j);
    if (r >= 4.0 * g.h) out.push_back(r);
  }
  return out;
}

inline void validate_radii(const DiagnosticsConfig& cfg, const Grid& g) {
  for (std::size_t i = 0; i < cfg.radii.size(); ++i) {
    if (cfg.radii[i] < 4.0 * g.h * (1.0 - 1e-12))
      throw InvalidInput("diagnostics: radii must be >= 4h");
    if (i > 0 && cfg.radii[i] >= cfg.radii[i - 1])
      throw InvalidInput("diagnostics: radii must be descending");
  }
}

// ---------------------------------------------------------------------------
// free-boundary residual (property E)

struct FbResidual {
  double sup = 0.0;
  double l2 = 0.0;
  std::vector<double> per_sample;
};

/// R(x) = | sum_k xi_k (u_k)_nu^2(x) - xi0 |, sup and area-weighted L2.
/// Refuses when a tied eigenvalue cluster carries unequal xi: the per-mode
/// normal derivatives are then basis-dependent and the sum is not well defined.
inline FbResidual fb_residual(const BoundaryTrace& trace, const std::vector<double>& xi,
                              double xi0, const std::vector<std::vector<int>>& clusters) {
  const int N = trace.num_modes;
  if (static_cast<int>(xi.size()) != N) throw InvalidInput("fb_residual: xi size mismatch");
  for (const auto& c : clusters) {
    if (c.size() < 2) continue;
    for (std::size_t i = 1; i < c.size(); ++i) {
      const double a = xi[static_cast<std::size_t>(c[0])];
      const double b = xi[static_cast<std::size_t>(c[i])];
      if (std::abs(a - b) > 1e-9 * std::max(std::abs(a), std::abs(b)))
        throw InvalidInput("fb_residual: unequal xi on a tied eigenvalue cluster (basis-dependent)");
    }
  }
  FbResidual out;
  out.per_sample.resize(trace.samples.size());
  double wsum = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < N; ++k) {
      const double d = trace.normal_deriv(i, k);
      s += xi[static_cast<std::size_t>(k)] * d * d;
    }
    const double r = std::abs(s - xi0);
    out.per_sample[i] = r;
    out.sup = std::max(out.sup, r);
    // crossing density of grid edges per unit boundary area is |nu|_1 / h^{n-1}
    double l1 = 0.0;
    for (int a = 0; a < 3; ++a) l1 += std::abs(trace.samples[i].normal[a]);
    const double w = 1.0 / std::max(l1, 1e-12);
    wsum += w;
    acc += w * r * r;
  }
  out.l2 = wsum > 0.0 ? std::sqrt(acc / wsum) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// boundary point subsampling

/// Deterministic farthest-point subsample of boundary samples: start at the
/// lowest anchor index, then greedily add the point farthest from the chosen
/// set (ties resolved by index).
inline std::vector<Point> farthest_point_centers(const std::vector<BoundarySample>& samples,
                                                 std::size_t cap, int ndim) {
  std::vector<Point> centers;
  if (samples.empty() || cap == 0) return centers;
  std::size_t start = 0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].anchor_cell < samples[start].anchor_cell) start = i;
  std::vector<double> mind(samples.size(), std::numeric_limits<double>::infinity());
  centers.push_back(samples[start].point);
  while (centers.size() < std::min(cap, samples.size())) {
    std::size_t best = 0;
    double bestd = -1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      mind[i] = std::min(mind[i], distance(samples[i].point, centers.back(), ndim));
      if (mind[i] > bestd + 1e-15) {
        bestd = mind[i];
        best = i;
      }
    }
    if (bestd <= 0.0) break;
    centers.push_back(samples[best].point);
  }
  return centers;
}

// ---------------------------------------------------------------------------
// per-radius profiles

struct ProfileRow {
  double r = 0.0;
  double value = 0.0;
};

struct RangeRow {
  double r = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct NondegeneracyProfile {
  std::vector<ProfileRow> min_ratio;  // min over boundary points of sup_{B_r} ubar / r
  double c0_estimate = 0.0;
  bool degenerate = false;
};

/// Growth diagnostic: sup_{B_r(x)} sum_k |u_k| / r per boundary point.
inline NondegeneracyProfile nondegeneracy_profile(const LevelSetShape& shape,
                                                  const Spectrum& spectrum,
                                                  const DiagnosticsConfig& cfg) {
  const Grid& g = shape.grid;
  validate_radii(cfg, g);
  Field ubar(static_cast<std::size_t>(g.node_count()), 0.0);
  for (const auto& u : spectrum.eigenfunctions)
    for (std::size_t i = 0; i < ubar.size(); ++i) ubar[i] += std::abs(u[i]);

  const auto samples = boundary_points(shape);
  const auto centers = farthest_point_centers(samples, cfg.sample_cap, g.ndim);
  NondegeneracyProfile out;
  double c0 = std::numeric_limits<double>::infinity();
  for (double r : cfg.radii) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) {
      index_t lo[3] = {0, 0, 0}, hi[3] = {0, 0, 1};
      for (int a = 0; a < g.ndim; ++a) {
        lo[a] = std::max<index_t>(0, static_cast<index_t>(std::floor((c[a] - r - g.origin[a]) / g.h)));
        hi[a] = std::min<index_t>(g.dims[a] - 1,
                                  static_cast<index_t>(std::ceil((c[a] + r - g.origin[a]) / g.h)));
      }
      if (g.ndim == 2) hi[2] = 0;
      double sup = 0.0;
      for (index_t i0 = lo[0]; i0 <= hi[0]; ++i0)
        for (index_t i1 = lo[1]; i1 <= hi[1]; ++i1)
          for (index_t i2 = lo[2]; i2 <= (g.ndim == 3 ? hi[2] : 0); ++i2) {
            if (distance(g.position(i0, i1, i2), c, g.ndim) > r) continue;
            sup = std::max(sup, ubar[g.linear(i0, i1, i2)]);
          }
      worst = std::min(worst, sup / r);
    }
    if (centers.empty()) worst = 0.0;
    out.min_ratio.push_back({r, worst});
    c0 = std::min(c0, worst);
  }
  out.c0_estimate = std::isfinite(c0) ? c0 : 0.0;
  out.degenerate = out.c0_estimate <= 1e-12;
  return out;
}

struct DensityProfile {
  std::vector<RangeRow> range;  // min/max over boundary points of |B_r ∩ Omega| / |B_r|
  int warnings = 0;             // ratios outside the configured safe band
  std::size_t centers_skipped = 0;
};

inline DensityProfile density_profile(const LevelSetShape& shape, const DiagnosticsConfig& cfg) {
  const Grid& g = shape.grid;
  validate_radii(cfg, g);
  const auto samples = boundary_points(shape);
  const auto centers = farthest_point_centers(samples, cfg.sample_cap, g.ndim);
  DensityProfile out;
  for (double r : cfg.radii) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    bool any = false;
    for (const auto& c : centers) {
      const double ball =
          g.ndim == 2 ? std::numbers::pi * r * r : 4.0 / 3.0 * std::numbers::pi * r * r * r;
      double v;
      try {
        v = ball_clip_volume(shape, c, r);
      } catch (const InvalidInput&) {
        ++out.centers_skipped;
        continue;
      }
      const double ratio = v / ball;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      any = true;
      if (ratio < cfg.density_warn_lo || ratio > cfg.density_warn_hi) ++out.warnings;
    }
    if (any) out.range.push_back({r, lo, hi});
  }
  if (out.warnings > 0)
    log::warn("density_profile: " + std::to_string(out.warnings) +
              " ratio(s) outside the regularity band");
  return out;
}

struct MinkowskiProfile {
  std::vector<ProfileRow> ratio;  // tube_volume(r) / r
  std::map<std::string, std::string> skipped;
  bool growth_warning = false;
};

inline MinkowskiProfile minkowski_profile(const LevelSetShape& shape,
                                          const DiagnosticsConfig& cfg) {
  const Grid& g = shape.grid;
  MinkowskiProfile out;
  for (double r : cfg.radii) {
    if (r < 2.0 * g.h) {
      out.skipped["r=" + std::to_string(r)] = "r < 2h";
      continue;
    }
    out.ratio.push_back({r, tube_volume(shape, r) / r});
  }
  // flag profiles that blow up as r shrinks (needle-like degenerate sets whose
  // two boundary sheets merge above their width scale)
  if (out.ratio.size() >= 2 && out.ratio.back().value > 1.5 * out.ratio.front().value) {
    out.growth_warning = true;
    log::warn("minkowski_profile: tube_volume(r)/r grows as r shrinks");
  }
  return out;
}

// ---------------------------------------------------------------------------
// flatness

struct FlatnessFit {
  Point center{};
  double r = 0.0;
  Point nu{};                   // unit direction of the half-plane profile
  std::vector<double> alphas;   // nonnegative, sum_k xi_k alpha_k^2 = xi0
  std::vector<double> signs;    // sign applied to each eigenfunction
  double f = 0.0;
};

namespace detail {

struct FlatnessSamples {
  std::vector<Point> x;           // rescaled positions in B_1
  std::vector<double> w;          // [sample][mode], rescaled values u_k / r
  int num_modes = 0;
  double value(std::size_t i, int k) const {
    return w[i * static_cast<std::size_t>(num_modes) + static_cast<std::size_t>(k)];
  }
};

inline FlatnessSamples collect_flatness_samples(const LevelSetShape& shape,
                                                const Spectrum& spectrum, const Point& center,
                                                double r, bool interior_only) {
  const Grid& g = shape.grid;
  FlatnessSamples out;
  out.num_modes = spectrum.count();
  index_t lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  for (int a = 0; a < g.ndim; ++a) {
    lo[a] = std::max<index_t>(0, static_cast<index_t>(std::floor((center[a] - r - g.origin[a]) / g.h)));
    hi[a] = std::min<index_t>(g.dims[a] - 1,
                              static_cast<index_t>(std::ceil((center[a] + r - g.origin[a]) / g.h)));
  }
  for (index_t i0 = lo[0]; i0 <= hi[0]; ++i0)
    for (index_t i1 = lo[1]; i1 <= hi[1]; ++i1)
      for (index_t i2 = lo[2]; i2 <= (g.ndim == 3 ? hi[2] : 0); ++i2) {
        const index_t i = g.linear(i0, i1, i2);
        const Point p = g.position(i0, i1, i2);
        if (distance(p, center, g.ndim) > r) continue;
        if (interior_only && !is_inside(shape.phi[i])) continue;
        Point xhat{};
        for (int a = 0; a < g.ndim; ++a) xhat[a] = (p[a] - center[a]) / r;
        out.x.push_back(xhat);
        for (int k = 0; k < out.num_modes; ++k)
          out.w.push_back(spectrum.eigenfunctions[static_cast<std::size_t>(k)][i] / r);
      }
  return out;
}

// sup over samples and modes of |w_k + alpha_k (x . nu)|
inline double flatness_value(const FlatnessSamples& s, const Point& nu,
                             const std::vector<double>& alphas, int ndim) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double t = dot(s.x[i], nu, ndim);
    for (int k = 0; k < s.num_modes; ++k)
      worst = std::max(worst, std::abs(s.value(i, k) + alphas[static_cast<std::size_t>(k)] * t));
  }
  return worst;
}

inline void project_alphas(std::vector<double>& a, const std::vector<double>& xi, double xi0) {
  double q = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] = std::abs(a[k]);
    q += xi[k] * a[k] * a[k];
  }
  if (q <= 1e-300) {
    // degenerate fit; park all weight on the first mode
    std::fill(a.begin(), a.end(), 0.0);
    a[0] = std::sqrt(xi0 / xi[0]);
    return;
  }
  const double s = std::sqrt(xi0 / q);
  for (double& v : a) v *= s;
}

inline Point unit_from_params(const double* p, int ndim, int* used) {
  Point nu{};
  if (ndim == 2) {
    nu = {std::cos(p[0]), std::sin(p[0]), 0.0};
    *used = 1;
  } else {
    const double st = std::sin(p[0]);
    nu = {st * std::cos(p[1]), st * std::sin(p[1]), std::cos(p[0])};
    *used = 2;
  }
  return nu;
}

// Nelder-Mead on R^dim, deterministic, bounded function evaluations.
template <typename Fn>
inline std::vector<double> nelder_mead(std::vector<double> x0, const std::vector<double>& scale,
                                       int max_evals, Fn&& fn) {
  const std::size_t dim = x0.size();
  std::vector<std::vector<double>> simplex(dim + 1, x0);
  std::vector<double> fv(dim + 1);
  for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += scale[i];
  int evals = 0;
  for (std::size_t i = 0; i <= dim; ++i) fv[i] = (++evals, fn(simplex[i]));
  auto order = [&] {
    std::vector<std::size_t> idx(dim + 1);
    for (std::size_t i = 0; i <= dim; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> f2;
    for (auto i : idx) {
      s2.push_back(simplex[i]);
      f2.push_back(fv[i]);
    }
    simplex.swap(s2);
    fv.swap(f2);
  };
  order();
  while (evals < max_evals) {
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[i][d] / static_cast<double>(dim);
    auto combo = [&](double t) {
      std::vector<double> p(dim);
      for (std::size_t d = 0; d < dim; ++d) p[d] = centroid[d] + t * (simplex[dim][d] - centroid[d]);
      return p;
    };
    auto xr = combo(-1.0);
    const double fr = (++evals, fn(xr));
    if (fr < fv[0]) {
      auto xe = combo(-2.0);
      const double fe = (++evals, fn(xe));
      if (fe < fr) {
        simplex[dim] = xe;
        fv[dim] = fe;
      } else {
        simplex[dim] = xr;
        fv[dim] = fr;
      }
    } else if (fr < fv[dim - 1]) {
      simplex[dim] = xr;
      fv[dim] = fr;
    } else {
      auto xc = combo(0.5);
      const double fc = (++evals, fn(xc));
      if (fc < fv[dim]) {
        simplex[dim] = xc;
        fv[dim] = fc;
      } else {
        for (std::size_t i = 1; i <= dim; ++i) {
          for (std::size_t d = 0; d < dim; ++d)
            simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
          fv[i] = (++evals, fn(simplex[i]));
          if (evals >= max_evals) break;
        }
      }
    }
    order();
  }
  return simplex[0];
}

}  // namespace detail

/// Distance of the rescaled eigenfunctions to the best one-dimensional profile
/// { -alpha_k (x . nu) } under the constraint sum xi_k alpha_k^2 = xi0.
/// Least-squares initialization, then a short constrained local search. The
/// returned value is an upper bound for the true infimum.
inline FlatnessFit flatness(const LevelSetShape& shape, const Spectrum& spectrum,
                            const std::vector<double>& xi, double xi0, const Point& center,
                            double r, int nm_max_evals = 200) {
  const Grid& g = shape.grid;
  if (r < 8.0 * g.h * (1.0 - 1e-12)) throw InvalidInput("flatness: r must be >= 8h");
  if (!g.point_in_box(center, 1.0)) throw InvalidInput("flatness: center outside grid");
  for (int a = 0; a < g.ndim; ++a)
    if (center[a] - r < g.origin[a] || center[a] + r > g.max_coord(a))
      throw InvalidInput("flatness: ball exits grid");
  const int N = spectrum.count();
  if (static_cast<int>(xi.size()) != N) throw InvalidInput("flatness: xi size mismatch");

  auto samples = detail::collect_flatness_samples(shape, spectrum, center, r, true);
  if (samples.x.size() < 20) throw InvalidInput("flatness: too few interior samples in the ball");

  // initial direction from the level-set normal at the center
  Point nu0{};
  {
    const double d = 0.5 * g.h;
    for (int a = 0; a < g.ndim; ++a) {
      Point pp = center, pm = center;
      pp[a] += d;
      pm[a] -= d;
      nu0[a] = (interpolate(g, shape.phi, pp) - interpolate(g, shape.phi, pm)) / (2 * d);
    }
    const double n = norm(nu0, g.ndim);
    if (n < 1e-14) throw InvalidInput("flatness: vanishing level-set gradient at center");
    for (int a = 0; a < g.ndim; ++a) nu0[a] /= n;
  }

  // alphas by least squares on the well-interior cap {x . nu < -0.2}
  std::vector<double> alphas(static_cast<std::size_t>(N), 0.0);
  std::vector<double> signs(static_cast<std::size_t>(N), 1.0);
  {
    double denom = 0.0;
    std::vector<double> num(static_cast<std::size_t>(N), 0.0);
    for (std::size_t i = 0; i < samples.x.size(); ++i) {
      const double t = dot(samples.x[i], nu0, g.ndim);
      if (t >= -0.2) continue;
      denom += t * t;
      for (int k = 0; k < N; ++k) num[static_cast<std::size_t>(k)] -= samples.value(i, k) * t;
    }
    if (denom <= 0.0) throw InvalidInput("flatness: no samples in the interior cap");
    for (int k = 0; k < N; ++k) {
      const double a = num[static_cast<std::size_t>(k)] / denom;
      signs[static_cast<std::size_t>(k)] = a >= 0.0 ? 1.0 : -1.0;
      alphas[static_cast<std::size_t>(k)] = std::abs(a);
    }
  }
  // apply the sign choice to the sample values once
  for (std::size_t i = 0; i < samples.x.size(); ++i)
    for (int k = 0; k < N; ++k)
      samples.w[i * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] *=
          signs[static_cast<std::size_t>(k)];
  detail::project_alphas(alphas, xi, xi0);

  // polish (nu, alpha) with Nelder-Mead; alphas re-projected to the
  // constraint ellipsoid inside every evaluation
  const int angle_dim = g.ndim - 1;
  std::vector<double> p0(static_cast<std::size_t>(angle_dim + N));
  if (g.ndim == 2) {
    p0[0] = std::atan2(nu0[1], nu0[0]);
  } else {
    p0[0] = std::acos(std::clamp(nu0[2], -1.0, 1.0));
    p0[1] = std::atan2(nu0[1], nu0[0]);
  }
  for (int k = 0; k < N; ++k) p0[static_cast<std::size_t>(angle_dim + k)] = alphas[static_cast<std::size_t>(k)];
  std::vector<double> scale(p0.size(), 0.05);
  auto objective = [&](const std::vector<double>& p) {
    int used = 0;
    const Point nu = detail::unit_from_params(p.data(), g.ndim, &used);
    std::vector<double> a(p.begin() + used, p.end());
    detail::project_alphas(a, xi, xi0);
    return detail::flatness_value(samples, nu, a, g.ndim);
  };
  const auto best = detail::nelder_mead(p0, scale, nm_max_evals, objective);

  FlatnessFit fit;
  fit.center = center;
  fit.r = r;
  int used = 0;
  fit.nu = detail::unit_from_params(best.data(), g.ndim, &used);
  fit.alphas.assign(best.begin() + used, best.end());
  detail::project_alphas(fit.alphas, xi, xi0);
  fit.signs = signs;
  fit.f = detail::flatness_value(samples, fit.nu, fit.alphas, g.ndim);
  return fit;
}

struct FlatnessDecay {
  double alpha = 0.0;
  double r2 = 0.0;
  bool saturated = false;
  std::vector<ProfileRow> table;  // (r, f(r))
};

/// Least-squares fit of log f(r) against log r over the configured radii.
inline FlatnessDecay flatness_decay(const LevelSetShape& shape, const Spectrum& spectrum,
                                    const std::vector<double>& xi, double xi0, const Point& center,
                                    const DiagnosticsConfig& cfg) {
  const Grid& g = shape.grid;
  FlatnessDecay out;
  for (double r : cfg.radii) {
    if (r < 8.0 * g.h * (1.0 - 1e-12)) continue;
    try {
      const auto fit = flatness(shape, spectrum, xi, xi0, center, r, cfg.nm_max_evals);
      out.table.push_back({r, fit.f});
    } catch (const InvalidInput&) {
      continue;
    }
  }
  if (out.table.size() < 4) throw InvalidInput("flatness_decay: fewer than 4 valid radii");
  const double noise_floor = 5e-3;
  double fmax = 0.0;
  for (const auto& row : out.table) fmax = std::max(fmax, row.value);
  if (fmax < noise_floor) {
    out.saturated = true;
    out.alpha = std::numeric_limits<double>::quiet_NaN();
    out.r2 = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double n = static_cast<double>(out.table.size());
  for (const auto& row : out.table) {
    const double x = std::log(row.r), y = std::log(std::max(row.value, 1e-12));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double denom = n * sxx - sx * sx;
  out.alpha = (n * sxy - sx * sy) / denom;
  const double ybar = sy / n;
  const double ss_tot = syy - n * ybar * ybar;
  const double ss_res = ss_tot - out.alpha * (sxy - sx * ybar);
  out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return out;
}

struct BlowupResult {
  FlatnessFit fit;
  double residual = 0.0;  // max_k sup_{B_1} |w_k - alpha_k (x . nu)^-|
  int lattice_m = 16;     // rescaled fields on a (2m+1)^ndim lattice
  std::vector<Field> w;
};

/// Rescaled eigenfunctions w_k = u_k(center + r .)/r against the half-plane
/// profile from the flatness fit at the same scale.
inline BlowupResult blowup(const LevelSetShape& shape, const Spectrum& spectrum,
                           const std::vector<double>& xi, double xi0, const Point& center,
                           double r, int nm_max_evals = 200) {
  const Grid& g = shape.grid;
  const double phic = std::abs(interpolate(g, shape.phi, center));
  if (phic > 1.5 * g.h)
    throw InvalidInput("blowup: center is not a boundary point");
  BlowupResult out;
  out.fit = flatness(shape, spectrum, xi, xi0, center, r, nm_max_evals);
  const int N = spectrum.count();
  const int m = out.lattice_m;
  const int side = 2 * m + 1;
  const index_t lat_count = g.ndim == 2 ? side * side : side * side * side;
  out.w.assign(static_cast<std::size_t>(N), Field(static_cast<std::size_t>(lat_count), 0.0));
  double worst = 0.0;
  for (index_t li = 0; li < lat_count; ++li) {
    index_t rem = li;
    int idx[3] = {0, 0, 0};
    for (int a = g.ndim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % side);
      rem /= side;
    }
    Point y{};
    double rr = 0.0;
    for (int a = 0; a < g.ndim; ++a) {
      y[a] = (idx[a] - m) / static_cast<double>(m);
      rr += y[a] * y[a];
    }
    if (rr > 1.0) continue;
    Point p = center;
    for (int a = 0; a < g.ndim; ++a) p[a] += r * y[a];
    if (!g.point_in_box(p)) continue;
    const double t = dot(y, out.fit.nu, g.ndim);
    const double prof = std::max(-t, 0.0);
    for (int k = 0; k < N; ++k) {
      const double wk = out.fit.signs[static_cast<std::size_t>(k)] *
                        interpolate(g, spectrum.eigenfunctions[static_cast<std::size_t>(k)], p) / r;
      out.w[static_cast<std::size_t>(k)][static_cast<std::size_t>(li)] = wk;
      worst = std::max(worst,
                       std::abs(wk - out.fit.alphas[static_cast<std::size_t>(k)] * prof));
    }
  }
  out.residual = worst;
  return out;
}

// ---------------------------------------------------------------------------
// energy densities (shared by Weiss and ACF)

namespace detail {

// |grad u|^2 with stencils that do not straddle the zero level set; outside
// nodes in the smoothing band copy the value from an adjacent interior node.
inline Field energy_density(const LevelSetShape& shape, const std::vector<const Field*>& fields,
                            const std::vector<double>& weights) {
  const Grid& g = shape.grid;
  const index_t n = g.node_count();
  Field out(static_cast<std::size_t>(n), 0.0);
  for (index_t i = 0; i < n; ++i) {
    if (!is_inside(shape.phi[i])) continue;
    const auto m = g.multi(i);
    double total = 0.0;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const Field& u = *fields[f];
      double g2 = 0.0;
      for (int axis = 0; axis < g.ndim; ++axis) {
        index_t lo[3] = {m[0], m[1], m[2]}, hi[3] = {m[0], m[1], m[2]};
        lo[axis] -= 1;
        hi[axis] += 1;
        const bool has_lo = lo[axis] >= 0 && is_inside(shape.phi[g.linear(lo[0], lo[1], lo[2])]);
        const bool has_hi =
            hi[axis] < g.dims[axis] && is_inside(shape.phi[g.linear(hi[0], hi[1], hi[2])]);
        double d;
        if (has_lo && has_hi) {
          d = (u[g.linear(hi[0], hi[1], hi[2])] - u[g.linear(lo[0], lo[1], lo[2])]) / (2 * g.h);
        } else if (has_lo) {
          d = (u[i] - u[g.linear(lo[0], lo[1], lo[2])]) / g.h;
        } else if (has_hi) {
          d = (u[g.linear(hi[0], hi[1], hi[2])] - u[i]) / g.h;
        } else {
          d = u[i] / g.h;  // isolated sliver
        }
        g2 += d * d;
      }
      total += weights[f] * g2;
    }
    out[static_cast<std::size_t>(i)] = total;
  }
  // band copy: nodes just outside inherit the neighboring interior density
  for (index_t i = 0; i < n; ++i) {
    if (is_inside(shape.phi[i]) || shape.phi[i] > 2.0 * g.h) continue;
    const auto m = g.multi(i);
    for (int axis = 0; axis < g.ndim && out[static_cast<std::size_t>(i)] == 0.0; ++axis)
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        index_t nb[3] = {m[0], m[1], m[2]};
        nb[axis] += sgn;
        if (!g.in_bounds(nb[0], nb[1], nb[2])) continue;
        const index_t j = g.linear(nb[0], nb[1], nb[2]);
        if (is_inside(shape.phi[j])) {
          out[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(j)];
          break;
        }
      }
  }
  return out;
}

// ball coverage weight for a node-centered cell (exact overlap in 2-D)
inline double ball_weight(const Grid& g, const Point& p, const Point& center, double r) {
  if (g.ndim == 2)
    return detail::disk_rect_overlap(p[0] - center[0] - 0.5 * g.h, p[0] - center[0] + 0.5 * g.h,
                                     p[1] - center[1] - 0.5 * g.h, p[1] - center[1] + 0.5 * g.h,
                                     r) /
           (g.h * g.h);
  return smoothed_indicator(distance(p, center, 3) - r, 1.5 * g.h);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weiss energy

struct WeissSample {
  double r = 0.0;
  double phi_r = 0.0;
};

struct WeissResult {
  std::vector<WeissSample> samples;
  std::map<std::string, std::string> skipped;
};

/// phi(r) = r^-n  Int_{B_r ∩ Omega} (sum_k xi_k |grad u_k|^2 + xi0)
///        - r^-(n+1) Int_{dB_r} sum_k xi_k u_k^2.
/// Bulk by smoothed-indicator quadrature, sphere by trapezoid over 720
/// interpolated angular samples (2-D) or a latitude-longitude rule (3-D).
inline WeissResult weiss_energy(const LevelSetShape& shape, const Spectrum& spectrum,
                                const std::vector<double>& xi, double xi0, const Point& center,
                                const DiagnosticsConfig& cfg) {
  const Grid& g = shape.grid;
  const int N = spectrum.count();
  if (static_cast<int>(xi.size()) != N) throw InvalidInput("weiss_energy: xi size mismatch");
  std::vector<const Field*> fields;
  for (const auto& u : spectrum.eigenfunctions) fields.push_back(&u);
  const Field dens = detail::energy_density(shape, fields, xi);
  const double eps = 1.5 * g.h;

  WeissResult out;
  for (double r : cfg.radii) {
    if (r < 4.0 * g.h) {
      out.skipped["r=" + std::to_string(r)] = "r < 4h";
      continue;
    }
    bool exits = false;
    for (int a = 0; a < g.ndim; ++a)
      if (center[a] - r - eps < g.origin[a] || center[a] + r + eps > g.max_coord(a)) exits = true;
    if (exits) {
      out.skipped["r=" + std::to_string(r)] = "ball exits grid";
      continue;
    }

    index_t lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int a = 0; a < g.ndim; ++a) {
      lo[a] = static_cast<index_t>(std::floor((center[a] - r - eps - g.origin[a]) / g.h));
      hi[a] = static_cast<index_t>(std::ceil((center[a] + r + eps - g.origin[a]) / g.h));
    }
    double bulk = 0.0;
    for (index_t i0 = lo[0]; i0 <= hi[0]; ++i0)
      for (index_t i1 = lo[1]; i1 <= hi[1]; ++i1)
        for (index_t i2 = (g.ndim == 3 ? lo[2] : 0); i2 <= (g.ndim == 3 ? hi[2] : 0); ++i2) {
          const Point p = g.position(i0, i1, i2);
          const double wb = detail::ball_weight(g, p, center, r);
          if (wb == 0.0) continue;
          const index_t i = g.linear(i0, i1, i2);
          const double chi = smoothed_indicator(shape.phi[i], eps);
          if (chi == 0.0) continue;
          bulk += wb * chi * (dens[static_cast<std::size_t>(i)] + xi0);
        }
    bulk *= g.cell_measure();

    double sphere = 0.0;
    if (g.ndim == 2) {
      const int M = 720;
      for (int j = 0; j < M; ++j) {
        const double th = 2.0 * std::numbers::pi * j / M;
        const Point p{center[0] + r * std::cos(th), center[1] + r * std::sin(th), 0.0};
        double s = 0.0;
        for (int k = 0; k < N; ++k) {
          const double u = interpolate(g, spectrum.eigenfunctions[static_cast<std::size_t>(k)], p);
          s += xi[static_cast<std::size_t>(k)] * u * u;
        }
        sphere += s;
      }
      sphere *= 2.0 * std::numbers::pi * r / M;
    } else {
      const int MT = 64, MP = 128;
      for (int a = 0; a < MT; ++a) {
        const double th = std::numbers::pi * (a + 0.5) / MT;
        for (int b = 0; b < MP; ++b) {
          const double ph = 2.0 * std::numbers::pi * b / MP;
          const Point p{center[0] + r * std::sin(th) * std::cos(ph),
                        center[1] + r * std::sin(th) * std::sin(ph), center[2] + r * std::cos(th)};
          double s = 0.0;
          for (int k = 0; k < N; ++k) {
            const double u = interpolate(g, spectrum.eigenfunctions[static_cast<std::size_t>(k)], p);
            s += xi[static_cast<std::size_t>(k)] * u * u;
          }
          sphere += s * std::sin(th);
        }
      }
      sphere *= r * r * (std::numbers::pi / MT) * (2.0 * std::numbers::pi / MP);
    }

    const double rn = std::pow(r, g.ndim);
    out.samples.push_back({r, bulk / rn - sphere / (rn * r)});
  }
  std::sort(out.samples.begin(), out.samples.end(),
            [](const WeissSample& a, const WeissSample& b) { return a.r < b.r; });
  return out;
}

struct WeissCheck {
  int violations = 0;
  double worst_gap = 0.0;
};

/// Counts adjacent radius pairs violating monotonicity of phi(r) + C r^2 / 2.
inline WeissCheck weiss_monotonicity_check(const std::vector<WeissSample>& samples, double C,
                                           double tol) {
  if (samples.size() < 3) throw InvalidInput("weiss_monotonicity_check: need at least 3 samples");
  std::vector<WeissSample> s = samples;
  std::sort(s.begin(), s.end(), [](const WeissSample& a, const WeissSample& b) { return a.r < b.r; });
  WeissCheck out;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double a = s[i].phi_r + 0.5 * C * s[i].r * s[i].r;
    const double b = s[i + 1].phi_r + 0.5 * C * s[i + 1].r * s[i + 1].r;
    if (b < a - tol) {
      ++out.violations;
      out.worst_gap = std::max(out.worst_gap, a - b);
    }
  }
  return out;
}

/// Smallest C in {0, 0.5, ..., c_max} with zero violations at the tolerance.
inline double fit_weiss_constant(const std::vector<WeissSample>& samples, double tol,
                                 double c_max = 32.0) {
  for (double C = 0.0; C <= c_max + 1e-12; C += 0.5)
    if (weiss_monotonicity_check(samples, C, tol).violations == 0) return C;
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Alt-Caffarelli-Friedman product

struct AcfResult {
  std::vector<ProfileRow> samples;  // (r, J(r))
  bool overlap_warning = false;
};

/// J(r) = r^-4 Int_{B_r} |grad w1|^2 / |x|^{n-2}  *  Int_{B_r} |grad w2|^2 / |x|^{n-2}.
/// Gradients at cell centers; the singular weight is clamped at half a cell.
inline AcfResult acf_functional(const Grid& g, const Field& w1, const Field& w2,
                                const Point& center, const DiagnosticsConfig& cfg) {
  check_field(g, w1, "acf_functional");
  check_field(g, w2, "acf_functional");
  AcfResult out;
  // hypothesis check: positivity sets should be disjoint
  index_t overlap = 0;
  for (index_t i = 0; i < g.node_count(); ++i)
    if (w1[static_cast<std::size_t>(i)] > 0.0 && w2[static_cast<std::size_t>(i)] > 0.0) ++overlap;
  if (overlap > 0) {
    out.overlap_warning = true;
    log::warn("acf_functional: positivity sets overlap on " + std::to_string(overlap) + " nodes");
  }

  for (double r : cfg.radii) {
    bool exits = false;
    for (int a = 0; a < g.ndim; ++a)
      if (center[a] - r < g.origin[a] + g.h || center[a] + r > g.max_coord(a) - g.h) exits = true;
    if (exits) continue;

    double fac[2] = {0.0, 0.0};
    index_t lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
    for (int a = 0; a < g.ndim; ++a) {
      lo[a] = std::max<index_t>(0, static_cast<index_t>(std::floor((center[a] - r - g.origin[a]) / g.h)) - 1);
      hi[a] = std::min<index_t>(g.dims[a] - 2,
                                static_cast<index_t>(std::ceil((center[a] + r - g.origin[a]) / g.h)));
    }
    // cell-centered gradients, exact ball-cell overlap in 2-D
    for (index_t i0 = lo[0]; i0 <= hi[0]; ++i0)
      for (index_t i1 = lo[1]; i1 <= hi[1]; ++i1)
        for (index_t i2 = (g.ndim == 3 ? lo[2] : 0); i2 <= (g.ndim == 3 ? hi[2] : 0); ++i2) {
          Point cc = g.position(i0, i1, i2);
          for (int a = 0; a < g.ndim; ++a) cc[a] += 0.5 * g.h;
          double wb;
          if (g.ndim == 2) {
            wb = detail::disk_rect_overlap(cc[0] - center[0] - 0.5 * g.h,
                                           cc[0] - center[0] + 0.5 * g.h,
                                           cc[1] - center[1] - 0.5 * g.h,
                                           cc[1] - center[1] + 0.5 * g.h, r) /
                 (g.h * g.h);
          } else {
            wb = distance(cc, center, 3) <= r ? 1.0 : 0.0;
          }
          if (wb == 0.0) continue;
          const double weight =
              g.ndim == 2 ? 1.0
                          : 1.0 / std::max(distance(cc, center, 3), 0.5 * g.h);
          for (int f = 0; f < 2; ++f) {
            const Field& w = f == 0 ? w1 : w2;
            double g2 = 0.0;
            if (g.ndim == 2) {
              const double v00 = w[g.linear(i0, i1)];
              const double v10 = w[g.linear(i0 + 1, i1)];
              const double v01 = w[g.linear(i0, i1 + 1)];
              const double v11 = w[g.linear(i0 + 1, i1 + 1)];
              const double dx = (v10 + v11 - v00 - v01) / (2 * g.h);
              const double dy = (v01 + v11 - v00 - v10) / (2 * g.h);
              g2 = dx * dx + dy * dy;
            } else {
              double grad[3];
              const auto m = g.multi(g.linear(i0, i1, i2));
              node_gradient(g, w, m[0], m[1], m[2], grad);
              g2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
            }
            fac[f] += wb * weight * g2;
          }
        }
    const double cell = g.cell_measure();
    out.samples.push_back({r, fac[0] * cell * fac[1] * cell / (r * r * r * r)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// full report

struct DiagnosticsReport {
  double fb_residual_sup = std::numeric_limits<double>::quiet_NaN();
  double fb_residual_l2 = std::numeric_limits<double>::quiet_NaN();
  NondegeneracyProfile nondegeneracy;
  DensityProfile density;
  MinkowskiProfile minkowski;
  std::vector<WeissSample> weiss;
  double weiss_c = std::numeric_limits<double>::quiet_NaN();
  int weiss_violations_at_fit = -1;
  int weiss_violations_at_zero = -1;
  double weiss_tol = 0.0;
  AcfResult acf;
  std::string acf_fields;
  FlatnessDecay flatness;
  int nonflat_samples = 0;
  int flat_samples_checked = 0;
  int components = 0;
  std::map<std::string, std::string> skipped;
  std::vector<std::string> notes;
};

/// Runs every diagnostic over deterministically subsampled boundary points.
/// Partial failures are recorded per field; the report always completes.
inline DiagnosticsReport full_report(const LevelSetShape& shape_in, const Spectrum& spectrum,
                                     const ObjectiveSpec& spec, DiagnosticsConfig cfg) {
  DiagnosticsReport rep;
  if (shape_in.degenerate) {
    for (const char* f : {"fb_residual", "nondegeneracy", "density", "minkowski", "weiss", "acf",
                          "flatness"})
      rep.skipped[f] = "degenerate shape";
    return rep;
  }
  // diagnostics assume a signed-distance band
  const LevelSetShape shape = reinitialize(shape_in);
  const Grid& g = shape.grid;
  if (cfg.radii.empty()) cfg.radii = default_radii(g);

  rep.components = interior_components(shape);

  std::vector<double> xi;
  bool have_xi = false;
  try {
    xi = gradient(spec, SpectrumPoint(spectrum.eigenvalues));
    have_xi = true;
  } catch (const std::exception& e) {
    rep.skipped["xi"] = e.what();
  }

  BoundaryTrace trace;
  bool have_trace = false;
  try {
    trace = boundary_trace(spectrum, shape);
    have_trace = true;
  } catch (const std::exception& e) {
    rep.skipped["boundary_trace"] = e.what();
  }

  if (have_xi && have_trace) {
    try {
      const auto clusters = multiplicity_clusters(spectrum.eigenvalues, cfg.cluster_tol);
      const auto fb = fb_residual(trace, xi, spec.xi0, clusters);
      rep.fb_residual_sup = fb.sup;
      rep.fb_residual_l2 = fb.l2;
    } catch (const std::exception& e) {
      rep.skipped["fb_residual"] = e.what();
    }
  } else if (!rep.skipped.count("fb_residual")) {
    rep.skipped["fb_residual"] = "missing xi or trace";
  }

  try {
    rep.nondegeneracy = nondegeneracy_profile(shape, spectrum, cfg);
  } catch (const std::exception& e) {
    rep.skipped["nondegeneracy"] = e.what();
  }
  try {
    rep.density = density_profile(shape, cfg);
  } catch (const std::exception& e) {
    rep.skipped["density"] = e.what();
  }
  try {
    rep.minkowski = minkowski_profile(shape, cfg);
  } catch (const std::exception& e) {
    rep.skipped["minkowski"] = e.what();
  }

  const auto samples = boundary_points(shape);
  const auto centers = farthest_point_centers(samples, cfg.sample_cap, g.ndim);

  // Weiss energy at the most box-interior subsampled center, where the radius
  // ladder has room
  if (have_xi && !centers.empty()) {
    Point wc = centers[0];
    double best = -1.0;
    for (const auto& c : centers) {
      double margin = std::numeric_limits<double>::infinity();
      for (int a = 0; a < g.ndim; ++a)
        margin = std::min({margin, c[a] - g.origin[a], g.max_coord(a) - c[a]});
      if (margin > best) {
        best = margin;
        wc = c;
      }
    }
    try {
      auto wr = weiss_energy(shape, spectrum, xi, spec.xi0, wc, cfg);
      rep.weiss = wr.samples;
      for (const auto& [k, v] : wr.skipped) rep.skipped["weiss " + k] = v;
      if (rep.weiss.size() >= 3) {
        double med = 0.0;
        std::vector<double> mags;
        for (const auto& s : rep.weiss) mags.push_back(std::abs(s.phi_r));
        std::sort(mags.begin(), mags.end());
        med = mags[mags.size() / 2];
        rep.weiss_tol = cfg.weiss_tol_frac * med;
        rep.weiss_violations_at_zero =
            weiss_monotonicity_check(rep.weiss, 0.0, rep.weiss_tol).violations;
        rep.weiss_c = fit_weiss_constant(rep.weiss, rep.weiss_tol, cfg.weiss_c_max);
        if (std::isfinite(rep.weiss_c))
          rep.weiss_violations_at_fit =
              weiss_monotonicity_check(rep.weiss, rep.weiss_c, rep.weiss_tol).violations;
      } else {
        rep.skipped["weiss_check"] = "fewer than 3 radii";
      }
    } catch (const std::exception& e) {
      rep.skipped["weiss"] = e.what();
    }
  } else if (!have_xi) {
    rep.skipped["weiss"] = "missing xi";
  }

  // ACF: two components feed the disconnectedness check; otherwise the signed
  // parts of the highest computed mode
  try {
    std::vector<int> labels;
    const int comps = interior_components(shape, &labels);
    Field w1(static_cast<std::size_t>(g.node_count()), 0.0);
    Field w2(static_cast<std::size_t>(g.node_count()), 0.0);
    Point acf_center{};
    if (comps >= 2) {
      // the two largest components by node count
      std::vector<index_t> count(static_cast<std::size_t>(comps), 0);
      for (int l : labels)
        if (l >= 0) ++count[static_cast<std::size_t>(l)];
      int c1 = 0, c2 = 1;
      for (int c = 1; c < comps; ++c)
        if (count[static_cast<std::size_t>(c)] > count[static_cast<std::size_t>(c1)]) c1 = c;
      c2 = c1 == 0 ? 1 : 0;
      for (int c = 0; c < comps; ++c)
        if (c != c1 && count[static_cast<std::size_t>(c)] > count[static_cast<std::size_t>(c2)])
          c2 = c;
      Field ubar(static_cast<std::size_t>(g.node_count()), 0.0);
      for (const auto& u : spectrum.eigenfunctions)
        for (std::size_t i = 0; i < ubar.size(); ++i) ubar[i] += std::abs(u[i]);
      Point m1{}, m2{};
      index_t n1 = 0, n2 = 0;
      for (index_t i = 0; i < g.node_count(); ++i) {
        if (labels[static_cast<std::size_t>(i)] == c1) {
          w1[static_cast<std::size_t>(i)] = ubar[static_cast<std::size_t>(i)];
          const Point p = g.position(i);
          for (int a = 0; a < g.ndim; ++a) m1[a] += p[a];
          ++n1;
        } else if (labels[static_cast<std::size_t>(i)] == c2) {
          w2[static_cast<std::size_t>(i)] = ubar[static_cast<std::size_t>(i)];
          const Point p = g.position(i);
          for (int a = 0; a < g.ndim; ++a) m2[a] += p[a];
          ++n2;
        }
      }
      for (int a = 0; a < g.ndim; ++a)
        acf_center[a] = 0.5 * (m1[a] / static_cast<double>(n1) + m2[a] / static_cast<double>(n2));
      rep.acf_fields = "two largest components of sum_k |u_k|";
    } else {
      const Field& un = spectrum.eigenfunctions.back();
      for (std::size_t i = 0; i < w1.size(); ++i) {
        w1[i] = std::max(un[i], 0.0);
        w2[i] = std::max(-un[i], 0.0);
      }
      acf_center = centers.empty() ? Point{} : centers[0];
      rep.acf_fields = "positive/negative parts of u_N";
    }
    rep.acf = acf_functional(g, w1, w2, acf_center, cfg);
    if (rep.acf.samples.empty()) rep.skipped["acf"] = "no radius fits in the grid";
  } catch (const std::exception& e) {
    rep.skipped["acf"] = e.what();
  }

  // flatness decay at the first subsampled center; non-flat census at the
  // smallest valid radius
  if (have_xi && !centers.empty()) {
    try {
      rep.flatness = flatness_decay(shape, spectrum, xi, spec.xi0, centers[0], cfg);
    } catch (const std::exception& e) {
      rep.skipped["flatness_decay"] = e.what();
    }
    double rmin = 0.0;
    for (double r : cfg.radii)
      if (r >= 8.0 * g.h * (1.0 - 1e-12)) rmin = r;
    if (rmin > 0.0) {
      for (const auto& c : centers) {
        try {
          const auto fit = flatness(shape, spectrum, xi, spec.xi0, c, rmin, cfg.nm_max_evals);
          ++rep.flat_samples_checked;
          if (fit.f > cfg.flatness_threshold) ++rep.nonflat_samples;
        } catch (const InvalidInput&) {
          continue;
        }
      }
    } else {
      rep.skipped["flatness_census"] = "no radius >= 8h";
    }
  } else if (!have_xi) {
    rep.skipped["flatness_decay"] = "missing xi";
  }

  return rep;
}

}  // namespace eigenshape
