#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "eigenshape/advect.hpp"
#include "eigenshape/boundary_trace.hpp"
#include "eigenshape/diagnostics.hpp"
#include "eigenshape/dirichlet_operator.hpp"
#include "eigenshape/eigensolve.hpp"
#include "eigenshape/fast_marching.hpp"
#include "eigenshape/objective.hpp"

namespace eigenshape {

struct OptConfig {
  int max_steps = 500;
  double cfl = 0.45;             // in (0, 0.5]
  int reinit_period = 5;         // fast-marching cadence in steps
  std::vector<double> p_schedule{2.0, 4.0, 8.0, 16.0, kNoSmoothing};
  double switch_tol = 1e-4;      // relative objective change to advance the schedule
  double stop_tol = 1e-6;        // relative objective change to stop
  double residual_target = 0.05; // free-boundary residual at convergence
  std::uint64_t seed = 0;
  double eig_tol = 1e-8;
  double smoothing_width = 1.5;  // quadrature width in cells
  int velocity_band_cells = 6;

  void validate() const {
    if (!(cfl > 0.0 && cfl <= 0.5)) throw InvalidInput("opt: cfl must be in (0, 0.5]");
    if (max_steps < 0) throw InvalidInput("opt: max_steps must be >= 0");
    if (reinit_period < 1) throw InvalidInput("opt: reinit_period must be >= 1");
    if (p_schedule.empty()) throw InvalidInput("opt: empty p schedule");
    for (std::size_t i = 1; i < p_schedule.size(); ++i)
      if (!(p_schedule[i] > p_schedule[i - 1]))
        throw InvalidInput("opt: p schedule must be ascending");
  }
};

struct HistoryRow {
  int step = 0;
  std::vector<double> lambdas;
  double volume = 0.0;
  double objective = 0.0;
  double max_velocity = 0.0;
  double fb_residual = std::numeric_limits<double>::quiet_NaN();
};

struct OptState {
  LevelSetShape shape;
  Spectrum spectrum;
  BoundaryTrace trace;  // fresh for (shape, spectrum)
  double objective_value = 0.0;
  double volume_value = 0.0;
  int step = 0;
  int p_stage = 0;
  bool stalled = false;
  bool converged = false;
  std::vector<HistoryRow> history;
};

/// Boundary velocity samples aligned with the state's trace.
struct VelocityField {
  std::vector<BoundarySample> samples;
  std::vector<double> values;
};

/// V(x) = sum_k xi_k (u_k)_nu(x)^2 - xi0; positive values move the boundary
/// outward and decrease the objective.
inline VelocityField velocity_from_trace(const BoundaryTrace& trace, const std::vector<double>& xi,
                                         double xi0) {
  VelocityField out;
  out.samples = trace.samples;
  out.values.resize(trace.samples.size());
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < trace.num_modes; ++k) {
      const double d = trace.normal_deriv(i, k);
      s += xi[static_cast<std::size_t>(k)] * d * d;
    }
    out.values[i] = s - xi0;
  }
  return out;
}

inline ObjectiveSpec stage_spec(const ObjectiveSpec& spec, const OptConfig& cfg, int stage) {
  const double p = cfg.p_schedule[static_cast<std::size_t>(stage)];
  return p == kNoSmoothing ? spec : smooth_p(spec, p);
}

inline VelocityField shape_gradient(const OptState& state, const ObjectiveSpec& spec) {
  const auto xi = gradient(spec, SpectrumPoint(state.spectrum.eigenvalues));
  return velocity_from_trace(state.trace, xi, spec.xi0);
}

/// Constant extension of the nearest boundary sample value on the band
/// {|phi| < band_cells h}, zero elsewhere.
inline Field extend_velocity(const VelocityField& vel, const LevelSetShape& shape,
                             int band_cells = 6) {
  if (vel.samples.empty()) throw InvalidInput("extend_velocity: no samples");
  const Grid& g = shape.grid;
  const double band = band_cells * g.h;

  // bucket the samples on a coarse lattice for nearest-sample lookup
  const double bucket_h = 4.0 * g.h;
  const index_t bdims[3] = {static_cast<index_t>(g.extent(0) / bucket_h) + 2,
                            static_cast<index_t>(g.extent(1) / bucket_h) + 2,
                            g.ndim == 3 ? static_cast<index_t>(g.extent(2) / bucket_h) + 2 : 1};
  auto bucket_of = [&](const Point& p) {
    index_t b[3] = {0, 0, 0};
    for (int a = 0; a < g.ndim; ++a)
      b[a] = std::clamp<index_t>(static_cast<index_t>((p[a] - g.origin[a]) / bucket_h), 0,
                                 bdims[a] - 1);
    return (b[0] * bdims[1] + b[1]) * bdims[2] + b[2];
  };
  std::vector<std::vector<std::size_t>> buckets(
      static_cast<std::size_t>(bdims[0] * bdims[1] * bdims[2]));
  for (std::size_t i = 0; i < vel.samples.size(); ++i)
    buckets[static_cast<std::size_t>(bucket_of(vel.samples[i].point))].push_back(i);

  Field out(static_cast<std::size_t>(g.node_count()), 0.0);
  const index_t n = g.node_count();
  parallel_for(n, [&](index_t lo, index_t hi) {
    for (index_t i = lo; i < hi; ++i) {
      if (std::abs(shape.phi[i]) >= band) continue;
      const Point p = g.position(i);
      index_t bc[3] = {0, 0, 0};
      for (int a = 0; a < g.ndim; ++a)
        bc[a] = std::clamp<index_t>(static_cast<index_t>((p[a] - g.origin[a]) / bucket_h), 0,
                                    bdims[a] - 1);
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      index_t ring_limit = std::max({bdims[0], bdims[1], bdims[2]});
      for (index_t ring = 0; ring <= ring_limit; ++ring) {
        for (index_t b0 = std::max<index_t>(0, bc[0] - ring);
             b0 <= std::min(bdims[0] - 1, bc[0] + ring); ++b0)
          for (index_t b1 = std::max<index_t>(0, bc[1] - ring);
               b1 <= std::min(bdims[1] - 1, bc[1] + ring); ++b1)
            for (index_t b2 = (g.ndim == 3 ? std::max<index_t>(0, bc[2] - ring) : 0);
                 b2 <= (g.ndim == 3 ? std::min(bdims[2] - 1, bc[2] + ring) : 0); ++b2) {
              const index_t d0 = std::abs(b0 - bc[0]), d1 = std::abs(b1 - bc[1]),
                            d2 = std::abs(b2 - bc[2]);
              if (std::max({d0, d1, d2}) != ring) continue;  // shell only
              for (std::size_t si : buckets[static_cast<std::size_t>((b0 * bdims[1] + b1) * bdims[2] + b2)]) {
                const double d = distance(p, vel.samples[si].point, g.ndim);
                if (d < best - 1e-15) {
                  best = d;
                  arg = si;
                }
              }
            }
        if (best < std::numeric_limits<double>::infinity()) {
          // any closer sample lies within ceil(best/bucket)+1 shells
          ring_limit = std::min(ring_limit,
                                static_cast<index_t>(std::ceil(best / bucket_h)) + 1);
        }
      }
      out[static_cast<std::size_t>(i)] = vel.values[arg];
    }
  });
  return out;
}

namespace detail {

struct SolveResult {
  Spectrum spectrum;
  double volume = 0.0;
  double objective = 0.0;
};

inline SolveResult solve_objective(const LevelSetShape& shape, const ObjectiveSpec& spec,
                                   const OptConfig& cfg, const std::vector<Field>* warm) {
  SolveResult r;
  auto op = assemble(shape);
  r.spectrum = lowest_eigenpairs(op, spec.num_eigenvalues, cfg.eig_tol, cfg.seed, warm);
  if (!r.spectrum.converged)
    throw SolverFailure("optimize: eigensolver failed to reach tolerance");
  r.volume = volume(shape, cfg.smoothing_width);
  r.objective = evaluate(spec, SpectrumPoint(r.spectrum.eigenvalues), r.volume);
  return r;
}

inline double history_fb_residual(const OptState& state, const ObjectiveSpec& spec,
                                  double cluster_tol) {
  try {
    const auto xi = gradient(spec, SpectrumPoint(state.spectrum.eigenvalues));
    const auto clusters = multiplicity_clusters(state.spectrum.eigenvalues, cluster_tol);
    return fb_residual(state.trace, xi, spec.xi0, clusters).sup;
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline void push_history(OptState& state, const ObjectiveSpec& spec, double max_v) {
  HistoryRow row;
  row.step = state.step;
  row.lambdas = state.spectrum.eigenvalues;
  row.volume = state.volume_value;
  row.objective = state.objective_value;
  row.max_velocity = max_v;
  row.fb_residual = history_fb_residual(state, spec, spec.cluster_tol);
  state.history.push_back(std::move(row));
}

}  // namespace detail

/// Builds a fresh state (reinitialized shape, solved spectrum, trace) at
/// schedule stage `stage`.
inline OptState make_state(const LevelSetShape& init, const ObjectiveSpec& spec,
                           const OptConfig& cfg, int stage = 0) {
  cfg.validate();
  spec.validate();
  OptState st;
  st.shape = reinitialize(init);
  st.p_stage = stage;
  const auto spec_s = stage_spec(spec, cfg, stage);
  auto solved = detail::solve_objective(st.shape, spec_s, cfg, nullptr);
  st.spectrum = std::move(solved.spectrum);
  st.volume_value = solved.volume;
  st.objective_value = solved.objective;
  st.trace = boundary_trace(st.spectrum, st.shape);
  return st;
}

/// One descent step: advect by dt = cfl h / max|V|, re-solve, and backtrack
/// (halving dt up to 5 times) whenever the true objective increases. Returns
/// the state flagged stalled when no dt makes progress.
inline OptState step(const OptState& state, const ObjectiveSpec& base_spec, const OptConfig& cfg) {
  cfg.validate();
  const auto spec = stage_spec(base_spec, cfg, state.p_stage);
  auto vel = shape_gradient(state, spec);
  double max_v = 0.0;
  for (double v : vel.values) max_v = std::max(max_v, std::abs(v));

  OptState next = state;
  next.step = state.step + 1;
  if (max_v < 1e-14) {
    detail::push_history(next, spec, max_v);
    return next;
  }

  const Field vfield = extend_velocity(vel, state.shape, cfg.velocity_band_cells);
  const bool reinit_now = (next.step % cfg.reinit_period) == 0;
  double dt = cfg.cfl * state.shape.grid.h / max_v;
  for (int attempt = 0; attempt <= 5; ++attempt, dt *= 0.5) {
    LevelSetShape moved = advect(state.shape, vfield, dt);
    if (moved.degenerate) continue;
    if (reinit_now) moved = reinitialize(moved);
    detail::SolveResult solved;
    try {
      solved = detail::solve_objective(moved, spec, cfg, &state.spectrum.eigenfunctions);
    } catch (const InvalidInput&) {
      continue;  // domain collapsed below the solvable size; shrink the step
    }
    if (solved.objective <= state.objective_value * (1.0 + 1e-12)) {
      next.shape = std::move(moved);
      next.spectrum = std::move(solved.spectrum);
      next.volume_value = solved.volume;
      next.objective_value = solved.objective;
      next.trace = boundary_trace(next.spectrum, next.shape);
      next.stalled = false;
      detail::push_history(next, spec, max_v);
      return next;
    }
  }
  next.stalled = true;
  detail::push_history(next, spec, max_v);
  log::info("step " + std::to_string(next.step) + ": backtracking exhausted, stalled");
  return next;
}

/// Gradient flow with F_p continuation: the schedule advances whenever the
/// relative objective change drops below switch_tol; the run converges when
/// the final stage stalls out below stop_tol with the free-boundary residual
/// under residual_target.
inline std::pair<OptState, DiagnosticsReport> run(
    const LevelSetShape& init, const ObjectiveSpec& spec, const OptConfig& cfg,
    DiagnosticsConfig diag_cfg = {},
    const std::function<void(const OptState&)>& on_step = nullptr) {
  cfg.validate();
  spec.validate();
  OptState state = make_state(init, spec, cfg, 0);
  {
    const auto spec0 = stage_spec(spec, cfg, 0);
    auto vel = shape_gradient(state, spec0);
    double max_v = 0.0;
    for (double v : vel.values) max_v = std::max(max_v, std::abs(v));
    detail::push_history(state, spec0, max_v);
  }
  if (on_step) on_step(state);

  const int last_stage = static_cast<int>(cfg.p_schedule.size()) - 1;
  while (state.step < cfg.max_steps) {
    const double prev_obj = state.objective_value;
    state = step(state, spec, cfg);
    if (on_step) on_step(state);
    const double fb = state.history.back().fb_residual;

    if (state.stalled) {
      if (state.p_stage < last_stage) {
        ++state.p_stage;
        state.stalled = false;
        const auto spec_s = stage_spec(spec, cfg, state.p_stage);
        state.objective_value = evaluate(spec_s, SpectrumPoint(state.spectrum.eigenvalues),
                                         state.volume_value);
        continue;
      }
      if (std::isfinite(fb) && fb <= cfg.residual_target) {
        // numerically stationary: nothing the grid can improve
        state.stalled = false;
        state.converged = true;
      }
      break;
    }

    const double rel =
        std::abs(state.objective_value - prev_obj) / std::max(std::abs(prev_obj), 1e-300);
    if (rel < cfg.switch_tol && state.p_stage < last_stage) {
      ++state.p_stage;
      const auto spec_s = stage_spec(spec, cfg, state.p_stage);
      state.objective_value =
          evaluate(spec_s, SpectrumPoint(state.spectrum.eigenvalues), state.volume_value);
      continue;
    }
    if (state.p_stage == last_stage && rel < cfg.stop_tol && std::isfinite(fb) &&
        fb <= cfg.residual_target) {
      state.converged = true;
      break;
    }
  }

  const auto spec_final = stage_spec(spec, cfg, state.p_stage);
  if (diag_cfg.radii.empty()) diag_cfg.radii = default_radii(state.shape.grid);
  auto report = full_report(state.shape, state.spectrum, spec_final, diag_cfg);
  return {std::move(state), std::move(report)};
}

}  // namespace eigenshape
