#pragma once

#include <algorithm>
#include <cmath>

#include "eigenshape/level_set.hpp"

namespace eigenshape {

/// One upwind (Godunov) Euler step of phi_t + V |grad phi| = 0.
/// Positive V moves the boundary outward. Requires dt * max|V| <= 0.5 h.
inline LevelSetShape advect(const LevelSetShape& s, const Field& normal_velocity, double dt) {
  require_nondegenerate(s, "advect");
  const Grid& g = s.grid;
  check_field(g, normal_velocity, "advect");
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw InvalidInput("advect: dt must be finite and >= 0");
  double vmax = 0.0;
  for (double v : normal_velocity) vmax = std::max(vmax, std::abs(v));
  if (dt * vmax > 0.5 * g.h * (1.0 + 1e-12))
    throw InvalidInput("advect: CFL violation, dt * max|V| > 0.5 h");

  LevelSetShape out;
  out.grid = g;
  out.phi.resize(s.phi.size());
  const index_t n = g.node_count();
  parallel_for(n, [&](index_t b, index_t e) {
    for (index_t i = b; i < e; ++i) {
      const double v = normal_velocity[i];
      if (v == 0.0) {
        out.phi[i] = s.phi[i];
        continue;
      }
      const auto m = g.multi(i);
      double grad2 = 0.0;
      for (int axis = 0; axis < g.ndim; ++axis) {
        index_t lo[3] = {m[0], m[1], m[2]};
        index_t hi[3] = {m[0], m[1], m[2]};
        lo[axis] -= 1;
        hi[axis] += 1;
        const bool has_lo = lo[axis] >= 0;
        const bool has_hi = hi[axis] < g.dims[axis];
        const double c = s.phi[i];
        double dm = 0.0, dp = 0.0;
        if (has_lo) dm = (c - s.phi[g.linear(lo[0], lo[1], lo[2])]) / g.h;
        if (has_hi) dp = (s.phi[g.linear(hi[0], hi[1], hi[2])] - c) / g.h;
        if (!has_lo) dm = dp;
        if (!has_hi) dp = dm;
        if (v > 0.0) {
          const double a = std::max(dm, 0.0), b2 = std::min(dp, 0.0);
          grad2 += a * a + b2 * b2;
        } else {
          const double a = std::min(dm, 0.0), b2 = std::max(dp, 0.0);
          grad2 += a * a + b2 * b2;
        }
      }
      out.phi[i] = s.phi[i] - dt * v * std::sqrt(grad2);
    }
  });
  bool any_neg = false, any_nonneg = false;
  for (double v : out.phi) (v < 0.0 ? any_neg : any_nonneg) = true;
  out.degenerate = !(any_neg && any_nonneg);
  if (out.degenerate) log::warn("advect: shape became degenerate");
  return out;
}

}  // namespace eigenshape
