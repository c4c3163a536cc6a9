#pragma once

#include <vector>

#include "eigenshape/eigensolve.hpp"
#include "eigenshape/level_set.hpp"

namespace eigenshape {

/// Per-eigenfunction outward normal derivatives sampled on the free boundary.
/// Sign convention: (u_k)_nu <= 0 where u_k >= 0 inside.
struct BoundaryTrace {
  std::vector<BoundarySample> samples;
  std::vector<double> derivs;  // flattened [sample][mode]
  int num_modes = 0;
  std::size_t skipped = 0;  // samples dropped because a probe left the grid

  double normal_deriv(std::size_t sample, int mode) const {
    return derivs[sample * static_cast<std::size_t>(num_modes) + static_cast<std::size_t>(mode)];
  }
};

/// Estimates (u_k)_nu at each boundary sample from values at depths
/// {1, 2, 3} h along the inward normal, least-squares slope through zero.
inline BoundaryTrace boundary_trace(const Spectrum& spectrum, const LevelSetShape& shape) {
  require_nondegenerate(shape, "boundary_trace");
  const Grid& g = shape.grid;
  const int N = spectrum.count();
  if (N < 1) throw InvalidInput("boundary_trace: empty spectrum");
  for (const auto& f : spectrum.eigenfunctions) check_field(g, f, "boundary_trace");

  BoundaryTrace tr;
  tr.num_modes = N;
  auto all = boundary_points(shape);
  tr.samples.reserve(all.size());
  tr.derivs.reserve(all.size() * static_cast<std::size_t>(N));
  // sum_t t^2 with probe depths t in {1,2,3} h
  const double denom = 14.0 * g.h;
  for (const auto& b : all) {
    Point probes[3];
    bool in = true;
    for (int t = 1; t <= 3; ++t) {
      Point p = b.point;
      for (int a = 0; a < g.ndim; ++a) p[a] -= static_cast<double>(t) * g.h * b.normal[a];
      if (!g.point_in_box(p)) {
        in = false;
        break;
      }
      probes[t - 1] = p;
    }
    if (!in) {
      ++tr.skipped;
      continue;
    }
    tr.samples.push_back(b);
    for (int k = 0; k < N; ++k) {
      const Field& u = spectrum.eigenfunctions[static_cast<std::size_t>(k)];
      double acc = 0.0;
      for (int t = 1; t <= 3; ++t) acc += static_cast<double>(t) * interpolate(g, u, probes[t - 1]);
      tr.derivs.push_back(-acc / denom);
    }
  }
  if (tr.samples.empty() && !all.empty())
    throw InvalidInput("boundary_trace: every sample probes outside the grid");
  return tr;
}

}  // namespace eigenshape
