#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "eigenshape/level_set.hpp"

namespace eigenshape {

namespace detail {

// Solves sum_d ((T - a_d)^+)^2 = h^2 for T given the upwind values a_d
// (ascending). Starts from all values and drops the largest until the
// solution dominates every value it uses.
inline double eikonal_update(const double* a, int count, double h) {
  for (int use = count; use >= 1; --use) {
    // quadratic: use*T^2 - 2 sum(a_i) T + sum(a_i^2) - h^2 = 0
    double sa = 0.0, sa2 = 0.0;
    for (int i = 0; i < use; ++i) {
      sa += a[i];
      sa2 += a[i] * a[i];
    }
    const double disc = sa * sa - use * (sa2 - h * h);
    if (disc < 0.0) continue;
    const double t = (sa + std::sqrt(disc)) / use;
    if (t + 1e-14 * h >= a[use - 1]) return t;
  }
  return a[0] + h;
}

}  // namespace detail

/// Replaces phi by an approximate signed distance to its zero level set
/// (first-order fast marching). The zero set itself moves by at most O(h^2):
/// nodes adjacent to a crossing are frozen at distances interpolated from the
/// input values, which is exact for planar interfaces.
inline LevelSetShape reinitialize(const LevelSetShape& s) {
  require_nondegenerate(s, "reinitialize");
  const Grid& g = s.grid;
  const index_t n = g.node_count();
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> dist(static_cast<std::size_t>(n), inf);
  std::vector<char> state(static_cast<std::size_t>(n), 0);  // 0 far, 1 trial, 2 accepted

  // Initialize the band. Two first-order estimates per banded node: per-axis
  // crossing distances combined as 1/d^2 = sum 1/d_axis^2 (exact for planes),
  // and the Newton estimate |phi| / |grad phi| (robust when the interface cuts
  // only one incident edge). Both are exact on planar signed-distance input.
  for (index_t i = 0; i < n; ++i) {
    const auto m = g.multi(i);
    const double pi = s.phi[i];
    double inv2 = 0.0;
    bool banded = false;
    for (int axis = 0; axis < g.ndim; ++axis) {
      double daxis = inf;
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        index_t nb[3] = {m[0], m[1], m[2]};
        nb[axis] += sgn;
        if (!g.in_bounds(nb[0], nb[1], nb[2])) continue;
        const double pj = s.phi[g.linear(nb[0], nb[1], nb[2])];
        if (is_inside(pi) == is_inside(pj)) continue;
        const double denom = std::abs(pi) + std::abs(pj);
        const double d = denom > 0.0 ? g.h * std::abs(pi) / denom : 0.0;
        daxis = std::min(daxis, d);
      }
      if (daxis < inf) {
        banded = true;
        inv2 += daxis > 1e-14 * g.h ? 1.0 / (daxis * daxis) : 1.0 / (1e-28 * g.h * g.h);
      }
    }
    if (banded) {
      double d = inv2 > 0.0 ? 1.0 / std::sqrt(inv2) : 0.0;
      double grad[3];
      node_gradient(g, s.phi, m[0], m[1], m[2], grad);
      const double gn = norm({grad[0], grad[1], grad[2]}, g.ndim);
      if (gn > 1e-12) d = std::min(d, std::abs(pi) / gn);
      dist[i] = d;
      state[i] = 2;
    }
  }

  using HeapItem = std::pair<double, index_t>;
  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;

  auto relax = [&](index_t i) {
    const auto m = g.multi(i);
    double a[3];
    int count = 0;
    for (int axis = 0; axis < g.ndim; ++axis) {
      double best = inf;
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        index_t nb[3] = {m[0], m[1], m[2]};
        nb[axis] += sgn;
        if (!g.in_bounds(nb[0], nb[1], nb[2])) continue;
        const index_t j = g.linear(nb[0], nb[1], nb[2]);
        if (state[j] == 2) best = std::min(best, dist[j]);
      }
      if (best < inf) a[count++] = best;
    }
    if (count == 0) return;
    std::sort(a, a + count);
    const double t = detail::eikonal_update(a, count, g.h);
    if (t < dist[i]) {
      dist[i] = t;
      heap.emplace(t, i);
    }
  };

  for (index_t i = 0; i < n; ++i) {
    if (state[i] != 2) continue;
    const auto m = g.multi(i);
    for (int axis = 0; axis < g.ndim; ++axis)
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        index_t nb[3] = {m[0], m[1], m[2]};
        nb[axis] += sgn;
        if (!g.in_bounds(nb[0], nb[1], nb[2])) continue;
        const index_t j = g.linear(nb[0], nb[1], nb[2]);
        if (state[j] != 2) relax(j);
      }
  }

  while (!heap.empty()) {
    const auto [t, i] = heap.top();
    heap.pop();
    if (state[i] == 2) continue;  // stale entry
    state[i] = 2;
    const auto m = g.multi(i);
    for (int axis = 0; axis < g.ndim; ++axis)
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        index_t nb[3] = {m[0], m[1], m[2]};
        nb[axis] += sgn;
        if (!g.in_bounds(nb[0], nb[1], nb[2])) continue;
        const index_t j = g.linear(nb[0], nb[1], nb[2]);
        if (state[j] != 2) relax(j);
      }
  }

  LevelSetShape out;
  out.grid = g;
  out.degenerate = false;
  out.phi.resize(static_cast<std::size_t>(n));
  for (index_t i = 0; i < n; ++i) {
    const double d = std::isfinite(dist[i]) ? dist[i] : g.extent(0) + g.extent(1);
    out.phi[i] = is_inside(s.phi[i]) ? -d : d;
  }
  return out;
}

}  // namespace eigenshape
