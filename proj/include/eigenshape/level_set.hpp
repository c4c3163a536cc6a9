#pragma once

#include <cmath>
#include <deque>
#include <numbers>
#include <vector>

#include "eigenshape/grid.hpp"
#include "eigenshape/log.hpp"
#include "eigenshape/parallel.hpp"

namespace eigenshape {

/// Domain represented as the negativity set of a grid function:
/// Omega = { x : phi(x) < 0 }.
struct LevelSetShape {
  Grid grid;
  Field phi;
  bool degenerate = false;  // phi single-signed (empty domain or empty complement)
};

inline bool is_inside(double phi) { return phi < 0.0; }

inline LevelSetShape make_shape(const Grid& grid, Field phi_init) {
  check_field(grid, phi_init, "make_shape");
  bool any_neg = false, any_nonneg = false;
  for (double v : phi_init) {
    if (!std::isfinite(v)) throw InvalidInput("make_shape: non-finite phi value");
    (v < 0.0 ? any_neg : any_nonneg) = true;
  }
  LevelSetShape s{grid, std::move(phi_init), !(any_neg && any_nonneg)};
  if (s.degenerate) log::warn("make_shape: phi is single-signed, shape flagged degenerate");
  return s;
}

inline void require_nondegenerate(const LevelSetShape& s, const char* op) {
  if (s.degenerate) throw InvalidInput(std::string(op) + ": degenerate shape");
}

// Smoothed one-sided indicator of {phi < 0} with a cosine ramp of half-width eps.
inline double smoothed_indicator(double phi, double eps) {
  if (phi <= -eps) return 1.0;
  if (phi >= eps) return 0.0;
  return 0.5 * (1.0 - phi / eps - std::sin(std::numbers::pi * phi / eps) / std::numbers::pi);
}

// Matching smoothed one-dimensional delta; integrates to 1.
inline double smoothed_delta(double phi, double eps) {
  if (phi <= -eps || phi >= eps) return 0.0;
  return (1.0 + std::cos(std::numbers::pi * phi / eps)) / (2.0 * eps);
}

/// |Omega| by smoothed-indicator quadrature. smoothing_width is in grid cells.
inline double volume(const LevelSetShape& s, double smoothing_width_cells = 1.5) {
  require_nondegenerate(s, "volume");
  const Grid& g = s.grid;
  const double eps = smoothing_width_cells * g.h;
  const double cell = g.cell_measure();
  const index_t n = g.node_count();
  return cell * stripe_sum(n, g.dims[1] * g.dims[2], [&](index_t b, index_t e) {
           double acc = 0.0;
           for (index_t i = b; i < e; ++i) {
             const auto m = g.multi(i);
             acc += g.box_weight(m[0], m[1], m[2]) * smoothed_indicator(s.phi[i], eps);
           }
           return acc;
         });
}

/// H^{n-1}(boundary) by co-area quadrature with a smoothed delta of width 1.5h.
inline double perimeter(const LevelSetShape& s, double smoothing_width_cells = 1.5) {
  require_nondegenerate(s, "perimeter");
  const Grid& g = s.grid;
  const double eps = smoothing_width_cells * g.h;
  const double cell = g.cell_measure();
  const index_t n = g.node_count();
  return cell * stripe_sum(n, g.dims[1] * g.dims[2], [&](index_t b, index_t e) {
           double acc = 0.0;
           for (index_t i = b; i < e; ++i) {
             const double d = smoothed_delta(s.phi[i], eps);
             if (d == 0.0) continue;
             const auto m = g.multi(i);
             double grad[3];
             node_gradient(g, s.phi, m[0], m[1], m[2], grad);
             acc += g.box_weight(m[0], m[1], m[2]) * d *
                    std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]);
           }
           return acc;
         });
}

/// Point on the zero level set with its outward unit normal.
struct BoundarySample {
  Point point{};
  Point normal{};
  index_t anchor_cell = 0;  // linear node index of the edge tail
  int edge_axis = 0;
};

/// One sample per sign-changing grid edge; location by linear interpolation
/// along the edge, normal from centered differences of phi.
inline std::vector<BoundarySample> boundary_points(const LevelSetShape& s) {
  if (s.degenerate) {
    log::warn("boundary_points: degenerate shape, returning no samples");
    return {};
  }
  const Grid& g = s.grid;
  std::vector<BoundarySample> out;
  const index_t n = g.node_count();
  for (index_t i = 0; i < n; ++i) {
    const auto m = g.multi(i);
    const double pa = s.phi[i];
    for (int axis = 0; axis < g.ndim; ++axis) {
      index_t nb[3] = {m[0], m[1], m[2]};
      nb[axis] += 1;
      if (nb[axis] >= g.dims[axis]) continue;
      const index_t j = g.linear(nb[0], nb[1], nb[2]);
      const double pb = s.phi[j];
      if (is_inside(pa) == is_inside(pb)) continue;
      const double t = pa / (pa - pb);
      Point p = g.position(m[0], m[1], m[2]);
      p[axis] += t * g.h;
      double ga[3], gb[3];
      node_gradient(g, s.phi, m[0], m[1], m[2], ga);
      node_gradient(g, s.phi, nb[0], nb[1], nb[2], gb);
      Point nrm{};
      for (int a = 0; a < g.ndim; ++a) nrm[a] = (1.0 - t) * ga[a] + t * gb[a];
      const double len = norm(nrm, g.ndim);
      if (len < 1e-30) {
        log::debug("boundary_points: vanishing gradient at a crossing, sample skipped");
        continue;
      }
      for (int a = 0; a < g.ndim; ++a) nrm[a] /= len;
      out.push_back(BoundarySample{p, nrm, i, axis});
    }
  }
  return out;
}

namespace detail {

// Area of {0<=x<=a, 0<=y<=b} ∩ {x^2+y^2 <= r^2}, a,b >= 0.
inline double quarter_disk_box(double a, double b, double r) {
  a = std::min(a, r);
  if (a <= 0.0 || b <= 0.0) return 0.0;
  if (a * a + b * b <= r * r) return a * b;
  auto F = [r](double x) {  // antiderivative of sqrt(r^2 - x^2)
    x = std::clamp(x, -r, r);
    return 0.5 * (x * std::sqrt(std::max(r * r - x * x, 0.0)) + r * r * std::asin(x / r));
  };
  const double xstar = std::sqrt(std::max(r * r - b * b, 0.0));
  if (a <= xstar) return a * b;
  return xstar * b + F(a) - F(xstar);
}

// Exact area of an axis-aligned rectangle ∩ disk(center 0, radius r),
// by inclusion-exclusion over signed corner boxes.
inline double disk_rect_overlap(double x0, double x1, double y0, double y1, double r) {
  auto corner = [r](double X, double Y) {
    const double s = (X < 0 ? -1.0 : 1.0) * (Y < 0 ? -1.0 : 1.0);
    return s * quarter_disk_box(std::abs(X), std::abs(Y), r);
  };
  return corner(x1, y1) - corner(x0, y1) - corner(x1, y0) + corner(x0, y0);
}

}  // namespace detail

/// |B_r(center) ∩ Omega|: smoothed-indicator quadrature of {phi<0} against
/// per-cell ball coverage (exact disk-cell overlap in 2-D).
inline double ball_clip_volume(const LevelSetShape& s, const Point& center, double r,
                               double smoothing_width_cells = 1.5) {
  require_nondegenerate(s, "ball_clip_volume");
  const Grid& g = s.grid;
  if (r < 2.0 * g.h) throw InvalidInput("ball_clip_volume: r < 2h");
  const double eps = smoothing_width_cells * g.h;
  for (int a = 0; a < g.ndim; ++a)
    if (center[a] - r - eps < g.origin[a] || center[a] + r + eps > g.max_coord(a))
      throw InvalidInput("ball_clip_volume: ball exits grid");
  // iterate the bounding box only
  index_t lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  for (int a = 0; a < g.ndim; ++a) {
    lo[a] = static_cast<index_t>(std::floor((center[a] - r - eps - g.origin[a]) / g.h));
    hi[a] = static_cast<index_t>(std::ceil((center[a] + r + eps - g.origin[a]) / g.h));
    lo[a] = std::max<index_t>(lo[a], 0);
    hi[a] = std::min<index_t>(hi[a], g.dims[a] - 1);
  }
  if (g.ndim == 2) hi[2] = lo[2] = 0;
  const double half = 0.5 * g.h;
  double acc = 0.0;
  for (index_t i0 = lo[0]; i0 <= hi[0]; ++i0)
    for (index_t i1 = lo[1]; i1 <= hi[1]; ++i1)
      for (index_t i2 = lo[2]; i2 <= hi[2]; ++i2) {
        const Point p = g.position(i0, i1, i2);
        double wb;
        if (g.ndim == 2) {
          wb = detail::disk_rect_overlap(p[0] - center[0] - half, p[0] - center[0] + half,
                                         p[1] - center[1] - half, p[1] - center[1] + half, r) /
               (g.h * g.h);
        } else {
          wb = smoothed_indicator(distance(p, center, 3) - r, eps);
        }
        if (wb == 0.0) continue;
        acc += wb * smoothed_indicator(s.phi[g.linear(i0, i1, i2)], eps);
      }
  return acc * g.cell_measure();
}

/// Measure of the tube {|phi| < r}. Requires phi ~ signed distance.
inline double tube_volume(const LevelSetShape& s, double r, double smoothing_width_cells = 1.5) {
  require_nondegenerate(s, "tube_volume");
  const Grid& g = s.grid;
  if (r < 2.0 * g.h) throw InvalidInput("tube_volume: r < 2h");
  const double eps = smoothing_width_cells * g.h;
  const index_t n = g.node_count();
  return g.cell_measure() * stripe_sum(n, g.dims[1] * g.dims[2], [&](index_t b, index_t e) {
           double acc = 0.0;
           for (index_t i = b; i < e; ++i) {
             const auto m = g.multi(i);
             acc += g.box_weight(m[0], m[1], m[2]) *
                    smoothed_indicator(std::abs(s.phi[i]) - r, eps);
           }
           return acc;
         });
}

/// Labels the grid-connected components of {phi < 0}. Returns component count;
/// labels (0-based) are written per node, -1 outside. Ordered by first node index.
inline int interior_components(const LevelSetShape& s, std::vector<int>* labels_out = nullptr) {
  const Grid& g = s.grid;
  const index_t n = g.node_count();
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  int comp = 0;
  std::deque<index_t> queue;
  for (index_t seed = 0; seed < n; ++seed) {
    if (!is_inside(s.phi[seed]) || labels[seed] >= 0) continue;
    labels[seed] = comp;
    queue.push_back(seed);
    while (!queue.empty()) {
      const index_t i = queue.front();
      queue.pop_front();
      const auto m = g.multi(i);
      for (int axis = 0; axis < g.ndim; ++axis)
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          index_t nb[3] = {m[0], m[1], m[2]};
          nb[axis] += sgn;
          if (!g.in_bounds(nb[0], nb[1], nb[2])) continue;
          const index_t j = g.linear(nb[0], nb[1], nb[2]);
          if (labels[j] < 0 && is_inside(s.phi[j])) {
            labels[j] = comp;
            queue.push_back(j);
          }
        }
    }
    ++comp;
  }
  if (labels_out) *labels_out = std::move(labels);
  return comp;
}

}  // namespace eigenshape
