#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace eigenshape {

using Point = std::array<double, 3>;
using Field = std::vector<double>;
using index_t = std::int64_t;

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform Cartesian node grid, 2-D or 3-D. Node positions are
/// origin + h * (i0, i1, i2); linear indices are row-major (last axis fastest).
struct Grid {
  int ndim = 2;
  std::array<index_t, 3> dims{0, 0, 1};
  double h = 0.0;
  Point origin{0.0, 0.0, 0.0};

  Grid() = default;
  Grid(std::array<index_t, 3> d, double spacing, Point org, int nd = 2)
      : ndim(nd), dims(d), h(spacing), origin(org) {
    if (ndim != 2 && ndim != 3) throw InvalidInput("grid: ndim must be 2 or 3");
    if (ndim == 2) dims[2] = 1;
    for (int a = 0; a < ndim; ++a)
      if (dims[a] < 8) throw InvalidInput("grid: all dims must be >= 8");
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("grid: spacing must be positive");
  }

  index_t node_count() const { return dims[0] * dims[1] * dims[2]; }

  index_t linear(index_t i0, index_t i1, index_t i2 = 0) const {
    return (i0 * dims[1] + i1) * dims[2] + i2;
  }

  std::array<index_t, 3> multi(index_t lin) const {
    std::array<index_t, 3> m;
    m[2] = lin % dims[2];
    lin /= dims[2];
    m[1] = lin % dims[1];
    m[0] = lin / dims[1];
    return m;
  }

  bool in_bounds(index_t i0, index_t i1, index_t i2 = 0) const {
    return i0 >= 0 && i0 < dims[0] && i1 >= 0 && i1 < dims[1] && i2 >= 0 && i2 < dims[2];
  }

  Point position(index_t i0, index_t i1, index_t i2 = 0) const {
    return {origin[0] + h * static_cast<double>(i0), origin[1] + h * static_cast<double>(i1),
            ndim == 3 ? origin[2] + h * static_cast<double>(i2) : 0.0};
  }

  Point position(index_t lin) const {
    const auto m = multi(lin);
    return position(m[0], m[1], m[2]);
  }

  double extent(int axis) const { return h * static_cast<double>(dims[axis] - 1); }

  double max_coord(int axis) const { return origin[axis] + extent(axis); }

  double cell_measure() const { return ndim == 2 ? h * h : h * h * h; }

  // Point strictly inside the interpolation domain with a margin (in cells).
  bool point_in_box(const Point& p, double margin_cells = 0.0) const {
    const double m = margin_cells * h;
    for (int a = 0; a < ndim; ++a)
      if (p[a] < origin[a] + m || p[a] > max_coord(a) - m) return false;
    return true;
  }

  bool same_layout(const Grid& o) const {
    return ndim == o.ndim && dims == o.dims && h == o.h && origin[0] == o.origin[0] &&
           origin[1] == o.origin[1] && origin[2] == o.origin[2];
  }

  // Trapezoid quadrature weight for the grid box (1/2 per face the node lies on).
  double box_weight(index_t i0, index_t i1, index_t i2 = 0) const {
    double w = 1.0;
    const index_t idx[3] = {i0, i1, i2};
    for (int a = 0; a < ndim; ++a)
      if (idx[a] == 0 || idx[a] == dims[a] - 1) w *= 0.5;
    return w;
  }
};

inline void check_field(const Grid& g, const Field& f, const char* what) {
  if (static_cast<index_t>(f.size()) != g.node_count())
    throw InvalidInput(std::string(what) + ": field size does not match grid");
}

/// Multilinear interpolation of a node field at an arbitrary point.
inline double interpolate(const Grid& g, const Field& f, const Point& p) {
  double loc[3] = {0, 0, 0};
  index_t base[3] = {0, 0, 0};
  double frac[3] = {0, 0, 0};
  for (int a = 0; a < g.ndim; ++a) {
    loc[a] = (p[a] - g.origin[a]) / g.h;
    double fl = std::floor(loc[a]);
    base[a] = static_cast<index_t>(fl);
    if (base[a] < 0 || base[a] > g.dims[a] - 1) throw InvalidInput("interpolate: point outside grid");
    if (base[a] == g.dims[a] - 1) {  // clamp to the last cell
      base[a] -= 1;
      fl -= 1.0;
    }
    frac[a] = loc[a] - fl;
  }
  if (g.ndim == 2) {
    const double f00 = f[g.linear(base[0], base[1])];
    const double f10 = f[g.linear(base[0] + 1, base[1])];
    const double f01 = f[g.linear(base[0], base[1] + 1)];
    const double f11 = f[g.linear(base[0] + 1, base[1] + 1)];
    const double fx0 = f00 + frac[0] * (f10 - f00);
    const double fx1 = f01 + frac[0] * (f11 - f01);
    return fx0 + frac[1] * (fx1 - fx0);
  }
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int b0 = c & 1, b1 = (c >> 1) & 1, b2 = (c >> 2) & 1;
    const double w = (b0 ? frac[0] : 1 - frac[0]) * (b1 ? frac[1] : 1 - frac[1]) *
                     (b2 ? frac[2] : 1 - frac[2]);
    acc += w * f[g.linear(base[0] + b0, base[1] + b1, base[2] + b2)];
  }
  return acc;
}

/// Nodal gradient by centered differences (one-sided on the box faces).
inline void node_gradient(const Grid& g, const Field& f, index_t i0, index_t i1, index_t i2,
                          double out[3]) {
  const index_t idx[3] = {i0, i1, i2};
  for (int a = 0; a < g.ndim; ++a) {
    index_t lo[3] = {i0, i1, i2};
    index_t hi[3] = {i0, i1, i2};
    lo[a] = std::max<index_t>(idx[a] - 1, 0);
    hi[a] = std::min<index_t>(idx[a] + 1, g.dims[a] - 1);
    const double span = static_cast<double>(hi[a] - lo[a]) * g.h;
    out[a] = (f[g.linear(hi[0], hi[1], hi[2])] - f[g.linear(lo[0], lo[1], lo[2])]) / span;
  }
  for (int a = g.ndim; a < 3; ++a) out[a] = 0.0;
}

inline double norm(const Point& v, int ndim) {
  double s = 0.0;
  for (int a = 0; a < ndim; ++a) s += v[a] * v[a];
  return std::sqrt(s);
}

inline double dot(const Point& a, const Point& b, int ndim) {
  double s = 0.0;
  for (int d = 0; d < ndim; ++d) s += a[d] * b[d];
  return s;
}

inline double distance(const Point& a, const Point& b, int ndim) {
  double s = 0.0;
  for (int d = 0; d < ndim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

}  // namespace eigenshape
