#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "eigenshape/level_set.hpp"

namespace eigenshape {

// Signed-distance primitives on grid nodes.

inline Field disk_field(const Grid& g, const Point& center, double radius) {
  Field f(static_cast<std::size_t>(g.node_count()));
  for (index_t i = 0; i < g.node_count(); ++i)
    f[static_cast<std::size_t>(i)] = distance(g.position(i), center, g.ndim) - radius;
  return f;
}

// Max-norm distance: exact SDF of an axis-aligned square/cube outside,
// signed inside.
inline Field square_field(const Grid& g, const Point& center, double side) {
  Field f(static_cast<std::size_t>(g.node_count()));
  for (index_t i = 0; i < g.node_count(); ++i) {
    const Point p = g.position(i);
    double m = 0.0;
    for (int a = 0; a < g.ndim; ++a) m = std::max(m, std::abs(p[a] - center[a]));
    f[static_cast<std::size_t>(i)] = m - 0.5 * side;
  }
  return f;
}

inline Field half_plane_field(const Grid& g, const Point& normal, double offset) {
  // phi = x . normal - offset, so Omega = {x . normal < offset}
  Field f(static_cast<std::size_t>(g.node_count()));
  for (index_t i = 0; i < g.node_count(); ++i)
    f[static_cast<std::size_t>(i)] = dot(g.position(i), normal, g.ndim) - offset;
  return f;
}

inline Field union_fields(const std::vector<Field>& parts) {
  if (parts.empty()) throw InvalidInput("union_fields: no parts");
  Field f = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (parts[k].size() != f.size()) throw InvalidInput("union_fields: size mismatch");
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::min(f[i], parts[k][i]);
  }
  return f;
}

}  // namespace eigenshape
