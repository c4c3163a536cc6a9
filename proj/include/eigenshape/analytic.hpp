#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "eigenshape/grid.hpp"

namespace eigenshape {

enum class AnalyticDomain { square, disk };

namespace detail {

// l-th positive zero of J_m by scan + bisection on std::cyl_bessel_j.
inline double bessel_zero(int m, int l) {
  const double dm = static_cast<double>(m);
  double a = dm + 1e-6;
  double fa = std::cyl_bessel_j(dm, a);
  int found = 0;
  const double step = 0.1;
  for (double b = a + step; b < dm + 60.0; b += step) {
    const double fb = std::cyl_bessel_j(dm, b);
    if (fa == 0.0) {  // grazed a zero exactly
      ++found;
      if (found == l) return a;
    } else if (fa * fb < 0.0) {
      ++found;
      if (found == l) {
        double lo = a, hi = b, flo = fa;
        while (hi - lo > 1e-13) {
          const double mid = 0.5 * (lo + hi);
          const double fm = std::cyl_bessel_j(dm, mid);
          if (flo * fm <= 0.0) {
            hi = mid;
          } else {
            lo = mid;
            flo = fm;
          }
        }
        return 0.5 * (lo + hi);
      }
    }
    a = b;
    fa = fb;
  }
  throw SolverFailure("bessel_zero: zero not found in scan range");
}

}  // namespace detail

/// First N Dirichlet eigenvalues of a reference domain (test oracle, 2-D).
/// square(a): pi^2 (m^2 + n^2) / a^2. disk(R): (j_{m,l} / R)^2, zeros of J_m
/// located by bisection, multiplicity 2 for m >= 1.
inline std::vector<double> analytic_spectrum(AnalyticDomain domain, double size, int N) {
  if (N < 1 || N > 20) throw InvalidInput("analytic_spectrum: N must be in [1, 20]");
  if (!(size > 0.0)) throw InvalidInput("analytic_spectrum: size must be positive");
  std::vector<double> all;
  if (domain == AnalyticDomain::square) {
    const double c = std::numbers::pi * std::numbers::pi / (size * size);
    for (int m = 1; m <= 12; ++m)
      for (int n = 1; n <= 12; ++n) all.push_back(c * (m * m + n * n));
  } else {
    for (int m = 0; m <= 10; ++m)
      for (int l = 1; l <= 8; ++l) {
        const double j = detail::bessel_zero(m, l);
        const double lam = (j / size) * (j / size);
        all.push_back(lam);
        if (m >= 1) all.push_back(lam);  // sin/cos pair
      }
  }
  std::sort(all.begin(), all.end());
  all.resize(static_cast<std::size_t>(N));
  return all;
}

}  // namespace eigenshape
