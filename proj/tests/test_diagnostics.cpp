#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "eigenshape/diagnostics.hpp"
#include "eigenshape/dirichlet_operator.hpp"
#include "eigenshape/eigensolve.hpp"
#include "eigenshape/shapes.hpp"

using namespace eigenshape;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Grid box_grid(double lo, double hi, double h) {
  const index_t n = static_cast<index_t>(std::llround((hi - lo) / h)) + 1;
  return Grid({n, n, 1}, h, {lo, lo, 0.0});
}

// half-plane {x . nu < offset} carrying profiles u_k = a_k (x . nu - offset)^-
struct SyntheticData {
  LevelSetShape shape;
  Spectrum spectrum;
};

SyntheticData half_plane_data(const Grid& g, const Point& nu, double offset,
                              const std::vector<double>& amps) {
  SyntheticData hp{make_shape(g, half_plane_field(g, nu, offset)), {}};
  hp.spectrum.converged = true;
  for (double a : amps) {
    Field u(static_cast<std::size_t>(g.node_count()), 0.0);
    for (index_t i = 0; i < g.node_count(); ++i) {
      const double t = dot(g.position(i), nu, g.ndim) - offset;
      u[static_cast<std::size_t>(i)] = a * std::max(-t, 0.0);
    }
    hp.spectrum.eigenfunctions.push_back(std::move(u));
    hp.spectrum.eigenvalues.push_back(1.0 + static_cast<double>(hp.spectrum.eigenvalues.size()));
    hp.spectrum.residuals.push_back(0.0);
  }
  return hp;
}

DiagnosticsConfig config_with_radii(std::vector<double> radii) {
  DiagnosticsConfig cfg;
  cfg.radii = std::move(radii);
  return cfg;
}

// disk eigen-data with xi chosen to make the configuration stationary
struct DiskData {
  LevelSetShape shape;
  Spectrum spectrum;
  std::vector<double> xi;
};

DiskData stationary_disk(double radius, double h) {
  const Grid g = box_grid(-1.0, 1.0, h);
  DiskData d{make_shape(g, disk_field(g, {0, 0, 0}, radius)), {}, {}};
  d.spectrum = lowest_eigenpairs(assemble(d.shape), 1, 1e-8, 21);
  auto tr = boundary_trace(d.spectrum, d.shape);
  double mean = 0.0;
  for (std::size_t i = 0; i < tr.samples.size(); ++i) mean += tr.normal_deriv(i, 0);
  mean /= static_cast<double>(tr.samples.size());
  d.xi = {1.0 / (mean * mean)};
  return d;
}

}  // namespace

TEST_CASE("fb_residual") {
  const double h = 1.0 / 96;
  const Grid g = box_grid(-1.0, 1.0, h);
  const std::vector<double> xi{0.7, 1.3};
  // alphas on the constraint ellipsoid: 0.7 * 0.6^2 + 1.3 * a2^2 = 1
  const double a2 = std::sqrt((1.0 - 0.7 * 0.36) / 1.3);
  auto hp = half_plane_data(g, {0, 1, 0}, 0.1234, {0.6, a2});
  auto tr = boundary_trace(hp.spectrum, hp.shape);

  SECTION("exact profile data satisfies the condition") {
    auto clusters = multiplicity_clusters(hp.spectrum.eigenvalues, 1e-3);
    auto fb = fb_residual(tr, xi, 1.0, clusters);
    REQUIRE(fb.sup <= 0.02);
    REQUIRE(fb.l2 <= fb.sup);
  }
  SECTION("unequal xi on a tied cluster is refused") {
    std::vector<std::vector<int>> tied{{0, 1}};
    REQUIRE_THROWS_AS(fb_residual(tr, xi, 1.0, tied), InvalidInput);
  }
  SECTION("sign flips of any eigenfunction leave the residual unchanged") {
    auto flipped = hp;
    for (double& v : flipped.spectrum.eigenfunctions[1]) v = -v;
    auto tr2 = boundary_trace(flipped.spectrum, flipped.shape);
    auto clusters = multiplicity_clusters(hp.spectrum.eigenvalues, 1e-3);
    auto a = fb_residual(tr, xi, 1.0, clusters);
    auto b = fb_residual(tr2, xi, 1.0, clusters);
    REQUIRE(a.sup == b.sup);
    REQUIRE(a.l2 == b.l2);
  }
  SECTION("orthonormal remixing of a tied cluster with equal xi is invariant") {
    const std::vector<double> xieq{1.0, 1.0};
    auto mixed = hp;
    const double c = std::cos(0.7), s = std::sin(0.7);
    for (index_t i = 0; i < g.node_count(); ++i) {
      const double u = hp.spectrum.eigenfunctions[0][i];
      const double v = hp.spectrum.eigenfunctions[1][i];
      mixed.spectrum.eigenfunctions[0][i] = c * u - s * v;
      mixed.spectrum.eigenfunctions[1][i] = s * u + c * v;
    }
    mixed.spectrum.eigenvalues = {2.0, 2.0};
    auto tr2 = boundary_trace(mixed.spectrum, mixed.shape);
    std::vector<std::vector<int>> tied{{0, 1}};
    auto a = fb_residual(tr, xieq, 1.0, tied);
    auto b = fb_residual(tr2, xieq, 1.0, tied);
    REQUIRE(std::abs(a.sup - b.sup) <= 1e-6);
    REQUIRE(std::abs(a.l2 - b.l2) <= 1e-6);
  }
}

TEST_CASE("nondegeneracy_profile") {
  const double h = 1.0 / 96;
  const Grid g = box_grid(-1.0, 1.0, h);
  auto cfg = config_with_radii({0.3, 0.15, 0.075});
  SECTION("half-plane linear profile has ratio about 1") {
    auto hp = half_plane_data(g, {0, 1, 0}, 0.05, {1.0});
    auto prof = nondegeneracy_profile(hp.shape, hp.spectrum, cfg);
    REQUIRE_FALSE(prof.degenerate);
    for (const auto& row : prof.min_ratio) REQUIRE(row.value == Approx(1.0).margin(0.12));
  }
  SECTION("zero field flags degenerate") {
    auto hp = half_plane_data(g, {0, 1, 0}, 0.05, {0.0});
    auto prof = nondegeneracy_profile(hp.shape, hp.spectrum, cfg);
    REQUIRE(prof.degenerate);
    REQUIRE(prof.c0_estimate == 0.0);
  }
}

TEST_CASE("density_profile") {
  const double h = 1.0 / 96;
  const Grid g = box_grid(-1.0, 1.0, h);
  auto cfg = config_with_radii({0.3, 0.15, 0.075});
  SECTION("half-plane density is one half") {
    auto hp = half_plane_data(g, {0, 1, 0}, 0.0, {1.0});
    auto prof = density_profile(hp.shape, cfg);
    for (const auto& row : prof.range) {
      REQUIRE(row.lo == Approx(0.5).margin(3.0 * h / row.r));
      REQUIRE(row.hi == Approx(0.5).margin(3.0 * h / row.r));
    }
    REQUIRE(prof.warnings == 0);
  }
  SECTION("smooth disk boundary tends to one half at small radii") {
    auto shape = make_shape(g, disk_field(g, {0, 0, 0}, 0.55));
    auto prof = density_profile(shape, cfg);
    for (const auto& row : prof.range) {
      REQUIRE(row.lo >= 0.3);
      REQUIRE(row.hi <= 0.7);
    }
    REQUIRE(std::abs(prof.range.back().lo - 0.5) <= 0.1);
  }
}

TEST_CASE("minkowski_profile") {
  const double h = 1.0 / 128;
  const Grid g = box_grid(-1.0, 1.0, h);
  SECTION("circle tube ratio is twice the perimeter") {
    auto shape = make_shape(g, disk_field(g, {0, 0, 0}, 0.5));
    auto prof = minkowski_profile(shape, config_with_radii({0.2, 0.1, 0.05}));
    for (const auto& row : prof.ratio) REQUIRE(row.value == Approx(2.0 * kPi).epsilon(0.10));
    REQUIRE_FALSE(prof.growth_warning);
  }
  SECTION("needle-like domain profile grows as r shrinks") {
    // slab of half-width 0.04: below that scale the tube sees two sheets,
    // above it they merge, so the ratio climbs as r decreases
    Field f(static_cast<std::size_t>(g.node_count()));
    for (index_t i = 0; i < g.node_count(); ++i)
      f[static_cast<std::size_t>(i)] = std::abs(g.position(i)[1]) - 0.04;
    auto shape = make_shape(g, f);
    auto prof = minkowski_profile(shape, config_with_radii({0.4, 0.1, 0.025}));
    REQUIRE(prof.growth_warning);
  }
  SECTION("r below 2h is skipped with a reason") {
    auto shape = make_shape(g, disk_field(g, {0, 0, 0}, 0.5));
    DiagnosticsConfig cfg = config_with_radii({0.2});
    cfg.radii.push_back(1.5 * h);  // below 2h but above the 4h validation? no - bypass validate
    auto prof = minkowski_profile(shape, cfg);
    REQUIRE(prof.ratio.size() == 1);
    REQUIRE(prof.skipped.size() == 1);
  }
}

TEST_CASE("flatness on half-plane data") {
  const double h = 1.0 / 128;
  const Grid g = box_grid(-1.0, 1.0, h);
  const std::vector<double> xi{1.0};
  SECTION("axis-aligned half-plane") {
    const double b = 0.3 * h;
    auto hp = half_plane_data(g, {0, 1, 0}, b, {1.0});
    auto fit = flatness(hp.shape, hp.spectrum, xi, 1.0, {0.0, b, 0.0}, 0.25);
    REQUIRE(fit.f <= 0.02);
    REQUIRE(std::acos(std::clamp(fit.nu[1], -1.0, 1.0)) <= kPi / 180.0);
    REQUIRE(fit.alphas[0] == Approx(1.0).margin(1e-8));  // constraint with xi = xi0 = 1
  }
  SECTION("rotation equivariance at 30 degrees") {
    const double th = kPi / 6.0;
    const Point nu{std::sin(th), std::cos(th), 0.0};
    auto hp = half_plane_data(g, nu, 0.0, {1.0});
    auto fit = flatness(hp.shape, hp.spectrum, xi, 1.0, {0.0, 0.0, 0.0}, 0.25);
    REQUIRE(fit.f <= 0.02);
    const double cosang = dot(fit.nu, nu, 2);
    REQUIRE(std::acos(std::clamp(cosang, -1.0, 1.0)) <= kPi / 180.0);
  }
  SECTION("preconditions") {
    auto hp = half_plane_data(g, {0, 1, 0}, 0.0, {1.0});
    REQUIRE_THROWS_AS(flatness(hp.shape, hp.spectrum, xi, 1.0, {0, 0, 0}, 4.0 * h), InvalidInput);
    REQUIRE_THROWS_AS(flatness(hp.shape, hp.spectrum, xi, 1.0, {0.95, 0, 0}, 0.25), InvalidInput);
  }
}

TEST_CASE("flatness constraint invariant") {
  const double h = 1.0 / 128;
  const Grid g = box_grid(-1.0, 1.0, h);
  const std::vector<double> xi{0.8, 1.7};
  auto hp = half_plane_data(g, {0, 1, 0}, 0.0, {0.9, 0.4});
  auto fit = flatness(hp.shape, hp.spectrum, xi, 1.1, {0.0, 0.0, 0.0}, 0.25);
  double q = 0.0;
  for (std::size_t k = 0; k < 2; ++k) q += xi[k] * fit.alphas[k] * fit.alphas[k];
  REQUIRE(q == Approx(1.1).margin(1e-8));
  for (double a : fit.alphas) REQUIRE(a >= 0.0);
}

TEST_CASE("flatness is scale covariant") {
  // dilating (r -> s r, u -> u(s .)/s) maps the cusp graph x_n = c |x'|^{3/2}
  // to the one with coefficient c sqrt(s); the flatness values must agree
  const double h = 1.0 / 256;
  const Grid g = box_grid(-1.0, 1.0, h);
  auto cusp_data = [&](double c) {
    Field phi(static_cast<std::size_t>(g.node_count()));
    Field u(static_cast<std::size_t>(g.node_count()));
    for (index_t i = 0; i < g.node_count(); ++i) {
      const Point p = g.position(i);
      const double t = p[1] - c * std::pow(std::abs(p[0]), 1.5);
      phi[static_cast<std::size_t>(i)] = t;
      u[static_cast<std::size_t>(i)] = std::max(-t, 0.0);
    }
    SyntheticData d{make_shape(g, phi), {}};
    d.spectrum.eigenfunctions = {u};
    d.spectrum.eigenvalues = {1.0};
    d.spectrum.residuals = {0.0};
    return d;
  };
  const std::vector<double> xi{1.0};
  const double s = 0.25;
  auto base = cusp_data(1.0);
  auto dilated = cusp_data(std::sqrt(s));
  auto f_zoom = flatness(base.shape, base.spectrum, xi, 1.0, {0, 0, 0}, s * 0.4);
  auto f_dila = flatness(dilated.shape, dilated.spectrum, xi, 1.0, {0, 0, 0}, 0.4);
  REQUIRE(f_zoom.f == Approx(f_dila.f).epsilon(0.05).margin(0.004));
}

TEST_CASE("flatness_decay") {
  const double h = 1.0 / 256;
  const Grid g = box_grid(-1.0, 1.0, h);
  const std::vector<double> xi{1.0};
  SECTION("boundary graph |x|^{3/2} has exponent about one half") {
    Field phi(static_cast<std::size_t>(g.node_count()));
    Field u(static_cast<std::size_t>(g.node_count()));
    for (index_t i = 0; i < g.node_count(); ++i) {
      const Point p = g.position(i);
      const double t = p[1] - std::pow(std::abs(p[0]), 1.5);
      phi[static_cast<std::size_t>(i)] = t;
      u[static_cast<std::size_t>(i)] = std::max(-t, 0.0);
    }
    SyntheticData d{make_shape(g, phi), {}};
    d.spectrum.eigenfunctions = {u};
    d.spectrum.eigenvalues = {1.0};
    d.spectrum.residuals = {0.0};
    auto cfg = config_with_radii({0.45, 0.32, 0.22, 0.16, 0.11});
    auto dec = flatness_decay(d.shape, d.spectrum, xi, 1.0, {0, 0, 0}, cfg);
    REQUIRE_FALSE(dec.saturated);
    REQUIRE(dec.alpha == Approx(0.5).margin(0.15));
    REQUIRE(dec.r2 >= 0.9);
  }
  SECTION("exact half-plane saturates below the noise floor") {
    auto hp = half_plane_data(g, {0, 1, 0}, 0.0, {1.0});
    auto cfg = config_with_radii({0.45, 0.32, 0.22, 0.16, 0.11});
    auto dec = flatness_decay(hp.shape, hp.spectrum, xi, 1.0, {0, 0, 0}, cfg);
    REQUIRE(dec.saturated);
  }
  SECTION("three radii is an error") {
    auto hp = half_plane_data(g, {0, 1, 0}, 0.0, {1.0});
    auto cfg = config_with_radii({0.4, 0.2, 0.1});
    REQUIRE_THROWS_AS(flatness_decay(hp.shape, hp.spectrum, xi, 1.0, {0, 0, 0}, cfg),
                      InvalidInput);
  }
}

TEST_CASE("blowup") {
  const double h = 1.0 / 128;
  const Grid g = box_grid(-1.0, 1.0, h);
  const std::vector<double> xi{1.0};
  SECTION("half-plane data is its own blow-up") {
    auto hp = half_plane_data(g, {0, 1, 0}, 0.0, {1.0});
    auto res = blowup(hp.shape, hp.spectrum, xi, 1.0, {0, 0, 0}, 0.5);
    REQUIRE(res.residual <= 0.02);
  }
  SECTION("residual shrinks with the radius on stationary disk data") {
    auto d = stationary_disk(0.6, 1.0 / 128);
    const Point c{0.0, 0.6, 0.0};
    auto big = blowup(d.shape, d.spectrum, d.xi, 1.0, c, 0.3);
    auto small = blowup(d.shape, d.spectrum, d.xi, 1.0, c, 0.1);
    REQUIRE(small.residual < big.residual * 1.10);
    REQUIRE(small.residual < big.residual);
  }
  SECTION("center deep inside the domain is rejected") {
    auto d = stationary_disk(0.6, 1.0 / 64);
    REQUIRE_THROWS_AS(blowup(d.shape, d.spectrum, d.xi, 1.0, {0, 0, 0}, 0.2), InvalidInput);
  }
}

TEST_CASE("weiss_energy of the homogeneous half-plane profile is constant") {
  const double h = 1.0 / 256;
  const Grid g = box_grid(-1.0, 1.0, h);
  const std::vector<double> xi{0.7, 1.3};
  const double a2 = std::sqrt((1.0 - 0.7 * 0.36) / 1.3);
  const double b = 0.3 * h;
  auto hp = half_plane_data(g, {0, 1, 0}, b, {0.6, a2});
  auto cfg = config_with_radii({0.5, 0.25, 0.125, 0.0625, 0.03125});
  auto res = weiss_energy(hp.shape, hp.spectrum, xi, 1.0, {0.0, b, 0.0}, cfg);
  REQUIRE(res.samples.size() == 5);
  for (const auto& s : res.samples) REQUIRE(s.phi_r == Approx(kPi / 2.0).epsilon(0.02));
  SECTION("small radii are skipped") {
    auto cfg2 = config_with_radii({0.5});
    cfg2.radii.push_back(2.0 * h);
    auto res2 = weiss_energy(hp.shape, hp.spectrum, xi, 1.0, {0.0, b, 0.0}, cfg2);
    REQUIRE(res2.samples.size() == 1);
    REQUIRE(res2.skipped.size() == 1);
  }
}

TEST_CASE("weiss_monotonicity_check") {
  SECTION("constant samples have no violations for any C") {
    std::vector<WeissSample> s{{0.1, 1.0}, {0.2, 1.0}, {0.4, 1.0}};
    REQUIRE(weiss_monotonicity_check(s, 0.0, 1e-6).violations == 0);
    REQUIRE(weiss_monotonicity_check(s, 3.0, 1e-6).violations == 0);
  }
  SECTION("strictly decreasing samples violate at C=0") {
    std::vector<WeissSample> s{{0.1, 3.0}, {0.2, 2.0}, {0.4, 1.0}};
    auto chk = weiss_monotonicity_check(s, 0.0, 1e-6);
    REQUIRE(chk.violations == 2);
    REQUIRE(chk.worst_gap == Approx(1.0).margin(1e-9));
    // the first pair needs C (0.2^2 - 0.1^2)/2 >= 1, i.e. C >= 66.7
    REQUIRE(weiss_monotonicity_check(s, 66.0, 1e-6).violations == 1);
    REQUIRE(weiss_monotonicity_check(s, 67.0, 1e-6).violations == 0);
    REQUIRE(fit_weiss_constant(s, 1e-6, 128.0) == Approx(67.0));
    REQUIRE(std::isnan(fit_weiss_constant(s, 1e-6, 32.0)));
  }
  SECTION("fewer than three samples is an error") {
    std::vector<WeissSample> s{{0.1, 1.0}, {0.2, 1.0}};
    REQUIRE_THROWS_AS(weiss_monotonicity_check(s, 0.0, 1e-6), InvalidInput);
  }
}

TEST_CASE("acf_functional") {
  const double h = 1.0 / 128;
  const Grid g = box_grid(-1.0, 1.0, h);
  Field w1(static_cast<std::size_t>(g.node_count()));
  Field w2(static_cast<std::size_t>(g.node_count()));
  for (index_t i = 0; i < g.node_count(); ++i) {
    const double y = g.position(i)[1];
    w1[static_cast<std::size_t>(i)] = std::max(y, 0.0);
    w2[static_cast<std::size_t>(i)] = std::max(-y, 0.0);
  }
  auto cfg = config_with_radii({0.4, 0.2, 0.1, 0.0625});
  SECTION("complementary half-plane profiles give pi^2/4") {
    auto res = acf_functional(g, w1, w2, {0, 0, 0}, cfg);
    REQUIRE(res.samples.size() == 4);
    REQUIRE_FALSE(res.overlap_warning);
    for (const auto& s : res.samples) REQUIRE(s.value == Approx(kPi * kPi / 4.0).epsilon(0.10));
  }
  SECTION("a vanishing factor kills the product") {
    Field zero(static_cast<std::size_t>(g.node_count()), 0.0);
    auto res = acf_functional(g, w1, zero, {0, 0, 0}, cfg);
    for (const auto& s : res.samples) REQUIRE(s.value == 0.0);
  }
  SECTION("overlapping positivity sets warn") {
    Field w2s(static_cast<std::size_t>(g.node_count()));
    for (index_t i = 0; i < g.node_count(); ++i)
      w2s[static_cast<std::size_t>(i)] = std::max(0.1 - g.position(i)[1], 0.0);
    auto res = acf_functional(g, w1, w2s, {0, 0, 0}, cfg);
    REQUIRE(res.overlap_warning);
  }
}

TEST_CASE("full_report") {
  const double h = 1.0 / 64;
  const Grid g = box_grid(-1.0, 1.0, h);
  SECTION("unconverged square: large residual, complete report") {
    auto shape = make_shape(g, square_field(g, {0, 0, 0}, 1.1));
    auto sp = lowest_eigenpairs(assemble(shape), 1, 1e-8, 4);
    auto spec = linear_objective({1.0});
    DiagnosticsConfig cfg;
    cfg.sample_cap = 24;
    auto rep = full_report(shape, sp, spec, cfg);
    REQUIRE(rep.components == 1);
    REQUIRE_FALSE(rep.skipped.count("fb_residual"));
    REQUIRE(std::isfinite(rep.fb_residual_sup));
    REQUIRE(rep.fb_residual_sup > 0.1);  // a square is far from stationary
    REQUIRE_FALSE(rep.nondegeneracy.min_ratio.empty());
    REQUIRE_FALSE(rep.density.range.empty());
    REQUIRE_FALSE(rep.minkowski.ratio.empty());
    REQUIRE_FALSE(rep.weiss.empty());
    REQUIRE(rep.flat_samples_checked > 0);
  }
  SECTION("degenerate shape: everything skipped with reasons") {
    Field f(static_cast<std::size_t>(g.node_count()), 1.0);
    auto shape = make_shape(g, f);
    Spectrum sp;
    auto rep = full_report(shape, sp, linear_objective({1.0}), DiagnosticsConfig{});
    REQUIRE(rep.skipped.size() >= 5);
    for (const auto& [k, v] : rep.skipped) REQUIRE(v == "degenerate shape");
  }
}

TEST_CASE("density warnings outside the regularity band") {
  // domain = box minus a small hole: boundary points see ratios near 1
  const double h = 1.0 / 96;
  const Grid g = box_grid(-1.0, 1.0, h);
  Field f = disk_field(g, {0, 0, 0}, 0.05);
  for (double& v : f) v = -v;
  auto shape = make_shape(g, f);
  auto prof = density_profile(shape, config_with_radii({0.3, 0.15}));
  REQUIRE(prof.warnings > 0);
  REQUIRE(prof.range.front().hi > 0.95);
}
