#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "eigenshape/grid.hpp"
#include "eigenshape/log.hpp"

namespace eigenshape {

/// Maximal runs of eigenvalue indices with relative gap below tol.
/// Returned as the partition of 0..N-1 into contiguous clusters.
inline std::vector<std::vector<int>> multiplicity_clusters(const std::vector<double>& lambdas,
                                                           double tol) {
  std::vector<std::vector<int>> out;
  for (int k = 0; k < static_cast<int>(lambdas.size()); ++k) {
    if (k > 0 && lambdas[k] < lambdas[k - 1] * (1.0 - 1e-12))
      throw InvalidInput("multiplicity_clusters: lambdas not ascending");
    const bool tied =
        k > 0 && (lambdas[k] - lambdas[k - 1]) < tol * std::max(std::abs(lambdas[k]), 1e-300);
    if (tied) {
      out.back().push_back(k);
    } else {
      out.push_back({k});
    }
  }
  return out;
}

constexpr double kNoSmoothing = std::numeric_limits<double>::infinity();

/// The objective F(lambda_1..lambda_N) + |Omega|, optionally replaced by the
/// l^p-smoothed family F_p(lambda) = G(S_1, ..., S_N) with
/// S_j = (sum_{i<=j} lambda_i^p)^{1/p}, which is differentiable across
/// eigenvalue multiplicities.
struct ObjectiveSpec {
  enum class Form { linear, powersum, custom };
  Form form = Form::linear;
  int num_eigenvalues = 1;
  std::vector<double> mu;  // linear weights
  double q = 1.0;          // powersum exponent
  std::function<double(const std::vector<double>&)> G;
  std::function<std::vector<double>(const std::vector<double>&)> dG;

  double derivative_lb = 1e-3;  // lower bound on dG components
  double derivative_ub = std::numeric_limits<double>::infinity();
  double xi0 = 1.0;   // surface constant, f - g of the generalized volume term
  double p = kNoSmoothing;
  double cluster_tol = 1e-3;

  void validate() const {
    if (num_eigenvalues < 1) throw InvalidInput("objective: N must be >= 1");
    if (!(derivative_lb > 0.0)) throw InvalidInput("objective: derivative_lb must be positive");
    if (!(xi0 > 0.0 && xi0 < 2.0))
      throw InvalidInput("objective: xi0 must lie in (0, 2)");
    if (form == Form::linear) {
      if (static_cast<int>(mu.size()) != num_eigenvalues)
        throw InvalidInput("objective: mu length mismatch");
      for (double m : mu)
        if (m < derivative_lb) throw InvalidInput("objective: min mu below derivative_lb");
    }
    if (form == Form::powersum && q < 1.0) throw InvalidInput("objective: powersum needs q >= 1");
    if (form == Form::custom && (!G || !dG))
      throw InvalidInput("objective: custom form needs G and its gradient");
    if (p != kNoSmoothing && p < 1.0) throw InvalidInput("objective: smoothing p must be >= 1");
  }
};

inline ObjectiveSpec linear_objective(std::vector<double> mu, double xi0 = 1.0) {
  ObjectiveSpec s;
  s.form = ObjectiveSpec::Form::linear;
  s.num_eigenvalues = static_cast<int>(mu.size());
  s.mu = std::move(mu);
  double lb = s.mu.empty() ? 1.0 : s.mu[0];
  for (double m : s.mu) lb = std::min(lb, m);
  s.derivative_lb = lb;
  s.xi0 = xi0;
  s.validate();
  return s;
}

inline ObjectiveSpec powersum_objective(int N, double q, double xi0 = 1.0) {
  ObjectiveSpec s;
  s.form = ObjectiveSpec::Form::powersum;
  s.num_eigenvalues = N;
  s.q = q;
  s.xi0 = xi0;
  s.validate();
  return s;
}

/// Ascending positive eigenvalue tuple.
struct SpectrumPoint {
  std::vector<double> lambdas;

  explicit SpectrumPoint(std::vector<double> l) : lambdas(std::move(l)) {
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      if (!(lambdas[k] > 0.0)) throw InvalidInput("SpectrumPoint: lambdas must be positive");
      if (k > 0 && lambdas[k] < lambdas[k - 1] * (1.0 - 1e-12))
        throw InvalidInput("SpectrumPoint: lambdas must be ascending");
    }
  }
};

namespace detail {

inline double base_G(const ObjectiveSpec& s, const std::vector<double>& xi) {
  switch (s.form) {
    case ObjectiveSpec::Form::linear: {
      double acc = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) acc += s.mu[k] * xi[k];
      return acc;
    }
    case ObjectiveSpec::Form::powersum: {
      double acc = 0.0;
      for (double v : xi) acc += std::pow(v, s.q);
      return acc;
    }
    case ObjectiveSpec::Form::custom:
      return s.G(xi);
  }
  return 0.0;
}

inline std::vector<double> base_dG(const ObjectiveSpec& s, const std::vector<double>& xi) {
  switch (s.form) {
    case ObjectiveSpec::Form::linear:
      return s.mu;
    case ObjectiveSpec::Form::powersum: {
      std::vector<double> d(xi.size());
      for (std::size_t k = 0; k < xi.size(); ++k) d[k] = s.q * std::pow(xi[k], s.q - 1.0);
      return d;
    }
    case ObjectiveSpec::Form::custom:
      return s.dG(xi);
  }
  return {};
}

// Nested l^p means S_j = (sum_{i<=j} lambda_i^p)^{1/p}, computed against the
// running maximum so that p up to ~1024 stays in range. Also returns
// t_j = sum_{i<=j} (lambda_i / lambda_j)^p used by the gradient.
inline void lp_prefix(const std::vector<double>& lam, double p, std::vector<double>& S,
                      std::vector<double>& t) {
  const std::size_t n = lam.size();
  S.resize(n);
  t.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double m = lam[j];  // ascending, so the running max is lam[j]
    double acc = 0.0;
    for (std::size_t i = 0; i <= j; ++i) acc += std::exp(p * (std::log(lam[i]) - std::log(m)));
    t[j] = acc;
    S[j] = m * std::exp(std::log(acc) / p);
  }
}

}  // namespace detail

/// F(lambda) + vol, or F_p(lambda) + vol when the spec carries a finite p.
inline double evaluate(const ObjectiveSpec& spec, const SpectrumPoint& pt, double vol) {
  spec.validate();
  if (static_cast<int>(pt.lambdas.size()) != spec.num_eigenvalues)
    throw InvalidInput("evaluate: wrong lambda count");
  if (spec.p == kNoSmoothing) return detail::base_G(spec, pt.lambdas) + vol;
  std::vector<double> S, t;
  detail::lp_prefix(pt.lambdas, spec.p, S, t);
  return detail::base_G(spec, S) + vol;
}

/// xi_k = dF/dlambda_k. With smoothing, the chain rule of the nested-norm
/// family: dF_p/dlambda_k = sum_{j>=k} dG_j (sum_{i<=j} lambda_i^p)^{1/p-1}
/// lambda_k^{p-1}, evaluated in log space.
inline std::vector<double> gradient(const ObjectiveSpec& spec, const SpectrumPoint& pt) {
  spec.validate();
  const int N = spec.num_eigenvalues;
  if (static_cast<int>(pt.lambdas.size()) != N) throw InvalidInput("gradient: wrong lambda count");

  if (spec.p == kNoSmoothing) {
    const auto clusters = multiplicity_clusters(pt.lambdas, spec.cluster_tol);
    for (const auto& c : clusters) {
      if (c.size() < 2) continue;
      bool symmetric = spec.form == ObjectiveSpec::Form::powersum;
      if (spec.form == ObjectiveSpec::Form::linear) {
        symmetric = true;
        for (std::size_t i = 1; i < c.size(); ++i)
          if (spec.mu[static_cast<std::size_t>(c[i])] != spec.mu[static_cast<std::size_t>(c[0])])
            symmetric = false;
      }
      if (!symmetric)
        throw InvalidInput("gradient: eigenvalue multiplicity with a non-symmetric form, use smooth_p");
    }
    auto xi = detail::base_dG(spec, pt.lambdas);
    for (double v : xi) {
      if (v < spec.derivative_lb * (1.0 - 1e-9))
        throw SolverFailure("gradient: component below derivative_lb");
      if (v > spec.derivative_ub) throw SolverFailure("gradient: component above derivative_ub");
    }
    return xi;
  }

  std::vector<double> S, t;
  detail::lp_prefix(pt.lambdas, spec.p, S, t);
  const auto dg = detail::base_dG(spec, S);
  std::vector<double> xi(static_cast<std::size_t>(N), 0.0);
  for (int k = 0; k < N; ++k) {
    double acc = 0.0;
    for (int j = k; j < N; ++j) {
      // (lambda_k / S_j)^{p-1}; the exponent is <= 0 since lambda_k <= S_j
      const double logw = (spec.p - 1.0) * (std::log(pt.lambdas[k]) - std::log(S[j]));
      acc += dg[static_cast<std::size_t>(j)] * std::exp(logw);
    }
    xi[static_cast<std::size_t>(k)] = acc;
    if (!(acc > 0.0)) throw SolverFailure("gradient: smoothed component not positive");
    if (acc > spec.derivative_ub) throw SolverFailure("gradient: component above derivative_ub");
  }
  return xi;
}

/// Returns a copy of the spec evaluating the smoothed family F_p.
inline ObjectiveSpec smooth_p(const ObjectiveSpec& spec, double p) {
  if (p < 1.0) throw InvalidInput("smooth_p: p must be >= 1");
  if (spec.form == ObjectiveSpec::Form::custom && !spec.dG)
    throw InvalidInput("smooth_p: gradient of G unavailable");
  ObjectiveSpec out = spec;
  out.p = p;
  return out;
}

struct GapCheck {
  bool strict = false;
  double gap = 0.0;
  bool tied = false;  // false means the check was vacuous
};

/// At a tied pair lambda_k = lambda_{k+1}, the smoothed family must satisfy
/// dF_p/dlambda_k > dF_p/dlambda_{k+1} (the property-S-forcing gap).
inline GapCheck strict_gap_check(const ObjectiveSpec& spec_p, const SpectrumPoint& pt) {
  if (spec_p.p == kNoSmoothing) throw InvalidInput("strict_gap_check: spec is not smoothed");
  const auto xi = gradient(spec_p, pt);
  GapCheck res;
  res.strict = true;
  for (std::size_t k = 0; k + 1 < pt.lambdas.size(); ++k) {
    const bool tied =
        (pt.lambdas[k + 1] - pt.lambdas[k]) < spec_p.cluster_tol * std::abs(pt.lambdas[k + 1]);
    if (!tied) continue;
    res.tied = true;
    const double gap = xi[k] - xi[k + 1];
    if (res.gap == 0.0 || gap < res.gap) res.gap = gap;
    if (!(gap > 0.0)) res.strict = false;
  }
  if (!res.tied) log::debug("strict_gap_check: no tied pair, vacuously true");
  return res;
}

}  // namespace eigenshape
