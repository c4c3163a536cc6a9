#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>
#include <vector>

#include "eigenshape/dirichlet_operator.hpp"

namespace eigenshape {

/// Lowest part of the Dirichlet spectrum. Eigenfunctions are stored on the
/// full grid, zero outside the domain, normalized to unit L2 grid quadrature
/// (h^n sum u^2 = 1) and pairwise orthogonal.
struct Spectrum {
  std::vector<double> eigenvalues;   // ascending
  std::vector<Field> eigenfunctions; // zero-extended
  std::vector<double> residuals;     // ||A u - lambda u|| / (lambda ||u||)
  int iterations = 0;
  bool converged = false;

  int count() const { return static_cast<int>(eigenvalues.size()); }
};

/// Subspace (block inverse) iteration with a sparse Cholesky inner solver.
/// Deterministic for a fixed seed; warm-start fields, when given, seed the
/// initial block.
inline Spectrum lowest_eigenpairs(const DirichletOperator& op, int N, double tol = 1e-8,
                                  std::uint64_t seed = 0,
                                  const std::vector<Field>* warm_start = nullptr) {
  const index_t rows = op.rows();
  if (N < 1) throw InvalidInput("lowest_eigenpairs: N must be >= 1");
  if (4 * static_cast<index_t>(N) >= rows)
    throw InvalidInput("lowest_eigenpairs: N too large for operator size");

  const int block = std::min<index_t>(N + std::max(4, N), rows / 2);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(op.matrix);
  if (solver.info() != Eigen::Success) throw SolverFailure("lowest_eigenpairs: factorization failed");

  Eigen::MatrixXd X(rows, block);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (index_t r = 0; r < rows; ++r)
    for (int c = 0; c < block; ++c) X(r, c) = dist(rng);
  if (warm_start) {
    const int k = std::min<int>(static_cast<int>(warm_start->size()), block);
    for (int c = 0; c < k; ++c) {
      const Field& f = (*warm_start)[static_cast<std::size_t>(c)];
      if (static_cast<index_t>(f.size()) != op.grid.node_count()) continue;
      for (index_t r = 0; r < rows; ++r)
        X(r, c) = f[static_cast<std::size_t>(op.row_node[static_cast<std::size_t>(r)])];
    }
  }

  Eigen::VectorXd theta(block);
  const int max_iter = 300;
  int it = 0;
  std::vector<double> resid(static_cast<std::size_t>(N), 1.0);
  bool ok = false;
  for (it = 1; it <= max_iter; ++it) {
    Eigen::MatrixXd Y = solver.solve(X);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, block);
    Eigen::MatrixXd AQ = op.matrix * Q;
    Eigen::MatrixXd T = Q.transpose() * AQ;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues();
    X = Q * es.eigenvectors();

    Eigen::MatrixXd AX = AQ * es.eigenvectors();
    double worst = 0.0;
    for (int k = 0; k < N; ++k) {
      const double r = (AX.col(k) - theta(k) * X.col(k)).norm() / std::max(theta(k), 1e-300);
      resid[static_cast<std::size_t>(k)] = r;
      worst = std::max(worst, r);
    }
    if (worst <= tol) {
      ok = true;
      break;
    }
  }

  Spectrum sp;
  sp.iterations = std::min(it, max_iter);
  sp.converged = ok;
  sp.residuals = resid;
  const double scale = 1.0 / std::sqrt(std::pow(op.grid.h, op.grid.ndim));
  sp.eigenvalues.resize(static_cast<std::size_t>(N));
  sp.eigenfunctions.assign(static_cast<std::size_t>(N),
                           Field(static_cast<std::size_t>(op.grid.node_count()), 0.0));
  for (int k = 0; k < N; ++k) {
    sp.eigenvalues[static_cast<std::size_t>(k)] = theta(k);
    // deterministic sign: mean dominant, max-entry fallback; makes u1 >= 0 on
    // connected domains
    double sum = 0.0;
    for (index_t r = 0; r < rows; ++r) sum += X(r, k);
    double sgn;
    if (std::abs(sum) > 1e-9 * std::sqrt(static_cast<double>(rows))) {
      sgn = sum > 0 ? 1.0 : -1.0;
    } else {
      index_t arg = 0;
      double best = 0.0;
      for (index_t r = 0; r < rows; ++r)
        if (std::abs(X(r, k)) > best) {
          best = std::abs(X(r, k));
          arg = r;
        }
      sgn = X(arg, k) >= 0 ? 1.0 : -1.0;
    }
    Field& f = sp.eigenfunctions[static_cast<std::size_t>(k)];
    for (index_t r = 0; r < rows; ++r)
      f[static_cast<std::size_t>(op.row_node[static_cast<std::size_t>(r)])] = sgn * scale * X(r, k);
  }
  if (!ok) log::warn("lowest_eigenpairs: not converged after iteration cap, worst residual " +
                     std::to_string(resid.empty() ? 0.0 : *std::max_element(resid.begin(), resid.end())));
  return sp;
}

}  // namespace eigenshape
