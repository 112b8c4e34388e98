// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <vector>

#include "emdsm/errors.hpp"

namespace emdsm {

struct GmresOptions {
  double tolerance = 1e-8;  // on ||b - Ax|| / ||b||
  int restart = 50;
  int max_iterations = 500;  // total inner iterations
};

struct GmresResult {
  Eigen::VectorXcd x;
  int iterations = 0;
  double relative_residual = 0;
};

/// Solves A x = b where `apply(v)` returns A v. Throws ConvergenceError when
/// the tolerance is not reached within max_iterations.
template <class Apply>
GmresResult gmres(const Apply& apply, const Eigen::VectorXcd& b, const GmresOptions& opt,
                  Eigen::VectorXcd x0 = Eigen::VectorXcd()) {
  using cd = std::complex<double>;
  const Eigen::Index n = b.size();
  if (!(opt.tolerance > 0)) throw std::invalid_argument("gmres tolerance must be positive");
  if (opt.restart < 1) throw std::invalid_argument("gmres restart must be positive");

  GmresResult result;
  result.x = x0.size() == n ? std::move(x0) : Eigen::VectorXcd::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0) {
    result.x.setZero();
    return result;
  }

  const int m = opt.restart;
  Eigen::MatrixXcd basis(n, m + 1);
  Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m + 1, m);
  std::vector<cd> cs(static_cast<std::size_t>(m));
  std::vector<cd> sn(static_cast<std::size_t>(m));
  Eigen::VectorXcd g(m + 1);

  Eigen::VectorXcd r = b - apply(result.x);
  double rel = r.norm() / bnorm;
  while (rel > opt.tolerance && result.iterations < opt.max_iterations) {
    const double beta = r.norm();
    basis.col(0) = r / beta;
    g.setZero();
    g(0) = beta;
    hess.setZero();
    int j = 0;
    for (; j < m && result.iterations < opt.max_iterations; ++j) {
      Eigen::VectorXcd w = apply(basis.col(j));
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(w);
        w -= hess(i, j) * basis.col(i);
      }
      const double wnorm = w.norm();
      hess(j + 1, j) = wnorm;
      if (wnorm > 0) basis.col(j + 1) = w / wnorm;

      for (int i = 0; i < j; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const cd t = std::conj(cs[ii]) * hess(i, j) + std::conj(sn[ii]) * hess(i + 1, j);
        hess(i + 1, j) = -sn[ii] * hess(i, j) + cs[ii] * hess(i + 1, j);
        hess(i, j) = t;
      }
      const cd a = hess(j, j);
      const cd c = hess(j + 1, j);
      const double denom = std::sqrt(std::norm(a) + std::norm(c));
      const auto jj = static_cast<std::size_t>(j);
      if (denom == 0) {
        cs[jj] = 1;
        sn[jj] = 0;
      } else {
        cs[jj] = a / denom;
        sn[jj] = c / denom;
      }
      hess(j, j) = std::conj(cs[jj]) * a + std::conj(sn[jj]) * c;
      hess(j + 1, j) = 0;
      g(j + 1) = -sn[jj] * g(j);
      g(j) = std::conj(cs[jj]) * g(j);

      ++result.iterations;
      rel = std::abs(g(j + 1)) / bnorm;
      if (rel <= opt.tolerance || wnorm == 0) {
        ++j;
        break;
      }
    }
    // Back substitution on the j x j upper triangle.
    Eigen::VectorXcd y = hess.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    result.x += basis.leftCols(j) * y;
    r = b - apply(result.x);
    rel = r.norm() / bnorm;
  }
  result.relative_residual = rel;
  if (rel > opt.tolerance) {
    throw ConvergenceError("GMRES did not converge", rel, result.iterations);
  }
  return result;
}

}  // namespace emdsm
