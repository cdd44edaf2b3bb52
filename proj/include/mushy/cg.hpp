#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mushy/errors.hpp"

namespace mushy {

struct LinearSolverSettings {
  double cg_tol = 1e-12;  // relative residual
  int cg_max = 20000;
};

struct CgStats {
  int iterations = 0;
  double rel_residual = 0.0;
};

/// Preconditioned conjugate gradient for SPD operators, matrix-free.
/// apply(x, out) computes out = A x; prec(r, out) applies the (diagonal)
/// preconditioner. Solves in place into x (initial guess). Throws
/// solver_error when the relative residual fails to reach tol.
template <class Apply, class Prec>
CgStats pcg_solve(Apply&& apply, Prec&& prec, std::span<const double> b,
                  std::span<double> x, const LinearSolverSettings& s) {
  const size_t n = b.size();
  std::vector<double> r(n), z(n), p(n), ap(n);

  double bnorm = 0.0;
  for (size_t i = 0; i < n; ++i) bnorm += b[i] * b[i];
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) {
    for (size_t i = 0; i < n; ++i) x[i] = 0.0;
    return {0, 0.0};
  }

  apply(x, std::span<double>(ap));
  for (size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  prec(std::span<const double>(r), std::span<double>(z));
  p = z;
  double rz = 0.0, rnorm = 0.0;
  for (size_t i = 0; i < n; ++i) {
    rz += r[i] * z[i];
    rnorm += r[i] * r[i];
  }
  rnorm = std::sqrt(rnorm);

  CgStats stats;
  for (int it = 0; it < s.cg_max; ++it) {
    if (rnorm <= s.cg_tol * bnorm) {
      stats.iterations = it;
      stats.rel_residual = rnorm / bnorm;
      return stats;
    }
    apply(std::span<const double>(p), std::span<double>(ap));
    double pap = 0.0;
    for (size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (!(pap > 0.0))
      throw solver_error("cg: operator not positive definite", rnorm / bnorm);
    const double alpha = rz / pap;
    rnorm = 0.0;
    for (size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rnorm += r[i] * r[i];
    }
    rnorm = std::sqrt(rnorm);
    prec(std::span<const double>(r), std::span<double>(z));
    double rz_new = 0.0;
    for (size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw solver_error("cg: no convergence after max iterations", rnorm / bnorm);
}

}  // namespace mushy
