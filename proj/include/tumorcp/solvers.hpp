#pragma once

#include <cmath>
#include <sstream>

#include "tumorcp/grid.hpp"

namespace tumorcp::solvers {

struct SolverOptions {
  double rel_tol = 1e-10;
  int max_iter = 500;
};

struct SolveStats {
  int iterations = 0;
  double rel_residual = 0.0;
};

/// Preconditioned conjugate gradients for an SPD operator. Convergence is
/// measured in the preconditioner norm: sqrt(r.Mr) / sqrt(b.Mb) <= rel_tol.
/// `x` holds the initial guess on entry and the solution on exit.
template <class Op, class Precond>
SolveStats pcg(Op&& apply, Precond&& precond, const Field& b, Field& x, const SolverOptions& opt,
               const char* what = "pcg") {
  Field r = b - apply(x);
  Field z = precond(r);
  const Field zb = precond(b);
  const double bnorm = std::sqrt(std::abs(inner(b, zb)));
  SolveStats stats;
  if (bnorm == 0.0) {
    x = Field(b.grid());
    return stats;
  }
  double rz = inner(r, z);
  Field p = z;
  for (int it = 0; it <= opt.max_iter; ++it) {
    stats.rel_residual = std::sqrt(std::abs(rz)) / bnorm;
    stats.iterations = it;
    if (!std::isfinite(stats.rel_residual)) break;
    if (stats.rel_residual <= opt.rel_tol) return stats;
    if (it == opt.max_iter) break;
    const Field ap = apply(p);
    const double pap = inner(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    x.axpy(alpha, p);
    r.axpy(-alpha, ap);
    z = precond(r);
    const double rz_new = inner(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    p *= beta;
    p += z;
  }
  std::ostringstream msg;
  msg << what << ": no convergence after " << stats.iterations << " iterations (relative residual "
      << stats.rel_residual << ", tolerance " << opt.rel_tol << ")";
  throw NumericalError(msg.str());
}

}  // namespace tumorcp::solvers
