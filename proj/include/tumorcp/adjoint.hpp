#pragma once

// Backward solver for the dual system in (p, q, r), with s = p + tau q.
//
// The step is the exact adjoint of ImexSystem::step, written in the dual
// variables. Going from m+1 to m (superscripts index forward snapshots):
//
//   (I - dt n Lap) r^m = r^{m+1} + dt [ P^m (p - r)^{m+1} + chi q^{m+1}
//                                       + beta_Q w_m (sigma^m - sigma_Q^m) ]
//
//   p^m/dt + G q^m + n chi Lap r^m
//       = p^{m+1}/dt + (tau/dt + S - psi''(phi^m)) q^{m+1}
//         + (P'^m (N^m - mu^{m+1}) - chi P^m)(p - r)^{m+1} - h'^m u_m p^{m+1}
//         + alpha_Q w_m (phi^m - phi_Q^m) + [m = N] alpha_Omega (phi^N - phi_Omega) / dt
//
//   q^m = -m Lap p^m + P^{m-1} (p^m - r^m)
//
// with all (m+1)-quantities zero at m = N and w_m the trapezoidal weights.
// The middle line is -d_t s + A q + psi'' q + chi Lap r + chi P (p - r) = ...
// in IMEX form; the last line is the algebraic relation -q - Lap p + P(p - r) = 0.
// Substituting q and p = G z gives the forward SPD operator G + dt G W G.

#include <memory>
#include <vector>

#include "tumorcp/cost.hpp"
#include "tumorcp/forward.hpp"

namespace tumorcp {

struct AdjointSnapshot {
  double t = 0.0;
  Field p;
  Field q;
  Field r;
  Field s;  ///< p + tau q
};

/// Snapshots indexed by time step m = 0..nt (computed from m = nt down to 0).
struct AdjointTrajectory {
  Mode mode = Mode::local;
  TimeGrid tgrid{};
  std::vector<AdjointSnapshot> snapshots;
};

/// Continuous terminal data: s_T = alpha_Omega (phi_T - phi_Omega), r_T = 0.
inline std::pair<Field, Field> terminal_conditions(const CostSpec& spec, const Field& phi_T) {
  Field s = phi_T - spec.phi_Omega;
  s *= spec.alpha_Omega;
  return {s, Field(phi_T.grid())};
}

/// Given s = p + tau q and r, eliminates q through -q - m Lap p + P(phi)(p - r) = 0:
///   (I - tau m Lap + tau P) p = s + tau P r,   q = (s - p) / tau.
inline std::pair<Field, Field> recover_pq(const physics::ModelParams& params, const Field& phi, const Field& s,
                                          const Field& r, const solvers::SolverOptions& opts = {}) {
  phi.check_same(s);
  phi.check_same(r);
  const GridSpec& g = phi.grid();
  const double tau = params.tau;
  const Field P = map(phi, [&](double x) { return params.P(x); });
  spectral::NeumannSpectral spec(g);
  const auto& lam = spec.laplacian_eigenvalues();
  const double pbar = mean(P);
  std::vector<double> symbol(lam.size());
  for (std::size_t i = 0; i < lam.size(); ++i) symbol[i] = 1.0 + tau * (-params.mobility_m * lam[i] + pbar);

  auto op = [&](const Field& x) {
    Field y = laplacian_neumann(x);
    y *= -tau * params.mobility_m;
    y += x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += tau * P[i] * x[i];
    return y;
  };
  Field rhs(s);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += tau * P[i] * r[i];
  Field p = spec.solve(rhs, symbol);
  solvers::pcg(op, [&](const Field& v) { return spec.solve(v, symbol); }, rhs, p, opts, "recover_pq");
  Field q = s - p;
  q *= 1.0 / tau;
  return {p, q};
}

/// Residual of -q - m Lap p + P(phi)(p - r).
inline Field dual2_residual(const physics::ModelParams& params, const Field& phi, const Field& p, const Field& q,
                            const Field& r) {
  Field res = laplacian_neumann(p);
  res *= -params.mobility_m;
  res -= q;
  for (std::size_t i = 0; i < res.size(); ++i) res[i] += params.P(phi[i]) * (p[i] - r[i]);
  return res;
}

class AdjointSolver {
 public:
  AdjointSolver(const ImexSystem& sys, const StateTrajectory& fwd, const ControlPair& controls, const CostSpec& cost)
      : sys_(sys), fwd_(fwd), controls_(controls), cost_(cost) {
    require(fwd.full_stride(), "adjoint: forward trajectory must be stored at full stride");
    require(fwd.mode == sys.mode(), "adjoint: forward trajectory was computed in another mode");
    const GridSpec& g = sys.grid();
    check_controls(controls, g, fwd.tgrid.steps);
    cost.validate(g, fwd.tgrid.steps, /*allow_all_zero=*/true);
  }

  /// Dual state at m = nt (zero data beyond the final time).
  AdjointSnapshot terminal() const {
    const GridSpec& g = sys_.grid();
    AdjointSnapshot zero{fwd_.tgrid.final_time + sys_.dt(), Field(g), Field(g), Field(g), Field(g)};
    return step(fwd_.tgrid.steps, zero);
  }

  /// Dual state at index m from the one at m + 1.
  AdjointSnapshot step(int m, const AdjointSnapshot& next) const {
    const int N = fwd_.tgrid.steps;
    const auto& prm = sys_.params();
    const GridSpec& g = sys_.grid();
    const double dt = sys_.dt();
    const double chi = prm.chi;
    const double wm = trapezoid_weight(m, N);
    const StateSnapshot& st = fwd_.snapshots[m];
    const bool has_next = m < N;

    Field pr_next = next.p - next.r;

    // r^m
    Field rrhs(next.r);
    if (has_next) {
      for (std::size_t i = 0; i < rrhs.size(); ++i) rrhs[i] += dt * (prm.P(st.phi[i]) * pr_next[i] + chi * next.q[i]);
    }
    if (cost_.beta_Q != 0.0 && wm != 0.0) {
      const Field d = st.sigma - cost_.sigma_Q[m];
      rrhs.axpy(dt * cost_.beta_Q * wm, d);
    }
    Field r = sys_.solve_diffusion(rrhs);

    // Right-hand side of the phi-multiplier equation.
    Field rhs(g);
    if (has_next) {
      const StateSnapshot& st1 = fwd_.snapshots[m + 1];
      const Field* u = controls_.u.empty() ? nullptr : &controls_.u[m];
      const double c = sys_.shift();
      for (std::size_t i = 0; i < rhs.size(); ++i) {
        const double ph = st.phi[i];
        const double nut = st.sigma[i] + chi * (1.0 - ph);
        double v = next.p[i] / dt + (c - physics::psi_second(ph)) * next.q[i];
        v += (prm.P_prime(ph) * (nut - st1.mu[i]) - chi * prm.P(ph)) * pr_next[i];
        if (u) v -= prm.h_prime(ph) * (*u)[i] * next.p[i];
        rhs[i] = v;
      }
    }
    if (cost_.alpha_Q != 0.0 && wm != 0.0) rhs.axpy(cost_.alpha_Q * wm, st.phi - cost_.phi_Q[m]);
    if (m == N && cost_.alpha_Omega != 0.0) rhs.axpy(cost_.alpha_Omega / dt, st.phi - cost_.phi_Omega);
    {
      Field lr = laplacian_neumann(r);
      rhs.axpy(-prm.mobility_n * chi, lr);
    }

    // (I + dt G W) p = dt (rhs + G P r), with W and P at the previous forward time.
    const Field& phi_prev = fwd_.snapshots[m > 0 ? m - 1 : 0].phi;
    const Field P = sys_.proliferation(phi_prev);
    Field f = sys_.apply_G(hadamard(P, r));
    f += rhs;
    f *= dt;
    const Field z = sys_.solve_coupled(P, f, Field(g), "adjoint step");

    AdjointSnapshot out;
    out.t = fwd_.tgrid.time(m);
    out.p = sys_.apply_G(z);
    out.q = sys_.apply_W(out.p, P);
    for (std::size_t i = 0; i < out.q.size(); ++i) out.q[i] -= P[i] * r[i];
    out.r = std::move(r);
    out.s = out.p;
    out.s.axpy(prm.tau, out.q);
    if (!out.p.all_finite() || !out.q.all_finite() || !out.r.all_finite()) {
      throw NumericalError("adjoint: non-finite value at step " + std::to_string(m));
    }
    return out;
  }

  AdjointTrajectory solve() const {
    const int N = fwd_.tgrid.steps;
    AdjointTrajectory out;
    out.mode = sys_.mode();
    out.tgrid = fwd_.tgrid;
    out.snapshots.resize(static_cast<std::size_t>(N + 1));
    out.snapshots[N] = terminal();
    for (int m = N - 1; m >= 0; --m) out.snapshots[m] = step(m, out.snapshots[m + 1]);
    return out;
  }

 private:
  const ImexSystem& sys_;
  const StateTrajectory& fwd_;
  const ControlPair& controls_;
  const CostSpec& cost_;
};

inline AdjointTrajectory solve_adjoint(const ImexSystem& sys, const StateTrajectory& fwd, const ControlPair& controls,
                                       const CostSpec& cost) {
  return AdjointSolver(sys, fwd, controls, cost).solve();
}

}  // namespace tumorcp
