#pragma once

// Tracking-type cost functional and its proximal ("adapted") variant.
//
// Discrete J: terminal term exact, tracking terms trapezoidal over the
// nt + 1 snapshots, control terms exact for piecewise-constant controls.

#include <vector>

#include "tumorcp/forward.hpp"

namespace tumorcp {

struct CostSpec {
  double alpha_Omega = 0.0;
  double alpha_Q = 0.0;
  double beta_Q = 0.0;
  double alpha_u = 0.0;
  double beta_w = 0.0;
  Field phi_Omega;               ///< terminal target
  std::vector<Field> phi_Q;      ///< one per snapshot (nt + 1)
  std::vector<Field> sigma_Q;    ///< one per snapshot (nt + 1)

  bool all_weights_zero() const {
    return alpha_Omega == 0.0 && alpha_Q == 0.0 && beta_Q == 0.0 && alpha_u == 0.0 && beta_w == 0.0;
  }

  /// Nonnegative weights and target shapes. `allow_all_zero` admits the
  /// homogeneous case used to exercise the dual system with zero data.
  void validate(const GridSpec& g, int steps, bool allow_all_zero = false) const {
    for (double v : {alpha_Omega, alpha_Q, beta_Q, alpha_u, beta_w}) {
      require(std::isfinite(v) && v >= 0.0, "cost: weights must be nonnegative");
    }
    require(allow_all_zero || !all_weights_zero(), "cost: weights must not all be zero");
    require(phi_Omega.grid() == g, "cost: terminal target on the wrong grid");
    require(static_cast<int>(phi_Q.size()) == steps + 1 && static_cast<int>(sigma_Q.size()) == steps + 1,
            "cost: tracking targets need one field per snapshot");
    for (const auto& f : phi_Q) require(f.grid() == g, "cost: phi_Q on the wrong grid");
    for (const auto& f : sigma_Q) require(f.grid() == g, "cost: sigma_Q on the wrong grid");
  }

  /// Same target in every snapshot.
  static CostSpec with_static_targets(const GridSpec& g, int steps, const Field& phi_Omega, const Field& phi_Q,
                                      const Field& sigma_Q) {
    CostSpec c;
    c.phi_Omega = phi_Omega;
    c.phi_Q.assign(static_cast<std::size_t>(steps + 1), phi_Q);
    c.sigma_Q.assign(static_cast<std::size_t>(steps + 1), sigma_Q);
    (void)g;
    return c;
  }
};

/// Adapted cost: J + |u - u_anchor|^2/2 + |w - w_anchor|^2/2 in L2(Q).
struct AdaptedSpec {
  CostSpec base;
  ControlPair anchor;
};

/// Trapezoidal weight of snapshot k among K = nt + 1 (zero when nt = 0).
inline double trapezoid_weight(int k, int steps) {
  if (steps == 0) return 0.0;
  return (k == 0 || k == steps) ? 0.5 : 1.0;
}

namespace detail {
inline double control_sq(const std::vector<Field>& c, double dt) {
  double acc = 0.0;
  for (const auto& f : c) acc += dt * inner(f, f);
  return acc;
}
inline double control_dist_sq(const std::vector<Field>& a, const std::vector<Field>& b, const GridSpec& g, int steps,
                              double dt) {
  double acc = 0.0;
  for (int n = 0; n < steps; ++n) {
    const Field za = a.empty() ? Field(g) : a[n];
    const Field zb = b.empty() ? Field(g) : b[n];
    const Field d = za - zb;
    acc += dt * inner(d, d);
  }
  return acc;
}
}  // namespace detail

inline double eval_cost(const CostSpec& spec, const StateTrajectory& traj, const ControlPair& controls) {
  const int N = traj.tgrid.steps;
  require(traj.full_stride(), "eval_cost: trajectory must be stored at full stride");
  const GridSpec& g = traj.snapshots.front().phi.grid();
  spec.validate(g, N, true);
  check_controls(controls, g, N);
  const double dt = traj.tgrid.dt();

  double J = 0.0;
  if (spec.alpha_Omega != 0.0) {
    const Field d = traj.final_state().phi - spec.phi_Omega;
    J += 0.5 * spec.alpha_Omega * inner(d, d);
  }
  for (int k = 0; k <= N; ++k) {
    const double wk = trapezoid_weight(k, N) * dt;
    if (wk == 0.0) continue;
    if (spec.alpha_Q != 0.0) {
      const Field d = traj.snapshots[k].phi - spec.phi_Q[k];
      J += 0.5 * spec.alpha_Q * wk * inner(d, d);
    }
    if (spec.beta_Q != 0.0) {
      const Field d = traj.snapshots[k].sigma - spec.sigma_Q[k];
      J += 0.5 * spec.beta_Q * wk * inner(d, d);
    }
  }
  if (spec.alpha_u != 0.0) J += 0.5 * spec.alpha_u * detail::control_sq(controls.u, dt);
  if (spec.beta_w != 0.0) J += 0.5 * spec.beta_w * detail::control_sq(controls.w, dt);
  return J;
}

inline double eval_adapted(const AdaptedSpec& spec, const StateTrajectory& traj, const ControlPair& controls) {
  const int N = traj.tgrid.steps;
  const GridSpec& g = traj.snapshots.front().phi.grid();
  check_controls(spec.anchor, g, N);
  const double dt = traj.tgrid.dt();
  return eval_cost(spec.base, traj, controls) + 0.5 * detail::control_dist_sq(controls.u, spec.anchor.u, g, N, dt) +
         0.5 * detail::control_dist_sq(controls.w, spec.anchor.w, g, N, dt);
}

}  // namespace tumorcp
