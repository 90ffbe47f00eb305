#pragma once

// Linearly implicit time stepping for the local and nonlocal state systems.
//
// One step from (phi^n, sigma^n) with controls (u_n, w_n):
//
//   mu      = (tau/dt + S)(phi' - phi^n) + A phi' + psi'(phi^n) - chi sigma^n
//   phi'    = phi^n + dt [ m Lap mu + P(phi^n)(N^n - mu) - h(phi^n) u_n ]
//   sigma'  = sigma^n + dt [ n Lap sigma' - n chi Lap phi' - P(phi^n)(N^n - mu) + w_n ]
//
// with N^n = sigma^n + chi (1 - phi^n), A = -Lap (local) or B_eps (nonlocal),
// and S >= C_psi the convex-splitting shift. Eliminating mu gives, with
// G = (tau/dt + S) + A and W = -m Lap + P(phi^n),
//
//   (I + dt W G) phi' = f    <=>    (G + dt G W G) phi' = G f,
//
// an SPD system solved by PCG with a DCT preconditioner. The sigma update is
// a single DCT solve. For u = w = 0 the discrete energy
//   E = <A phi, phi>/2 + int psi(phi) + |sigma|^2/2 + chi int sigma (1 - phi)
// is non-increasing for dt < 2 / max P.

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tumorcp/grid.hpp"
#include "tumorcp/kernel.hpp"
#include "tumorcp/physics.hpp"
#include "tumorcp/solvers.hpp"
#include "tumorcp/spectral.hpp"

namespace tumorcp {

enum class Mode { local, nonlocal };

inline std::string to_string(Mode m) { return m == Mode::local ? "local" : "nonlocal"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "local") return Mode::local;
  if (s == "nonlocal") return Mode::nonlocal;
  throw ValidationError("unknown mode '" + s + "' (expected local or nonlocal)");
}

struct StateSnapshot {
  double t = 0.0;
  Field phi;
  Field mu;
  Field sigma;
};

struct Diagnostics {
  double E_total = 0.0;
  double E_interface = 0.0;
  double int_psi = 0.0;
  double half_sigma_sq = 0.0;
  double chi_coupling = 0.0;
  double mean_phi = 0.0;
  double mean_sigma = 0.0;
};

/// Space-time controls, piecewise constant in time: u[n], w[n] act on
/// (t_n, t_{n+1}]. Empty vectors mean "identically zero".
struct ControlPair {
  std::vector<Field> u;
  std::vector<Field> w;

  static ControlPair constant(const GridSpec& g, int steps, double u_value, double w_value) {
    ControlPair c;
    c.u.assign(static_cast<std::size_t>(steps), Field(g, u_value));
    c.w.assign(static_cast<std::size_t>(steps), Field(g, w_value));
    return c;
  }
  static ControlPair zeros(const GridSpec& g, int steps) { return constant(g, steps, 0.0, 0.0); }
};

struct ControlBounds {
  double u_min = 0.0;
  double u_max = 1.0;
  double w_min = -1.0;
  double w_max = 1.0;
};

struct StateTrajectory {
  Mode mode = Mode::local;
  TimeGrid tgrid{};
  int stride = 1;
  std::vector<int> steps;  ///< time-step index of each stored snapshot
  std::vector<StateSnapshot> snapshots;
  std::vector<Diagnostics> diagnostics;  ///< one entry per step 0..nt

  const StateSnapshot& final_state() const { return snapshots.back(); }
  bool full_stride() const { return stride == 1 && static_cast<int>(snapshots.size()) == tgrid.steps + 1; }
};

/// The linear algebra shared by the forward step and its discrete adjoint.
class ImexSystem {
 public:
  ImexSystem(Mode mode, const physics::ModelParams& params, std::shared_ptr<const kernel::DiscreteKernel> kernel,
             const GridSpec& grid, double dt, solvers::SolverOptions opts = {})
      : mode_(mode), params_(params), kernel_(std::move(kernel)), grid_(grid), dt_(dt), opts_(opts), spectral_(grid) {
    require(std::isfinite(dt) && dt > 0.0, "time step must be positive");
    require((mode == Mode::nonlocal) == (kernel_ != nullptr), "a kernel is required exactly in nonlocal mode");
    if (kernel_) require(kernel_->grid() == grid, "kernel was sampled on a different grid");
    const auto report = physics::validate_assumptions(params, kernel_.get());
    if (!report.all_passed()) throw ValidationError("assumption check failed: " + report.failures());

    shift_ = params_.tau / dt_ + params_.stabilization;
    const auto& lam = spectral_.laplacian_eigenvalues();
    interface_symbol_.resize(lam.size());
    for (std::size_t i = 0; i < lam.size(); ++i) {
      interface_symbol_[i] = mode_ == Mode::local ? -lam[i] : kernel_->dct_symbol()[i];
    }
    sigma_symbol_.resize(lam.size());
    for (std::size_t i = 0; i < lam.size(); ++i) sigma_symbol_[i] = 1.0 - dt_ * params_.mobility_n * lam[i];
  }

  Mode mode() const { return mode_; }
  const physics::ModelParams& params() const { return params_; }
  const GridSpec& grid() const { return grid_; }
  double dt() const { return dt_; }
  double shift() const { return shift_; }
  const kernel::DiscreteKernel* kernel() const { return kernel_.get(); }
  const spectral::NeumannSpectral& spectral() const { return spectral_; }
  const solvers::SolverOptions& solver_options() const { return opts_; }

  /// A v: -Lap v (local) or B_eps v (nonlocal).
  Field apply_interface(const Field& v) const {
    if (mode_ == Mode::local) return -1.0 * laplacian_neumann(v);
    return kernel::b_eps(*kernel_, v);
  }

  /// <A v, v> / 2
  double interface_energy(const Field& v) const {
    if (mode_ == Mode::local) return 0.5 * grad_sq(v);
    return kernel::energy_eps(*kernel_, v);
  }

  Field apply_G(const Field& v) const {
    Field out = apply_interface(v);
    out.axpy(shift_, v);
    return out;
  }

  /// W v = -m Lap v + P v
  Field apply_W(const Field& v, const Field& P) const {
    Field out = laplacian_neumann(v);
    out *= -params_.mobility_m;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += P[i] * v[i];
    return out;
  }

  /// Solves (G + dt G W G) x = rhs.
  Field solve_coupled(const Field& P, const Field& rhs, Field guess, const char* what) const {
    const double pbar = mean(P);
    const auto& lam = spectral_.laplacian_eigenvalues();
    std::vector<double> symbol(lam.size());
    for (std::size_t i = 0; i < lam.size(); ++i) {
      const double g = shift_ + interface_symbol_[i];
      const double w = -params_.mobility_m * lam[i] + pbar;
      symbol[i] = g * (1.0 + dt_ * w * g);
    }
    auto op = [&](const Field& x) {
      Field y = apply_G(x);
      Field z = apply_W(y, P);
      z *= dt_;
      z += x;
      return apply_G(z);
    };
    auto pre = [&](const Field& r) { return spectral_.solve(r, symbol); };
    solvers::pcg(op, pre, rhs, guess, opts_, what);
    return guess;
  }

  /// (I - dt n Lap)^{-1} rhs, exact via the DCT.
  Field solve_diffusion(const Field& rhs) const { return spectral_.solve(rhs, sigma_symbol_); }

  Field proliferation(const Field& phi) const { return map(phi, [&](double s) { return params_.P(s); }); }

  /// mu consistent with a state at rest: A phi + psi'(phi) - chi sigma.
  Field rest_potential(const Field& phi, const Field& sigma) const {
    Field mu = apply_interface(phi);
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += physics::psi_prime(phi[i]) - params_.chi * sigma[i];
    return mu;
  }

  Diagnostics diagnostics(const StateSnapshot& s) const {
    Diagnostics d;
    d.E_interface = interface_energy(s.phi);
    d.int_psi = inner(map(s.phi, physics::psi), Field(grid_, 1.0));
    d.half_sigma_sq = 0.5 * inner(s.sigma, s.sigma);
    d.chi_coupling = params_.chi * inner(s.sigma, map(s.phi, [](double p) { return 1.0 - p; }));
    d.E_total = d.E_interface + d.int_psi + d.half_sigma_sq + d.chi_coupling;
    d.mean_phi = mean(s.phi);
    d.mean_sigma = mean(s.sigma);
    return d;
  }

  StateSnapshot step(const StateSnapshot& s, const Field* u, const Field* w, int index = -1) const {
    const Field& phi = s.phi;
    const Field& sig = s.sigma;
    const double chi = params_.chi;
    const Field P = proliferation(phi);

    // b = -c phi^n + psi'(phi^n) - chi sigma^n, so that mu = G phi' + b.
    Field b(grid_);
    Field nut(grid_);  // N^n
    for (std::size_t i = 0; i < b.size(); ++i) {
      b[i] = -shift_ * phi[i] + physics::psi_prime(phi[i]) - chi * sig[i];
      nut[i] = sig[i] + chi * (1.0 - phi[i]);
    }
    Field source(grid_);  // P N^n - h u
    for (std::size_t i = 0; i < source.size(); ++i) {
      source[i] = P[i] * nut[i] - (u ? params_.h(phi[i]) * (*u)[i] : 0.0);
    }
    Field f = apply_W(b, P);
    f *= -dt_;
    f += phi;
    f.axpy(dt_, source);

    const Field phi_solved = solve_coupled(P, apply_G(f), phi, "forward step");

    StateSnapshot next;
    next.t = s.t + dt_;
    next.mu = apply_G(phi_solved);
    next.mu += b;

    // Re-assemble phi' from its own equation: exact discrete mass balance.
    Field reac(grid_);
    for (std::size_t i = 0; i < reac.size(); ++i) reac[i] = P[i] * (nut[i] - next.mu[i]);
    next.phi = laplacian_neumann(next.mu);
    next.phi *= params_.mobility_m;
    next.phi += reac;
    if (u) {
      for (std::size_t i = 0; i < reac.size(); ++i) next.phi[i] -= params_.h(phi[i]) * (*u)[i];
    }
    next.phi *= dt_;
    next.phi += phi;

    Field rhs = laplacian_neumann(next.phi);
    rhs *= -dt_ * params_.mobility_n * chi;
    rhs += sig;
    rhs.axpy(-dt_, reac);
    if (w) rhs.axpy(dt_, *w);
    next.sigma = solve_diffusion(rhs);

    if (!next.phi.all_finite() || !next.mu.all_finite() || !next.sigma.all_finite()) {
      std::ostringstream msg;
      msg << "non-finite state produced at step " << index << " (t = " << next.t << ")";
      throw NumericalError(msg.str());
    }
    return next;
  }

 private:
  Mode mode_;
  physics::ModelParams params_;
  std::shared_ptr<const kernel::DiscreteKernel> kernel_;
  GridSpec grid_;
  double dt_;
  solvers::SolverOptions opts_;
  spectral::NeumannSpectral spectral_;
  double shift_ = 0.0;
  std::vector<double> interface_symbol_;
  std::vector<double> sigma_symbol_;
};

/// One nonlocal step (builds the operators for this call only).
inline StateSnapshot step_nonlocal(const physics::ModelParams& params, std::shared_ptr<const kernel::DiscreteKernel> kernel,
                                   const StateSnapshot& s, const Field& u, const Field& w, double dt) {
  ImexSystem sys(Mode::nonlocal, params, std::move(kernel), s.phi.grid(), dt);
  return sys.step(s, &u, &w);
}

inline StateSnapshot step_local(const physics::ModelParams& params, const StateSnapshot& s, const Field& u, const Field& w,
                                double dt) {
  ImexSystem sys(Mode::local, params, nullptr, s.phi.grid(), dt);
  return sys.step(s, &u, &w);
}

struct ForwardOptions {
  int stride = 1;
  solvers::SolverOptions solver{};
};

inline void check_controls(const ControlPair& c, const GridSpec& g, int steps) {
  for (const auto* v : {&c.u, &c.w}) {
    if (v->empty()) continue;
    require(static_cast<int>(v->size()) == steps, "controls: need one field per time step");
    for (const auto& f : *v) require(f.grid() == g, "controls: grid mismatch");
  }
}

inline StateTrajectory solve_forward(const ImexSystem& sys, const Field& phi0, const Field& sigma0, const ControlPair& controls,
                                     const TimeGrid& tgrid, int stride = 1) {
  const GridSpec& g = sys.grid();
  require(phi0.grid() == g && sigma0.grid() == g, "solve_forward: initial data on the wrong grid");
  require(phi0.all_finite() && sigma0.all_finite(), "solve_forward: initial data must be finite");
  require(stride >= 1, "solve_forward: snapshot stride must be >= 1");
  require(tgrid.steps == 0 || std::abs(tgrid.dt() - sys.dt()) <= 1e-14 * sys.dt(), "solve_forward: time step mismatch");
  check_controls(controls, g, tgrid.steps);

  StateTrajectory traj;
  traj.mode = sys.mode();
  traj.tgrid = tgrid;
  traj.stride = stride;
  StateSnapshot cur{0.0, phi0, sys.rest_potential(phi0, sigma0), sigma0};
  traj.snapshots.push_back(cur);
  traj.steps.push_back(0);
  traj.diagnostics.push_back(sys.diagnostics(cur));
  for (int n = 0; n < tgrid.steps; ++n) {
    const Field* u = controls.u.empty() ? nullptr : &controls.u[n];
    const Field* w = controls.w.empty() ? nullptr : &controls.w[n];
    cur = sys.step(cur, u, w, n);
    cur.t = tgrid.time(n + 1);
    traj.diagnostics.push_back(sys.diagnostics(cur));
    if ((n + 1) % stride == 0 || n + 1 == tgrid.steps) {
      traj.snapshots.push_back(cur);
      traj.steps.push_back(n + 1);
    }
  }
  return traj;
}

inline StateTrajectory solve_forward(Mode mode, const physics::ModelParams& params,
                                     std::shared_ptr<const kernel::DiscreteKernel> kernel, const Field& phi0,
                                     const Field& sigma0, const ControlPair& controls, const TimeGrid& tgrid,
                                     const ForwardOptions& opts = {}) {
  ImexSystem sys(mode, params, std::move(kernel), phi0.grid(), tgrid.dt(), opts.solver);
  return solve_forward(sys, phi0, sigma0, controls, tgrid, opts.stride);
}

// ---------------------------------------------------------------------------
// Norms on full-stride trajectories (discrete surrogates of the Bochner norms).

namespace traj_norms {

/// sup_k ||a_k - b_k||_{L2}
template <class Get>
double sup_l2(const StateTrajectory& a, const StateTrajectory& b, Get get) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) m = std::max(m, norm_l2(get(a.snapshots[k]) - get(b.snapshots[k])));
  return m;
}

/// sup_k ||a_k - b_k||_{H1}
template <class Get>
double sup_h1(const StateTrajectory& a, const StateTrajectory& b, Get get) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) m = std::max(m, norm_h1(get(a.snapshots[k]) - get(b.snapshots[k])));
  return m;
}

/// (dt sum_k w_k ||a_k - b_k||^2)^(1/2), trapezoidal weights; `h1` selects the H1 norm.
template <class Get>
double l2_time(const StateTrajectory& a, const StateTrajectory& b, Get get, bool h1 = false) {
  const std::size_t K = a.snapshots.size();
  const double dt = a.tgrid.dt();
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double wk = (k == 0 || k + 1 == K) ? 0.5 : 1.0;
    const Field d = get(a.snapshots[k]) - get(b.snapshots[k]);
    const double nrm = h1 ? norm_h1(d) : norm_l2(d);
    acc += wk * nrm * nrm;
  }
  return std::sqrt(dt * acc);
}

}  // namespace traj_norms

struct DependenceReport {
  double numerator = 0.0;
  double denominator = 0.0;
  double ratio = 0.0;
};

/// Discrete version of the local continuous-dependence estimate: the state
/// difference in H1(0,T;H) + Linf(0,T;V) for phi, L2(0,T;V) for mu,
/// Linf(0,T;H) + L2(0,T;V) for sigma, over the control difference in
/// L2(0,T;L^{6/5}).
inline DependenceReport continuous_dependence_probe(const ImexSystem& sys, const Field& phi0, const Field& sigma0,
                                                    const ControlPair& c1, const ControlPair& c2, const TimeGrid& tgrid) {
  const auto t1 = solve_forward(sys, phi0, sigma0, c1, tgrid, 1);
  const auto t2 = solve_forward(sys, phi0, sigma0, c2, tgrid, 1);
  auto phi = [](const StateSnapshot& s) -> const Field& { return s.phi; };
  auto mu = [](const StateSnapshot& s) -> const Field& { return s.mu; };
  auto sig = [](const StateSnapshot& s) -> const Field& { return s.sigma; };

  const double dt = tgrid.dt();
  double dphi_dt = 0.0;
  for (std::size_t k = 1; k < t1.snapshots.size(); ++k) {
    const Field d1 = t1.snapshots[k].phi - t1.snapshots[k - 1].phi;
    const Field d2 = t2.snapshots[k].phi - t2.snapshots[k - 1].phi;
    const double nrm = norm_l2(d1 - d2) / dt;
    dphi_dt += dt * nrm * nrm;
  }
  DependenceReport rep;
  rep.numerator = std::sqrt(dphi_dt + std::pow(traj_norms::l2_time(t1, t2, phi), 2)) + traj_norms::sup_h1(t1, t2, phi) +
                  (tgrid.steps > 0 ? traj_norms::l2_time(t1, t2, mu, true) : 0.0) + traj_norms::sup_l2(t1, t2, sig) +
                  (tgrid.steps > 0 ? traj_norms::l2_time(t1, t2, sig, true) : 0.0);

  auto l65 = [](const Field& f) {
    double acc = 0.0;
    for (double x : f.values()) acc += std::pow(std::abs(x), 1.2);
    return std::pow(f.grid().cell_volume() * acc, 1.0 / 1.2);
  };
  auto control_norm = [&](const std::vector<Field>& a, const std::vector<Field>& b) {
    if (a.empty() && b.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t n = 0; n < static_cast<std::size_t>(tgrid.steps); ++n) {
      const Field za = a.empty() ? Field(sys.grid()) : a[n];
      const Field zb = b.empty() ? Field(sys.grid()) : b[n];
      const double v = l65(za - zb);
      acc += dt * v * v;
    }
    return std::sqrt(acc);
  };
  rep.denominator = control_norm(c1.u, c2.u) + control_norm(c1.w, c2.w);
  rep.ratio = rep.denominator > 0.0 ? rep.numerator / rep.denominator : 0.0;
  return rep;
}

}  // namespace tumorcp
