#pragma once

// Constitutive functions of the tumor model and a checker for the standing
// assumptions on a concrete parameter set.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tumorcp/grid.hpp"
#include "tumorcp/kernel.hpp"

namespace tumorcp::physics {

/// Quartic double well psi(r) = (1 - r^2)^2 / 4.
/// psi'' = 3r^2 - 1 >= -1 gives C_psi = 1; psi'(r) r = r^4 - r^2 >= r^2 - 1
/// gives c_psi = 1.
struct Potential {
  double c_psi = 1.0;
  double C_psi = 1.0;

  static double psi(double r) {
    const double s = 1.0 - r * r;
    return 0.25 * s * s;
  }
  static double psi_prime(double r) { return r * r * r - r; }
  static double psi_second(double r) { return 3.0 * r * r - 1.0; }
};

inline double psi(double r) { return Potential::psi(r); }
inline double psi_prime(double r) { return Potential::psi_prime(r); }
inline double psi_second(double r) { return Potential::psi_second(r); }

struct ProliferationParams {
  double P0 = 0.5;  ///< rate in the healthy phase (s <= -1)
  double P1 = 1.5;  ///< rate in the tumor phase (s >= 1)
  double blend = 0.1;
};

// Piecewise-linear proliferation with its two kinks at s = -1 and s = 1
// replaced by quadratic pieces over |s -+ 1| < blend. The quadratic is the
// cubic Hermite interpolant of the end values and slopes (its cubic term
// vanishes), so P is C^1 and monotone between P0 and P1.
inline double prolif(const ProliferationParams& p, double s) {
  const double slope = 0.5 * (p.P1 - p.P0);
  const double d = p.blend;
  if (s <= -1.0 - d) return p.P0;
  if (s < -1.0 + d) {
    const double t = (s - (-1.0 - d)) / (2.0 * d);
    return p.P0 + slope * d * t * t;
  }
  if (s <= 1.0 - d) return slope * (s + 1.0) + p.P0;
  if (s < 1.0 + d) {
    const double t = ((1.0 + d) - s) / (2.0 * d);
    return p.P1 - slope * d * t * t;
  }
  return p.P1;
}

inline double prolif_prime(const ProliferationParams& p, double s) {
  const double slope = 0.5 * (p.P1 - p.P0);
  const double d = p.blend;
  if (s <= -1.0 - d) return 0.0;
  if (s < -1.0 + d) return slope * (s - (-1.0 - d)) / (2.0 * d);
  if (s <= 1.0 - d) return slope;
  if (s < 1.0 + d) return slope * ((1.0 + d) - s) / (2.0 * d);
  return 0.0;
}

/// Radiotherapy interpolation h(s) = h_scale * smoothstep((s + 1) / 2),
/// constant outside [-1, 1].
inline double interp_h(double h_scale, double s) {
  const double t = std::clamp(0.5 * (s + 1.0), 0.0, 1.0);
  return h_scale * t * t * (3.0 - 2.0 * t);
}

inline double interp_h_prime(double h_scale, double s) {
  const double t = 0.5 * (s + 1.0);
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return h_scale * 3.0 * t * (1.0 - t);
}

struct ModelParams {
  double tau = 0.1;
  double chi = 0.25;
  double mobility_m = 1.0;
  double mobility_n = 1.0;
  Potential potential{};
  ProliferationParams prolif{};
  double h_scale = 1.0;
  double stabilization = 2.0;
  /// Test hook: when false, P is treated as identically zero (no reaction).
  bool reaction_enabled = true;

  double P(double s) const { return reaction_enabled ? physics::prolif(prolif, s) : 0.0; }
  double P_prime(double s) const { return reaction_enabled ? physics::prolif_prime(prolif, s) : 0.0; }
  double h(double s) const { return interp_h(h_scale, s); }
  double h_prime(double s) const { return interp_h_prime(h_scale, s); }
};

/// R = P(phi) (sigma + chi (1 - phi) - mu), pointwise.
inline Field reaction(const ModelParams& params, const Field& phi, const Field& sigma, const Field& mu) {
  phi.check_same(sigma);
  phi.check_same(mu);
  Field out(phi.grid());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = params.P(phi[i]) * (sigma[i] + params.chi * (1.0 - phi[i]) - mu[i]);
  }
  return out;
}

struct AssumptionCheck {
  std::string name;
  bool passed = false;
  double margin = 0.0;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
  }
  const AssumptionCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
  std::string failures() const {
    std::string out;
    for (const auto& c : checks) {
      if (!c.passed) out += (out.empty() ? "" : "; ") + c.name + ": " + c.detail;
    }
    return out;
  }
};

/// Checks A2 (potential constants), A3 (tau > 0, 0 <= chi < sqrt(c_psi)),
/// A4 (mobility bounds), A6 (h >= 0), B4 (P >= min(P0, P1) > 0) and, when a
/// kernel is given, the discrete B2 positivity
///   min_x (J_eps * 1)(x) + min_r psi''(r) > chi^2.
inline AssumptionReport validate_assumptions(const ModelParams& p, const kernel::DiscreteKernel* kernel = nullptr) {
  AssumptionReport rep;
  const Potential& pot = p.potential;

  {
    // Sample the A2 inequalities on a dense grid; for the quartic they are
    // attained analytically (psi'' min at r = 0, psi' r - c r^2 min at r^2 = 1).
    double worst_semiconvex = INFINITY;
    double worst_coercive = INFINITY;
    for (int i = -4000; i <= 4000; ++i) {
      const double r = i * 1e-3;
      worst_semiconvex = std::min(worst_semiconvex, Potential::psi_second(r) + pot.C_psi);
      worst_coercive = std::min(worst_coercive, Potential::psi_prime(r) * r - (pot.c_psi * r * r - 1.0 / pot.c_psi));
    }
    const double margin = std::min(worst_semiconvex, worst_coercive);
    rep.checks.push_back({"A2", pot.c_psi > 0 && pot.C_psi > 0 && margin >= -1e-12, margin,
                          "psi'' >= -C_psi and psi' r >= c_psi r^2 - 1/c_psi"});
  }
  {
    const double margin = std::min(p.tau, std::sqrt(pot.c_psi) - p.chi);
    const bool ok = p.tau > 0.0 && p.chi >= 0.0 && p.chi < std::sqrt(pot.c_psi);
    rep.checks.push_back({"A3", ok, margin,
                          ok ? "tau > 0 and 0 <= chi < sqrt(c_psi)"
                             : "need tau > 0 and 0 <= chi < sqrt(c_psi) = " + std::to_string(std::sqrt(pot.c_psi)) +
                                   " (tau = " + std::to_string(p.tau) + ", chi = " + std::to_string(p.chi) + ")"});
  }
  {
    const double margin = std::min(p.mobility_m, p.mobility_n);
    const bool ok = margin > 0.0 && std::isfinite(p.mobility_m) && std::isfinite(p.mobility_n);
    rep.checks.push_back({"A4", ok, margin, "mobilities bounded away from zero"});
  }
  {
    rep.checks.push_back({"A6", p.h_scale >= 0.0 && std::isfinite(p.h_scale), p.h_scale, "h nonnegative and bounded"});
  }
  {
    const double lower = std::min(p.prolif.P0, p.prolif.P1);
    const bool ok = lower > 0.0 && p.prolif.blend > 0.0 && p.prolif.blend < 1.0;
    rep.checks.push_back({"B4", ok, lower,
                          ok ? "P >= min(P0, P1) > 0" : "P must be bounded below by a positive constant (P0, P1 > 0)"});
  }
  {
    rep.checks.push_back({"S", p.stabilization >= pot.C_psi, p.stabilization - pot.C_psi, "stabilization S >= C_psi"});
  }
  if (kernel != nullptr) {
    const auto& one = kernel->conv_one();
    double min_one = INFINITY;
    for (double x : one.values()) min_one = std::min(min_one, x);
    const double margin = min_one - pot.C_psi - p.chi * p.chi;
    rep.checks.push_back({"B2", margin > 0.0, margin, "min (J*1) + min psi'' > chi^2"});
  }
  return rep;
}

}  // namespace tumorcp::physics
