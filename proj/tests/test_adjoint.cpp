#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace tumorcp;
using testutil::cos_x;
using testutil::tumor_seed;

namespace {

struct Scenario {
  GridSpec g = GridSpec::make(24, 1.0);
  int nt = 30;
  TimeGrid tg = TimeGrid::make(0.03, 30);
  physics::ModelParams m{};
  ControlPair c = ControlPair::constant(g, nt, 0.3, 0.1);
  std::unique_ptr<ImexSystem> sys;
  StateTrajectory fwd;

  explicit Scenario(Mode mode, physics::ModelParams params = {}) : m(params) {
    auto k = mode == Mode::nonlocal ? std::make_shared<const kernel::DiscreteKernel>(kernel::build_profile(0.0, 2), 0.25, g)
                                    : nullptr;
    sys = std::make_unique<ImexSystem>(mode, m, k, g, tg.dt());
    fwd = solve_forward(*sys, tumor_seed(g), Field(g, 0.5), c, tg);
  }

  CostSpec cost(double aO, double aQ, double bQ) const {
    auto s = CostSpec::with_static_targets(g, nt, Field(g, 0.2) + 0.5 * cos_x(g), tumor_seed(g, 0.1), Field(g, 0.4));
    s.alpha_Omega = aO;
    s.alpha_Q = aQ;
    s.beta_Q = bQ;
    return s;
  }
};

double traj_max(const AdjointTrajectory& a) {
  double m = 0.0;
  for (const auto& s : a.snapshots) m = std::max({m, max_abs(s.p), max_abs(s.q), max_abs(s.r)});
  return m;
}

}  // namespace

TEST(Adjoint, TerminalConditions) {
  const auto g = GridSpec::make(8, 1.0);
  CostSpec spec;
  spec.alpha_Omega = 2.0;
  spec.phi_Omega = Field(g, 0.25);
  const auto [s, r] = terminal_conditions(spec, Field(g, 1.0));
  for (double x : s.values()) EXPECT_DOUBLE_EQ(x, 1.5);
  EXPECT_EQ(max_abs(r), 0.0);
}

TEST(Adjoint, RecoverPqConstantCase) {
  const auto g = GridSpec::make(8, 1.0);
  const physics::ModelParams m;
  const double P = m.P(0.0);
  const auto [p, q] = recover_pq(m, Field(g, 0.0), Field(g, 2.0), Field(g, 0.5));
  const double pe = (2.0 + m.tau * P * 0.5) / (1.0 + m.tau * P);
  for (double x : p.values()) EXPECT_NEAR(x, pe, 1e-12);
  for (double x : q.values()) EXPECT_NEAR(x, (2.0 - pe) / m.tau, 1e-10);
}

TEST(Adjoint, RecoverPqSatisfiesEliminatedEquation) {
  const auto g = GridSpec::make(32, 1.0);
  const physics::ModelParams m;
  const Field phi = tumor_seed(g);
  const Field s = testutil::random_field(g, 51), r = testutil::random_field(g, 52);
  const auto [p, q] = recover_pq(m, phi, s, r);
  EXPECT_LE(max_abs(dual2_residual(m, phi, p, q, r)), 1e-7 * max_abs(q));
  EXPECT_LE(max_abs(p + m.tau * q - s), 1e-12);
}

TEST(Adjoint, StepsSatisfyEliminatedEquationAtPreviousState) {
  // q = W p - P r with W, P evaluated at phi^{m-1}
  Scenario st(Mode::local);
  const auto cost = st.cost(1.0, 1.0, 1.0);
  const auto adj = solve_adjoint(*st.sys, st.fwd, st.c, cost);
  for (int m : {1, 10, st.nt}) {
    const auto& a = adj.snapshots[m];
    const Field& phi_prev = st.fwd.snapshots[m - 1].phi;
    const auto [p, q] = recover_pq(st.m, phi_prev, a.s, a.r, solvers::SolverOptions{1e-13, 500});
    const double scale = max_abs(a.p) + 1e-300;
    EXPECT_LE(max_abs(p - a.p), 1e-6 * scale) << "m = " << m;
  }
}

TEST(Adjoint, ZeroCostDataGiveZeroDualState) {
  for (Mode mode : {Mode::local, Mode::nonlocal}) {
    Scenario st(mode);
    const auto adj = solve_adjoint(*st.sys, st.fwd, st.c, st.cost(0.0, 0.0, 0.0));
    ASSERT_EQ(adj.snapshots.size(), static_cast<std::size_t>(st.nt + 1));
    EXPECT_LE(traj_max(adj), 1e-12);
  }
}

TEST(Adjoint, NutrientMultiplierVanishesWhenDecoupled) {
  physics::ModelParams m;
  m.chi = 0.0;
  m.reaction_enabled = false;
  Scenario st(Mode::local, m);
  const auto adj = solve_adjoint(*st.sys, st.fwd, st.c, st.cost(1.0, 1.0, 0.0));
  double rmax = 0.0, pmax = 0.0;
  for (const auto& a : adj.snapshots) {
    rmax = std::max(rmax, max_abs(a.r));
    pmax = std::max(pmax, max_abs(a.p));
  }
  EXPECT_EQ(rmax, 0.0);
  EXPECT_GT(pmax, 0.0);
}

TEST(Adjoint, LinearInCostData) {
  Scenario st(Mode::nonlocal);
  const auto a = solve_adjoint(*st.sys, st.fwd, st.c, st.cost(1.0, 0.0, 0.0));
  const auto b = solve_adjoint(*st.sys, st.fwd, st.c, st.cost(0.0, 2.0, 3.0));
  const auto ab = solve_adjoint(*st.sys, st.fwd, st.c, st.cost(1.0, 2.0, 3.0));
  const double scale = traj_max(ab);
  for (int m = 0; m <= st.nt; ++m) {
    const auto& x = ab.snapshots[m];
    EXPECT_LE(max_abs(a.snapshots[m].p + b.snapshots[m].p - x.p), 1e-8 * scale);
    EXPECT_LE(max_abs(a.snapshots[m].q + b.snapshots[m].q - x.q), 1e-8 * scale);
    EXPECT_LE(max_abs(a.snapshots[m].r + b.snapshots[m].r - x.r), 1e-8 * scale);
  }
}

TEST(Adjoint, CombinedVariableMatchesDefinition) {
  Scenario st(Mode::local);
  const auto adj = solve_adjoint(*st.sys, st.fwd, st.c, st.cost(1.0, 1.0, 1.0));
  for (const auto& a : adj.snapshots) EXPECT_LE(max_abs(a.s - (a.p + st.m.tau * a.q)), 1e-14 * (1.0 + max_abs(a.s)));
  EXPECT_DOUBLE_EQ(adj.snapshots.front().t, 0.0);
  EXPECT_DOUBLE_EQ(adj.snapshots.back().t, st.tg.final_time);
}

TEST(Adjoint, RejectsMismatchedTrajectory) {
  Scenario st(Mode::local);
  const auto strided = solve_forward(*st.sys, tumor_seed(st.g), Field(st.g, 0.5), st.c, st.tg, 3);
  EXPECT_THROW(solve_adjoint(*st.sys, strided, st.c, st.cost(1, 0, 0)), ValidationError);
  auto bad = st.cost(1, 0, 0);
  bad.alpha_Q = -1.0;
  EXPECT_THROW(solve_adjoint(*st.sys, st.fwd, st.c, bad), ValidationError);
}
