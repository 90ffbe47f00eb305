#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace tumorcp;
using namespace tumorcp::physics;

namespace {
double central(auto&& f, double x, double d = 1e-6) { return (f(x + d) - f(x - d)) / (2 * d); }
}  // namespace

TEST(Potential, ValuesAndDerivatives) {
  EXPECT_DOUBLE_EQ(psi(1.0), 0.0);
  EXPECT_DOUBLE_EQ(psi(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(psi(0.0), 0.25);
  EXPECT_DOUBLE_EQ(psi_prime(2.0), 6.0);
  EXPECT_DOUBLE_EQ(psi_second(0.0), -1.0);
  for (double r : {-1.7, -0.4, 0.0, 0.3, 1.2}) {
    EXPECT_NEAR(psi_prime(r), central(psi, r), 1e-8);
    EXPECT_NEAR(psi_second(r), central(psi_prime, r), 1e-8);
  }
}

TEST(Proliferation, PlateausAndMidpoint) {
  const ProliferationParams p{};
  EXPECT_DOUBLE_EQ(prolif(p, -2.0), p.P0);
  EXPECT_DOUBLE_EQ(prolif(p, 2.0), p.P1);
  EXPECT_DOUBLE_EQ(prolif(p, 0.0), 0.5 * (p.P0 + p.P1));
  EXPECT_DOUBLE_EQ(prolif_prime(p, -2.0), 0.0);
  EXPECT_DOUBLE_EQ(prolif_prime(p, 0.0), 0.5 * (p.P1 - p.P0));
}

TEST(Proliferation, ContinuouslyDifferentiableAndMonotone) {
  const ProliferationParams p{0.3, 2.0, 0.2};
  auto f = [&](double s) { return prolif(p, s); };
  double prev = -INFINITY;
  for (int i = -300; i <= 300; ++i) {
    const double s = i * 0.01 + 0.0037;
    EXPECT_NEAR(prolif_prime(p, s), central(f, s), 1e-6) << "s = " << s;
    EXPECT_GE(f(s), prev);
    EXPECT_GE(f(s), p.P0);
    EXPECT_LE(f(s), p.P1);
    prev = f(s);
  }
  // both sides of each kink agree
  for (double k : {-1.2, -0.8, 0.8, 1.2}) EXPECT_NEAR(prolif(p, k - 1e-12), prolif(p, k + 1e-12), 1e-10);
}

TEST(Interpolation, EndpointsAndDerivative) {
  EXPECT_DOUBLE_EQ(interp_h(2.0, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(interp_h(2.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(interp_h(2.0, -3.0), 0.0);
  EXPECT_DOUBLE_EQ(interp_h(2.0, 3.0), 2.0);
  EXPECT_DOUBLE_EQ(interp_h(2.0, 0.0), 1.0);
  auto f = [](double s) { return interp_h(1.5, s); };
  for (double s = -1.5; s <= 1.5; s += 0.0731) {
    EXPECT_GE(f(s), 0.0);
    EXPECT_NEAR(interp_h_prime(1.5, s), central(f, s), 1e-7);
  }
}

TEST(Reaction, PointwiseValue) {
  const auto g = GridSpec::make(4, 1.0);
  ModelParams m;
  const Field phi(g, 0.0), sigma(g, 1.0), mu(g, 0.0);
  const Field r = reaction(m, phi, sigma, mu);
  // P(0) = 1, sigma + chi (1 - phi) - mu = 1.25
  for (double x : r.values()) EXPECT_DOUBLE_EQ(x, 1.25);
  m.reaction_enabled = false;
  EXPECT_EQ(max_abs(reaction(m, phi, sigma, mu)), 0.0);
}

TEST(Assumptions, DefaultsPassWithResolvedKernel) {
  const auto g = GridSpec::make(32, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.125, g);
  const auto rep = validate_assumptions(ModelParams{}, &k);
  EXPECT_TRUE(rep.all_passed()) << rep.failures();
  ASSERT_NE(rep.find("B2"), nullptr);
  EXPECT_GT(rep.find("B2")->margin, 0.0);
}

TEST(Assumptions, StrongChemotaxisFailsA3) {
  ModelParams m;
  m.chi = 1.5;
  const auto rep = validate_assumptions(m);
  EXPECT_FALSE(rep.all_passed());
  EXPECT_FALSE(rep.find("A3")->passed);
  EXPECT_NE(rep.failures().find("A3"), std::string::npos);
}

TEST(Assumptions, VanishingProliferationFailsB4) {
  ModelParams m;
  m.prolif.P0 = 0.0;
  const auto rep = validate_assumptions(m);
  EXPECT_FALSE(rep.find("B4")->passed);
  EXPECT_TRUE(rep.find("A3")->passed);
}

TEST(Assumptions, B2MarginUsesSmallestConvolvedOne) {
  const auto g = GridSpec::make(16, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.5, g);
  ModelParams m;
  m.chi = 0.6;
  double lo = INFINITY;
  for (double x : k.conv_one().values()) lo = std::min(lo, x);
  const auto rep = validate_assumptions(m, &k);
  EXPECT_DOUBLE_EQ(rep.find("B2")->margin, lo - 1.0 - 0.36);
}
