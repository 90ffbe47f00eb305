#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace tumorcp;
using testutil::cos_x;
using testutil::random_field;

namespace {

// Composite Simpson rule, independent of the library's Gauss-Kronrod check.
template <class F>
double simpson(F&& f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

// max over cells at distance >= margin from the boundary
double interior_max(const Field& v, double margin) {
  const GridSpec& g = v.grid();
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto x = g.point(i);
    bool inside = true;
    for (int a = 0; a < g.dim; ++a) inside = inside && x[a] >= margin && x[a] <= g.length - margin;
    if (inside) m = std::max(m, std::abs(v[i]));
  }
  return m;
}

double consistency_error(double eps, int n) {
  const auto g = GridSpec::make(n, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), eps, g);
  const Field v = cos_x(g);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const Field err = kernel::b_eps(k, v) - pi2 * v;
  return interior_max(err, eps) / pi2;
}

}  // namespace

TEST(KernelProfile, NormalizationAgainstSimpson) {
  const auto p = kernel::build_profile(0.0, 2);
  EXPECT_DOUBLE_EQ(p.c_dim, std::numbers::pi);
  const double integral = simpson([&](double r) { return r * r * r * p.rho(r); }, 0.0, 1.0, 2000);
  EXPECT_NEAR(integral, 2.0 / std::numbers::pi, 1e-10);
}

TEST(KernelProfile, ThreeDimensionalNormalization) {
  for (double alpha : {0.0, 0.5}) {
    const auto p = kernel::build_profile(alpha, 3);
    EXPECT_NEAR(p.c_dim, 4.0 * std::numbers::pi / 3.0, 1e-14);
    const double integral = simpson([&](double r) { return std::pow(r, 4.0 - alpha) * p.rho(r); }, 0.0, 1.0, 4000);
    EXPECT_NEAR(integral, 2.0 / p.c_dim, 1e-9) << "alpha = " << alpha;
  }
}

TEST(KernelProfile, VanishesToSecondOrderAtSupportEdge) {
  const auto p = kernel::build_profile(0.0, 2);
  EXPECT_EQ(p.rho(1.0), 0.0);
  EXPECT_EQ(p.rho_prime(1.0), 0.0);
  EXPECT_EQ(p.rho_second(1.0), 0.0);
  EXPECT_EQ(p.rho(1.5), 0.0);
  // one-sided limits from inside
  EXPECT_NEAR(p.rho_second(1.0 - 1e-9), 0.0, 1e-7 * p.coeff);
  const double d = 1e-5;
  for (double r : {0.1, 0.4, 0.8}) {
    EXPECT_NEAR(p.rho_prime(r), (p.rho(r + d) - p.rho(r - d)) / (2 * d), 1e-6 * p.coeff);
    EXPECT_NEAR(p.rho_second(r), (p.rho_prime(r + d) - p.rho_prime(r - d)) / (2 * d), 1e-5 * p.coeff);
  }
}

TEST(KernelProfile, Rho1ConstantFiniteAndMatchesQuadrature) {
  const auto p = kernel::build_profile(0.0, 2);
  const double q = simpson([&](double r) { return r * std::abs(p.rho_prime(r)); }, 0.0, 1.0, 2000);
  EXPECT_GT(p.rho1_constant(), 0.0);
  EXPECT_NEAR(p.rho1_constant(), q, 1e-10 * q);
}

TEST(KernelProfile, RejectsInadmissibleAlpha) {
  EXPECT_THROW(kernel::build_profile(0.5, 2), ValidationError);
  EXPECT_THROW(kernel::build_profile(-0.1, 3), ValidationError);
  EXPECT_THROW(kernel::build_profile(1.0, 3), ValidationError);
  EXPECT_THROW(kernel::build_profile(0.0, 4), ValidationError);
}

TEST(DiscreteKernel, StencilSymmetricAndNonnegative) {
  const auto g = GridSpec::make(32, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.25, g);
  const int m = k.half_width();
  for (int a = -m; a <= m; ++a) {
    for (int b = -m; b <= m; ++b) {
      const int z[2] = {a, b}, mz[2] = {-a, -b};
      EXPECT_EQ(k.stencil_at(z), k.stencil_at(mz));
      EXPECT_GE(k.stencil_at(z), 0.0);
      if ((a * a + b * b) * g.h() * g.h() >= 0.25 * 0.25) {
        EXPECT_EQ(k.stencil_at(z), 0.0);
      }
    }
  }
  for (double x : k.conv_one().values()) EXPECT_GT(x, 0.0);
}

TEST(DiscreteKernel, RejectsUnresolvedEps) {
  const auto g = GridSpec::make(32, 1.0);
  EXPECT_THROW(kernel::DiscreteKernel(kernel::build_profile(0.0, 2), 1.5 / 32, g), ValidationError);
  EXPECT_NO_THROW(kernel::DiscreteKernel(kernel::build_profile(0.0, 2), 2.0 / 32, g));
}

TEST(DiscreteKernel, CenterConvOneMatchesRadialQuadrature) {
  const auto g = GridSpec::make(128, 1.0);
  const double eps = 16 * g.h();
  const auto p = kernel::build_profile(0.0, 2);
  const kernel::DiscreteKernel k(p, eps, g);
  // int J_eps over the disk of radius eps = 2 pi int_0^eps r rho(r/eps) / eps^4 dr
  const double oracle = 2.0 * std::numbers::pi * simpson([&](double r) { return r * p.rho(r / eps); }, 0.0, eps, 4000) /
                        std::pow(eps, 4);
  const std::size_t center = static_cast<std::size_t>(64 * 128 + 64);
  EXPECT_LE(testutil::rel_diff(k.conv_one()[center], oracle), 1e-3);
  // truncated near the boundary
  EXPECT_LT(k.conv_one()[0], k.conv_one()[center]);
  EXPECT_LT(k.conv_one()[64], k.conv_one()[center]);
}

TEST(DiscreteKernel, FastConvolutionMatchesDirectSum) {
  const auto g = GridSpec::make(32, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 8 * g.h(), g);
  const Field v = random_field(g, 21);
  const Field fast = kernel::convolve(k, v);
  const Field direct = kernel::convolve_direct(k, v);
  EXPECT_LE(max_abs(fast - direct), 1e-12 * max_abs(direct));
  const Field one = kernel::convolve(k, Field(g, 1.0));
  EXPECT_LE(max_abs(one - k.conv_one()), 1e-12 * max_abs(one));
}

TEST(DiscreteKernel, ConvolutionIsLinear) {
  const auto g = GridSpec::make(32, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.2, g);
  const Field u = random_field(g, 22), v = random_field(g, 23);
  const Field lhs = kernel::convolve(k, 2.0 * u + (-3.0) * v);
  const Field rhs = 2.0 * kernel::convolve(k, u) + (-3.0) * kernel::convolve(k, v);
  EXPECT_LE(max_abs(lhs - rhs), 1e-12 * max_abs(rhs));
}

TEST(BEps, ConstantsMapToZeroExactly) {
  const auto g = GridSpec::make(32, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.25, g);
  EXPECT_EQ(max_abs(kernel::b_eps(k, Field(g, 0.731))), 0.0);
  EXPECT_EQ(kernel::energy_eps(k, Field(g, -4.2)), 0.0);
}

TEST(BEps, SelfAdjointAndPositive) {
  const auto g = GridSpec::make(32, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.25, g);
  const Field u = random_field(g, 24), v = random_field(g, 25);
  const double a = inner(kernel::b_eps(k, u), v), b = inner(u, kernel::b_eps(k, v));
  EXPECT_LE(std::abs(a - b), 1e-10 * std::abs(a));
  for (std::uint64_t s = 30; s < 35; ++s) {
    const Field w = random_field(g, s);
    const double e = kernel::energy_eps(k, w);
    EXPECT_GE(e, 0.0);
    EXPECT_NEAR(e, 0.5 * inner(kernel::b_eps(k, w), w), 1e-12 * e);
  }
}

TEST(BEps, EnergyMatchesDoubleSum) {
  const auto g = GridSpec::make(12, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 3 * g.h(), g);
  const Field v = random_field(g, 36);
  // 1/4 sum_x sum_y J(x - y) |v(x) - v(y)|^2 h^4
  double acc = 0.0;
  for (std::size_t x = 0; x < v.size(); ++x) {
    for (std::size_t y = 0; y < v.size(); ++y) {
      const int z[2] = {g.index_along(x, 0) - g.index_along(y, 0), g.index_along(x, 1) - g.index_along(y, 1)};
      const double d = v[x] - v[y];
      acc += k.stencil_at(z) * d * d;
    }
  }
  const double direct = 0.25 * acc * g.cell_volume() * g.cell_volume();
  EXPECT_NEAR(kernel::energy_eps(k, v), direct, 1e-12 * direct);
}

TEST(BEps, ConsistentWithLaplacianAsEpsShrinks) {
  const double e4 = consistency_error(0.25, 128);
  const double e8 = consistency_error(0.125, 128);
  const double e16 = consistency_error(0.0625, 128);
  EXPECT_LE(e8, 0.05);
  EXPECT_LT(e8, e4);
  EXPECT_LT(e16, e8);
}

TEST(BEps, EnergyApproachesDirichletEnergy) {
  const auto g = GridSpec::make(128, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.125, g);
  const double exact = std::numbers::pi * std::numbers::pi / 4.0;
  EXPECT_LE(testutil::rel_diff(kernel::energy_eps(k, cos_x(g)), exact), 0.05);
}

TEST(BEps, PreconditionerSymbolExactOnInteriorModes) {
  // For eps << L the symbol predicts B_eps on a cosine mode away from the walls.
  const auto g = GridSpec::make(64, 1.0);
  const kernel::DiscreteKernel k(kernel::build_profile(0.0, 2), 0.125, g);
  const Field v = cos_x(g);
  const double predicted = k.dct_symbol()[1 * 64 + 0];
  const Field bv = kernel::b_eps(k, v);
  const std::size_t mid = 20 * 64 + 32;
  EXPECT_NEAR(bv[mid], predicted * v[mid], 1e-10 * predicted);
}
