#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace tumorcp;
namespace ex = tumorcp::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tumorcp_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

const char* kSmall = R"(
# tiny run
[grid]
n = 16   # cells per side
L = 1

[time]
T = 0.01
nt = 10

[initial]
phi0 = gaussian-bump cx=0.5 cy=0.5 width=0.2
sigma0 = constant 0.5
)";

}  // namespace

TEST(KeyValues, SectionsCommentsAndLists) {
  const auto kv = config::KeyValues::parse_string("a = 1\n[s]\nx = 2.5 # note\nlist = 1, 2 3\nflag = true\n");
  EXPECT_EQ(kv.integer("a", 0), 1);
  EXPECT_DOUBLE_EQ(kv.real("s.x", 0.0), 2.5);
  EXPECT_EQ(kv.reals("s.list"), (std::vector<double>{1, 2, 3}));
  EXPECT_TRUE(kv.boolean("s.flag", false));
  EXPECT_EQ(kv.str("missing", "dflt"), "dflt");
}

TEST(KeyValues, RejectsMalformedInput) {
  EXPECT_THROW(config::KeyValues::parse_string("a = 1\na = 2\n"), ValidationError);
  EXPECT_THROW(config::KeyValues::parse_string("just words\n"), ValidationError);
  EXPECT_THROW(config::KeyValues::parse_string("[broken\n"), ValidationError);
  const auto kv = config::KeyValues::parse_string("x = abc\n");
  EXPECT_THROW(kv.real("x", 0.0), ValidationError);
}

TEST(RunConfig, ParsesAndAppliesDefaults) {
  const auto cfg = config::from_keys(config::KeyValues::parse_string(kSmall));
  EXPECT_EQ(cfg.grid.n, 16);
  EXPECT_EQ(cfg.time.steps, 10);
  EXPECT_EQ(cfg.mode, Mode::local);
  EXPECT_DOUBLE_EQ(cfg.phi0.arg("width", 0.0), 0.2);
  const Field phi = cfg.initial_phi();
  const double peak = *std::max_element(phi.values().begin(), phi.values().end());
  // nearest cell centers sit at distance sqrt(2)/32 from the bump center
  EXPECT_NEAR(peak, -1.0 + 1.8 * std::exp(-(2.0 / 1024) / 0.08), 1e-12);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config::from_keys(config::KeyValues::parse_string("[grid]\nsize = 16\n")), ValidationError);
  EXPECT_THROW(config::from_keys(config::KeyValues::parse_string("[grid]\nn = 0\n")), ValidationError);
  EXPECT_THROW(config::from_keys(config::KeyValues::parse_string("[time]\nT = -1\n")), ValidationError);
  EXPECT_THROW(config::from_keys(config::KeyValues::parse_string("[run]\nmode = sideways\n")), ValidationError);
  EXPECT_THROW(config::from_keys(config::KeyValues::parse_string("[bounds]\nu_min = 2\nu_max = 1\n")),
               ValidationError);
}

TEST(Shapes, ParseAndEvaluate) {
  const auto g = GridSpec::make(8, 2.0);
  const auto c = config::parse_shape("k", "constant -0.25");
  EXPECT_EQ(max_abs(config::make_field(c, g) - Field(g, -0.25)), 0.0);
  const auto cs = config::parse_shape("k", "cosine amp=2 kx=1 ky=0 offset=1");
  const Field f = config::make_field(cs, g);
  EXPECT_NEAR(f[0], 1.0 + 2.0 * std::cos(std::numbers::pi * 0.125 / 2.0), 1e-14);
  const Field tb = config::make_field(config::parse_shape("k", "two-bump width=0.1"), g);
  EXPECT_GT(max_abs(tb), 0.0);
  EXPECT_THROW(config::parse_shape("k", "triangle"), ValidationError);
  EXPECT_THROW(config::parse_shape("k", "gaussian-bump radius=1"), ValidationError);
  EXPECT_THROW(config::parse_shape("k", "gaussian-bump width=x"), ValidationError);
  EXPECT_THROW(config::parse_shape("k", "constant"), ValidationError);
  EXPECT_THROW(config::make_field(config::parse_shape("k", "gaussian-bump width=0"), g), ValidationError);
}

TEST(Shapes, ImportsChf1Fields) {
  const auto dir = scratch_dir("chf1");
  const auto g = GridSpec::make(16, 1.0);
  const Field src = testutil::random_field(g, 71);
  {
    std::ofstream os(dir / "phi0.chf", std::ios::binary);
    write_chf1(os, src);
  }
  auto kv = config::KeyValues::parse_string(std::string(kSmall));
  kv.set("initial.phi0", "chf1 " + (dir / "phi0.chf").string());
  const auto cfg = config::from_keys(kv);
  EXPECT_EQ(max_abs(cfg.initial_phi() - src), 0.0);

  kv.set("grid.n", "8");
  EXPECT_THROW(config::from_keys(kv).initial_phi(), ValidationError);
  fs::remove_all(dir);
}

TEST(Echo, ListsResolvedSettings) {
  const auto cfg = config::from_keys(config::KeyValues::parse_string(kSmall));
  std::ostringstream os;
  config::write_echo(os, cfg);
  const std::string echo = os.str();
  EXPECT_NE(echo.find("grid.n = 16"), std::string::npos);
  EXPECT_NE(echo.find("time.nt = 10"), std::string::npos);
  EXPECT_NE(echo.find("model.chi"), std::string::npos);
  // the echo is itself a valid configuration
  const auto again = config::from_keys(config::KeyValues::parse_string(echo));
  EXPECT_EQ(again.grid.n, cfg.grid.n);
  EXPECT_EQ(again.time.steps, cfg.time.steps);
}

TEST(Determinism, RepeatedRunsWriteIdenticalCsv) {
  const auto dir = scratch_dir("det");
  auto run = [&](const std::string& name) {
    const auto cfg = config::from_keys(config::KeyValues::parse_string(kSmall));
    const auto sys = ex::make_system(cfg);
    const auto tr = solve_forward(*sys, cfg.initial_phi(), cfg.initial_sigma(), cfg.initial_controls(), cfg.time);
    ex::write_diagnostics(dir / name, tr);
    return slurp(dir / name);
  };
  const std::string a = run("a.csv"), b = run("b.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  fs::remove_all(dir);
}

TEST(Experiments, ParallelMapKeepsOrderAndReportsFirstError) {
  const auto out = ex::parallel_map<int>(7, 3, [](std::size_t i) { return static_cast<int>(i * i); });
  EXPECT_EQ(out, (std::vector<int>{0, 1, 4, 9, 16, 25, 36}));
  try {
    ex::parallel_map<int>(5, 2, [](std::size_t i) -> int {
      if (i >= 2) throw NumericalError("job " + std::to_string(i));
      return 0;
    });
    FAIL() << "expected an error";
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "job 2");
  }
}

TEST(Experiments, SweepTableChecksMonotonicity) {
  ex::SweepTable t{{"a"}, {0.25, 0.125, 0.0625}, {{3.0}, {2.0}, {2.0}}};
  EXPECT_NO_THROW(t.assert_decreasing(0, false));
  EXPECT_THROW(t.assert_decreasing(0, true), AssertionFailure);
}

TEST(Experiments, EpsListGuard) {
  const auto g = GridSpec::make(64, 1.0);
  EXPECT_NO_THROW(ex::check_eps_list({0.25, 0.125}, g, 8.0));
  EXPECT_THROW(ex::check_eps_list({0.25, 0.1}, g, 8.0), ValidationError);
  EXPECT_THROW(ex::check_eps_list({0.125, 0.25}, g, 2.0), ValidationError);
  EXPECT_THROW(ex::check_eps_list({}, g, 2.0), ValidationError);
}

TEST(Experiments, RandomDirectionSeeded) {
  const auto g = GridSpec::make(8, 1.0);
  const auto tg = TimeGrid::make(0.1, 5);
  const auto a = ex::random_direction(g, tg, 9), b = ex::random_direction(g, tg, 9), c = ex::random_direction(g, tg, 10);
  ASSERT_EQ(a.u.size(), 5u);
  EXPECT_EQ(max_abs(a.u[3] - b.u[3]), 0.0);
  EXPECT_GT(max_abs(a.u[3] - c.u[3]), 0.0);
}
