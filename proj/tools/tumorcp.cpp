// tumorcp: command-line driver for forward runs, sweeps, gradient checks and
// optimal-control experiments. Exit codes: 0 ok, 1 validation, 2 numerical,
// 3 assertion.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "tumorcp/tumorcp.hpp"

namespace fs = std::filesystem;
using namespace tumorcp;
namespace ex = tumorcp::experiments;

namespace {

struct Flags {
  std::string config;
  std::string out;
  int jobs = ex::default_jobs();
  std::optional<std::uint64_t> seed;
  std::optional<int> snapshots;
  bool full = false;
};

config::RunConfig load_config(const Flags& f) {
  auto kv = f.config.empty() ? config::KeyValues{} : config::KeyValues::load(f.config);
  if (!f.out.empty()) kv.set("output.dir", f.out);
  if (f.seed) kv.set("run.seed", std::to_string(*f.seed));
  if (f.snapshots) kv.set("output.snapshots", std::to_string(*f.snapshots));
  return config::from_keys(kv);
}

fs::path prepare(const config::RunConfig& cfg, const std::string& command) {
  const fs::path dir = cfg.out_dir;
  ex::ensure_dir(dir);
  ex::write_echo(dir, cfg, command);
  return dir;
}

void print_table(const ex::SweepTable& t) {
  std::printf("%-12s", "eps");
  for (const auto& c : t.columns) std::printf(" %-18s", c.c_str());
  std::printf("\n");
  for (std::size_t i = 0; i < t.eps.size(); ++i) {
    std::printf("%-12.6g", t.eps[i]);
    for (double v : t.values[i]) std::printf(" %-18.10e", v);
    std::printf("\n");
  }
}

int cmd_forward(const Flags& f) {
  const auto cfg = load_config(f);
  const auto dir = prepare(cfg, "forward");
  const auto sys = ex::make_system(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const int stride = cfg.snapshot_stride > 0 ? cfg.snapshot_stride : std::max(cfg.time.steps, 1);
  const auto traj = solve_forward(*sys, cfg.initial_phi(), cfg.initial_sigma(), cfg.initial_controls(), cfg.time, stride);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ex::write_diagnostics(dir / "diagnostics.csv", traj);
  if (cfg.snapshot_stride > 0 || cfg.time.steps == 0) ex::write_snapshots(dir / "snapshots", traj);

  const auto& d = traj.diagnostics;
  double max_increase = -INFINITY;
  for (std::size_t k = 1; k < d.size(); ++k) max_increase = std::max(max_increase, d[k].E_total - d[k - 1].E_total);
  std::printf("forward (%s): n = %d, nt = %d, T = %g, %.2f s\n", to_string(cfg.mode).c_str(), cfg.grid.n,
              cfg.time.steps, cfg.time.final_time, secs);
  std::printf("  mean(phi): %.12f -> %.12f (drift %.3e)\n", d.front().mean_phi, d.back().mean_phi,
              d.back().mean_phi - d.front().mean_phi);
  std::printf("  mean(sigma): %.12f -> %.12f\n", d.front().mean_sigma, d.back().mean_sigma);
  std::printf("  energy: %.10f -> %.10f", d.front().E_total, d.back().E_total);
  if (d.size() > 1) std::printf(", max per-step increase %.3e", max_increase);
  std::printf("\n  output: %s\n", dir.string().c_str());
  return 0;
}

int cmd_eps_sweep(const Flags& f) {
  const auto cfg = load_config(f);
  const auto dir = prepare(cfg, "eps-sweep");
  const auto t = ex::eps_sweep(cfg, f.jobs, false);
  t.write(dir / "eps_sweep.csv");
  print_table(t);
  if (t.eps.size() > 1) {
    t.assert_decreasing(0, true);
    t.assert_decreasing(1, true);
  }
  return 0;
}

int cmd_adjoint_sweep(const Flags& f) {
  const auto cfg = load_config(f);
  const auto dir = prepare(cfg, "adjoint-sweep");
  const auto t = ex::adjoint_sweep(cfg, f.jobs, false);
  t.write(dir / "adjoint_sweep.csv");
  print_table(t);
  if (t.eps.size() > 1)
    for (std::size_t c = 0; c < 3; ++c) t.assert_decreasing(c, true);
  return 0;
}

int cmd_grad_check(const Flags& f) {
  const auto cfg = load_config(f);
  const auto dir = prepare(cfg, "grad-check");
  const auto out = ex::run_grad_check(cfg);
  ex::write_grad_check(dir / "grad_check.csv", out.report);
  for (std::size_t k = 0; k < out.report.steps.size(); ++k)
    std::printf("  step %-12.6g remainder %.6e\n", out.report.steps[k], out.report.remainders[k]);
  std::printf("%s: %s\n", out.passed ? "PASS" : "FAIL", out.summary.c_str());
  if (!out.passed) throw AssertionFailure("gradient check thresholds not met");
  return 0;
}

int cmd_optimize(const Flags& f) {
  const auto cfg = load_config(f);
  const auto dir = prepare(cfg, "optimize");
  const auto sys = ex::make_system(cfg);
  const auto out = ex::run_optimize(*sys, cfg);
  ex::write_history(dir / "history.csv", out.result.history);
  ex::write_stacked(dir / "controls_u.chf", out.result.controls.u);
  ex::write_stacked(dir / "controls_w.chf", out.result.controls.w);
  for (const auto& h : out.result.history)
    std::printf("  iter %3d cost %.10e vi %.3e step %.3g\n", h.iter, h.cost, h.vi_residual, h.step);
  std::printf("final vi_residual %.3e (tol %.3e), %d iterations, H1(0,T;L2) norm of u %.4g\n", out.final_residual,
              cfg.optimizer.tol, out.result.iterations(), out.result.history.back().u_h1_norm);
  if (!out.result.h1_bound_respected) std::printf("warning: the H1 bound on u was exceeded\n");
  if (!out.cost_strictly_decreasing) throw AssertionFailure("cost history is not strictly decreasing");
  if (!(out.final_residual <= cfg.optimizer.tol))
    throw AssertionFailure("optimizer stopped with vi_residual " + ex::num(out.final_residual) + " above tolerance");
  return 0;
}

int cmd_control_convergence(const Flags& f) {
  if (!f.full) {
    std::printf("control-convergence is gated; pass --full to run it\n");
    return 0;
  }
  const auto cfg = load_config(f);
  const auto dir = prepare(cfg, "control-convergence");
  const auto out = ex::control_convergence(cfg, f.jobs, false);
  ex::write_history(dir / "history_local.csv", out.local.result.history);
  for (std::size_t i = 0; i < out.adapted.size(); ++i)
    ex::write_history(dir / ("history_eps_" + std::to_string(i) + ".csv"), out.adapted[i].result.history);
  out.table.write(dir / "control_convergence.csv");
  print_table(out.table);
  if (out.table.eps.size() > 1) {
    out.table.assert_decreasing(0, false);
    out.table.assert_decreasing(1, false);
  }
  return 0;
}

int cmd_validate(const Flags& f) {
  const auto cfg = load_config(f);
  std::shared_ptr<const kernel::DiscreteKernel> k;
  if (cfg.mode == Mode::nonlocal) k = ex::make_kernel(cfg, cfg.eps);
  const auto rep = physics::validate_assumptions(cfg.model, k.get());
  for (const auto& c : rep.checks)
    std::printf("  %-3s %s  margin %.4g  %s\n", c.name.c_str(), c.passed ? "ok  " : "FAIL", c.margin, c.detail.c_str());
  if (!rep.all_passed()) throw ValidationError("assumption check failed: " + rep.failures());
  std::printf("configuration valid\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tumorcp: nonlocal/local viscous Cahn-Hilliard tumor model, adjoints and optimal control"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key = value configuration file");
    sub->add_option("--out", flags.out, "output directory (overrides output.dir)");
    sub->add_option("--jobs", flags.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
    sub->add_option("--seed", flags.seed, "RNG seed (overrides run.seed)");
    sub->add_option("--snapshots", flags.snapshots, "field snapshot stride, 0 for none")->check(CLI::NonNegativeNumber);
    sub->add_flag("--full", flags.full, "enable gated experiments");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const Flags&);
  };
  const Cmd cmds[] = {
      {"forward", "run the state system and write diagnostics", cmd_forward},
      {"eps-sweep", "nonlocal-to-local convergence of the state", cmd_eps_sweep},
      {"adjoint-sweep", "nonlocal-to-local convergence of the dual system", cmd_adjoint_sweep},
      {"grad-check", "Taylor-remainder test of the adjoint gradient", cmd_grad_check},
      {"optimize", "projected-gradient optimal control", cmd_optimize},
      {"control-convergence", "adapted nonlocal optima against the local optimum (gated)", cmd_control_convergence},
      {"validate", "check the model assumptions for a configuration", cmd_validate},
  };
  int (*selected)(const Flags&) = nullptr;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    sub->callback([&selected, run = c.run] { selected = run; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return selected(flags);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const AssertionFailure& e) {
    std::fprintf(stderr, "assertion failed: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
