#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// runner: forward runs, epsilon sweeps of state and dual solutions, gradient
// checks, optimization and the control-convergence study, plus CSV output.

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "tumorcp/adjoint.hpp"
#include "tumorcp/config.hpp"
#include "tumorcp/control.hpp"
#include "tumorcp/forward.hpp"

namespace tumorcp::experiments {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest round-trip decimal form; locale independent.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : os_(path) {
    require(static_cast<bool>(os_), "cannot write '" + path.string() + "'");
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(num(v));
    row_strings(s);
  }
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

 private:
  std::ofstream os_;
};

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), "cannot create output directory '" + dir.string() + "'");
}

inline void write_echo(const fs::path& dir, const config::RunConfig& cfg, const std::string& command) {
  std::ofstream os(dir / "resolved_config.txt");
  require(static_cast<bool>(os), "cannot write the config echo");
  os << "# command: " << command << "\n";
  config::write_echo(os, cfg);
}

inline void write_diagnostics(const fs::path& path, const StateTrajectory& traj) {
  CsvWriter csv(path, {"step", "t", "E_total", "E_interface", "int_psi", "half_sigma_sq", "chi_coupling", "mean_phi",
                       "mean_sigma"});
  for (std::size_t k = 0; k < traj.diagnostics.size(); ++k) {
    const auto& d = traj.diagnostics[k];
    csv.row({static_cast<double>(k), traj.tgrid.time(static_cast<int>(k)), d.E_total, d.E_interface, d.int_psi,
             d.half_sigma_sq, d.chi_coupling, d.mean_phi, d.mean_sigma});
  }
}

inline void write_adjoint(const fs::path& path, const AdjointTrajectory& adj) {
  CsvWriter csv(path, {"step", "t", "norm_p", "norm_q", "norm_r", "norm_s"});
  for (int m = static_cast<int>(adj.snapshots.size()) - 1; m >= 0; --m) {
    const auto& a = adj.snapshots[m];
    csv.row({static_cast<double>(m), a.t, norm_l2(a.p), norm_l2(a.q), norm_l2(a.r), norm_l2(a.s)});
  }
}

inline void write_history(const fs::path& path, const std::vector<HistoryEntry>& hist) {
  CsvWriter csv(path, {"iter", "cost", "vi_residual", "step", "grad_norm", "u_h1_norm"});
  for (const auto& h : hist) csv.row({static_cast<double>(h.iter), h.cost, h.vi_residual, h.step, h.grad_norm, h.u_h1_norm});
}

/// Concatenated CHF1 records, one per time step.
inline void write_stacked(const fs::path& path, const std::vector<Field>& fields) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot write '" + path.string() + "'");
  for (const auto& f : fields) write_chf1(os, f);
}

inline std::vector<Field> read_stacked(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot read '" + path.string() + "'");
  std::vector<Field> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_chf1(is));
  return out;
}

inline void write_snapshots(const fs::path& dir, const StateTrajectory& traj) {
  ensure_dir(dir);
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "%06d", traj.steps[k]);
    const auto& s = traj.snapshots[k];
    for (auto [tag, f] : {std::pair{"phi", &s.phi}, std::pair{"mu", &s.mu}, std::pair{"sigma", &s.sigma}}) {
      std::ofstream os(dir / (std::string(tag) + "_" + name + ".chf"), std::ios::binary);
      require(static_cast<bool>(os), "cannot write snapshot files");
      write_chf1(os, *f);
    }
  }
}

// ---------------------------------------------------------------------------
// Worker pool

/// Runs job(i) for i in [0, count) on up to `jobs` threads; results come back
/// in index order. The first failure (lowest index) is rethrown.
template <class R, class F>
std::vector<R> parallel_map(std::size_t count, int jobs, F&& job) {
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(job(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(jobs, 1)));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline int default_jobs() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// ---------------------------------------------------------------------------
// Builders

inline std::shared_ptr<const kernel::DiscreteKernel> make_kernel(const config::RunConfig& cfg, double eps) {
  return std::make_shared<kernel::DiscreteKernel>(kernel::build_profile(cfg.alpha, cfg.grid.dim), eps, cfg.grid);
}

inline std::unique_ptr<ImexSystem> make_system(const config::RunConfig& cfg, Mode mode, double eps) {
  auto k = mode == Mode::nonlocal ? make_kernel(cfg, eps) : nullptr;
  return std::make_unique<ImexSystem>(mode, cfg.model, std::move(k), cfg.grid, cfg.time.dt(), cfg.solver);
}

inline std::unique_ptr<ImexSystem> make_system(const config::RunConfig& cfg) {
  return make_system(cfg, cfg.mode, cfg.eps);
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepTable {
  std::vector<std::string> columns;  ///< excluding the leading eps column
  std::vector<double> eps;
  std::vector<std::vector<double>> values;

  void write(const fs::path& path) const {
    std::vector<std::string> header{"eps"};
    header.insert(header.end(), columns.begin(), columns.end());
    CsvWriter csv(path, header);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      std::vector<double> row{eps[i]};
      row.insert(row.end(), values[i].begin(), values[i].end());
      csv.row(row);
    }
  }

  /// Throws AssertionFailure naming the first offending pair in column c.
  void assert_decreasing(std::size_t c, bool strict) const {
    for (std::size_t i = 1; i < eps.size(); ++i) {
      const double a = values[i - 1][c], b = values[i][c];
      if (strict ? !(b < a) : !(b <= a)) {
        throw AssertionFailure(columns[c] + " not " + (strict ? "strictly decreasing" : "non-increasing") +
                               ": eps = " + num(eps[i - 1]) + " -> " + num(a) + ", eps = " + num(eps[i]) + " -> " +
                               num(b));
      }
    }
  }
};

/// eps-list checks shared by the sweeps: descending order and the eps >= min_cells * h guard.
inline void check_eps_list(const std::vector<double>& list, const GridSpec& g, double min_cells) {
  require(!list.empty(), "kernel.eps_list is empty");
  for (std::size_t i = 0; i < list.size(); ++i) {
    require(list[i] >= min_cells * g.h() * (1.0 - 1e-12),
            "eps = " + num(list[i]) + " is below " + num(min_cells) + "h = " + num(min_cells * g.h()));
    if (i > 0) require(list[i] <= list[i - 1], "kernel.eps_list must be in descending order");
  }
}

/// State sweep: sup_t |phi_eps - phi|_L2, |sigma_eps - sigma|_L2(Q), sup_t |sigma_eps - sigma|_L2.
inline SweepTable eps_sweep(const config::RunConfig& cfg, int jobs, bool assert_decrease = true) {
  check_eps_list(cfg.eps_list, cfg.grid, 8.0);
  const Field phi0 = cfg.initial_phi(), sigma0 = cfg.initial_sigma();
  const ControlPair controls = cfg.initial_controls();
  const std::size_t K = cfg.eps_list.size();
  auto trajs = parallel_map<StateTrajectory>(K + 1, jobs, [&](std::size_t i) {
    auto sys = i == 0 ? make_system(cfg, Mode::local, 0.0) : make_system(cfg, Mode::nonlocal, cfg.eps_list[i - 1]);
    return solve_forward(*sys, phi0, sigma0, controls, cfg.time, 1);
  });
  auto phi = [](const StateSnapshot& s) -> const Field& { return s.phi; };
  auto sig = [](const StateSnapshot& s) -> const Field& { return s.sigma; };
  SweepTable t;
  t.columns = {"sup_phi_l2", "sigma_l2q", "sup_sigma_l2"};
  for (std::size_t i = 0; i < K; ++i) {
    const auto& a = trajs[i + 1];
    const auto& ref = trajs[0];
    t.eps.push_back(cfg.eps_list[i]);
    t.values.push_back({traj_norms::sup_l2(a, ref, phi), traj_norms::l2_time(a, ref, sig), traj_norms::sup_l2(a, ref, sig)});
  }
  if (assert_decrease && K > 1) {
    t.assert_decreasing(0, true);
    t.assert_decreasing(1, true);
  }
  return t;
}

/// Dual sweep: |p_eps - p|_{L2(0,T;H1)}, |q_eps - q|_{L2(Q)}, sup_t |r_eps - r|_L2.
inline SweepTable adjoint_sweep(const config::RunConfig& cfg, int jobs, bool assert_decrease = true) {
  check_eps_list(cfg.eps_list, cfg.grid, 8.0);
  const Field phi0 = cfg.initial_phi(), sigma0 = cfg.initial_sigma();
  const ControlPair controls = cfg.initial_controls();
  const CostSpec cost = cfg.cost_spec();
  cost.validate(cfg.grid, cfg.time.steps);
  const std::size_t K = cfg.eps_list.size();
  auto adjs = parallel_map<AdjointTrajectory>(K + 1, jobs, [&](std::size_t i) {
    auto sys = i == 0 ? make_system(cfg, Mode::local, 0.0) : make_system(cfg, Mode::nonlocal, cfg.eps_list[i - 1]);
    const auto fwd = solve_forward(*sys, phi0, sigma0, controls, cfg.time, 1);
    return solve_adjoint(*sys, fwd, controls, cost);
  });
  const double dt = cfg.time.dt();
  SweepTable t;
  t.columns = {"p_l2h1", "q_l2q", "sup_r_l2"};
  const auto& ref = adjs[0];
  const int N = cfg.time.steps;
  for (std::size_t i = 0; i < K; ++i) {
    const auto& a = adjs[i + 1];
    double p_acc = 0.0, q_acc = 0.0, r_sup = 0.0;
    for (int m = 0; m <= N; ++m) {
      const double wm = N > 0 ? trapezoid_weight(m, N) * dt : 0.0;
      const double dp = norm_h1(a.snapshots[m].p - ref.snapshots[m].p);
      const double dq = norm_l2(a.snapshots[m].q - ref.snapshots[m].q);
      p_acc += wm * dp * dp;
      q_acc += wm * dq * dq;
      r_sup = std::max(r_sup, norm_l2(a.snapshots[m].r - ref.snapshots[m].r));
    }
    t.eps.push_back(cfg.eps_list[i]);
    t.values.push_back({std::sqrt(p_acc), std::sqrt(q_acc), r_sup});
  }
  if (assert_decrease && K > 1)
    for (std::size_t c = 0; c < 3; ++c) t.assert_decreasing(c, true);
  return t;
}

// ---------------------------------------------------------------------------
// Gradient check

/// Reproducible pseudo-random perturbation: for each component, a sum of
/// cos(k pi x/L) cos(l pi y/L), k, l <= 3, with coefficients uniform in
/// [-1, 1], each modulated in time by a + b cos(pi t/T) with random a, b.
inline ControlPair random_direction(const GridSpec& g, const TimeGrid& tg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  constexpr int K = 4;
  const double pi = std::numbers::pi;
  ControlPair d;
  for (auto* v : {&d.u, &d.w}) {
    std::vector<Field> modes;
    std::vector<double> a, b;
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < K; ++l) {
        modes.push_back(Field::from_function(g, [&](const auto& x) {
          return std::cos(k * pi * x[0] / g.length) * std::cos(l * pi * x[1] / g.length);
        }));
        a.push_back(dist(rng));
        b.push_back(dist(rng));
      }
    }
    v->reserve(static_cast<std::size_t>(tg.steps));
    for (int n = 0; n < tg.steps; ++n) {
      const double t = 0.5 * (tg.time(n) + tg.time(n + 1));
      Field f(g);
      for (std::size_t j = 0; j < modes.size(); ++j) f.axpy(a[j] + b[j] * std::cos(pi * t / tg.final_time), modes[j]);
      v->push_back(std::move(f));
    }
  }
  return d;
}

struct GradCheckOutcome {
  GradientCheckReport report;
  bool quadratic = false;
  bool passed = false;
  std::string summary;
};

inline GradCheckOutcome run_grad_check(const config::RunConfig& cfg) {
  const auto sys = make_system(cfg);
  CostSpec cost = cfg.cost_spec();
  GradCheckOutcome out;
  out.quadratic = cfg.grad_check.quadratic_only;
  if (out.quadratic) {
    const double au = cost.alpha_u > 0.0 ? cost.alpha_u : 1.0;
    cost.alpha_Omega = cost.alpha_Q = cost.beta_Q = cost.beta_w = 0.0;
    cost.alpha_u = au;
  }
  ControlProblem prob(*sys, cfg.initial_phi(), cfg.initial_sigma(), cfg.time, cost, cfg.bounds);
  const auto dir = random_direction(cfg.grid, cfg.time, cfg.seed);
  out.report = gradient_check(prob, cfg.initial_controls(), dir, cfg.grad_check.step0, cfg.grad_check.levels);
  const auto& r = out.report;
  if (out.quadratic) {
    out.passed = std::abs(r.slope - 2.0) <= 0.05 && r.first_order_error <= 1e-8 && r.pre_floor_points >= 2;
  } else {
    out.passed = r.slope >= cfg.grad_check.min_slope && r.first_order_error <= cfg.grad_check.max_first_order_error &&
                 r.pre_floor_points >= 2;
  }
  out.summary = std::string(out.quadratic ? "quadratic" : "full") + " cost, " + to_string(cfg.mode) +
                ": slope " + num(r.slope) + " over " + std::to_string(r.pre_floor_points) +
                " points, first-order error " + num(r.first_order_error);
  return out;
}

inline void write_grad_check(const fs::path& path, const GradientCheckReport& r) {
  CsvWriter csv(path, {"k", "step", "remainder"});
  for (std::size_t k = 0; k < r.steps.size(); ++k) csv.row({static_cast<double>(k), r.steps[k], r.remainders[k]});
}

// ---------------------------------------------------------------------------
// Optimization

struct OptimizeOutcome {
  OptimizeResult result;
  bool cost_strictly_decreasing = true;
  double final_residual = 0.0;
};

inline OptimizeOutcome run_optimize(const ImexSystem& sys, const config::RunConfig& cfg,
                                    std::optional<ControlPair> anchor = std::nullopt,
                                    std::optional<ControlPair> init = std::nullopt) {
  ControlProblem prob(sys, cfg.initial_phi(), cfg.initial_sigma(), cfg.time, cfg.cost_spec(), cfg.bounds,
                      std::move(anchor));
  OptimizeOutcome out;
  out.result = optimize(prob, init ? *init : cfg.initial_controls(), cfg.optimizer);
  const auto& h = out.result.history;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (!(h[i].cost < h[i - 1].cost)) out.cost_strictly_decreasing = false;
  out.final_residual = h.back().vi_residual;
  return out;
}

struct ControlConvergence {
  SweepTable table;
  OptimizeOutcome local;
  std::vector<OptimizeOutcome> adapted;
};

/// Local optimum first, then the adapted nonlocal problems anchored at it,
/// one per eps; distances to the anchor in L2(Q).
inline ControlConvergence control_convergence(const config::RunConfig& cfg, int jobs, bool assert_decrease = true) {
  check_eps_list(cfg.eps_list, cfg.grid, 2.0);
  ControlConvergence out;
  {
    const auto sys = make_system(cfg, Mode::local, 0.0);
    out.local = run_optimize(*sys, cfg);
  }
  const ControlPair anchor = out.local.result.controls;
  out.adapted = parallel_map<OptimizeOutcome>(cfg.eps_list.size(), jobs, [&](std::size_t i) {
    const auto sys = make_system(cfg, Mode::nonlocal, cfg.eps_list[i]);
    return run_optimize(*sys, cfg, anchor, anchor);
  });
  const double dt = cfg.time.dt();
  out.table.columns = {"u_dist_l2q", "w_dist_l2q", "iterations", "final_vi_residual"};
  for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
    const auto& c = out.adapted[i].result.controls;
    double du = 0.0, dw = 0.0;
    for (int n = 0; n < cfg.time.steps; ++n) {
      const Field a = c.u[n] - anchor.u[n];
      const Field b = c.w[n] - anchor.w[n];
      du += dt * inner(a, a);
      dw += dt * inner(b, b);
    }
    out.table.eps.push_back(cfg.eps_list[i]);
    out.table.values.push_back({std::sqrt(du), std::sqrt(dw), static_cast<double>(out.adapted[i].result.iterations()),
                                out.adapted[i].final_residual});
  }
  if (assert_decrease && cfg.eps_list.size() > 1) {
    out.table.assert_decreasing(0, false);
    out.table.assert_decreasing(1, false);
  }
  return out;
}

}  // namespace tumorcp::experiments
