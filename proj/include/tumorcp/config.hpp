#pragma once

// Plain-text run configuration: one `section.key = value` per line, `#`
// comments, optional `[section]` headers that prefix the following keys.
// Unknown keys are rejected.
//
// Field shapes (initial data and targets):
//   constant V
//   gaussian-bump [cx=..] [cy=..] [width=..] [base=..] [amp=..]
//   two-bump [cx1=..] [cy1=..] [cx2=..] [cy2=..] [width=..] [base=..] [amp=..]
//   cosine [amp=..] [kx=..] [ky=..] [offset=..]      offset + amp cos(kx pi x/L) cos(ky pi y/L)
//   chf1 PATH

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tumorcp/control.hpp"
#include "tumorcp/grid.hpp"
#include "tumorcp/physics.hpp"

namespace tumorcp::config {

/// Flat key/value table with the insertion order of the source file.
class KeyValues {
 public:
  static KeyValues parse(std::istream& is, const std::string& origin = "<config>") {
    KeyValues kv;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const std::string where = origin + ":" + std::to_string(lineno);
      if (line.front() == '[') {
        require(line.back() == ']' && line.size() > 2, where + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      require(eq != std::string::npos, where + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      require(!key.empty(), where + ": empty key");
      if (!section.empty()) key = section + "." + key;
      require(!kv.values_.count(key), where + ": duplicate key '" + key + "'");
      kv.values_[key] = value;
      kv.order_.push_back(key);
    }
    return kv;
  }

  static KeyValues parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static KeyValues load(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), "cannot open config file '" + path + "'");
    return parse(is, path);
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::vector<std::string>& keys() const { return order_; }

  std::string str(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return str(key, ""), fallback;
    return to_real(key, str(key, ""));
  }

  long integer(const std::string& key, long fallback) const {
    if (!has(key)) return str(key, ""), fallback;
    const std::string v = str(key, "");
    std::size_t pos = 0;
    long out = 0;
    try {
      out = std::stol(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    require(pos == v.size() && !v.empty(), "config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return str(key, ""), fallback;
    const std::string v = str(key, "");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("config: '" + key + "' expects a boolean, got '" + v + "'");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return str(key, ""), out;
    std::string v = str(key, "");
    for (char& c : v)
      if (c == ',') c = ' ';
    std::istringstream is(v);
    std::string tok;
    while (is >> tok) out.push_back(to_real(key, tok));
    return out;
  }

  /// Throws on any key that no accessor has asked for.
  void reject_unknown() const {
    std::string bad;
    for (const auto& k : order_)
      if (!used_.count(k)) bad += (bad.empty() ? "" : ", ") + k;
    require(bad.empty(), "config: unknown key(s): " + bad);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

 private:
  static double to_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    require(pos == v.size() && !v.empty() && std::isfinite(out),
            "config: '" + key + "' expects a finite number, got '" + v + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> used_;
};

/// A built-in field shape or a CHF1 file reference.
struct ShapeSpec {
  std::string kind = "constant";
  std::map<std::string, double> args;
  double value = 0.0;
  std::string path;
  std::string source;  ///< original text

  static ShapeSpec constant(double v) {
    ShapeSpec s;
    s.value = v;
    return s;
  }
  static ShapeSpec named(const std::string& kind) {
    ShapeSpec s;
    s.kind = kind;
    return s;
  }

  double arg(const std::string& k, double fallback) const {
    auto it = args.find(k);
    return it == args.end() ? fallback : it->second;
  }
};

inline ShapeSpec parse_shape(const std::string& key, const std::string& text) {
  ShapeSpec s;
  s.source = text;
  std::istringstream is(text);
  is >> s.kind;
  auto allowed = [&](std::initializer_list<const char*> names) {
    std::string tok;
    while (is >> tok) {
      const auto eq = tok.find('=');
      require(eq != std::string::npos, "config: '" + key + "': expected name=value, got '" + tok + "'");
      const std::string name = tok.substr(0, eq);
      bool ok = false;
      for (const char* n : names) ok = ok || name == n;
      require(ok, "config: '" + key + "': unknown shape argument '" + name + "' for " + s.kind);
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(tok.substr(eq + 1), &pos);
      } catch (const std::exception&) {
        pos = std::string::npos;
      }
      require(pos == tok.size() - eq - 1 && std::isfinite(v), "config: '" + key + "': bad number in '" + tok + "'");
      s.args[name] = v;
    }
  };
  if (s.kind == "constant") {
    require(static_cast<bool>(is >> s.value), "config: '" + key + "': constant needs a value");
    std::string rest;
    require(!(is >> rest), "config: '" + key + "': trailing text after constant");
  } else if (s.kind == "gaussian-bump") {
    allowed({"cx", "cy", "width", "base", "amp"});
  } else if (s.kind == "two-bump") {
    allowed({"cx1", "cy1", "cx2", "cy2", "width", "base", "amp"});
  } else if (s.kind == "cosine") {
    allowed({"amp", "kx", "ky", "offset"});
  } else if (s.kind == "chf1") {
    require(static_cast<bool>(is >> s.path), "config: '" + key + "': chf1 needs a path");
  } else {
    throw ValidationError("config: '" + key + "': unknown shape '" + s.kind +
                          "' (constant, gaussian-bump, two-bump, cosine, chf1)");
  }
  return s;
}

inline Field make_field(const ShapeSpec& s, const GridSpec& g) {
  const double L = g.length;
  if (s.kind == "constant") return Field(g, s.value);
  if (s.kind == "chf1") {
    std::ifstream is(s.path, std::ios::binary);
    require(static_cast<bool>(is), "cannot open field file '" + s.path + "'");
    Field f = read_chf1(is);
    require(f.grid() == g, "field file '" + s.path + "' does not match the configured grid");
    return f;
  }
  auto bump = [&](const std::array<double, 3>& x, double cx, double cy, double w) {
    const double dx = x[0] - cx * L, dy = x[1] - cy * L;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * w * w * L * L));
  };
  if (s.kind == "gaussian-bump") {
    const double cx = s.arg("cx", 0.5), cy = s.arg("cy", 0.5), w = s.arg("width", 0.15);
    const double base = s.arg("base", -1.0), amp = s.arg("amp", 1.8);
    require(w > 0.0, "gaussian-bump: width must be positive");
    return Field::from_function(g, [&](const auto& x) { return base + amp * bump(x, cx, cy, w); });
  }
  if (s.kind == "two-bump") {
    const double w = s.arg("width", 0.1), base = s.arg("base", -1.0), amp = s.arg("amp", 1.8);
    const double cx1 = s.arg("cx1", 0.3), cy1 = s.arg("cy1", 0.3), cx2 = s.arg("cx2", 0.7), cy2 = s.arg("cy2", 0.7);
    require(w > 0.0, "two-bump: width must be positive");
    return Field::from_function(
        g, [&](const auto& x) { return base + amp * std::max(bump(x, cx1, cy1, w), bump(x, cx2, cy2, w)); });
  }
  // cosine
  const double amp = s.arg("amp", 1.0), kx = s.arg("kx", 1.0), ky = s.arg("ky", 0.0), off = s.arg("offset", 0.0);
  return Field::from_function(g, [&](const auto& x) {
    return off + amp * std::cos(kx * std::numbers::pi * x[0] / L) * std::cos(ky * std::numbers::pi * x[1] / L);
  });
}

struct GradCheckOptions {
  double step0 = 0.1;
  int levels = 6;
  bool quadratic_only = false;  ///< alpha_u-only cost (exact-gradient case)
  double min_slope = 1.7;
  double max_first_order_error = 2e-2;
};

/// Validated configuration of one run or experiment.
struct RunConfig {
  GridSpec grid;
  TimeGrid time;
  Mode mode = Mode::local;
  physics::ModelParams model;
  double alpha = 0.0;
  double eps = 0.125;
  std::vector<double> eps_list;
  solvers::SolverOptions solver;

  ShapeSpec phi0 = ShapeSpec::named("gaussian-bump");
  ShapeSpec sigma0 = ShapeSpec::constant(0.5);

  double alpha_Omega = 0.0, alpha_Q = 0.0, beta_Q = 0.0, alpha_u = 0.0, beta_w = 0.0;
  ShapeSpec phi_Omega = ShapeSpec::constant(0.0);
  ShapeSpec phi_Q = ShapeSpec::constant(0.0);
  ShapeSpec sigma_Q = ShapeSpec::constant(0.0);

  ControlBounds bounds;
  double u_init = 0.0;
  double w_init = 0.0;
  OptimizeOptions optimizer;
  GradCheckOptions grad_check;

  std::string out_dir = "out";
  int snapshot_stride = 0;  ///< 0: no field snapshots
  std::uint64_t seed = 1;

  /// Resolved key/value listing of every setting (echo file content).
  std::vector<std::pair<std::string, std::string>> resolved;

  CostSpec cost_spec() const {
    const Field pO = make_field(phi_Omega, grid);
    const Field pQ = make_field(phi_Q, grid);
    const Field sQ = make_field(sigma_Q, grid);
    CostSpec c = CostSpec::with_static_targets(grid, time.steps, pO, pQ, sQ);
    c.alpha_Omega = alpha_Omega;
    c.alpha_Q = alpha_Q;
    c.beta_Q = beta_Q;
    c.alpha_u = alpha_u;
    c.beta_w = beta_w;
    return c;
  }

  Field initial_phi() const { return make_field(phi0, grid); }
  Field initial_sigma() const { return make_field(sigma0, grid); }
  ControlPair initial_controls() const { return ControlPair::constant(grid, time.steps, u_init, w_init); }
};

namespace detail {
inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace detail

/// Builds a RunConfig from key/values; applies defaults, validates ranges and
/// rejects unknown keys. Model assumptions are checked later, when the solver
/// is built, so that the failing assumption is named in the error.
inline RunConfig from_keys(const KeyValues& kv) {
  RunConfig c;
  auto& r = c.resolved;
  auto rec = [&](const std::string& k, const std::string& v) { r.emplace_back(k, v); };

  const long n = kv.integer("grid.n", 64);
  const double L = kv.real("grid.L", 1.0);
  require(n >= 4 && n <= 4096, "grid.n must be in [4, 4096]");
  c.grid = GridSpec::make(static_cast<int>(n), L, 2);
  rec("grid.n", std::to_string(n));
  rec("grid.L", detail::fmt(L));

  const double T = kv.real("time.T", 0.02);
  const long nt = kv.integer("time.nt", 200);
  require(T > 0.0, "time.T must be positive");
  require(nt >= 0, "time.nt must be nonnegative");
  c.time = TimeGrid{T, static_cast<int>(nt)};
  rec("time.T", detail::fmt(T));
  rec("time.nt", std::to_string(nt));

  c.mode = parse_mode(kv.str("run.mode", "local"));
  rec("run.mode", to_string(c.mode));
  const long seed = kv.integer("run.seed", 1);
  require(seed >= 0, "run.seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  rec("run.seed", std::to_string(seed));

  auto& m = c.model;
  m.tau = kv.real("model.tau", m.tau);
  m.chi = kv.real("model.chi", m.chi);
  m.prolif.P0 = kv.real("model.P0", m.prolif.P0);
  m.prolif.P1 = kv.real("model.P1", m.prolif.P1);
  m.prolif.blend = kv.real("model.P_blend", m.prolif.blend);
  m.h_scale = kv.real("model.h_scale", m.h_scale);
  m.stabilization = kv.real("model.S", m.stabilization);
  m.mobility_m = kv.real("model.mobility_m", m.mobility_m);
  m.mobility_n = kv.real("model.mobility_n", m.mobility_n);
  m.reaction_enabled = kv.boolean("model.reaction", true);
  const std::string potential = kv.str("model.potential", "quartic");
  require(potential == "quartic", "model.potential: only 'quartic' is supported");
  rec("model.tau", detail::fmt(m.tau));
  rec("model.chi", detail::fmt(m.chi));
  rec("model.P0", detail::fmt(m.prolif.P0));
  rec("model.P1", detail::fmt(m.prolif.P1));
  rec("model.P_blend", detail::fmt(m.prolif.blend));
  rec("model.h_scale", detail::fmt(m.h_scale));
  rec("model.S", detail::fmt(m.stabilization));
  rec("model.mobility_m", detail::fmt(m.mobility_m));
  rec("model.mobility_n", detail::fmt(m.mobility_n));
  rec("model.reaction", m.reaction_enabled ? "true" : "false");
  rec("model.potential", potential);

  c.alpha = kv.real("kernel.alpha", 0.0);
  c.eps = kv.real("kernel.eps", 0.125 * L);
  c.eps_list = kv.reals("kernel.eps_list");
  require(c.eps > 0.0, "kernel.eps must be positive");
  for (double e : c.eps_list) require(e > 0.0, "kernel.eps_list entries must be positive");
  rec("kernel.alpha", detail::fmt(c.alpha));
  rec("kernel.eps", detail::fmt(c.eps));
  {
    std::string s;
    for (double e : c.eps_list) s += (s.empty() ? "" : ", ") + detail::fmt(e);
    rec("kernel.eps_list", s);
  }

  c.solver.rel_tol = kv.real("solver.rel_tol", c.solver.rel_tol);
  c.solver.max_iter = static_cast<int>(kv.integer("solver.max_iter", c.solver.max_iter));
  require(c.solver.rel_tol > 0.0 && c.solver.max_iter > 0, "solver settings must be positive");
  rec("solver.rel_tol", detail::fmt(c.solver.rel_tol));
  rec("solver.max_iter", std::to_string(c.solver.max_iter));

  auto shape = [&](const std::string& key, ShapeSpec& dst) {
    if (kv.has(key)) dst = parse_shape(key, kv.str(key, ""));
    kv.str(key, "");
    rec(key, dst.source.empty() ? dst.kind + (dst.kind == "constant" ? " " + detail::fmt(dst.value) : "") : dst.source);
  };
  shape("initial.phi0", c.phi0);
  shape("initial.sigma0", c.sigma0);

  c.alpha_Omega = kv.real("cost.alpha_Omega", 0.0);
  c.alpha_Q = kv.real("cost.alpha_Q", 0.0);
  c.beta_Q = kv.real("cost.beta_Q", 0.0);
  c.alpha_u = kv.real("cost.alpha_u", 0.0);
  c.beta_w = kv.real("cost.beta_w", 0.0);
  for (double w : {c.alpha_Omega, c.alpha_Q, c.beta_Q, c.alpha_u, c.beta_w}) {
    require(w >= 0.0, "cost weights must be nonnegative");
  }
  rec("cost.alpha_Omega", detail::fmt(c.alpha_Omega));
  rec("cost.alpha_Q", detail::fmt(c.alpha_Q));
  rec("cost.beta_Q", detail::fmt(c.beta_Q));
  rec("cost.alpha_u", detail::fmt(c.alpha_u));
  rec("cost.beta_w", detail::fmt(c.beta_w));
  shape("cost.phi_Omega", c.phi_Omega);
  shape("cost.phi_Q", c.phi_Q);
  shape("cost.sigma_Q", c.sigma_Q);

  auto& b = c.bounds;
  b.u_min = kv.real("bounds.u_min", b.u_min);
  b.u_max = kv.real("bounds.u_max", b.u_max);
  b.w_min = kv.real("bounds.w_min", b.w_min);
  b.w_max = kv.real("bounds.w_max", b.w_max);
  require(b.u_min >= 0.0, "bounds.u_min must be nonnegative");
  validate_bounds(b);
  rec("bounds.u_min", detail::fmt(b.u_min));
  rec("bounds.u_max", detail::fmt(b.u_max));
  rec("bounds.w_min", detail::fmt(b.w_min));
  rec("bounds.w_max", detail::fmt(b.w_max));

  c.u_init = kv.real("controls.u_init", 0.0);
  c.w_init = kv.real("controls.w_init", 0.0);
  require(c.u_init >= b.u_min && c.u_init <= b.u_max && c.w_init >= b.w_min && c.w_init <= b.w_max,
          "initial controls must lie inside the bounds");
  rec("controls.u_init", detail::fmt(c.u_init));
  rec("controls.w_init", detail::fmt(c.w_init));

  auto& o = c.optimizer;
  o.max_iter = static_cast<int>(kv.integer("optimizer.max_iter", o.max_iter));
  o.armijo_c1 = kv.real("optimizer.armijo_c1", o.armijo_c1);
  o.backtrack = kv.real("optimizer.backtrack", o.backtrack);
  o.init_step = kv.real("optimizer.init_step", o.init_step);
  o.max_backtracks = static_cast<int>(kv.integer("optimizer.max_backtracks", o.max_backtracks));
  o.tol = kv.real("optimizer.tol", o.tol);
  o.h1_bound = kv.real("optimizer.h1_bound", o.h1_bound);
  require(o.max_iter >= 0 && o.max_backtracks >= 0, "optimizer iteration limits must be nonnegative");
  require(o.armijo_c1 > 0.0 && o.armijo_c1 < 1.0, "optimizer.armijo_c1 must be in (0, 1)");
  require(o.backtrack > 0.0 && o.backtrack < 1.0, "optimizer.backtrack must be in (0, 1)");
  require(o.init_step > 0.0 && o.tol > 0.0 && o.h1_bound > 0.0, "optimizer step, tol and h1_bound must be positive");
  rec("optimizer.max_iter", std::to_string(o.max_iter));
  rec("optimizer.armijo_c1", detail::fmt(o.armijo_c1));
  rec("optimizer.backtrack", detail::fmt(o.backtrack));
  rec("optimizer.init_step", detail::fmt(o.init_step));
  rec("optimizer.max_backtracks", std::to_string(o.max_backtracks));
  rec("optimizer.tol", detail::fmt(o.tol));
  rec("optimizer.h1_bound", detail::fmt(o.h1_bound));

  auto& gc = c.grad_check;
  gc.step0 = kv.real("grad_check.step0", gc.step0);
  gc.levels = static_cast<int>(kv.integer("grad_check.levels", gc.levels));
  gc.quadratic_only = kv.boolean("grad_check.quadratic_only", gc.quadratic_only);
  gc.min_slope = kv.real("grad_check.min_slope", gc.min_slope);
  gc.max_first_order_error = kv.real("grad_check.max_first_order_error", gc.max_first_order_error);
  require(gc.step0 > 0.0 && gc.levels >= 2, "grad_check needs step0 > 0 and at least 2 levels");
  rec("grad_check.step0", detail::fmt(gc.step0));
  rec("grad_check.levels", std::to_string(gc.levels));
  rec("grad_check.quadratic_only", gc.quadratic_only ? "true" : "false");
  rec("grad_check.min_slope", detail::fmt(gc.min_slope));
  rec("grad_check.max_first_order_error", detail::fmt(gc.max_first_order_error));

  c.out_dir = kv.str("output.dir", c.out_dir);
  c.snapshot_stride = static_cast<int>(kv.integer("output.snapshots", 0));
  require(c.snapshot_stride >= 0, "output.snapshots must be nonnegative");
  rec("output.dir", c.out_dir);
  rec("output.snapshots", std::to_string(c.snapshot_stride));

  kv.reject_unknown();
  return c;
}

inline RunConfig load(const std::string& path) { return from_keys(KeyValues::load(path)); }

inline void write_echo(std::ostream& os, const RunConfig& c) {
  for (const auto& [k, v] : c.resolved) os << k << " = " << v << "\n";
}

}  // namespace tumorcp::config
