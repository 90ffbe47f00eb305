#pragma once

// Uniform cell-centered grids on the cube (0,L)^d, scalar fields on them, and
// the homogeneous-Neumann finite-difference operators used by both state
// systems.
//
// Layout: a cell multi-index (i_0, ..., i_{d-1}) is stored at
//   flat = sum_a i_a * n^(d-1-a)
// so axis 0 (x) is the slowest axis. Cell centers sit at (i_a + 1/2) h.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tumorcp/errors.hpp"

namespace tumorcp {

struct GridSpec {
  int dim = 2;
  int n = 0;
  double length = 1.0;

  static GridSpec make(int n, double length, int dim = 2) {
    GridSpec g{dim, n, length};
    g.validate();
    return g;
  }

  void validate() const {
    require(dim == 2 || dim == 3, "grid: dimension must be 2 or 3, got " + std::to_string(dim));
    require(n >= 4, "grid: need at least 4 cells per axis, got " + std::to_string(n));
    require(std::isfinite(length) && length > 0.0, "grid: side length must be positive");
  }

  double h() const { return length / n; }
  double cell_volume() const { return std::pow(h(), dim); }
  double domain_volume() const { return std::pow(length, dim); }

  std::size_t cells() const {
    std::size_t c = 1;
    for (int a = 0; a < dim; ++a) c *= static_cast<std::size_t>(n);
    return c;
  }

  std::size_t stride(int axis) const {
    std::size_t s = 1;
    for (int a = axis + 1; a < dim; ++a) s *= static_cast<std::size_t>(n);
    return s;
  }

  int index_along(std::size_t flat, int axis) const {
    return static_cast<int>((flat / stride(axis)) % static_cast<std::size_t>(n));
  }

  double center(int i) const { return (i + 0.5) * h(); }

  std::array<double, 3> point(std::size_t flat) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) x[a] = center(index_along(flat, a));
    return x;
  }

  bool operator==(const GridSpec& o) const {
    return dim == o.dim && n == o.n && length == o.length;
  }
};

struct TimeGrid {
  double final_time = 1.0;
  int steps = 1;

  static TimeGrid make(double T, int nt) {
    require(std::isfinite(T) && T > 0.0, "time grid: final time must be positive");
    require(nt >= 0, "time grid: step count must be non-negative");
    return TimeGrid{T, nt};
  }

  double dt() const { return steps > 0 ? final_time / steps : final_time; }
  double time(int k) const { return steps > 0 ? final_time * k / steps : 0.0; }
};

class Field {
 public:
  Field() = default;
  explicit Field(const GridSpec& g, double fill = 0.0) : grid_(g), values_(g.cells(), fill) {}
  Field(const GridSpec& g, std::vector<double> values) : grid_(g), values_(std::move(values)) {
    require(values_.size() == grid_.cells(), "field: value count does not match the grid");
  }

  template <class F>
  static Field from_function(const GridSpec& g, F&& f) {
    Field out(g);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(g.point(i));
    return out;
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (auto& v : values_) v *= s;
    return *this;
  }
  Field& operator+=(double s) {
    for (auto& v : values_) v += s;
    return *this;
  }

  /// this += a * x
  Field& axpy(double a, const Field& x) {
    check_same(x);
    for (std::size_t i = 0; i < size(); ++i) values_[i] += a * x.values_[i];
    return *this;
  }

  void check_same(const Field& o) const {
    require(grid_ == o.grid_ && values_.size() == o.values_.size(), "field: grid mismatch");
  }

  bool operator==(const Field& o) const { return grid_ == o.grid_ && values_ == o.values_; }

 private:
  GridSpec grid_{};
  std::vector<double> values_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }
inline Field operator*(Field a, double s) { return a *= s; }

/// Pointwise product.
inline Field hadamard(const Field& a, const Field& b) {
  a.check_same(b);
  Field out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <class F>
Field map(const Field& a, F&& f) {
  Field out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

// Sums use pairwise reduction so results do not depend on how a caller
// partitions work and stay accurate for large grids.
namespace detail {
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}
}  // namespace detail

inline double sum(const Field& v) { return detail::pairwise_sum(v.data(), v.size()); }

inline double mean(const Field& v) { return sum(v) / static_cast<double>(v.size()); }

inline double inner(const Field& u, const Field& v) {
  u.check_same(v);
  std::vector<double> prod(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) prod[i] = u[i] * v[i];
  return u.grid().cell_volume() * detail::pairwise_sum(prod.data(), prod.size());
}

inline double norm_l2(const Field& v) { return std::sqrt(inner(v, v)); }

inline double max_abs(const Field& v) {
  double m = 0.0;
  for (double x : v.values()) m = std::max(m, std::abs(x));
  return m;
}

/// Sum over interior faces of squared difference quotients, times h^d.
/// Equals ||grad v||^2 for the two-point flux discretization.
inline double grad_sq(const Field& v) {
  const GridSpec& g = v.grid();
  const double inv_h2 = 1.0 / (g.h() * g.h());
  std::vector<double> terms;
  terms.reserve(v.size() * g.dim);
  for (int a = 0; a < g.dim; ++a) {
    const std::size_t s = g.stride(a);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (g.index_along(i, a) + 1 < g.n) {
        const double d = v[i + s] - v[i];
        terms.push_back(d * d * inv_h2);
      }
    }
  }
  return g.cell_volume() * detail::pairwise_sum(terms.data(), terms.size());
}

inline double norm_h1(const Field& v) { return std::sqrt(inner(v, v) + grad_sq(v)); }

/// Second-order (2d+1)-point Laplacian with reflecting ghost cells, i.e. zero
/// normal flux through every boundary face.
inline Field laplacian_neumann(const Field& v) {
  const GridSpec& g = v.grid();
  const double inv_h2 = 1.0 / (g.h() * g.h());
  Field out(g);
  for (int a = 0; a < g.dim; ++a) {
    const std::size_t s = g.stride(a);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const int k = g.index_along(i, a);
      double acc = 0.0;
      if (k > 0) acc += v[i - s] - v[i];
      if (k + 1 < g.n) acc += v[i + s] - v[i];
      out[i] += acc * inv_h2;
    }
  }
  return out;
}

/// Conservative div(c grad v) with arithmetic-mean face coefficients and zero
/// boundary flux.
inline Field div_coeff_grad(const Field& c, const Field& v) {
  c.check_same(v);
  for (double x : c.values()) {
    require(std::isfinite(x) && x > 0.0, "div_coeff_grad: coefficient field must be strictly positive");
  }
  const GridSpec& g = v.grid();
  const double inv_h2 = 1.0 / (g.h() * g.h());
  Field out(g);
  for (int a = 0; a < g.dim; ++a) {
    const std::size_t s = g.stride(a);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const int k = g.index_along(i, a);
      double acc = 0.0;
      if (k > 0) acc += 0.5 * (c[i] + c[i - s]) * (v[i - s] - v[i]);
      if (k + 1 < g.n) acc += 0.5 * (c[i] + c[i + s]) * (v[i + s] - v[i]);
      out[i] += acc * inv_h2;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CHF1 snapshot format: "CHF1", u32 d, u32 n, f64 L, then n^d f64 values in
// the flat layout above. All little-endian.

static_assert(std::endian::native == std::endian::little, "CHF1 I/O assumes a little-endian host");

inline void write_chf1(std::ostream& os, const Field& f) {
  const GridSpec& g = f.grid();
  const std::uint32_t d = static_cast<std::uint32_t>(g.dim);
  const std::uint32_t n = static_cast<std::uint32_t>(g.n);
  os.write("CHF1", 4);
  os.write(reinterpret_cast<const char*>(&d), sizeof d);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&g.length), sizeof g.length);
  os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!os) throw ValidationError("CHF1: write failed");
}

inline Field read_chf1(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CHF1", 4) != 0) throw ValidationError("CHF1: bad magic bytes");
  std::uint32_t d = 0;
  std::uint32_t n = 0;
  double length = 0.0;
  is.read(reinterpret_cast<char*>(&d), sizeof d);
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!is) throw ValidationError("CHF1: truncated header");
  const GridSpec g = GridSpec::make(static_cast<int>(n), length, static_cast<int>(d));
  std::vector<double> values(g.cells());
  is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!is) throw ValidationError("CHF1: truncated payload");
  Field f(g, std::move(values));
  if (!f.all_finite()) throw ValidationError("CHF1: non-finite value in payload");
  return f;
}

}  // namespace tumorcp
