#pragma once

// FFTW-backed transforms: the DCT that diagonalizes the Neumann Laplacian,
// and a zero-padded real FFT convolution.
//
// FFTW planning is not thread-safe, so every plan creation/destruction goes
// through one mutex. Execution uses the new-array interface on fftw_malloc'd
// buffers, which is thread-safe and keeps alignment (and therefore the chosen
// codelets) identical from call to call.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "tumorcp/grid.hpp"

namespace tumorcp::spectral {

namespace detail {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    if (!p) return;
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::shared_ptr<fftw_plan_s>;

template <class T>
struct AlignedBuffer {
  explicit AlignedBuffer(std::size_t n) : size(n), ptr(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~AlignedBuffer() { fftw_free(ptr); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
  T* data() { return ptr; }
  T& operator[](std::size_t i) { return ptr[i]; }
  std::size_t size;
  T* ptr;
};

}  // namespace detail

/// Eigenvalue of the 1-D Neumann second-difference operator for DCT mode k.
inline double neumann_eigenvalue_1d(int k, int n, double h) {
  const double s = std::sin(M_PI * k / (2.0 * n));
  return -4.0 * s * s / (h * h);
}

/// DCT-II / DCT-III pair on a GridSpec. Mode k along each axis is the
/// cosine cos(pi k (i + 1/2) / n), which is an exact eigenvector of
/// laplacian_neumann.
class NeumannSpectral {
 public:
  explicit NeumannSpectral(const GridSpec& g) : grid_(g) {
    std::vector<int> dims(g.dim, g.n);
    std::vector<fftw_r2r_kind> fwd(g.dim, FFTW_REDFT10);
    std::vector<fftw_r2r_kind> inv(g.dim, FFTW_REDFT01);
    detail::AlignedBuffer<double> a(g.cells()), b(g.cells());
    {
      std::lock_guard lock(detail::planner_mutex());
      forward_ = detail::Plan(fftw_plan_r2r(g.dim, dims.data(), a.data(), b.data(), fwd.data(), FFTW_ESTIMATE),
                              detail::PlanDeleter{});
      inverse_ = detail::Plan(fftw_plan_r2r(g.dim, dims.data(), a.data(), b.data(), inv.data(), FFTW_ESTIMATE),
                              detail::PlanDeleter{});
    }
    if (!forward_ || !inverse_) throw NumericalError("FFTW: failed to plan DCT");
    scale_ = 1.0 / std::pow(2.0 * g.n, g.dim);

    laplacian_.assign(g.cells(), 0.0);
    for (std::size_t i = 0; i < g.cells(); ++i) {
      double lam = 0.0;
      for (int ax = 0; ax < g.dim; ++ax) lam += neumann_eigenvalue_1d(g.index_along(i, ax), g.n, g.h());
      laplacian_[i] = lam;
    }
  }

  const GridSpec& grid() const { return grid_; }

  /// Eigenvalues of laplacian_neumann, indexed like a Field by DCT mode.
  const std::vector<double>& laplacian_eigenvalues() const { return laplacian_; }

  /// Returns x with symbol(k) * x_hat(k) = rhs_hat(k) for every mode k.
  Field solve(const Field& rhs, std::span<const double> symbol) const {
    return filter(rhs, symbol, /*divide=*/true);
  }

  /// Returns x with x_hat(k) = symbol(k) * v_hat(k).
  Field apply(const Field& v, std::span<const double> symbol) const { return filter(v, symbol, false); }

 private:
  Field filter(const Field& v, std::span<const double> symbol, bool divide) const {
    require(v.grid() == grid_, "spectral: grid mismatch");
    require(symbol.size() == v.size(), "spectral: symbol size mismatch");
    const std::size_t n = v.size();
    detail::AlignedBuffer<double> a(n), b(n);
    std::copy(v.data(), v.data() + n, a.data());
    fftw_execute_r2r(forward_.get(), a.data(), b.data());
    for (std::size_t i = 0; i < n; ++i) b[i] = divide ? b[i] / symbol[i] : b[i] * symbol[i];
    fftw_execute_r2r(inverse_.get(), b.data(), a.data());
    Field out(grid_);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * scale_;
    return out;
  }

  GridSpec grid_;
  detail::Plan forward_;
  detail::Plan inverse_;
  double scale_ = 1.0;
  std::vector<double> laplacian_;
};

/// Linear (non-periodic) convolution of a Field with a symmetric stencil of
/// half-width m, restricted to the domain: out(x) = sum_{y in grid} w(x - y) v(y).
/// Realized with an r2c FFT of size n + m per axis; the zero padding keeps
/// wrapped-around contributions out of the cells that are read back.
class PaddedConvolution {
 public:
  /// `weights` has (2m+1)^d entries in the same flat layout as a Field on a
  /// (2m+1)-cell grid, offset z_a = i_a - m.
  PaddedConvolution(const GridSpec& g, int half_width, std::span<const double> weights)
      : grid_(g), m_(half_width), padded_(g.n + half_width) {
    const int w = 2 * m_ + 1;
    std::size_t wcount = 1;
    for (int a = 0; a < g.dim; ++a) wcount *= static_cast<std::size_t>(w);
    require(weights.size() == wcount, "convolution: stencil size mismatch");
    require(m_ >= 0 && m_ < g.n, "convolution: stencil half-width must be smaller than the grid");

    real_count_ = 1;
    complex_count_ = 1;
    for (int a = 0; a < g.dim; ++a) {
      real_count_ *= static_cast<std::size_t>(padded_);
      complex_count_ *= static_cast<std::size_t>(a + 1 == g.dim ? padded_ / 2 + 1 : padded_);
    }
    dims_.assign(g.dim, padded_);

    detail::AlignedBuffer<double> r(real_count_);
    detail::AlignedBuffer<fftw_complex> c(complex_count_);
    {
      std::lock_guard lock(detail::planner_mutex());
      forward_ = detail::Plan(fftw_plan_dft_r2c(g.dim, dims_.data(), r.data(), c.data(), FFTW_ESTIMATE),
                              detail::PlanDeleter{});
      inverse_ = detail::Plan(fftw_plan_dft_c2r(g.dim, dims_.data(), c.data(), r.data(), FFTW_ESTIMATE),
                              detail::PlanDeleter{});
    }
    if (!forward_ || !inverse_) throw NumericalError("FFTW: failed to plan convolution");

    // Wrap the stencil into the padded periodic box.
    std::fill(r.data(), r.data() + real_count_, 0.0);
    for (std::size_t s = 0; s < wcount; ++s) {
      std::size_t rem = s;
      std::size_t flat = 0;
      std::vector<int> idx(g.dim);
      for (int a = g.dim - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(rem % w) - m_;
        rem /= w;
      }
      for (int a = 0; a < g.dim; ++a) {
        const int wrapped = (idx[a] % padded_ + padded_) % padded_;
        flat = flat * padded_ + wrapped;
      }
      r[flat] += weights[s];
    }
    fftw_execute_dft_r2c(forward_.get(), r.data(), c.data());
    spectrum_.resize(complex_count_);
    const double scale = 1.0 / static_cast<double>(real_count_);
    for (std::size_t i = 0; i < complex_count_; ++i) spectrum_[i] = {c[i][0] * scale, c[i][1] * scale};
  }

  int padded_size() const { return padded_; }

  Field apply(const Field& v) const {
    require(v.grid() == grid_, "convolution: grid mismatch");
    const GridSpec& g = grid_;
    detail::AlignedBuffer<double> r(real_count_);
    detail::AlignedBuffer<fftw_complex> c(complex_count_);
    std::fill(r.data(), r.data() + real_count_, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) r[padded_index(i)] = v[i];
    fftw_execute_dft_r2c(forward_.get(), r.data(), c.data());
    for (std::size_t i = 0; i < complex_count_; ++i) {
      const std::complex<double> z(c[i][0], c[i][1]);
      const std::complex<double> p = z * spectrum_[i];
      c[i][0] = p.real();
      c[i][1] = p.imag();
    }
    fftw_execute_dft_c2r(inverse_.get(), c.data(), r.data());
    Field out(g);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = r[padded_index(i)];
    return out;
  }

 private:
  std::size_t padded_index(std::size_t flat) const {
    std::size_t p = 0;
    for (int a = 0; a < grid_.dim; ++a) p = p * padded_ + static_cast<std::size_t>(grid_.index_along(flat, a));
    return p;
  }

  GridSpec grid_;
  int m_;
  int padded_;
  std::vector<int> dims_;
  std::size_t real_count_ = 0;
  std::size_t complex_count_ = 0;
  detail::Plan forward_;
  detail::Plan inverse_;
  std::vector<std::complex<double>> spectrum_;
};

}  // namespace tumorcp::spectral
