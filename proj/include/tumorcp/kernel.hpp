#pragma once

// Radial interaction kernels J_eps(z) = rho_eps(|z|) / (eps^(2-alpha) |z|^alpha),
// rho_eps(r) = eps^-d rho(r/eps), with the compactly supported C^2 bump
// rho(r) = c (1 - r^2)^3 on [0,1]. The constant c is fixed by
//   int_0^inf r^(d+1-alpha) rho(r) dr = 2 / C_dim,
// which is exactly what makes B_eps approximate -Laplacian as eps -> 0.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "tumorcp/grid.hpp"
#include "tumorcp/spectral.hpp"

namespace tumorcp::kernel {

/// C_dim = int over the unit sphere of |sigma . e_1|^2.
inline double sphere_second_moment(int dim) {
  require(dim == 2 || dim == 3, "kernel: dimension must be 2 or 3");
  return dim == 2 ? std::numbers::pi : 4.0 * std::numbers::pi / 3.0;
}

/// |S^{d-1}|
inline double sphere_area(int dim) { return dim == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi; }

namespace detail {
// int_0^1 r^a (1 - r^2)^k dr = B((a+1)/2, k+1) / 2
inline double bump_moment(double a, int k) { return 0.5 * boost::math::beta((a + 1.0) / 2.0, k + 1.0); }
}  // namespace detail

struct KernelProfile {
  double alpha = 0.0;
  int dim = 2;
  double coeff = 0.0;  ///< c in rho(r) = c (1 - r^2)^3
  double c_dim = 0.0;

  double rho(double r) const {
    if (r >= 1.0) return 0.0;
    const double s = 1.0 - r * r;
    return coeff * s * s * s;
  }
  double rho_prime(double r) const {
    if (r >= 1.0) return 0.0;
    const double s = 1.0 - r * r;
    return -6.0 * coeff * r * s * s;
  }
  double rho_second(double r) const {
    if (r >= 1.0) return 0.0;
    const double s = 1.0 - r * r;
    return -6.0 * coeff * s * s + 24.0 * coeff * r * r * s;
  }

  /// c_{alpha,d} = int_0^inf r^(d-1-alpha) |rho'(r)| dr. rho' <= 0 on [0,1].
  double rho1_constant() const { return 6.0 * coeff * detail::bump_moment(dim - alpha, 2); }

  /// J_eps at distance r from the origin (r > 0, or r = 0 when alpha = 0).
  double value(double eps, double r) const {
    const double radial = rho(r / eps) / std::pow(eps, dim);
    if (alpha == 0.0) return radial / (eps * eps);
    return radial / (std::pow(eps, 2.0 - alpha) * std::pow(r, alpha));
  }
};

/// Builds the normalized bump profile. For d = 2 only the nonsingular kernel
/// alpha = 0 is accepted; for d = 3, alpha in [0, 1).
inline KernelProfile build_profile(double alpha, int dim) {
  require(dim == 2 || dim == 3, "kernel: dimension must be 2 or 3");
  if (dim == 2) {
    require(alpha == 0.0, "kernel: only alpha = 0 is admissible in two dimensions");
  } else {
    require(alpha >= 0.0 && alpha < 1.0, "kernel: alpha must lie in [0, d-2) = [0, 1) in three dimensions");
  }
  KernelProfile p;
  p.alpha = alpha;
  p.dim = dim;
  p.c_dim = sphere_second_moment(dim);
  p.coeff = (2.0 / p.c_dim) / detail::bump_moment(dim + 1.0 - alpha, 3);

  using boost::math::quadrature::gauss_kronrod;
  const double check = gauss_kronrod<double, 61>::integrate(
      [&](double r) { return std::pow(r, dim + 1.0 - alpha) * p.rho(r); }, 0.0, 1.0, 15, 1e-14);
  if (std::abs(check - 2.0 / p.c_dim) > 1e-10) {
    throw NumericalError("kernel: normalization quadrature failed (got " + std::to_string(check) + ")");
  }
  return p;
}

/// A kernel sampled on a grid, with J_eps * 1 precomputed and a padded FFT
/// plan for the truncated convolution. Immutable after construction.
class DiscreteKernel {
 public:
  DiscreteKernel(const KernelProfile& profile, double eps, const GridSpec& grid) : profile_(profile), eps_(eps), grid_(grid) {
    grid.validate();
    require(profile.dim == grid.dim, "kernel: profile and grid dimensions differ");
    require(std::isfinite(eps) && eps >= 2.0 * grid.h() * (1.0 - 1e-12),
            "kernel: eps must be at least 2h (eps = " + std::to_string(eps) + ", h = " + std::to_string(grid.h()) + ")");
    const double h = grid.h();
    half_width_ = static_cast<int>(std::ceil(eps / h - 1e-12));
    require(half_width_ < grid.n, "kernel: eps must be smaller than the domain side");

    const int w = 2 * half_width_ + 1;
    std::size_t count = 1;
    for (int a = 0; a < grid.dim; ++a) count *= static_cast<std::size_t>(w);
    stencil_.assign(count, 0.0);
    for (std::size_t s = 0; s < count; ++s) {
      std::size_t rem = s;
      double r2 = 0.0;
      for (int a = 0; a < grid.dim; ++a) {
        const double z = (static_cast<int>(rem % w) - half_width_) * h;
        rem /= w;
        r2 += z * z;
      }
      const double r = std::sqrt(r2);
      if (r >= eps) continue;
      if (r == 0.0 && profile.alpha > 0.0) {
        stencil_[s] = singular_cell_average();
      } else {
        stencil_[s] = profile.value(eps, r);
      }
    }

    std::vector<double> weights(stencil_);
    const double vol = grid.cell_volume();
    for (double& x : weights) x *= vol;
    conv_ = std::make_shared<const spectral::PaddedConvolution>(grid, half_width_, weights);
    conv_one_ = conv_->apply(Field(grid, 1.0));
    for (double x : conv_one_.values()) {
      if (!(x > 0.0)) throw NumericalError("kernel: J_eps * 1 is not positive everywhere");
    }
    build_symbol(weights);
  }

  const KernelProfile& profile() const { return profile_; }
  double eps() const { return eps_; }
  const GridSpec& grid() const { return grid_; }
  int half_width() const { return half_width_; }
  int padded_size() const { return conv_->padded_size(); }

  /// J_eps sampled at offsets z in [-m, m]^d (cell units), flat layout with
  /// axis 0 slowest. Quadrature weight h^d is not included.
  std::span<const double> stencil() const { return stencil_; }
  double stencil_at(std::span<const int> offset) const {
    const int w = 2 * half_width_ + 1;
    std::size_t flat = 0;
    for (int a = 0; a < grid_.dim; ++a) {
      if (std::abs(offset[a]) > half_width_) return 0.0;
      flat = flat * w + static_cast<std::size_t>(offset[a] + half_width_);
    }
    return stencil_[flat];
  }

  const Field& conv_one() const { return conv_one_; }

  /// Approximate eigenvalues of B_eps on the Neumann cosine modes (exact away
  /// from the boundary); used only for preconditioning.
  const std::vector<double>& dct_symbol() const { return symbol_; }

  Field convolve(const Field& v) const {
    require(v.grid() == grid_, "convolve: grid mismatch");
    return conv_->apply(v);
  }

 private:
  // Mean of J_eps over the cell at the origin, via a radial integral over the
  // ball of equal volume (J_eps is integrable but unbounded there when alpha > 0).
  double singular_cell_average() const {
    const double h = grid_.h();
    const double radius = grid_.dim == 2 ? h / std::sqrt(std::numbers::pi) : h * std::cbrt(3.0 / (4.0 * std::numbers::pi));
    const double a = profile_.alpha;
    const int d = grid_.dim;
    using boost::math::quadrature::gauss_kronrod;
    const double integral = gauss_kronrod<double, 61>::integrate(
        [&](double r) {
          if (r <= 0.0) return 0.0;
          return sphere_area(d) * std::pow(r, d - 1 - a) * profile_.rho(r / eps_) / (std::pow(eps_, d) * std::pow(eps_, 2.0 - a));
        },
        0.0, radius, 15, 1e-13);
    return integral / grid_.cell_volume();
  }

  void build_symbol(const std::vector<double>& weights) {
    const int w = 2 * half_width_ + 1;
    const int n = grid_.n;
    const int d = grid_.dim;
    // cosines[k][j] = cos(pi k (j - m) / n)
    std::vector<double> cosines(static_cast<std::size_t>(n) * w);
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < w; ++j) cosines[static_cast<std::size_t>(k) * w + j] = std::cos(std::numbers::pi * k * (j - half_width_) / n);
    }
    // Contract one stencil axis at a time: tensor shape goes from w^d to n^d.
    std::vector<double> cur(weights);
    std::vector<int> shape(d, w);
    for (int axis = 0; axis < d; ++axis) {
      std::size_t outer = 1, inner = 1;
      for (int a = 0; a < axis; ++a) outer *= shape[a];
      for (int a = axis + 1; a < d; ++a) inner *= shape[a];
      std::vector<double> next(outer * n * inner, 0.0);
      for (std::size_t o = 0; o < outer; ++o) {
        for (int k = 0; k < n; ++k) {
          for (int j = 0; j < w; ++j) {
            const double c = cosines[static_cast<std::size_t>(k) * w + j];
            const double* src = &cur[(o * w + j) * inner];
            double* dst = &next[(o * n + k) * inner];
            for (std::size_t i = 0; i < inner; ++i) dst[i] += c * src[i];
          }
        }
      }
      cur.swap(next);
      shape[axis] = n;
    }
    double total = 0.0;
    for (double x : weights) total += x;
    symbol_.resize(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) symbol_[i] = std::max(0.0, total - cur[i]);
  }

  KernelProfile profile_;
  double eps_;
  GridSpec grid_;
  int half_width_ = 0;
  std::vector<double> stencil_;
  std::shared_ptr<const spectral::PaddedConvolution> conv_;
  Field conv_one_;
  std::vector<double> symbol_;
};

inline DiscreteKernel sample_kernel(const KernelProfile& profile, double eps, const GridSpec& grid) {
  return DiscreteKernel(profile, eps, grid);
}

/// (J_eps * v)(x) = h^d sum_{y in Omega} J_eps(x - y) v(y), fast path.
inline Field convolve(const DiscreteKernel& k, const Field& v) { return k.convolve(v); }

/// Same sum evaluated term by term. O(cells * stencil); reference only.
inline Field convolve_direct(const DiscreteKernel& k, const Field& v) {
  const GridSpec& g = k.grid();
  require(v.grid() == g, "convolve_direct: grid mismatch");
  const int m = k.half_width();
  const int w = 2 * m + 1;
  const double vol = g.cell_volume();
  const auto st = k.stencil();
  Field out(g);
  std::vector<int> xi(g.dim), off(g.dim);
  for (std::size_t x = 0; x < v.size(); ++x) {
    for (int a = 0; a < g.dim; ++a) xi[a] = g.index_along(x, a);
    double acc = 0.0;
    for (std::size_t s = 0; s < st.size(); ++s) {
      if (st[s] == 0.0) continue;
      std::size_t rem = s;
      for (int a = g.dim - 1; a >= 0; --a) {
        off[a] = static_cast<int>(rem % w) - m;
        rem /= w;
      }
      std::size_t y = 0;
      bool inside = true;
      for (int a = 0; a < g.dim; ++a) {
        const int yi = xi[a] - off[a];
        if (yi < 0 || yi >= g.n) {
          inside = false;
          break;
        }
        y = y * g.n + yi;
      }
      if (inside) acc += st[s] * v[y];
    }
    out[x] = vol * acc;
  }
  return out;
}

/// B_eps(v) = (J_eps * 1) v - J_eps * v.
/// Evaluated on v - v[0], so constants map to exactly zero.
inline Field b_eps(const DiscreteKernel& k, const Field& v) {
  require(v.grid() == k.grid(), "b_eps: grid mismatch");
  Field shifted(v);
  shifted += -v[0];
  Field out = k.convolve(shifted);
  const Field& one = k.conv_one();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = one[i] * shifted[i] - out[i];
  return out;
}

/// E_eps(v) = 1/4 int int J_eps(x-y) |v(x) - v(y)|^2 = 1/2 <B_eps v, v>.
inline double energy_eps(const DiscreteKernel& k, const Field& v) {
  Field shifted(v);
  shifted += -v[0];
  return 0.5 * inner(b_eps(k, shifted), shifted);
}

}  // namespace tumorcp::kernel
