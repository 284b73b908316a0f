/// @file grid.hpp
/// @brief Periodic tensor-product grid with Fourier transforms, spectral
///        differentiation, two-thirds dealiasing and domain quadrature.
///
/// All fields live on a uniform grid over [0, length)^dim with nodes
/// x_j = j * length / n. Transforms are normalized so that the coefficient
/// of mode k = 0 equals the field mean; inverse(forward(f)) == f to
/// round-off. Integer wavenumbers run over [-n/2, n/2) per axis and are
/// scaled by 2*pi/length.

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

namespace keps {

inline constexpr double two_pi = 6.283185307179586476925286766559;

/// Configuration or precondition violation (bad grid sizes, bad parameters).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
class FftPlans;
}

class Grid {
 public:
  Grid() = default;

  int dim() const { return dim_; }
  int n() const { return n_; }
  double length() const { return length_; }
  std::size_t size() const { return size_; }
  double spacing() const { return length_ / n_; }

  /// Integer wavenumber of a per-axis spectral index: idx -> idx or idx - n,
  /// mapping into [-n/2, n/2).
  int int_wavenumber(int idx) const { return idx <= n_ / 2 - 1 ? idx : idx - n_; }

  /// Physical wavenumber 2*pi*k/length for a per-axis spectral index.
  double wavenumber(int idx) const { return int_wavenumber(idx) * (two_pi / length_); }

  /// Two-thirds rule cutoff: modes with any |k_i| > floor(n/3) are dropped.
  int dealias_cutoff() const { return n_ / 3; }

  bool operator==(const Grid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && length_ == o.length_;
  }

  const detail::FftPlans& plans() const;

  friend Grid make_grid(int dim, int n, double length);

 private:
  int dim_ = 0;
  int n_ = 0;
  double length_ = 0.0;
  std::size_t size_ = 0;
  std::shared_ptr<const detail::FftPlans> plans_;
};

/// Build a grid. Rejects dim outside {1,2,3}, odd n, n < 8, length <= 0.
Grid make_grid(int dim, int n, double length = two_pi);

/// Real sample per node, row-major over the axes.
struct ScalarField {
  Grid grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const Grid& g) : grid(g), v(g.size(), 0.0) {}
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  std::size_t size() const { return v.size(); }
};

/// Complex amplitude per wavenumber multi-index, same row-major layout.
struct SpectralField {
  Grid grid;
  std::vector<std::complex<double>> c;

  SpectralField() = default;
  explicit SpectralField(const Grid& g) : grid(g), c(g.size(), {0.0, 0.0}) {}
  std::size_t size() const { return c.size(); }
};

/// Sample fn(x) at every node; fn receives the node coordinates.
template <typename Fn>
ScalarField sample(const Grid& g, Fn&& fn) {
  ScalarField f(g);
  const int dim = g.dim();
  const int n = g.n();
  const double h = g.spacing();
  std::array<int, 3> idx{0, 0, 0};
  std::array<double, 3> x{0, 0, 0};
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    for (int d = 0; d < dim; ++d) x[d] = idx[d] * h;
    f.v[flat] = fn(x);
    for (int d = dim - 1; d >= 0; --d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
  return f;
}

/// Visit every spectral mode; fn receives the flat index and the integer
/// wavenumber vector (length = dim).
template <typename Fn>
void for_each_mode(const Grid& g, Fn&& fn) {
  const int dim = g.dim();
  const int n = g.n();
  std::array<int, 3> idx{0, 0, 0};
  std::array<int, 3> k{0, 0, 0};
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    for (int d = 0; d < dim; ++d) k[d] = g.int_wavenumber(idx[d]);
    fn(flat, k);
    for (int d = dim - 1; d >= 0; --d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
}

SpectralField forward_transform(const ScalarField& f);
ScalarField inverse_transform(const SpectralField& F);

/// Spectral partial derivative of total order |alpha| <= 4. alpha holds the
/// per-axis derivative orders; entries beyond grid.dim() must be zero.
/// Odd-order Nyquist multipliers are zeroed.
ScalarField partial_derivative(const ScalarField& f, const std::array<int, 3>& alpha);
ScalarField derivative(const ScalarField& f, int axis);
ScalarField laplacian(const ScalarField& f);

/// Spectral-space variants used to fuse transform chains.
SpectralField derivative_spectral(const SpectralField& F, int axis);
SpectralField laplacian_spectral(const SpectralField& F);
SpectralField partial_derivative_spectral(const SpectralField& F,
                                          const std::array<int, 3>& alpha);

/// Zero every mode with any |k_i| > floor(n/3).
void dealias_inplace(SpectralField& F);
SpectralField dealias(const SpectralField& F);
ScalarField dealias(const ScalarField& f);

/// (length/n)^dim * sum of nodal values; exact for band-limited integrands.
double integrate_domain(const ScalarField& f);

/// Max over nodes of |value|.
double sup_abs(const ScalarField& f);

bool all_finite(const ScalarField& f);

}  // namespace keps
