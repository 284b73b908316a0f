#include "grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace keps {
namespace detail {

// FFTW plan creation is not thread safe; new-array execution is.
static std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlans {
 public:
  FftPlans(int dim, int n) : total_(1) {
    for (int d = 0; d < dim; ++d) total_ *= static_cast<std::size_t>(n);
    std::vector<std::complex<double>> a(total_), b(total_);
    int dims[3] = {n, n, n};
    std::lock_guard<std::mutex> lock(planner_mutex());
    // FFTW_UNALIGNED lets the plans run on arbitrary caller buffers.
    fwd_ = fftw_plan_dft(dim, dims, reinterpret_cast<fftw_complex*>(a.data()),
                         reinterpret_cast<fftw_complex*>(b.data()), FFTW_FORWARD,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
    bwd_ = fftw_plan_dft(dim, dims, reinterpret_cast<fftw_complex*>(a.data()),
                         reinterpret_cast<fftw_complex*>(b.data()), FFTW_BACKWARD,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!fwd_ || !bwd_) throw std::runtime_error("fftw plan creation failed");
  }

  ~FftPlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  void forward(std::complex<double>* in, std::complex<double>* out) const {
    fftw_execute_dft(fwd_, reinterpret_cast<fftw_complex*>(in),
                     reinterpret_cast<fftw_complex*>(out));
  }
  void backward(std::complex<double>* in, std::complex<double>* out) const {
    fftw_execute_dft(bwd_, reinterpret_cast<fftw_complex*>(in),
                     reinterpret_cast<fftw_complex*>(out));
  }

  std::size_t total() const { return total_; }

 private:
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
  std::size_t total_;
};

}  // namespace detail

const detail::FftPlans& Grid::plans() const {
  if (!plans_) throw std::logic_error("default-constructed Grid has no transforms");
  return *plans_;
}

Grid make_grid(int dim, int n, double length) {
  if (dim < 1 || dim > 3) throw ConfigError("grid dim must be 1, 2 or 3");
  if (n < 8) throw ConfigError("grid n must be >= 8");
  if (n % 2 != 0) throw ConfigError("grid n must be even");
  if (!(length > 0.0)) throw ConfigError("grid length must be positive");
  Grid g;
  g.dim_ = dim;
  g.n_ = n;
  g.length_ = length;
  g.size_ = 1;
  for (int d = 0; d < dim; ++d) g.size_ *= static_cast<std::size_t>(n);
  g.plans_ = std::make_shared<detail::FftPlans>(dim, n);
  return g;
}

SpectralField forward_transform(const ScalarField& f) {
  const Grid& g = f.grid;
  if (f.v.size() != g.size()) throw ConfigError("field size does not match grid");
  SpectralField F(g);
  std::vector<std::complex<double>> in(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) in[i] = f.v[i];
  g.plans().forward(in.data(), F.c.data());
  const double scale = 1.0 / static_cast<double>(g.size());
  for (auto& c : F.c) c *= scale;
  return F;
}

ScalarField inverse_transform(const SpectralField& F) {
  const Grid& g = F.grid;
  if (F.c.size() != g.size()) throw ConfigError("field size does not match grid");
  ScalarField f(g);
  std::vector<std::complex<double>> in(F.c), out(g.size());
  g.plans().backward(in.data(), out.data());
  for (std::size_t i = 0; i < g.size(); ++i) f.v[i] = out[i].real();
  return f;
}

namespace {

// (i*kappa)^order as a complex multiplier; zero at Nyquist for odd orders.
std::complex<double> axis_multiplier(const Grid& g, int idx, int order) {
  if (order == 0) return {1.0, 0.0};
  const int n = g.n();
  if (idx == n / 2 && order % 2 != 0) return {0.0, 0.0};
  const double kappa = g.wavenumber(idx);
  double mag = 1.0;
  for (int p = 0; p < order; ++p) mag *= kappa;
  switch (order & 3) {  // i^order
    case 0: return {mag, 0.0};
    case 1: return {0.0, mag};
    case 2: return {-mag, 0.0};
    default: return {0.0, -mag};
  }
}

}  // namespace

SpectralField partial_derivative_spectral(const SpectralField& Fin,
                                          const std::array<int, 3>& alpha) {
  const Grid& g = Fin.grid;
  int total = 0;
  for (int d = 0; d < 3; ++d) {
    if (alpha[d] < 0) throw ConfigError("derivative orders must be nonnegative");
    if (d >= g.dim() && alpha[d] != 0)
      throw ConfigError("derivative order set beyond grid dimension");
    total += alpha[d];
  }
  if (total > 4) throw ConfigError("derivative total order must be <= 4");

  SpectralField F = Fin;
  const int n = g.n();
  const int dim = g.dim();
  // per-axis multiplier tables
  std::array<std::vector<std::complex<double>>, 3> mult;
  for (int d = 0; d < dim; ++d) {
    mult[d].resize(n);
    for (int idx = 0; idx < n; ++idx) mult[d][idx] = axis_multiplier(g, idx, alpha[d]);
  }
  std::array<int, 3> idx{0, 0, 0};
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    std::complex<double> m = mult[0][idx[0]];
    for (int d = 1; d < dim; ++d) m *= mult[d][idx[d]];
    F.c[flat] *= m;
    for (int d = dim - 1; d >= 0; --d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
  return F;
}

ScalarField partial_derivative(const ScalarField& f, const std::array<int, 3>& alpha) {
  return inverse_transform(partial_derivative_spectral(forward_transform(f), alpha));
}

ScalarField derivative(const ScalarField& f, int axis) {
  std::array<int, 3> alpha{0, 0, 0};
  alpha[axis] = 1;
  return partial_derivative(f, alpha);
}

ScalarField laplacian(const ScalarField& f) {
  return inverse_transform(laplacian_spectral(forward_transform(f)));
}

SpectralField derivative_spectral(const SpectralField& F, int axis) {
  const Grid& g = F.grid;
  SpectralField out(g);
  const int n = g.n();
  std::vector<std::complex<double>> mult(n);
  for (int idx = 0; idx < n; ++idx) mult[idx] = axis_multiplier(g, idx, 1);
  std::array<int, 3> idx{0, 0, 0};
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    out.c[flat] = F.c[flat] * mult[idx[axis]];
    for (int d = g.dim() - 1; d >= 0; --d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
  return out;
}

SpectralField laplacian_spectral(const SpectralField& F) {
  const Grid& g = F.grid;
  SpectralField out(g);
  const int n = g.n();
  std::vector<double> k2(n);
  for (int idx = 0; idx < n; ++idx) {
    const double kappa = g.wavenumber(idx);
    k2[idx] = kappa * kappa;
  }
  std::array<int, 3> idx{0, 0, 0};
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    double s = k2[idx[0]];
    for (int d = 1; d < g.dim(); ++d) s += k2[idx[d]];
    out.c[flat] = -s * F.c[flat];
    for (int d = g.dim() - 1; d >= 0; --d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
  return out;
}

void dealias_inplace(SpectralField& F) {
  const Grid& g = F.grid;
  const int n = g.n();
  const int cut = g.dealias_cutoff();
  std::vector<char> keep(n);
  for (int idx = 0; idx < n; ++idx) keep[idx] = std::abs(g.int_wavenumber(idx)) <= cut;
  std::array<int, 3> idx{0, 0, 0};
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    bool k = keep[idx[0]];
    for (int d = 1; d < g.dim(); ++d) k = k && keep[idx[d]];
    if (!k) F.c[flat] = {0.0, 0.0};
    for (int d = g.dim() - 1; d >= 0; --d) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
}

SpectralField dealias(const SpectralField& F) {
  SpectralField out = F;
  dealias_inplace(out);
  return out;
}

ScalarField dealias(const ScalarField& f) {
  SpectralField F = forward_transform(f);
  dealias_inplace(F);
  return inverse_transform(F);
}

double integrate_domain(const ScalarField& f) {
  double sum = 0.0;
  for (double x : f.v) sum += x;
  double w = 1.0;
  for (int d = 0; d < f.grid.dim(); ++d) w *= f.grid.spacing();
  return w * sum;
}

double sup_abs(const ScalarField& f) {
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(const ScalarField& f) {
  for (double x : f.v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace keps
