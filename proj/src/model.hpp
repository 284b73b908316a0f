/// @file model.hpp
/// @brief Thermodynamic closures, turbulence source terms S_k and G, and the
///        right-hand side of the perturbation system around (rho_bar, 0, 0,
///        k_bar, 0), plus a residual check against the conservative form.
///
/// Evolution variables are the perturbations (a, u, h, m, eps) with
/// rho = a + rho_bar and k = m + k_bar. The pressure law is p = K rho^gamma,
/// f'(rho) = p'(rho)/rho, and f is normalized so f(rho_bar) = 0. Diffusion
/// coefficients are the normalized units of the model: the momentum equation
/// carries (lap u + grad div u)/rho, the scalars carry lap(.)/rho.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "grid.hpp"

namespace keps {

struct ModelParams {
  double rho_bar = 1.0;  ///< equilibrium density
  double k_bar = 1.0;    ///< equilibrium turbulent kinetic energy
  double mu = 0.5;       ///< laminar viscosity (source terms only)
  double mu_t = 0.5;     ///< eddy viscosity (source terms only)
  double c1 = 1.44;
  double c2 = 1.92;
  double gamma = 1.4;  ///< pressure exponent, > 1
  double kappa = 1.0;  ///< pressure scale K

  /// Effective viscosity; never stored, always mu + mu_t.
  double mu_e() const { return mu + mu_t; }

  void validate() const;
};

/// The unknowns at one time instant. All fields share one grid; u has
/// grid.dim() components.
struct PerturbationState {
  double t = 0.0;
  ScalarField a;
  std::vector<ScalarField> u;
  ScalarField h;
  ScalarField m;
  ScalarField eps;

  const Grid& grid() const { return a.grid; }
  int dim() const { return a.grid.dim(); }
};

/// Time derivatives, shape-compatible with a PerturbationState.
struct Tendency {
  ScalarField a_t;
  std::vector<ScalarField> u_t;
  ScalarField h_t;
  ScalarField m_t;
  ScalarField eps_t;
};

PerturbationState equilibrium_state(const Grid& g);

/// Pointwise min/max of rho and k plus finiteness, checked against the
/// admissibility window rho in [rho_bar/2, 2 rho_bar], k in [k_bar/2, 2 k_bar].
struct AdmissibilityReport {
  double rho_min = 0.0, rho_max = 0.0;
  double k_min = 0.0, k_max = 0.0;
  bool finite = false;
  bool within_window = false;
  std::string describe() const;
};

AdmissibilityReport validate_state(const PerturbationState& s, const ModelParams& p);

/// State outside the admissibility window where the equations are defined.
class AdmissibilityError : public std::runtime_error {
 public:
  AdmissibilityError(const AdmissibilityReport& r, const std::string& what)
      : std::runtime_error(what), report(r) {}
  AdmissibilityReport report;
};

/// Non-finite values or collapsed denominators.
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double pressure(double rho, const ModelParams& p);
double pressure_prime(double rho, const ModelParams& p);
/// f'(rho) = p'(rho)/rho.
double f_prime(double rho, const ModelParams& p);
/// f(rho) - f(rho_bar); only differences of f ever appear.
double f_dev(double rho, const ModelParams& p);
/// F(a) = integral_0^a f_dev(s + rho_bar)/(s + rho_bar) ds, by adaptive
/// Gauss-Kronrod quadrature (abs tol 1e-12); closed form when gamma == 2.
double F_of_a(double a_value, const ModelParams& p);

/// All spatial derivatives and pointwise source terms of a state, computed
/// once so that the RHS and the identity audits share transforms.
/// sk and g are the raw pointwise contractions (not dealiased).
struct StateDerivatives {
  ScalarField rho, kk;
  std::vector<ScalarField> grad_a, grad_h, grad_m, grad_e;
  std::vector<std::vector<ScalarField>> du;  ///< du[i][j] = d u^i / d x_j
  ScalarField div_u;
  std::vector<ScalarField> lap_u, grad_div_u;
  ScalarField lap_h, lap_m, lap_e;
  ScalarField sk, g;
};

StateDerivatives compute_derivatives(const PerturbationState& s, const ModelParams& p);

/// Turbulence production source S_k (dealiased), pointwise
///   [mu (d_j u^i + d_i u^j) - (2/3) delta_ij mu div u] d_j u^i
///   + mu_t / rho^2 * p'(rho) |grad a|^2.
ScalarField compute_Sk(const PerturbationState& s, const ModelParams& p);

/// Production term G (dealiased), pointwise
///   d_j u^i [mu_e (d_j u^i + d_i u^j) - (2/3) delta_ij (rho k + mu_e div u)].
ScalarField compute_G(const PerturbationState& s, const ModelParams& p);

/// Right-hand side of the perturbation system; every nonlinear product is
/// dealiased by the two-thirds rule. Throws AdmissibilityError when
/// enforce_window and the state violates the admissibility window;
/// NumericsError on non-finite input or collapsed denominators.
Tendency compute_rhs(const PerturbationState& s, const ModelParams& p,
                     bool enforce_window = true);

struct ConservativeCheck {
  double max_residual = 0.0;  ///< max over equations of ||residual||_L2
  double scale = 0.0;         ///< max over equations of the largest term norm
  std::array<double, 5> residual_by_eq{};  ///< mass, momentum, h, k, eps
};

/// Assemble the conservative-form residuals from (state, tendency) produced
/// by compute_rhs. Near-zero output certifies that the perturbation form and
/// the conservative form agree, including Dp/Dt = -p'(rho) rho div u.
ConservativeCheck conservative_residual(const PerturbationState& s, const Tendency& td,
                                        const ModelParams& p);

}  // namespace keps
