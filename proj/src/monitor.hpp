/// @file monitor.hpp
/// @brief Sobolev norms, the energy E(t) and dissipation D(t) of the
///        boundedness statement, the weighted Lyapunov functional, and
///        numerical audits of the exact integral identities behind the
///        a priori estimates.

#pragma once

#include <string>
#include <vector>

#include "model.hpp"

namespace keps {

/// H^s seminorm squared via the spectral multiplier (1+|kappa|^2)^s:
///   sum_k (1+|kappa|^2)^s |f_hat(k)|^2 * length^dim,  0 <= s <= 4.
/// s = 0 reduces to the squared L2 norm (Parseval).
double sobolev_norm_sq(const ScalarField& f, int s);

/// sum_i ||d_i f||_{H^s}^2, evaluated spectrally as
///   sum_k (1+|kappa|^2)^s |kappa|^2 |f_hat(k)|^2 * length^dim.
double gradient_sobolev_sq(const ScalarField& f, int s);

/// E = sum over {a, u components, h, m, eps} of ||.||_{H^3}^2.
double theorem_energy(const PerturbationState& s);

/// D = ||grad a||_{H^2}^2 + sum over {u components, h, m, eps} of
///     ||grad .||_{H^3}^2.
double dissipation(const PerturbationState& s);

/// Weighted Lyapunov functional
///   L = ||(u, h, grad^3 h, m, grad^3 m, eps, grad^3 eps)||_2^2 + int F(a)
///     + alpha [ ||grad^3 u||_2^2 + int (f'(rho)/rho) |grad^3 a|^2 ]
///     + int [ |grad a|^2/2 + (rho^2/2) grad a . u
///             + |grad^3 a|^2/2 + (rho^2/2) d_lmn a d_lm u^n ],
/// with every third-order term summed over the full multi-index range
/// l, m, n in {1..dim}.
double lyapunov(const PerturbationState& s, const ModelParams& p, double alpha);

struct AuditReport {
  std::string name;
  double left = 0.0;
  double right = 0.0;
  double residual = 0.0;  ///< |left - right|
  double scale = 0.0;
  double tol = 0.0;
  bool pass = false;
};

/// Audits int (rho/2) grad a . (lap u - grad div u) dx = 0, the skew identity
/// behind the grad-a estimate. scale = int |grad a| |lap u| dx + 1e-30.
AuditReport audit_skew_pressure(const PerturbationState& s, const ModelParams& p,
                                double tol = 1e-10);

enum class BalanceField { u, h, m, eps };

/// Audits the L2 balance of one field: left = int w . w_t dx with w_t from
/// compute_rhs; right = the expanded right-hand side after integration by
/// parts, with the 1/rho weights inside the integrals.
AuditReport audit_l2_balance(const PerturbationState& s, const ModelParams& p,
                             BalanceField which, double tol = 1e-10);

std::vector<AuditReport> run_all_audits(const PerturbationState& s, const ModelParams& p,
                                        double tol = 1e-10);

struct EnergyReport {
  double t = 0.0;
  double E = 0.0;
  double D = 0.0;
  double cumD = 0.0;  ///< trapezoidal in t, accumulated by the caller
  double L_alpha = 0.0;
  double comp_a = 0.0, comp_u = 0.0, comp_h = 0.0, comp_m = 0.0, comp_eps = 0.0;
  double rho_min = 0.0, rho_max = 0.0, k_min = 0.0, k_max = 0.0;
  double sup_a = 0.0, sup_u = 0.0, sup_h = 0.0, sup_m = 0.0, sup_eps = 0.0;
  bool window_ok = true;
};

/// Snapshot report at one state; cumD is carried over from `prev` by the
/// trapezoidal rule when prev is non-null.
EnergyReport make_energy_report(const PerturbationState& s, const ModelParams& p,
                                double alpha, const EnergyReport* prev = nullptr);

struct AprioriSummary {
  double e0 = 0.0;
  double observed_C = 0.0;  ///< max_t (E(t) + cumD(t)) / E(0)
  double t_at_max = 0.0;
  double max_E_ratio = 0.0;  ///< max_t E(t) / E(0)
  bool e_within_2x = false;
  bool bounds_ok = false;
};

/// Summarize a run against the a priori bound E(t) + int_0^t D <= C E(0).
/// Refuses degenerate series (empty, or E(0) = 0).
AprioriSummary monitor_apriori(const std::vector<EnergyReport>& series);

}  // namespace keps
