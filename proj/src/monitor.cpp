#include "monitor.hpp"

#include <cmath>

namespace keps {

namespace {

double volume(const Grid& g) {
  double v = 1.0;
  for (int d = 0; d < g.dim(); ++d) v *= g.length();
  return v;
}

double spectral_weighted_sq(const ScalarField& f, int s, bool gradient) {
  if (s < 0 || s > 4) throw ConfigError("sobolev order must lie in [0, 4]");
  const Grid& g = f.grid;
  const SpectralField F = forward_transform(f);
  const double unit = two_pi / g.length();
  double sum = 0.0;
  for_each_mode(g, [&](std::size_t flat, const std::array<int, 3>& k) {
    double k2 = 0.0;
    for (int d = 0; d < g.dim(); ++d) {
      const double kappa = unit * k[d];
      k2 += kappa * kappa;
    }
    double w = 1.0;
    const double base = 1.0 + k2;
    for (int p = 0; p < s; ++p) w *= base;
    if (gradient) w *= k2;
    sum += w * std::norm(F.c[flat]);
  });
  return sum * volume(g);
}

}  // namespace

double sobolev_norm_sq(const ScalarField& f, int s) {
  return spectral_weighted_sq(f, s, false);
}

double gradient_sobolev_sq(const ScalarField& f, int s) {
  return spectral_weighted_sq(f, s, true);
}

double theorem_energy(const PerturbationState& s) {
  double e = sobolev_norm_sq(s.a, 3);
  for (const auto& ui : s.u) e += sobolev_norm_sq(ui, 3);
  e += sobolev_norm_sq(s.h, 3);
  e += sobolev_norm_sq(s.m, 3);
  e += sobolev_norm_sq(s.eps, 3);
  return e;
}

double dissipation(const PerturbationState& s) {
  double d = gradient_sobolev_sq(s.a, 2);
  for (const auto& ui : s.u) d += gradient_sobolev_sq(ui, 3);
  d += gradient_sobolev_sq(s.h, 3);
  d += gradient_sobolev_sq(s.m, 3);
  d += gradient_sobolev_sq(s.eps, 3);
  return d;
}

namespace {

struct MultiIndex {
  std::array<int, 3> alpha;  ///< per-axis derivative orders
  int weight;                ///< number of ordered tuples with this multiset
};

// All ordered triples (l,m,n) in {0..dim-1}^3 grouped by multiset.
std::vector<MultiIndex> third_order_multisets(int dim) {
  std::vector<MultiIndex> out;
  for (int l = 0; l < dim; ++l)
    for (int m = l; m < dim; ++m)
      for (int n = m; n < dim; ++n) {
        std::array<int, 3> alpha{0, 0, 0};
        alpha[l]++;
        alpha[m]++;
        alpha[n]++;
        int w = 6;  // 3! permutations
        if (l == m && m == n) w = 1;
        else if (l == m || m == n) w = 3;
        out.push_back({alpha, w});
      }
  return out;
}

// All ordered pairs (l,m) grouped by multiset.
std::vector<MultiIndex> second_order_multisets(int dim) {
  std::vector<MultiIndex> out;
  for (int l = 0; l < dim; ++l)
    for (int m = l; m < dim; ++m) {
      std::array<int, 3> alpha{0, 0, 0};
      alpha[l]++;
      alpha[m]++;
      out.push_back({alpha, l == m ? 1 : 2});
    }
  return out;
}

double l2_sq(const ScalarField& f) {
  double s = 0.0;
  for (double x : f.v) s += x * x;
  double w = 1.0;
  for (int d = 0; d < f.grid.dim(); ++d) w *= f.grid.spacing();
  return w * s;
}

double inner(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  double w = 1.0;
  for (int d = 0; d < a.grid.dim(); ++d) w *= a.grid.spacing();
  return w * s;
}

}  // namespace

namespace {

double lyapunov_impl(const PerturbationState& s, const ModelParams& p, double alpha) {
  const Grid& g = s.grid();
  const int dim = g.dim();
  const auto triples = third_order_multisets(dim);

  double L = l2_sq(s.h) + l2_sq(s.m) + l2_sq(s.eps);
  for (const auto& ui : s.u) L += l2_sq(ui);

  const SpectralField fh = forward_transform(s.h);
  const SpectralField fm = forward_transform(s.m);
  const SpectralField fe = forward_transform(s.eps);
  for (const auto& t : triples) {
    L += t.weight * l2_sq(inverse_transform(partial_derivative_spectral(fh, t.alpha)));
    L += t.weight * l2_sq(inverse_transform(partial_derivative_spectral(fm, t.alpha)));
    L += t.weight * l2_sq(inverse_transform(partial_derivative_spectral(fe, t.alpha)));
  }

  // int F(a)
  {
    ScalarField Fa(g);
    for (std::size_t i = 0; i < Fa.v.size(); ++i) Fa.v[i] = F_of_a(s.a.v[i], p);
    L += integrate_domain(Fa);
  }

  const SpectralField fa = forward_transform(s.a);
  std::vector<SpectralField> fu;
  for (const auto& ui : s.u) fu.push_back(forward_transform(ui));

  // |grad^3 a|^2 pointwise (summed over the full index range) is shared by
  // the alpha block and the mixed block.
  ScalarField a3_sq(g);
  for (const auto& t : triples) {
    const ScalarField da = inverse_transform(partial_derivative_spectral(fa, t.alpha));
    for (std::size_t i = 0; i < a3_sq.v.size(); ++i)
      a3_sq.v[i] += t.weight * da.v[i] * da.v[i];
  }

  // alpha [ ||grad^3 u||^2 + int f'(rho)/rho |grad^3 a|^2 ]
  {
    double u3 = 0.0;
    for (const auto& fui : fu)
      for (const auto& t : triples)
        u3 += t.weight * l2_sq(inverse_transform(partial_derivative_spectral(fui, t.alpha)));
    ScalarField wa(g);
    for (std::size_t i = 0; i < wa.v.size(); ++i) {
      const double rho = s.a.v[i] + p.rho_bar;
      wa.v[i] = f_prime(rho, p) / rho * a3_sq.v[i];
    }
    L += alpha * (u3 + integrate_domain(wa));
  }

  // int [ |grad a|^2/2 + (rho^2/2) grad a . u + |grad^3 a|^2 / 2
  //       + (rho^2/2) d_lmn a d_lm u^n ]
  {
    ScalarField mixed(g);
    for (int i = 0; i < dim; ++i) {
      const ScalarField dai = inverse_transform(derivative_spectral(fa, i));
      for (std::size_t x = 0; x < mixed.v.size(); ++x) {
        const double rho = s.a.v[x] + p.rho_bar;
        mixed.v[x] += 0.5 * dai.v[x] * dai.v[x] + 0.5 * rho * rho * dai.v[x] * s.u[i].v[x];
      }
    }
    for (std::size_t x = 0; x < mixed.v.size(); ++x) mixed.v[x] += 0.5 * a3_sq.v[x];

    const auto pairs = second_order_multisets(dim);
    for (const auto& pr : pairs) {
      for (int n = 0; n < dim; ++n) {
        std::array<int, 3> a3 = pr.alpha;
        a3[n]++;
        const ScalarField da = inverse_transform(partial_derivative_spectral(fa, a3));
        const ScalarField du = inverse_transform(partial_derivative_spectral(fu[n], pr.alpha));
        for (std::size_t x = 0; x < mixed.v.size(); ++x) {
          const double rho = s.a.v[x] + p.rho_bar;
          mixed.v[x] += pr.weight * 0.5 * rho * rho * da.v[x] * du.v[x];
        }
      }
    }
    L += integrate_domain(mixed);
  }

  return L;
}

}  // namespace

double lyapunov(const PerturbationState& s, const ModelParams& p, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("lyapunov: alpha must be positive");
  const AdmissibilityReport rep = validate_state(s, p);
  if (!rep.finite) throw NumericsError("lyapunov: non-finite state");
  if (!rep.within_window)
    throw AdmissibilityError(rep, "lyapunov: state outside admissibility window");
  return lyapunov_impl(s, p, alpha);
}

AuditReport audit_skew_pressure(const PerturbationState& s, const ModelParams& p,
                                double tol) {
  const AdmissibilityReport rep = validate_state(s, p);
  if (!rep.finite) throw NumericsError("audit: non-finite state");
  const Grid& g = s.grid();
  const int dim = g.dim();
  const StateDerivatives d = compute_derivatives(s, p);

  ScalarField integrand(g);
  ScalarField scale_field(g);
  for (std::size_t x = 0; x < integrand.v.size(); ++x) {
    double acc = 0.0, ga2 = 0.0, lu2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      acc += d.grad_a[i].v[x] * (d.lap_u[i].v[x] - d.grad_div_u[i].v[x]);
      ga2 += d.grad_a[i].v[x] * d.grad_a[i].v[x];
      lu2 += d.lap_u[i].v[x] * d.lap_u[i].v[x];
    }
    integrand.v[x] = 0.5 * d.rho.v[x] * acc;
    scale_field.v[x] = std::sqrt(ga2) * std::sqrt(lu2);
  }

  AuditReport r;
  r.name = "skew_pressure";
  r.left = integrate_domain(integrand);
  r.right = 0.0;
  r.residual = std::abs(r.left);
  r.scale = integrate_domain(scale_field) + 1e-30;
  r.tol = tol;
  r.pass = r.residual <= tol * r.scale;
  return r;
}

AuditReport audit_l2_balance(const PerturbationState& s, const ModelParams& p,
                             BalanceField which, double tol) {
  const Grid& g = s.grid();
  const int dim = g.dim();
  const Tendency td = compute_rhs(s, p);
  const StateDerivatives d = compute_derivatives(s, p);

  auto dot_grad = [&](const std::vector<ScalarField>& grad, std::size_t x) {
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) acc += s.u[j].v[x] * grad[j].v[x];
    return acc;
  };

  AuditReport r;
  r.tol = tol;

  if (which == BalanceField::u) {
    r.name = "l2_u";
    double left = 0.0;
    for (int i = 0; i < dim; ++i) left += inner(s.u[i], td.u_t[i]);
    r.left = left;

    // grad(rho k) by the direct product route
    ScalarField rhok(g);
    for (std::size_t x = 0; x < rhok.v.size(); ++x) rhok.v[x] = d.rho.v[x] * d.kk.v[x];
    const SpectralField frhok = forward_transform(rhok);
    std::vector<ScalarField> grad_rhok(dim);
    for (int i = 0; i < dim; ++i)
      grad_rhok[i] = inverse_transform(derivative_spectral(frhok, i));

    ScalarField rhs(g);
    for (std::size_t x = 0; x < rhs.v.size(); ++x) {
      const double rho = d.rho.v[x];
      const double inv_rho = 1.0 / rho;
      double gu2 = 0.0, adv = 0.0, tensor = 0.0, ga_u = 0.0, rhok_u = 0.0;
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          gu2 += d.du[i][j].v[x] * d.du[i][j].v[x];
          adv += s.u[j].v[x] * d.du[i][j].v[x] * s.u[i].v[x];
          tensor += d.grad_a[j].v[x] * s.u[i].v[x] * d.du[i][j].v[x];
        }
        ga_u += d.grad_a[i].v[x] * s.u[i].v[x];
        rhok_u += grad_rhok[i].v[x] * s.u[i].v[x];
      }
      const double divu = d.div_u.v[x];
      rhs.v[x] = -inv_rho * (gu2 + divu * divu) - adv + f_dev(rho, p) * divu +
                 inv_rho * inv_rho * (tensor + divu * ga_u) -
                 (2.0 / 3.0) * inv_rho * rhok_u;
    }
    r.right = integrate_domain(rhs);
  } else {
    const ScalarField* w = nullptr;
    const ScalarField* w_t = nullptr;
    const std::vector<ScalarField>* grad_w = nullptr;
    switch (which) {
      case BalanceField::h: w = &s.h; w_t = &td.h_t; grad_w = &d.grad_h; r.name = "l2_h"; break;
      case BalanceField::m: w = &s.m; w_t = &td.m_t; grad_w = &d.grad_m; r.name = "l2_m"; break;
      case BalanceField::eps: w = &s.eps; w_t = &td.eps_t; grad_w = &d.grad_e; r.name = "l2_eps"; break;
      default: break;
    }
    r.left = inner(*w, *w_t);

    ScalarField rhs(g);
    for (std::size_t x = 0; x < rhs.v.size(); ++x) {
      const double rho = d.rho.v[x];
      const double inv_rho = 1.0 / rho;
      double gw2 = 0.0, ga_gw = 0.0;
      for (int j = 0; j < dim; ++j) {
        gw2 += (*grad_w)[j].v[x] * (*grad_w)[j].v[x];
        ga_gw += d.grad_a[j].v[x] * (*grad_w)[j].v[x];
      }
      double value = -inv_rho * gw2 + inv_rho * inv_rho * ga_gw * w->v[x] -
                     dot_grad(*grad_w, x) * w->v[x];
      const double pp = p.kappa * p.gamma * std::pow(rho, p.gamma - 1.0);
      switch (which) {
        case BalanceField::h:
          value += -pp * d.div_u.v[x] * s.h.v[x] + inv_rho * d.sk.v[x] * s.h.v[x];
          break;
        case BalanceField::m:
          value += -s.eps.v[x] * s.m.v[x] + inv_rho * d.g.v[x] * s.m.v[x];
          break;
        case BalanceField::eps: {
          const double e = s.eps.v[x];
          value += p.c1 * d.g.v[x] * e * e * inv_rho / d.kk.v[x] -
                   p.c2 * e * e * e / d.kk.v[x];
          break;
        }
        default: break;
      }
      rhs.v[x] = value;
    }
    r.right = integrate_domain(rhs);
  }

  r.residual = std::abs(r.left - r.right);
  r.scale = std::max({std::abs(r.left), std::abs(r.right), 1e-30});
  r.pass = r.residual <= tol * r.scale;
  return r;
}

std::vector<AuditReport> run_all_audits(const PerturbationState& s, const ModelParams& p,
                                        double tol) {
  std::vector<AuditReport> out;
  out.push_back(audit_skew_pressure(s, p, tol));
  for (BalanceField f : {BalanceField::u, BalanceField::h, BalanceField::m, BalanceField::eps})
    out.push_back(audit_l2_balance(s, p, f, tol));
  return out;
}

EnergyReport make_energy_report(const PerturbationState& s, const ModelParams& p,
                                double alpha, const EnergyReport* prev) {
  EnergyReport r;
  r.t = s.t;
  r.comp_a = sobolev_norm_sq(s.a, 3);
  r.comp_u = 0.0;
  for (const auto& ui : s.u) r.comp_u += sobolev_norm_sq(ui, 3);
  r.comp_h = sobolev_norm_sq(s.h, 3);
  r.comp_m = sobolev_norm_sq(s.m, 3);
  r.comp_eps = sobolev_norm_sq(s.eps, 3);
  r.E = r.comp_a + r.comp_u + r.comp_h + r.comp_m + r.comp_eps;
  r.D = dissipation(s);

  const AdmissibilityReport rep = validate_state(s, p);
  r.rho_min = rep.rho_min;
  r.rho_max = rep.rho_max;
  r.k_min = rep.k_min;
  r.k_max = rep.k_max;
  r.window_ok = rep.within_window;

  r.sup_a = sup_abs(s.a);
  r.sup_u = 0.0;
  for (const auto& ui : s.u) r.sup_u = std::max(r.sup_u, sup_abs(ui));
  r.sup_h = sup_abs(s.h);
  r.sup_m = sup_abs(s.m);
  r.sup_eps = sup_abs(s.eps);

  // L needs rho > 0 pointwise (F(a) is undefined at vacuum); outside that the
  // row carries 0 and window_ok flags the state.
  r.L_alpha = (rep.finite && rep.rho_min > 0.0) ? lyapunov_impl(s, p, alpha) : 0.0;

  if (prev) {
    const double dt = r.t - prev->t;
    r.cumD = prev->cumD + 0.5 * dt * (r.D + prev->D);
  } else {
    r.cumD = 0.0;
  }
  return r;
}

AprioriSummary monitor_apriori(const std::vector<EnergyReport>& series) {
  if (series.empty()) throw ConfigError("monitor_apriori: empty series");
  const double e0 = series.front().E;
  if (!(e0 > 0.0))
    throw ConfigError("monitor_apriori: degenerate series (E(0) = 0)");
  AprioriSummary s;
  s.e0 = e0;
  s.bounds_ok = true;
  for (const auto& row : series) {
    const double c = (row.E + row.cumD) / e0;
    if (c > s.observed_C) {
      s.observed_C = c;
      s.t_at_max = row.t;
    }
    s.max_E_ratio = std::max(s.max_E_ratio, row.E / e0);
    s.bounds_ok = s.bounds_ok && row.window_ok;
  }
  s.e_within_2x = s.max_E_ratio <= 2.0;
  return s;
}

}  // namespace keps
