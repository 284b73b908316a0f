#include "model.hpp"

#include <cmath>
#include <sstream>

namespace keps {

void ModelParams::validate() const {
  auto pos = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw ConfigError(std::string("model parameter ") + name + " must be positive");
  };
  pos(rho_bar, "rho_bar");
  pos(k_bar, "k_bar");
  pos(mu, "mu");
  pos(mu_t, "mu_t");
  pos(c1, "c1");
  pos(c2, "c2");
  pos(kappa, "kappa");
  if (!(gamma > 1.0)) throw ConfigError("model parameter gamma must be > 1");
}

PerturbationState equilibrium_state(const Grid& g) {
  PerturbationState s;
  s.t = 0.0;
  s.a = ScalarField(g);
  s.u.assign(g.dim(), ScalarField(g));
  s.h = ScalarField(g);
  s.m = ScalarField(g);
  s.eps = ScalarField(g);
  return s;
}

std::string AdmissibilityReport::describe() const {
  std::ostringstream os;
  os << "rho in [" << rho_min << ", " << rho_max << "], k in [" << k_min << ", "
     << k_max << "], finite=" << (finite ? "yes" : "no")
     << ", within_window=" << (within_window ? "yes" : "no");
  return os.str();
}

AdmissibilityReport validate_state(const PerturbationState& s, const ModelParams& p) {
  AdmissibilityReport r;
  r.finite = all_finite(s.a) && all_finite(s.h) && all_finite(s.m) && all_finite(s.eps);
  for (const auto& ui : s.u) r.finite = r.finite && all_finite(ui);
  double amin = s.a.v[0], amax = s.a.v[0];
  for (double x : s.a.v) {
    amin = std::min(amin, x);
    amax = std::max(amax, x);
  }
  double mmin = s.m.v[0], mmax = s.m.v[0];
  for (double x : s.m.v) {
    mmin = std::min(mmin, x);
    mmax = std::max(mmax, x);
  }
  r.rho_min = amin + p.rho_bar;
  r.rho_max = amax + p.rho_bar;
  r.k_min = mmin + p.k_bar;
  r.k_max = mmax + p.k_bar;
  r.within_window = r.finite && r.rho_min >= 0.5 * p.rho_bar &&
                    r.rho_max <= 2.0 * p.rho_bar && r.k_min >= 0.5 * p.k_bar &&
                    r.k_max <= 2.0 * p.k_bar;
  return r;
}

double pressure(double rho, const ModelParams& p) {
  if (!(rho > 0.0)) throw NumericsError("pressure: rho must be positive");
  return p.kappa * std::pow(rho, p.gamma);
}

double pressure_prime(double rho, const ModelParams& p) {
  if (!(rho > 0.0)) throw NumericsError("pressure_prime: rho must be positive");
  return p.kappa * p.gamma * std::pow(rho, p.gamma - 1.0);
}

double f_prime(double rho, const ModelParams& p) {
  return pressure_prime(rho, p) / rho;
}

double f_dev(double rho, const ModelParams& p) {
  if (!(rho > 0.0)) throw NumericsError("f_dev: rho must be positive");
  if (p.gamma == 2.0) return 2.0 * p.kappa * (rho - p.rho_bar);
  const double g1 = p.gamma - 1.0;
  return p.kappa * p.gamma / g1 * (std::pow(rho, g1) - std::pow(p.rho_bar, g1));
}

namespace {

// Gauss-Kronrod 7-15 nodes and weights (positive half).
constexpr double kGkNode[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
constexpr double kGkWeight[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kGaussWeight[4] = {0.129484966168870, 0.279705391489277,
                                    0.381830050505119, 0.417959183673469};

template <typename Fn>
void gk15(Fn&& fn, double lo, double hi, double& kronrod, double& err) {
  const double c = 0.5 * (lo + hi);
  const double hw = 0.5 * (hi - lo);
  double fsum[8];
  for (int i = 0; i < 7; ++i) {
    const double x = hw * kGkNode[i];
    fsum[i] = fn(c - x) + fn(c + x);
  }
  fsum[7] = fn(c);
  double k15 = kGkWeight[7] * fsum[7];
  for (int i = 0; i < 7; ++i) k15 += kGkWeight[i] * fsum[i];
  // the embedded 7-point Gauss rule uses the odd-indexed nodes plus the center
  double g7 = kGaussWeight[3] * fsum[7];
  for (int i = 1; i <= 5; i += 2) g7 += kGaussWeight[i / 2] * fsum[i];
  kronrod = hw * k15;
  err = std::abs(hw * (k15 - g7));
}

template <typename Fn>
double adaptive_quadrature(Fn&& fn, double lo, double hi, double abstol, int depth = 0) {
  double k, err;
  gk15(fn, lo, hi, k, err);
  if (err <= abstol || depth >= 48) return k;
  const double mid = 0.5 * (lo + hi);
  return adaptive_quadrature(fn, lo, mid, abstol * 0.5, depth + 1) +
         adaptive_quadrature(fn, mid, hi, abstol * 0.5, depth + 1);
}

}  // namespace

double F_of_a(double a_value, const ModelParams& p) {
  if (!(a_value > -p.rho_bar))
    throw NumericsError("F_of_a: a must stay above -rho_bar (vacuum)");
  if (a_value == 0.0) return 0.0;
  if (p.gamma == 2.0)
    return 2.0 * p.kappa * (a_value - p.rho_bar * std::log1p(a_value / p.rho_bar));
  auto integrand = [&](double s) { return f_dev(s + p.rho_bar, p) / (s + p.rho_bar); };
  return adaptive_quadrature(integrand, 0.0, a_value, 1e-12);
}

namespace {

template <typename Fn>
ScalarField pointwise(const Grid& g, Fn&& fn) {
  ScalarField out(g);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = fn(i);
  return out;
}

void require_evaluable(const AdmissibilityReport& r, bool enforce_window) {
  if (!r.finite) throw NumericsError("state contains non-finite values");
  if (r.rho_min <= 1e-10 || r.k_min <= 1e-10)
    throw NumericsError("state denominators collapsed (rho or k near zero)");
  if (enforce_window && !r.within_window)
    throw AdmissibilityError(r, "state outside admissibility window: " + r.describe());
}

}  // namespace

StateDerivatives compute_derivatives(const PerturbationState& s, const ModelParams& p) {
  const Grid& g = s.grid();
  const int dim = g.dim();
  StateDerivatives d;

  d.rho = pointwise(g, [&](std::size_t i) { return s.a.v[i] + p.rho_bar; });
  d.kk = pointwise(g, [&](std::size_t i) { return s.m.v[i] + p.k_bar; });

  const SpectralField fa = forward_transform(s.a);
  const SpectralField fh = forward_transform(s.h);
  const SpectralField fm = forward_transform(s.m);
  const SpectralField fe = forward_transform(s.eps);
  std::vector<SpectralField> fu;
  fu.reserve(dim);
  for (int i = 0; i < dim; ++i) fu.push_back(forward_transform(s.u[i]));

  d.grad_a.resize(dim);
  d.grad_h.resize(dim);
  d.grad_m.resize(dim);
  d.grad_e.resize(dim);
  for (int i = 0; i < dim; ++i) {
    d.grad_a[i] = inverse_transform(derivative_spectral(fa, i));
    d.grad_h[i] = inverse_transform(derivative_spectral(fh, i));
    d.grad_m[i] = inverse_transform(derivative_spectral(fm, i));
    d.grad_e[i] = inverse_transform(derivative_spectral(fe, i));
  }

  d.du.assign(dim, std::vector<ScalarField>());
  for (int i = 0; i < dim; ++i) {
    d.du[i].resize(dim);
    for (int j = 0; j < dim; ++j)
      d.du[i][j] = inverse_transform(derivative_spectral(fu[i], j));
  }
  d.div_u = pointwise(g, [&](std::size_t i) {
    double s0 = d.du[0][0].v[i];
    for (int k = 1; k < dim; ++k) s0 += d.du[k][k].v[i];
    return s0;
  });

  d.lap_u.resize(dim);
  d.grad_div_u.resize(dim);
  SpectralField fdiv(g);
  for (int i = 0; i < dim; ++i) {
    d.lap_u[i] = inverse_transform(laplacian_spectral(fu[i]));
    const SpectralField di = derivative_spectral(fu[i], i);
    for (std::size_t k = 0; k < fdiv.c.size(); ++k) fdiv.c[k] += di.c[k];
  }
  for (int i = 0; i < dim; ++i)
    d.grad_div_u[i] = inverse_transform(derivative_spectral(fdiv, i));

  d.lap_h = inverse_transform(laplacian_spectral(fh));
  d.lap_m = inverse_transform(laplacian_spectral(fm));
  d.lap_e = inverse_transform(laplacian_spectral(fe));

  // S_k = [mu (du_ij + du_ji) - (2/3) delta_ij mu div u] du_ij
  //       + mu_t/rho^2 * p'(rho) |grad a|^2
  // G   = du_ij [mu_e (du_ij + du_ji) - (2/3) delta_ij (rho k + mu_e div u)]
  d.sk = pointwise(g, [&](std::size_t x) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        double tau = p.mu * (d.du[i][j].v[x] + d.du[j][i].v[x]);
        if (i == j) tau -= (2.0 / 3.0) * p.mu * d.div_u.v[x];
        acc += tau * d.du[i][j].v[x];
      }
    double ga2 = 0.0;
    for (int j = 0; j < dim; ++j) ga2 += d.grad_a[j].v[x] * d.grad_a[j].v[x];
    const double rho = d.rho.v[x];
    const double pp = p.kappa * p.gamma * std::pow(rho, p.gamma - 1.0);
    return acc + p.mu_t / (rho * rho) * pp * ga2;
  });
  d.g = pointwise(g, [&](std::size_t x) {
    double acc = 0.0;
    const double rhok = d.rho.v[x] * d.kk.v[x];
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        double t = p.mu_e() * (d.du[i][j].v[x] + d.du[j][i].v[x]);
        if (i == j) t -= (2.0 / 3.0) * (rhok + p.mu_e() * d.div_u.v[x]);
        acc += d.du[i][j].v[x] * t;
      }
    return acc;
  });

  return d;
}

ScalarField compute_Sk(const PerturbationState& s, const ModelParams& p) {
  require_evaluable(validate_state(s, p), true);
  return dealias(compute_derivatives(s, p).sk);
}

ScalarField compute_G(const PerturbationState& s, const ModelParams& p) {
  require_evaluable(validate_state(s, p), true);
  return dealias(compute_derivatives(s, p).g);
}

namespace {

// Shared assembly of the perturbation-system right-hand side; the public
// entry dealiases every product, the conservative check uses the raw fields.
Tendency assemble_rhs(const PerturbationState& s, const ModelParams& p,
                      const StateDerivatives& d, bool do_dealias) {
  const Grid& g = s.grid();
  const int dim = g.dim();

  Tendency td;

  // a_t = -div(rho u), assembled in spectral space.
  {
    SpectralField div(g);
    for (int i = 0; i < dim; ++i) {
      const ScalarField w = pointwise(g, [&](std::size_t x) { return d.rho.v[x] * s.u[i].v[x]; });
      const SpectralField di = derivative_spectral(forward_transform(w), i);
      for (std::size_t k = 0; k < div.c.size(); ++k) div.c[k] += di.c[k];
    }
    if (do_dealias) dealias_inplace(div);
    td.a_t = inverse_transform(div);
    for (double& x : td.a_t.v) x = -x;
  }

  auto finish = [&](ScalarField&& f) {
    return do_dealias ? dealias(f) : std::move(f);
  };

  // u_t = -u.grad u + (lap u + grad div u)/rho - f'(rho) grad a
  //       - (2/(3 rho)) [k grad a + rho grad m]
  td.u_t.resize(dim);
  for (int i = 0; i < dim; ++i) {
    ScalarField ut = pointwise(g, [&](std::size_t x) {
      const double rho = d.rho.v[x];
      const double inv_rho = 1.0 / rho;
      const double pp = p.kappa * p.gamma * std::pow(rho, p.gamma - 1.0);
      double adv = 0.0;
      for (int j = 0; j < dim; ++j) adv += s.u[j].v[x] * d.du[i][j].v[x];
      return -adv + inv_rho * (d.lap_u[i].v[x] + d.grad_div_u[i].v[x]) -
             pp * inv_rho * d.grad_a[i].v[x] -
             (2.0 / 3.0) * inv_rho * (d.kk.v[x] * d.grad_a[i].v[x] + rho * d.grad_m[i].v[x]);
    });
    td.u_t[i] = finish(std::move(ut));
  }

  // h_t = -u.grad h + lap h / rho - p'(rho) div u + S_k / rho
  {
    ScalarField ht = pointwise(g, [&](std::size_t x) {
      const double rho = d.rho.v[x];
      const double pp = p.kappa * p.gamma * std::pow(rho, p.gamma - 1.0);
      double adv = 0.0;
      for (int j = 0; j < dim; ++j) adv += s.u[j].v[x] * d.grad_h[j].v[x];
      return -adv + d.lap_h.v[x] / rho - pp * d.div_u.v[x] + d.sk.v[x] / rho;
    });
    td.h_t = finish(std::move(ht));
  }

  // m_t = -u.grad m + lap m / rho + G / rho - eps
  {
    ScalarField mt = pointwise(g, [&](std::size_t x) {
      const double rho = d.rho.v[x];
      double adv = 0.0;
      for (int j = 0; j < dim; ++j) adv += s.u[j].v[x] * d.grad_m[j].v[x];
      return -adv + d.lap_m.v[x] / rho + d.g.v[x] / rho - s.eps.v[x];
    });
    td.m_t = finish(std::move(mt));
  }

  // eps_t = -u.grad eps + lap eps / rho + C1 G eps / (rho k) - C2 eps^2 / k
  {
    ScalarField et = pointwise(g, [&](std::size_t x) {
      const double rho = d.rho.v[x];
      const double kk = d.kk.v[x];
      double adv = 0.0;
      for (int j = 0; j < dim; ++j) adv += s.u[j].v[x] * d.grad_e[j].v[x];
      return -adv + d.lap_e.v[x] / rho + p.c1 * d.g.v[x] * s.eps.v[x] / (rho * kk) -
             p.c2 * s.eps.v[x] * s.eps.v[x] / kk;
    });
    td.eps_t = finish(std::move(et));
  }

  return td;
}

}  // namespace

Tendency compute_rhs(const PerturbationState& s, const ModelParams& p,
                     bool enforce_window) {
  require_evaluable(validate_state(s, p), enforce_window);
  const StateDerivatives d = compute_derivatives(s, p);
  Tendency td = assemble_rhs(s, p, d, /*do_dealias=*/true);
  for (const ScalarField* f : {&td.a_t, &td.h_t, &td.m_t, &td.eps_t})
    if (!all_finite(*f)) throw NumericsError("non-finite tendency");
  for (const auto& f : td.u_t)
    if (!all_finite(f)) throw NumericsError("non-finite tendency");
  return td;
}

namespace {

double l2_norm(const ScalarField& f) {
  double s = 0.0;
  for (double x : f.v) s += x * x;
  double w = 1.0;
  for (int d = 0; d < f.grid.dim(); ++d) w *= f.grid.spacing();
  return std::sqrt(w * s);
}

}  // namespace

ConservativeCheck conservative_residual(const PerturbationState& s, const Tendency& given,
                                        const ModelParams& p) {
  const Grid& g = s.grid();
  const int dim = g.dim();
  const StateDerivatives d = compute_derivatives(s, p);

  // Two checks fold into one residual. First, the supplied tendency must be
  // the dealiased assembly of the perturbation-form right-hand side (catches
  // corrupted tendencies). Second, the raw right-hand side must satisfy the
  // conservative form on the resolved modes (certifies the rewrite without
  // mixing in the two-thirds truncation, which lives in neither formulation).
  const Tendency td = assemble_rhs(s, p, d, /*do_dealias=*/false);

  ConservativeCheck out;
  {
    auto consistency = [&](const ScalarField& supplied, const ScalarField& raw) {
      ScalarField diff = dealias(raw);
      for (std::size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = supplied.v[i] - diff.v[i];
      out.max_residual = std::max(out.max_residual, l2_norm(diff));
    };
    consistency(given.a_t, td.a_t);
    for (int i = 0; i < dim; ++i) consistency(given.u_t[i], td.u_t[i]);
    consistency(given.h_t, td.h_t);
    consistency(given.m_t, td.m_t);
    consistency(given.eps_t, td.eps_t);
  }
  auto note = [&](int eq, const ScalarField& residual, double term_scale) {
    const double r = l2_norm(dealias(residual));
    out.residual_by_eq[eq] = r;
    out.max_residual = std::max(out.max_residual, r);
    out.scale = std::max(out.scale, term_scale);
  };

  const ScalarField pp = pointwise(g, [&](std::size_t x) {
    return p.kappa * p.gamma * std::pow(d.rho.v[x], p.gamma - 1.0);
  });

  // mass: a_t + u.grad a + rho div u  (product-rule route)
  {
    ScalarField r = pointwise(g, [&](std::size_t x) {
      double adv = 0.0;
      for (int j = 0; j < dim; ++j) adv += s.u[j].v[x] * d.grad_a[j].v[x];
      return td.a_t.v[x] + adv + d.rho.v[x] * d.div_u.v[x];
    });
    note(0, r, std::max(l2_norm(td.a_t), l2_norm(d.div_u)));
  }

  // momentum: rho_t u + rho u_t + div(rho u x u) - lap u - grad div u
  //           + p'(rho) grad a + (2/3) grad(rho k), direct product routes
  {
    double scale = 0.0;
    for (int i = 0; i < dim; ++i) scale = std::max(scale, l2_norm(d.lap_u[i]));
    const ScalarField rhok = pointwise(g, [&](std::size_t x) { return d.rho.v[x] * d.kk.v[x]; });
    const SpectralField frhok = forward_transform(rhok);
    double worst = 0.0;
    for (int i = 0; i < dim; ++i) {
      ScalarField divflux(g);
      for (int j = 0; j < dim; ++j) {
        const ScalarField q = pointwise(g, [&](std::size_t x) {
          return d.rho.v[x] * s.u[i].v[x] * s.u[j].v[x];
        });
        const ScalarField dq = inverse_transform(derivative_spectral(forward_transform(q), j));
        for (std::size_t x = 0; x < divflux.v.size(); ++x) divflux.v[x] += dq.v[x];
      }
      const ScalarField grad_rhok_i = inverse_transform(derivative_spectral(frhok, i));
      ScalarField r = pointwise(g, [&](std::size_t x) {
        return td.a_t.v[x] * s.u[i].v[x] + d.rho.v[x] * td.u_t[i].v[x] + divflux.v[x] -
               d.lap_u[i].v[x] - d.grad_div_u[i].v[x] + pp.v[x] * d.grad_a[i].v[x] +
               (2.0 / 3.0) * grad_rhok_i.v[x];
      });
      worst = std::max(worst, l2_norm(dealias(r)));
    }
    out.residual_by_eq[1] = worst;
    out.max_residual = std::max(out.max_residual, worst);
    out.scale = std::max(out.scale, scale);
  }

  // scalar equations share the transport shell (rho w)_t + div(rho u w) - lap w = RHS
  auto transport_residual = [&](const ScalarField& w, const ScalarField& w_t,
                                const ScalarField& lap_w, const ScalarField& rhs) {
    ScalarField divflux(g);
    for (int j = 0; j < dim; ++j) {
      const ScalarField q = pointwise(g, [&](std::size_t x) {
        return d.rho.v[x] * s.u[j].v[x] * w.v[x];
      });
      const ScalarField dq = inverse_transform(derivative_spectral(forward_transform(q), j));
      for (std::size_t x = 0; x < divflux.v.size(); ++x) divflux.v[x] += dq.v[x];
    }
    return pointwise(g, [&](std::size_t x) {
      return td.a_t.v[x] * w.v[x] + d.rho.v[x] * w_t.v[x] + divflux.v[x] - lap_w.v[x] -
             rhs.v[x];
    });
  };

  // enthalpy: RHS = Dp/Dt + S_k with Dp/Dt = p'(rho) (a_t + u.grad a)
  {
    const ScalarField rhs = pointwise(g, [&](std::size_t x) {
      double adv = 0.0;
      for (int j = 0; j < dim; ++j) adv += s.u[j].v[x] * d.grad_a[j].v[x];
      return pp.v[x] * (td.a_t.v[x] + adv) + d.sk.v[x];
    });
    note(2, transport_residual(s.h, td.h_t, d.lap_h, rhs),
         std::max(l2_norm(d.lap_h), l2_norm(rhs)));
  }

  // turbulent kinetic energy: w = m + k_bar, RHS = G - rho eps
  {
    const ScalarField rhs = pointwise(g, [&](std::size_t x) {
      return d.g.v[x] - d.rho.v[x] * s.eps.v[x];
    });
    note(3, transport_residual(d.kk, td.m_t, d.lap_m, rhs),
         std::max(l2_norm(d.lap_m), l2_norm(rhs)));
  }

  // dissipation rate: RHS = C1 G eps / k - C2 rho eps^2 / k
  {
    const ScalarField rhs = pointwise(g, [&](std::size_t x) {
      return p.c1 * d.g.v[x] * s.eps.v[x] / d.kk.v[x] -
             p.c2 * d.rho.v[x] * s.eps.v[x] * s.eps.v[x] / d.kk.v[x];
    });
    note(4, transport_residual(s.eps, td.eps_t, d.lap_e, rhs),
         std::max(l2_norm(d.lap_e), l2_norm(rhs)));
  }

  out.scale = std::max(out.scale, 1e-30);
  return out;
}

}  // namespace keps
