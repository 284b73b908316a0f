#include "integrator.hpp"

#include <cmath>

namespace keps {

namespace {
constexpr double kRk4RealAxisBound = 2.785;
constexpr double kRk4ImagAxisBound = 2.8;
}  // namespace

void StepControl::validate() const {
  if (!(t_end > 0.0)) throw ConfigError("step control: t_end must be positive");
  if (!(safety > 0.0 && safety <= 1.0))
    throw ConfigError("step control: safety must lie in (0, 1]");
  if (dt && !(*dt > 0.0)) throw ConfigError("step control: dt must be positive");
  if (max_steps <= 0) throw ConfigError("step control: max_steps must be positive");
}

PerturbationState state_axpy(const PerturbationState& s, double c, const Tendency& td) {
  PerturbationState out = s;
  for (std::size_t i = 0; i < out.a.v.size(); ++i) out.a.v[i] += c * td.a_t.v[i];
  for (int d = 0; d < s.dim(); ++d)
    for (std::size_t i = 0; i < out.u[d].v.size(); ++i)
      out.u[d].v[i] += c * td.u_t[d].v[i];
  for (std::size_t i = 0; i < out.h.v.size(); ++i) out.h.v[i] += c * td.h_t.v[i];
  for (std::size_t i = 0; i < out.m.v.size(); ++i) out.m.v[i] += c * td.m_t.v[i];
  for (std::size_t i = 0; i < out.eps.v.size(); ++i) out.eps.v[i] += c * td.eps_t.v[i];
  return out;
}

double stable_dt(const PerturbationState& s, const ModelParams& p, const StepControl& c) {
  const AdmissibilityReport r = validate_state(s, p);
  if (!r.finite) throw NumericsError("stable_dt: non-finite state");
  if (!r.within_window)
    throw AdmissibilityError(r, "stable_dt: state outside admissibility window");

  const Grid& g = s.grid();
  const int cut = g.dealias_cutoff();
  const double kappa_unit = two_pi / g.length();
  const double kappa_max = kappa_unit * cut * std::sqrt(static_cast<double>(g.dim()));
  const double kappa2_max = kappa_max * kappa_max;

  const double nu_max = 1.0 / r.rho_min;
  double sup_u = 0.0;
  for (const auto& ui : s.u) sup_u = std::max(sup_u, sup_abs(ui));

  const double diffusive = kRk4RealAxisBound / (2.0 * nu_max * kappa2_max);
  const double advective = kRk4ImagAxisBound / (sup_u * kappa_max + 1e-30);
  return c.safety * std::min(diffusive, advective);
}

namespace {

PerturbationState rk4_core(const PerturbationState& s, double dt, const RhsFn& rhs) {
  const Tendency k1 = rhs(s);
  const Tendency k2 = rhs(state_axpy(s, 0.5 * dt, k1));
  const Tendency k3 = rhs(state_axpy(s, 0.5 * dt, k2));
  const Tendency k4 = rhs(state_axpy(s, dt, k3));
  PerturbationState out = state_axpy(s, dt / 6.0, k1);
  out = state_axpy(out, dt / 3.0, k2);
  out = state_axpy(out, dt / 3.0, k3);
  out = state_axpy(out, dt / 6.0, k4);
  out.t = s.t + dt;
  return out;
}

}  // namespace

PerturbationState rk4_step(const PerturbationState& s, double dt, const ModelParams& p) {
  if (!(dt > 0.0)) throw ConfigError("rk4_step: dt must be positive");
  return rk4_core(s, dt, [&](const PerturbationState& y) { return compute_rhs(y, p); });
}

PerturbationState rk4_step(const PerturbationState& s, double dt, const RhsFn& rhs) {
  if (!(dt > 0.0)) throw ConfigError("rk4_step: dt must be positive");
  return rk4_core(s, dt, rhs);
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::complete: return "complete";
    case RunStatus::guard_violation: return "guard_violation";
    case RunStatus::step_failure: return "step_failure";
    case RunStatus::max_steps_exceeded: return "max_steps_exceeded";
  }
  return "unknown";
}

AdvanceResult advance(const PerturbationState& initial, const ModelParams& p,
                      const StepControl& control, const std::vector<Observer>& observers) {
  control.validate();
  AdvanceResult res;
  res.state = initial;

  auto notify = [&](long step_index, bool force) {
    for (const auto& obs : observers) {
      if (!obs.fn) continue;
      if (force || (obs.stride > 0 && step_index % obs.stride == 0))
        obs.fn(res.state, step_index);
    }
  };

  const AdmissibilityReport r0 = validate_state(res.state, p);
  if (!r0.finite) {
    res.status = RunStatus::step_failure;
    res.failure_detail = "initial state non-finite";
    return res;
  }
  if (!r0.within_window) {
    res.violation = r0;
    res.window_violated = true;
    if (control.guard_mode == GuardMode::abort) {
      res.status = RunStatus::guard_violation;
      res.failure_detail = "initial state outside admissibility window: " + r0.describe();
      notify(0, true);
      return res;
    }
  }

  notify(0, true);

  const bool enforce = control.guard_mode == GuardMode::abort;
  const RhsFn rhs = [&](const PerturbationState& y) {
    return compute_rhs(y, p, enforce);
  };

  bool had_violation = !r0.within_window;
  if (had_violation) res.violation = r0;
  long step = 0;
  const double t_end = initial.t + control.t_end;

  while (res.state.t < t_end - 1e-14 * std::max(1.0, std::abs(t_end))) {
    if (step >= control.max_steps) {
      res.status = RunStatus::max_steps_exceeded;
      res.failure_detail = "max_steps exceeded before reaching t_end";
      return res;
    }
    double dt;
    try {
      dt = control.dt ? *control.dt : stable_dt(res.state, p, control);
    } catch (const AdmissibilityError& e) {
      // report-mode state wandered outside the window: fall back to the
      // window-edge diffusive bound so the run can continue
      const AdmissibilityReport r = validate_state(res.state, p);
      const Grid& g = res.state.grid();
      const double kmax = (two_pi / g.length()) * g.dealias_cutoff() *
                          std::sqrt(static_cast<double>(g.dim()));
      if (!(r.rho_min > 1e-10)) {
        res.status = RunStatus::step_failure;
        res.failure_detail = e.what();
        return res;
      }
      dt = control.safety * kRk4RealAxisBound / (2.0 * (1.0 / r.rho_min) * kmax * kmax);
    }
    dt = std::min(dt, t_end - res.state.t);

    try {
      PerturbationState next = rk4_core(res.state, dt, rhs);
      // land exactly on t_end (reproducible series)
      if (std::abs(next.t - t_end) < 1e-12 * std::max(1.0, std::abs(t_end))) next.t = t_end;
      res.state = std::move(next);
    } catch (const AdmissibilityError& e) {
      res.status = RunStatus::guard_violation;
      res.window_violated = true;
      res.failure_detail = e.what();
      res.violation = e.report;
      res.steps_taken = step;
      return res;
    } catch (const NumericsError& e) {
      res.status = RunStatus::step_failure;
      res.failure_detail = e.what();
      res.steps_taken = step;
      return res;
    }
    ++step;

    const AdmissibilityReport r = validate_state(res.state, p);
    const bool ok = r.within_window;
    res.log.push_back({res.state.t, dt, ok});
    if (!ok && !had_violation) {
      had_violation = true;
      res.violation = r;
    }
    if (!ok && control.guard_mode == GuardMode::abort) {
      res.status = RunStatus::guard_violation;
      res.window_violated = true;
      res.failure_detail = "state left admissibility window: " + r.describe();
      res.steps_taken = step;
      notify(step, true);
      return res;
    }

    const bool at_end = res.state.t >= t_end - 1e-14 * std::max(1.0, std::abs(t_end));
    notify(step, at_end);
  }

  res.steps_taken = step;
  res.status = RunStatus::complete;
  res.window_violated = had_violation;
  return res;
}

}  // namespace keps
