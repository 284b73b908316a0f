/// @file integrator.hpp
/// @brief Classical RK4 time stepping with stability-derived step control and
///        admissibility guards on every stage.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"

namespace keps {

enum class GuardMode { abort, report };

struct StepControl {
  std::optional<double> dt;  ///< fixed step when set, else stability-derived
  double safety = 0.9;       ///< factor in (0, 1]
  double t_end = 0.0;
  long max_steps = 1000000;
  GuardMode guard_mode = GuardMode::abort;

  void validate() const;
};

/// Right-hand side; defaults to compute_rhs with fixed parameters.
using RhsFn = std::function<Tendency(const PerturbationState&)>;

/// state + c * tendency (t unchanged).
PerturbationState state_axpy(const PerturbationState& s, double c, const Tendency& td);

/// Stability-derived step:
///   dt = safety * min(diffusive, advective)
/// with diffusive = 2.785 / (2 * nu_max * |kappa|^2_max), nu_max = 1/min(rho),
/// advective = 2.8 / (sup|u| * |kappa|_max + 1e-30), and |kappa|_max the
/// largest retained (dealiased) wavenumber magnitude. 2.785 is the real-axis
/// stability bound of classical RK4; the factor 2 is the symbol maximum of
/// the momentum operator (lap + grad div) on compressive modes.
double stable_dt(const PerturbationState& s, const ModelParams& p, const StepControl& c);

/// One classical four-stage Runge-Kutta step of the model equations; every
/// stage is checked against the admissibility window.
PerturbationState rk4_step(const PerturbationState& s, double dt, const ModelParams& p);

/// Generic-RHS variant used by linear-regime tests; stages are only checked
/// for finiteness.
PerturbationState rk4_step(const PerturbationState& s, double dt, const RhsFn& rhs);

enum class RunStatus { complete, guard_violation, step_failure, max_steps_exceeded };

const char* to_string(RunStatus s);

struct StepRecord {
  double t = 0.0;   ///< time after the step
  double dt = 0.0;
  bool window_ok = true;
};

struct AdvanceResult {
  PerturbationState state;
  RunStatus status = RunStatus::complete;
  bool window_violated = false;  ///< any window violation, even in report mode
  std::vector<StepRecord> log;
  std::string failure_detail;
  AdmissibilityReport violation;  ///< first window violation, if any
  long steps_taken = 0;
};

/// Observer invoked at t = 0, then every `stride` accepted steps, and at the
/// final state. Must treat the state as read-only.
struct Observer {
  int stride = 1;
  std::function<void(const PerturbationState&, long step_index)> fn;
};

/// March to control.t_end, stepping with stable_dt (or the fixed dt), the
/// last step clipped to land exactly on t_end. In abort mode a window
/// violation stops the run with a structured report; in report mode it is
/// recorded and the run continues while values stay finite.
AdvanceResult advance(const PerturbationState& initial, const ModelParams& p,
                      const StepControl& control, const std::vector<Observer>& observers);

}  // namespace keps
