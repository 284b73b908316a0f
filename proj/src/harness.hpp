/// @file harness.hpp
/// @brief Config-driven experiment drivers: single runs, amplitude sweeps,
///        refinement studies and identity-audit suites, with CSV series,
///        JSON summaries and binary checkpoints.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "integrator.hpp"
#include "monitor.hpp"

namespace keps {

/// Deterministic 64-bit generator (splitmix64). Chosen for cross-
/// implementation reproducibility: the update and output functions are fixed
/// by the published constants, so any implementation reproduces the stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

enum class IcPreset { single_mode, random_bandlimited };

struct RunConfig {
  struct {
    int dim = 1;
    int n = 32;
    double length = two_pi;
  } grid;

  ModelParams params;

  struct {
    IcPreset preset = IcPreset::single_mode;
    double amplitude = 0.0;  ///< target H^3 norm delta_0
    int kmax = 4;
    std::uint64_t seed = 1;
  } ic;

  struct {
    double t_end = 0.0;
    std::optional<double> dt;
    double safety = 0.9;
    long max_steps = 1000000;
    GuardMode guard_mode = GuardMode::abort;
  } time;

  struct {
    double alpha = 0.01;
    int stride = 10;
    std::vector<std::string> audits;  ///< identity names; default all
  } monitor;

  struct {
    std::string dir = "out";
    std::vector<std::string> formats;  ///< subset of {csv, json, checkpoint}
  } output;

  StepControl step_control() const;
  std::string to_json() const;  ///< full echo with defaults applied
};

/// Parse and validate a config; throws ConfigError with a field-level message.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Synthesize the initial condition. single_mode: every field c*sin(x_1)
/// with one shared c such that theorem_energy == amplitude^2 exactly.
/// random_bandlimited: independent uniform amplitudes/phases per field on
/// modes 0 < |k|_inf <= kmax, then one global rescale to the target energy.
/// Same seed => bit-identical state. The mode stream depends only on
/// (dim, kmax), so refinement studies see identical spectra across n.
PerturbationState make_initial_condition(const RunConfig& cfg, const Grid& g,
                                         const ModelParams& p);

enum class ExitKind { clean = 0, config_error = 1, guard_violation = 2, step_failure = 3 };

struct RunResult {
  ExitKind exit_kind = ExitKind::clean;
  RunStatus status = RunStatus::complete;
  bool window_violated = false;
  std::vector<EnergyReport> series;
  std::optional<AprioriSummary> apriori;  ///< absent when E(0) = 0
  std::vector<AuditReport> final_audits;
  std::string detail;
  std::string series_path;   ///< written files (empty when not written)
  std::string summary_path;
  std::string checkpoint_path;
};

/// Advance to t_end sampling an EnergyReport at t = 0, every stride steps and
/// at the final state; write series/summary (and checkpoint when requested)
/// under cfg.output.dir. Partial outputs are flushed on failure.
RunResult run_experiment(const RunConfig& cfg);

struct SweepRow {
  double delta0 = 0.0;
  ExitKind exit_kind = ExitKind::clean;
  bool completed = false;
  bool window_violated = false;
  std::optional<double> observed_C;   ///< absent when the run has no series
  std::optional<double> max_E_ratio;  ///< absent when the run has no series
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool monotone_observed_C = true;  ///< nondecreasing over completed rows (tol 1e-9)
  ExitKind exit_kind = ExitKind::clean;  ///< worst row outcome
  std::string table_path;
  std::string summary_path;
};

/// One run per amplitude (ascending, shared seed). Guard violations are
/// recorded per row, not fatal to the sweep.
SweepResult sweep_amplitude(const RunConfig& cfg, const std::vector<double>& amplitudes);

struct RefinementResult {
  // dt study
  std::vector<double> dts;
  std::vector<double> diffs;  ///< sup-norm final-state differences between dts
  double fitted_order = 0.0;
  // resolution study
  std::vector<int> resolutions;
  std::vector<std::vector<AuditReport>> audits_by_resolution;
  std::string table_path;
  std::string summary_path;
};

/// Richardson order study over >= 3 dts and/or audit-residual study over
/// >= 3 resolutions.
RefinementResult refinement_study(const RunConfig& cfg, const std::vector<double>& dts,
                                  const std::vector<int>& resolutions);

struct AuditRunResult {
  std::vector<AuditReport> audits;
  ConservativeCheck conservative;
  std::string summary_path;
};

/// All identity audits plus the conservative-form residual on the synthesized
/// initial condition, without time stepping.
AuditRunResult run_audits(const RunConfig& cfg);

/// Binary checkpoint: one-line JSON header (schema_version, dim, n, length,
/// params, t, field order) followed by raw little-endian IEEE doubles per
/// field, row-major. read(write(state)) is bit-identical.
void write_checkpoint(const PerturbationState& s, const ModelParams& p,
                      const std::filesystem::path& path);
struct Checkpoint {
  PerturbationState state;
  ModelParams params;
};
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Series CSV with the pinned header; reals carry 17 significant digits.
void write_series_csv(const std::vector<EnergyReport>& series,
                      const std::filesystem::path& path);

}  // namespace keps
