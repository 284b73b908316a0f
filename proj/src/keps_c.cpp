// C API implementation: thin exception-to-status wrappers over the core.

#include "keps.h"

#include <string>

#include "harness.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

int status_of(keps::ExitKind k) { return static_cast<int>(k); }

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const keps::AdmissibilityError& e) {
    set_error(e.what());
    return KEPS_ERR_GUARD;
  } catch (const keps::ConfigError& e) {
    set_error(e.what());
    return KEPS_ERR_CONFIG;
  } catch (const keps::NumericsError& e) {
    set_error(e.what());
    return KEPS_ERR_STEP;
  } catch (const std::exception& e) {
    set_error(e.what());
    return KEPS_ERR_STEP;
  } catch (...) {
    set_error("unknown error");
    return KEPS_ERR_STEP;
  }
}

json audit_json(const keps::AuditReport& a) {
  return json{{"name", a.name},   {"left", a.left},       {"right", a.right},
              {"residual", a.residual}, {"scale", a.scale}, {"tol", a.tol},
              {"pass", a.pass}};
}

}  // namespace

struct keps_config {
  keps::RunConfig cfg;
  mutable std::string echo;
};

struct keps_result {
  int status = KEPS_OK;
  std::string summary;
};

struct keps_state {
  keps::Checkpoint ck;
  mutable std::string report;
};

extern "C" {

const char* keps_version(void) { return "1.0.0"; }

const char* keps_last_error(void) { return g_last_error.c_str(); }

int keps_config_load(const char* path, keps_config** out) {
  if (!path || !out) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    auto* h = new keps_config{keps::load_config(path), {}};
    *out = h;
    return KEPS_OK;
  });
}

int keps_config_parse(const char* json_text, keps_config** out) {
  if (!json_text || !out) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    auto* h = new keps_config{keps::parse_config(json_text), {}};
    *out = h;
    return KEPS_OK;
  });
}

int keps_config_set_seed(keps_config* cfg, unsigned long long seed) {
  if (!cfg) {
    set_error("null config");
    return KEPS_ERR_CONFIG;
  }
  cfg->cfg.ic.seed = seed;
  return KEPS_OK;
}

int keps_config_set_output_dir(keps_config* cfg, const char* dir) {
  if (!cfg || !dir || !*dir) {
    set_error("null config or empty directory");
    return KEPS_ERR_CONFIG;
  }
  cfg->cfg.output.dir = dir;
  return KEPS_OK;
}

const char* keps_config_json(const keps_config* cfg) {
  if (!cfg) return "";
  cfg->echo = cfg->cfg.to_json();
  return cfg->echo.c_str();
}

void keps_config_free(keps_config* cfg) { delete cfg; }

int keps_run(const keps_config* cfg, keps_result** out) {
  if (!cfg || !out) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    const keps::RunResult r = keps::run_experiment(cfg->cfg);
    json j{{"command", "run"},
           {"exit_code", static_cast<int>(r.exit_kind)},
           {"status", keps::to_string(r.status)},
           {"window_violated", r.window_violated},
           {"detail", r.detail},
           {"series_rows", r.series.size()},
           {"series_path", r.series_path},
           {"summary_path", r.summary_path},
           {"checkpoint_path", r.checkpoint_path}};
    j["apriori"] = json(nullptr);
    if (r.apriori) {
      j["apriori"] = json{{"E0", r.apriori->e0},
                          {"observed_C", r.apriori->observed_C},
                          {"max_E_ratio", r.apriori->max_E_ratio},
                          {"E_within_2x", r.apriori->e_within_2x},
                          {"bounds_ok", r.apriori->bounds_ok}};
    }
    json audits = json::array();
    for (const auto& a : r.final_audits) audits.push_back(audit_json(a));
    j["final_audits"] = audits;
    auto* h = new keps_result{status_of(r.exit_kind), j.dump(2)};
    *out = h;
    return h->status;
  });
}

int keps_sweep(const keps_config* cfg, const double* amplitudes, int count,
               keps_result** out) {
  if (!cfg || !out || (!amplitudes && count > 0)) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    const std::vector<double> amps(amplitudes, amplitudes + std::max(count, 0));
    const keps::SweepResult r = keps::sweep_amplitude(cfg->cfg, amps);
    json rows = json::array();
    for (const auto& row : r.rows) {
      json rj{{"delta0", row.delta0},
              {"exit_code", static_cast<int>(row.exit_kind)},
              {"completed", row.completed},
              {"window_violated", row.window_violated}};
      rj["observed_C"] = row.observed_C ? json(*row.observed_C) : json(nullptr);
      rj["max_E_over_E0"] = row.max_E_ratio ? json(*row.max_E_ratio) : json(nullptr);
      rows.push_back(rj);
    }
    json j{{"command", "sweep"},
           {"exit_code", static_cast<int>(r.exit_kind)},
           {"rows", rows},
           {"monotone_observed_C", r.monotone_observed_C},
           {"table_path", r.table_path},
           {"summary_path", r.summary_path}};
    auto* h = new keps_result{status_of(r.exit_kind), j.dump(2)};
    *out = h;
    return h->status;
  });
}

int keps_refine(const keps_config* cfg, const double* dts, int dt_count,
                const int* resolutions, int res_count, keps_result** out) {
  if (!cfg || !out || (!dts && dt_count > 0) || (!resolutions && res_count > 0)) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    const std::vector<double> dv(dts, dts + std::max(dt_count, 0));
    const std::vector<int> rv(resolutions, resolutions + std::max(res_count, 0));
    const keps::RefinementResult r = keps::refinement_study(cfg->cfg, dv, rv);
    json j{{"command", "refine"},
           {"exit_code", 0},
           {"table_path", r.table_path},
           {"summary_path", r.summary_path}};
    if (!r.dts.empty()) {
      j["dts"] = r.dts;
      j["final_state_diffs"] = r.diffs;
      j["fitted_order"] = r.fitted_order;
    }
    if (!r.resolutions.empty()) {
      json per_n = json::array();
      for (std::size_t i = 0; i < r.resolutions.size(); ++i) {
        json audits = json::array();
        for (const auto& a : r.audits_by_resolution[i]) audits.push_back(audit_json(a));
        per_n.push_back(json{{"n", r.resolutions[i]}, {"audits", audits}});
      }
      j["resolution_study"] = per_n;
    }
    auto* h = new keps_result{KEPS_OK, j.dump(2)};
    *out = h;
    return KEPS_OK;
  });
}

int keps_audit(const keps_config* cfg, keps_result** out) {
  if (!cfg || !out) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    const keps::AuditRunResult r = keps::run_audits(cfg->cfg);
    json audits = json::array();
    bool all_pass = true;
    for (const auto& a : r.audits) {
      audits.push_back(audit_json(a));
      all_pass = all_pass && a.pass;
    }
    json j{{"command", "audit"},
           {"exit_code", 0},
           {"audits", audits},
           {"all_pass", all_pass},
           {"conservative_residual", r.conservative.max_residual},
           {"conservative_scale", r.conservative.scale},
           {"summary_path", r.summary_path}};
    auto* h = new keps_result{KEPS_OK, j.dump(2)};
    *out = h;
    return KEPS_OK;
  });
}

int keps_result_status(const keps_result* res) {
  return res ? res->status : KEPS_ERR_CONFIG;
}

const char* keps_result_summary_json(const keps_result* res) {
  return res ? res->summary.c_str() : "";
}

void keps_result_free(keps_result* res) { delete res; }

int keps_checkpoint_read(const char* path, keps_state** out) {
  if (!path || !out) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    auto* h = new keps_state{keps::read_checkpoint(path), {}};
    *out = h;
    return KEPS_OK;
  });
}

int keps_checkpoint_write(const keps_state* state, const char* path) {
  if (!state || !path) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  return guarded([&] {
    keps::write_checkpoint(state->ck.state, state->ck.params, path);
    return KEPS_OK;
  });
}

int keps_state_time(const keps_state* state, double* t_out) {
  if (!state || !t_out) {
    set_error("null argument");
    return KEPS_ERR_CONFIG;
  }
  *t_out = state->ck.state.t;
  return KEPS_OK;
}

const char* keps_state_report_json(const keps_state* state) {
  if (!state) return "";
  const int rc = guarded([&] {
    const keps::EnergyReport r =
        keps::make_energy_report(state->ck.state, state->ck.params, 0.01);
    json j{{"t", r.t},           {"E", r.E},           {"D", r.D},
           {"L_alpha", r.L_alpha}, {"rho_min", r.rho_min}, {"rho_max", r.rho_max},
           {"k_min", r.k_min},   {"k_max", r.k_max},   {"sup_a", r.sup_a},
           {"sup_u", r.sup_u},   {"sup_h", r.sup_h},   {"sup_m", r.sup_m},
           {"sup_eps", r.sup_eps}, {"window_ok", r.window_ok}};
    state->report = j.dump(2);
    return KEPS_OK;
  });
  return rc == KEPS_OK ? state->report.c_str() : "";
}

void keps_state_free(keps_state* state) { delete state; }

}  // extern "C"
