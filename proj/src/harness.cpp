#include "harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace keps {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config error at " + path + ": " + msg);
}

void reject_unknown(const json& obj, const std::string& path,
                    const std::vector<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      config_fail(path + "." + it.key(), "unknown key");
  }
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  double fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) config_fail(path + "." + key, "required key missing");
    return fallback;
  }
  if (!obj[key].is_number()) config_fail(path + "." + key, "expected a number");
  return obj[key].get<double>();
}

long get_integer(const json& obj, const std::string& path, const std::string& key,
                 long fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) config_fail(path + "." + key, "expected an integer");
  return obj[key].get<long>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) config_fail(path + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

const std::vector<std::string> kAuditNames = {"skew_pressure", "l2_u", "l2_h",
                                              "l2_m", "l2_eps", "conservative"};

}  // namespace

StepControl RunConfig::step_control() const {
  StepControl c;
  c.dt = time.dt;
  c.safety = time.safety;
  c.t_end = time.t_end;
  c.max_steps = time.max_steps;
  c.guard_mode = time.guard_mode;
  return c;
}

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(root, "$",
                 {"schema_version", "grid", "params", "ic", "time", "monitor", "output"});

  const long version = get_integer(root, "$", "schema_version", 1);
  if (version != 1) config_fail("$.schema_version", "unsupported version (expected 1)");

  RunConfig cfg;

  if (root.contains("grid")) {
    const json& g = root["grid"];
    if (!g.is_object()) config_fail("$.grid", "expected an object");
    reject_unknown(g, "$.grid", {"dim", "n", "length"});
    cfg.grid.dim = static_cast<int>(get_integer(g, "$.grid", "dim", cfg.grid.dim));
    cfg.grid.n = static_cast<int>(get_integer(g, "$.grid", "n", cfg.grid.n));
    cfg.grid.length = get_number(g, "$.grid", "length", cfg.grid.length);
  }
  if (cfg.grid.dim < 1 || cfg.grid.dim > 3) config_fail("$.grid.dim", "must be 1, 2 or 3");
  if (cfg.grid.n < 8) config_fail("$.grid.n", "must be >= 8");
  if (cfg.grid.n % 2 != 0) config_fail("$.grid.n", "must be even");
  if (!(cfg.grid.length > 0)) config_fail("$.grid.length", "must be positive");

  if (root.contains("params")) {
    const json& p = root["params"];
    if (!p.is_object()) config_fail("$.params", "expected an object");
    reject_unknown(p, "$.params",
                   {"rho_bar", "k_bar", "mu", "mu_t", "c1", "c2", "gamma", "kappa"});
    cfg.params.rho_bar = get_number(p, "$.params", "rho_bar", cfg.params.rho_bar);
    cfg.params.k_bar = get_number(p, "$.params", "k_bar", cfg.params.k_bar);
    cfg.params.mu = get_number(p, "$.params", "mu", cfg.params.mu);
    cfg.params.mu_t = get_number(p, "$.params", "mu_t", cfg.params.mu_t);
    cfg.params.c1 = get_number(p, "$.params", "c1", cfg.params.c1);
    cfg.params.c2 = get_number(p, "$.params", "c2", cfg.params.c2);
    cfg.params.gamma = get_number(p, "$.params", "gamma", cfg.params.gamma);
    cfg.params.kappa = get_number(p, "$.params", "kappa", cfg.params.kappa);
  }
  try {
    cfg.params.validate();
  } catch (const ConfigError& e) {
    config_fail("$.params", e.what());
  }

  cfg.ic.kmax = std::min(4, cfg.grid.n / 3);
  if (!root.contains("ic")) config_fail("$.ic", "required section missing");
  {
    const json& i = root["ic"];
    if (!i.is_object()) config_fail("$.ic", "expected an object");
    reject_unknown(i, "$.ic", {"preset", "amplitude", "kmax", "seed"});
    const std::string preset = get_string(i, "$.ic", "preset", "single_mode");
    if (preset == "single_mode") cfg.ic.preset = IcPreset::single_mode;
    else if (preset == "random_bandlimited") cfg.ic.preset = IcPreset::random_bandlimited;
    else config_fail("$.ic.preset", "expected single_mode or random_bandlimited");
    cfg.ic.amplitude = get_number(i, "$.ic", "amplitude", 0.0, /*required=*/true);
    cfg.ic.kmax = static_cast<int>(get_integer(i, "$.ic", "kmax", cfg.ic.kmax));
    if (i.contains("seed")) {
      if (!i["seed"].is_number_integer()) config_fail("$.ic.seed", "expected an integer");
      cfg.ic.seed = i["seed"].get<std::uint64_t>();
    }
  }
  if (cfg.ic.amplitude < 0) config_fail("$.ic.amplitude", "must be >= 0");
  if (cfg.ic.kmax < 1) config_fail("$.ic.kmax", "must be >= 1");
  if (cfg.ic.kmax > cfg.grid.n / 3)
    config_fail("$.ic.kmax", "must be <= floor(n/3) (dealiased band)");

  if (!root.contains("time")) config_fail("$.time", "required section missing");
  {
    const json& t = root["time"];
    if (!t.is_object()) config_fail("$.time", "expected an object");
    reject_unknown(t, "$.time", {"t_end", "dt", "safety", "max_steps", "guard_mode"});
    cfg.time.t_end = get_number(t, "$.time", "t_end", 0.0, /*required=*/true);
    if (t.contains("dt") && !t["dt"].is_null())
      cfg.time.dt = get_number(t, "$.time", "dt", 0.0);
    cfg.time.safety = get_number(t, "$.time", "safety", cfg.time.safety);
    cfg.time.max_steps = get_integer(t, "$.time", "max_steps", cfg.time.max_steps);
    const std::string gm = get_string(t, "$.time", "guard_mode", "abort");
    if (gm == "abort") cfg.time.guard_mode = GuardMode::abort;
    else if (gm == "report") cfg.time.guard_mode = GuardMode::report;
    else config_fail("$.time.guard_mode", "expected abort or report");
  }
  if (!(cfg.time.t_end > 0)) config_fail("$.time.t_end", "must be positive");
  if (cfg.time.dt && !(*cfg.time.dt > 0)) config_fail("$.time.dt", "must be positive");
  if (!(cfg.time.safety > 0 && cfg.time.safety <= 1))
    config_fail("$.time.safety", "must lie in (0, 1]");
  if (cfg.time.max_steps <= 0) config_fail("$.time.max_steps", "must be positive");

  cfg.monitor.audits = kAuditNames;
  if (root.contains("monitor")) {
    const json& m = root["monitor"];
    if (!m.is_object()) config_fail("$.monitor", "expected an object");
    reject_unknown(m, "$.monitor", {"alpha", "stride", "audits"});
    cfg.monitor.alpha = get_number(m, "$.monitor", "alpha", cfg.monitor.alpha);
    cfg.monitor.stride = static_cast<int>(get_integer(m, "$.monitor", "stride", cfg.monitor.stride));
    if (m.contains("audits")) {
      if (!m["audits"].is_array()) config_fail("$.monitor.audits", "expected an array");
      cfg.monitor.audits.clear();
      for (const auto& a : m["audits"]) {
        if (!a.is_string()) config_fail("$.monitor.audits", "expected strings");
        const std::string name = a.get<std::string>();
        if (std::find(kAuditNames.begin(), kAuditNames.end(), name) == kAuditNames.end())
          config_fail("$.monitor.audits", "unknown audit name: " + name);
        cfg.monitor.audits.push_back(name);
      }
    }
  }
  if (!(cfg.monitor.alpha > 0)) config_fail("$.monitor.alpha", "must be positive");
  if (cfg.monitor.stride < 1) config_fail("$.monitor.stride", "must be >= 1");

  cfg.output.formats = {"csv", "json"};
  if (root.contains("output")) {
    const json& o = root["output"];
    if (!o.is_object()) config_fail("$.output", "expected an object");
    reject_unknown(o, "$.output", {"dir", "formats"});
    cfg.output.dir = get_string(o, "$.output", "dir", cfg.output.dir);
    if (o.contains("formats")) {
      if (!o["formats"].is_array()) config_fail("$.output.formats", "expected an array");
      cfg.output.formats.clear();
      for (const auto& f : o["formats"]) {
        const std::string name = f.is_string() ? f.get<std::string>() : "";
        if (name != "csv" && name != "json" && name != "checkpoint")
          config_fail("$.output.formats", "expected csv, json or checkpoint");
        cfg.output.formats.push_back(name);
      }
    }
  }
  if (cfg.output.dir.empty()) config_fail("$.output.dir", "must not be empty");

  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

json params_to_json(const ModelParams& p) {
  return json{{"rho_bar", p.rho_bar}, {"k_bar", p.k_bar}, {"mu", p.mu},
              {"mu_t", p.mu_t},       {"c1", p.c1},       {"c2", p.c2},
              {"gamma", p.gamma},     {"kappa", p.kappa}};
}

json config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = 1;
  j["grid"] = {{"dim", c.grid.dim}, {"n", c.grid.n}, {"length", c.grid.length}};
  j["params"] = params_to_json(c.params);
  j["ic"] = {{"preset", c.ic.preset == IcPreset::single_mode ? "single_mode"
                                                             : "random_bandlimited"},
             {"amplitude", c.ic.amplitude},
             {"kmax", c.ic.kmax},
             {"seed", c.ic.seed}};
  j["time"] = {{"t_end", c.time.t_end},
               {"dt", c.time.dt ? json(*c.time.dt) : json(nullptr)},
               {"safety", c.time.safety},
               {"max_steps", c.time.max_steps},
               {"guard_mode", c.time.guard_mode == GuardMode::abort ? "abort" : "report"}};
  j["monitor"] = {{"alpha", c.monitor.alpha},
                  {"stride", c.monitor.stride},
                  {"audits", c.monitor.audits}};
  j["output"] = {{"dir", c.output.dir}, {"formats", c.output.formats}};
  return j;
}

}  // namespace

std::string RunConfig::to_json() const { return config_to_json(*this).dump(2); }

PerturbationState make_initial_condition(const RunConfig& cfg, const Grid& g,
                                         const ModelParams& p) {
  PerturbationState s = equilibrium_state(g);
  if (cfg.ic.amplitude == 0.0) return s;

  if (cfg.ic.preset == IcPreset::single_mode) {
    const ScalarField mode = sample(g, [](const std::array<double, 3>& x) {
      return std::sin(x[0]);
    });
    s.a = mode;
    s.u[0] = mode;
    s.h = mode;
    s.m = mode;
    s.eps = mode;
  } else {
    // one generator stream, consumed in a documented order: fields
    // a, u1..ud, h, m, eps; modes in lexicographic order over the box
    // |k|_inf <= kmax (zero mode excluded, Hermitian half only)
    SplitMix64 rng(cfg.ic.seed);
    const int dim = g.dim();
    const int kmax = cfg.ic.kmax;
    auto fill = [&](ScalarField& f) {
      SpectralField F(g);
      std::array<int, 3> k{0, 0, 0};
      auto visit = [&](auto&& self, int axis) -> void {
        if (axis == dim) {
          // Hermitian half: first nonzero component positive
          int first = 0;
          for (int d = 0; d < dim; ++d) {
            if (k[d] != 0) {
              first = k[d];
              break;
            }
          }
          if (first <= 0) return;
          const double amp = rng.uniform();
          const double phase = two_pi * rng.uniform();
          const std::complex<double> c = amp * std::complex<double>(std::cos(phase),
                                                                    std::sin(phase));
          std::size_t fwd = 0, bwd = 0;
          for (int d = 0; d < dim; ++d) {
            const int n = g.n();
            fwd = fwd * n + static_cast<std::size_t>(k[d] >= 0 ? k[d] : k[d] + n);
            bwd = bwd * n + static_cast<std::size_t>(-k[d] >= 0 ? -k[d] : -k[d] + n);
          }
          F.c[fwd] = c;
          F.c[bwd] = std::conj(c);
          return;
        }
        for (k[axis] = -kmax; k[axis] <= kmax; ++k[axis]) self(self, axis + 1);
      };
      visit(visit, 0);
      f = inverse_transform(F);
    };
    fill(s.a);
    for (int d = 0; d < dim; ++d) fill(s.u[d]);
    fill(s.h);
    fill(s.m);
    fill(s.eps);
  }

  const double e_unit = theorem_energy(s);
  if (!(e_unit > 0.0)) throw NumericsError("initial condition synthesis produced zero energy");
  const double c = cfg.ic.amplitude / std::sqrt(e_unit);
  for (double& x : s.a.v) x *= c;
  for (auto& ui : s.u)
    for (double& x : ui.v) x *= c;
  for (double& x : s.h.v) x *= c;
  for (double& x : s.m.v) x *= c;
  for (double& x : s.eps.v) x *= c;
  (void)p;
  return s;
}

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json audit_to_json(const AuditReport& a) {
  return json{{"name", a.name},   {"left", a.left},       {"right", a.right},
              {"residual", a.residual}, {"scale", a.scale}, {"tol", a.tol},
              {"pass", a.pass}};
}

json apriori_to_json(const AprioriSummary& s) {
  return json{{"E0", s.e0},
              {"observed_C", s.observed_C},
              {"t_at_max", s.t_at_max},
              {"max_E_ratio", s.max_E_ratio},
              {"E_within_2x", s.e_within_2x},
              {"bounds_ok", s.bounds_ok}};
}

const char* exit_kind_name(ExitKind k) {
  switch (k) {
    case ExitKind::clean: return "clean";
    case ExitKind::config_error: return "config_error";
    case ExitKind::guard_violation: return "guard_violation";
    case ExitKind::step_failure: return "step_failure";
  }
  return "unknown";
}

bool wants_format(const RunConfig& cfg, const std::string& f) {
  return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), f) !=
         cfg.output.formats.end();
}

AuditReport conservative_as_audit(const ConservativeCheck& c, double tol) {
  AuditReport a;
  a.name = "conservative";
  a.left = c.max_residual;
  a.right = 0.0;
  a.residual = c.max_residual;
  a.scale = c.scale;
  a.tol = tol;
  a.pass = c.max_residual <= tol * c.scale;
  return a;
}

}  // namespace

void write_series_csv(const std::vector<EnergyReport>& series,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open series file for writing: " + path.string());
  out << "t,E,D,cumD,L_alpha,rho_min,rho_max,k_min,k_max,sup_a,sup_u,sup_h,sup_m,sup_eps\n";
  for (const auto& r : series) {
    out << fmt17(r.t) << ',' << fmt17(r.E) << ',' << fmt17(r.D) << ',' << fmt17(r.cumD)
        << ',' << fmt17(r.L_alpha) << ',' << fmt17(r.rho_min) << ',' << fmt17(r.rho_max)
        << ',' << fmt17(r.k_min) << ',' << fmt17(r.k_max) << ',' << fmt17(r.sup_a) << ','
        << fmt17(r.sup_u) << ',' << fmt17(r.sup_h) << ',' << fmt17(r.sup_m) << ','
        << fmt17(r.sup_eps) << '\n';
  }
  if (!out) throw ConfigError("failed writing series file: " + path.string());
}

RunResult run_experiment(const RunConfig& cfg) {
  RunResult res;
  const Grid g = make_grid(cfg.grid.dim, cfg.grid.n, cfg.grid.length);
  const ModelParams& p = cfg.params;
  PerturbationState ic = make_initial_condition(cfg, g, p);

  std::vector<EnergyReport>& series = res.series;
  Observer obs;
  obs.stride = cfg.monitor.stride;
  obs.fn = [&](const PerturbationState& s, long) {
    if (!series.empty() && s.t <= series.back().t) return;  // t strictly increasing
    try {
      series.push_back(make_energy_report(s, p, cfg.monitor.alpha,
                                          series.empty() ? nullptr : &series.back()));
    } catch (const std::exception&) {
      // row not representable (non-finite state); the status captures why
    }
  };

  const AdvanceResult adv = advance(ic, p, cfg.step_control(), {obs});
  res.status = adv.status;
  res.window_violated = adv.window_violated;
  res.detail = adv.failure_detail;

  switch (adv.status) {
    case RunStatus::complete:
      res.exit_kind = adv.window_violated ? ExitKind::guard_violation : ExitKind::clean;
      break;
    case RunStatus::guard_violation:
      res.exit_kind = ExitKind::guard_violation;
      break;
    default:
      res.exit_kind = ExitKind::step_failure;
      break;
  }

  std::string apriori_note;
  if (!series.empty() && series.front().E > 0.0) {
    res.apriori = monitor_apriori(series);
  } else {
    apriori_note = series.empty() ? "no samples" : "degenerate series (E(0) = 0)";
  }

  // final-state audits, when the final state admits them
  std::string audit_note;
  const AdmissibilityReport final_rep = validate_state(adv.state, p);
  if (final_rep.finite && final_rep.within_window) {
    for (const std::string& name : cfg.monitor.audits) {
      if (name == "conservative") {
        const Tendency td = compute_rhs(adv.state, p);
        res.final_audits.push_back(
            conservative_as_audit(conservative_residual(adv.state, td, p), 1e-10));
      } else if (name == "skew_pressure") {
        res.final_audits.push_back(audit_skew_pressure(adv.state, p));
      } else if (name == "l2_u") {
        res.final_audits.push_back(audit_l2_balance(adv.state, p, BalanceField::u));
      } else if (name == "l2_h") {
        res.final_audits.push_back(audit_l2_balance(adv.state, p, BalanceField::h));
      } else if (name == "l2_m") {
        res.final_audits.push_back(audit_l2_balance(adv.state, p, BalanceField::m));
      } else if (name == "l2_eps") {
        res.final_audits.push_back(audit_l2_balance(adv.state, p, BalanceField::eps));
      }
    }
  } else {
    audit_note = "final state outside admissibility window; audits skipped";
  }

  // outputs (partial results are flushed even on failure)
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output.dir);
  fs::create_directories(dir);
  if (wants_format(cfg, "csv")) {
    const fs::path sp = dir / "series.csv";
    write_series_csv(series, sp);
    res.series_path = sp.string();
  }
  if (wants_format(cfg, "json")) {
    json j;
    j["schema_version"] = 1;
    j["config"] = config_to_json(cfg);
    j["status"] = to_string(adv.status);
    j["exit_kind"] = exit_kind_name(res.exit_kind);
    j["exit_code"] = static_cast<int>(res.exit_kind);
    j["window_violated"] = adv.window_violated;
    j["steps"] = adv.steps_taken;
    j["series_rows"] = series.size();
    j["detail"] = res.detail;
    j["apriori"] = res.apriori ? apriori_to_json(*res.apriori) : json(nullptr);
    if (!apriori_note.empty()) j["apriori_note"] = apriori_note;
    json audits = json::array();
    for (const auto& a : res.final_audits) audits.push_back(audit_to_json(a));
    j["final_audits"] = audits;
    if (!audit_note.empty()) j["audit_note"] = audit_note;
    const fs::path sp = dir / "summary.json";
    std::ofstream out(sp, std::ios::binary);
    if (!out) throw ConfigError("cannot open summary file for writing: " + sp.string());
    out << j.dump(2) << '\n';
    res.summary_path = sp.string();
  }
  if (wants_format(cfg, "checkpoint")) {
    const fs::path cp = dir / "final_state.ckpt";
    write_checkpoint(adv.state, p, cp);
    res.checkpoint_path = cp.string();
  }
  return res;
}

SweepResult sweep_amplitude(const RunConfig& cfg, const std::vector<double>& amplitudes) {
  if (amplitudes.empty()) throw ConfigError("sweep: amplitude list must not be empty");
  if (!std::is_sorted(amplitudes.begin(), amplitudes.end()))
    throw ConfigError("sweep: amplitudes must be ascending");

  namespace fs = std::filesystem;
  SweepResult out;
  const fs::path dir(cfg.output.dir);
  fs::create_directories(dir);

  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    RunConfig rc = cfg;
    rc.ic.amplitude = amplitudes[i];
    char sub[32];
    std::snprintf(sub, sizeof(sub), "run_%03zu", i);
    rc.output.dir = (dir / sub).string();

    SweepRow row;
    row.delta0 = amplitudes[i];
    try {
      const RunResult r = run_experiment(rc);
      row.exit_kind = r.exit_kind;
      row.completed = r.status == RunStatus::complete;
      row.window_violated = r.window_violated;
      if (r.apriori) {
        row.observed_C = r.apriori->observed_C;
        row.max_E_ratio = r.apriori->max_E_ratio;
      } else {
        row.observed_C = std::nullopt;
        row.max_E_ratio = std::nullopt;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      row.exit_kind = ExitKind::step_failure;
      row.completed = false;
    }
    out.rows.push_back(row);
  }

  // nondecreasing observed_C over completed rows (flagged, not fatal)
  const double tol = 1e-9;
  std::optional<double> prev;
  for (const auto& row : out.rows) {
    if (!row.completed || !row.observed_C) continue;
    if (prev && *row.observed_C < *prev - tol) out.monotone_observed_C = false;
    prev = row.observed_C;
  }

  ExitKind worst = ExitKind::clean;
  for (const auto& row : out.rows)
    if (static_cast<int>(row.exit_kind) > static_cast<int>(worst)) worst = row.exit_kind;
  out.exit_kind = worst;

  const fs::path tp = dir / "sweep.csv";
  {
    std::ofstream f(tp, std::ios::binary);
    if (!f) throw ConfigError("cannot open sweep table for writing: " + tp.string());
    f << "delta0,exit_kind,completed,window_violated,observed_C,max_E_over_E0\n";
    for (const auto& row : out.rows) {
      f << fmt17(row.delta0) << ',' << exit_kind_name(row.exit_kind) << ','
        << (row.completed ? 1 : 0) << ',' << (row.window_violated ? 1 : 0) << ','
        << (row.observed_C ? fmt17(*row.observed_C) : std::string()) << ','
        << (row.max_E_ratio ? fmt17(*row.max_E_ratio) : std::string()) << '\n';
    }
  }
  out.table_path = tp.string();

  const fs::path sp = dir / "sweep_summary.json";
  {
    json rows = json::array();
    for (const auto& row : out.rows) {
      json r{{"delta0", row.delta0},
             {"exit_kind", exit_kind_name(row.exit_kind)},
             {"completed", row.completed},
             {"window_violated", row.window_violated}};
      r["observed_C"] = row.observed_C ? json(*row.observed_C) : json(nullptr);
      r["max_E_over_E0"] = row.max_E_ratio ? json(*row.max_E_ratio) : json(nullptr);
      rows.push_back(r);
    }
    json j{{"schema_version", 1},
           {"config", config_to_json(cfg)},
           {"rows", rows},
           {"monotone_observed_C", out.monotone_observed_C},
           {"exit_kind", exit_kind_name(out.exit_kind)},
           {"exit_code", static_cast<int>(out.exit_kind)}};
    std::ofstream f(sp, std::ios::binary);
    if (!f) throw ConfigError("cannot open sweep summary for writing: " + sp.string());
    f << j.dump(2) << '\n';
  }
  out.summary_path = sp.string();
  return out;
}

RefinementResult refinement_study(const RunConfig& cfg, const std::vector<double>& dts,
                                  const std::vector<int>& resolutions) {
  if (dts.size() < 3 && resolutions.size() < 3)
    throw ConfigError("refinement study needs at least 3 dts or 3 resolutions");
  if (!dts.empty() && dts.size() < 3)
    throw ConfigError("refinement study: dt list must have >= 3 entries");
  if (!resolutions.empty() && resolutions.size() < 3)
    throw ConfigError("refinement study: resolution list must have >= 3 entries");

  RefinementResult out;

  if (dts.size() >= 3) {
    out.dts = dts;
    std::sort(out.dts.begin(), out.dts.end(), std::greater<double>());
    const Grid g = make_grid(cfg.grid.dim, cfg.grid.n, cfg.grid.length);
    std::vector<PerturbationState> finals;
    for (double dt : out.dts) {
      if (!(dt > 0)) throw ConfigError("refinement study: dts must be positive");
      StepControl c = cfg.step_control();
      c.dt = dt;
      const PerturbationState ic = make_initial_condition(cfg, g, cfg.params);
      const AdvanceResult r = advance(ic, cfg.params, c, {});
      if (r.status != RunStatus::complete)
        throw NumericsError(std::string("refinement run failed: ") + to_string(r.status));
      finals.push_back(r.state);
    }
    auto sup_diff = [](const PerturbationState& x, const PerturbationState& y) {
      double m = 0.0;
      auto acc = [&](const ScalarField& a, const ScalarField& b) {
        for (std::size_t i = 0; i < a.v.size(); ++i)
          m = std::max(m, std::abs(a.v[i] - b.v[i]));
      };
      acc(x.a, y.a);
      for (std::size_t d = 0; d < x.u.size(); ++d) acc(x.u[d], y.u[d]);
      acc(x.h, y.h);
      acc(x.m, y.m);
      acc(x.eps, y.eps);
      return m;
    };
    for (std::size_t i = 0; i + 1 < finals.size(); ++i)
      out.diffs.push_back(sup_diff(finals[i], finals[i + 1]));
    // least-squares slope of log(diff) against log(dt)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::size_t m = out.diffs.size();
    for (std::size_t i = 0; i < m; ++i) {
      const double x = std::log(out.dts[i]);
      const double y = std::log(std::max(out.diffs[i], 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    out.fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }

  if (resolutions.size() >= 3) {
    out.resolutions = resolutions;
    std::sort(out.resolutions.begin(), out.resolutions.end());
    for (int n : out.resolutions) {
      if (cfg.ic.kmax > n / 3)
        throw ConfigError("refinement study: kmax exceeds floor(n/3) at n=" +
                          std::to_string(n));
      const Grid g = make_grid(cfg.grid.dim, n, cfg.grid.length);
      const PerturbationState ic = make_initial_condition(cfg, g, cfg.params);
      out.audits_by_resolution.push_back(run_all_audits(ic, cfg.params));
    }
  }

  namespace fs = std::filesystem;
  const fs::path dir(cfg.output.dir);
  fs::create_directories(dir);
  const fs::path tp = dir / "refine.csv";
  {
    std::ofstream f(tp, std::ios::binary);
    if (!f) throw ConfigError("cannot open refine table for writing: " + tp.string());
    f << "study,parameter,name,value\n";
    for (std::size_t i = 0; i < out.diffs.size(); ++i)
      f << "dt," << fmt17(out.dts[i]) << ",final_state_diff," << fmt17(out.diffs[i])
        << '\n';
    if (!out.dts.empty()) f << "dt,,fitted_order," << fmt17(out.fitted_order) << '\n';
    for (std::size_t i = 0; i < out.audits_by_resolution.size(); ++i)
      for (const auto& a : out.audits_by_resolution[i])
        f << "resolution," << out.resolutions[i] << ',' << a.name << "_residual_over_scale,"
          << fmt17(a.residual / a.scale) << '\n';
  }
  out.table_path = tp.string();

  const fs::path sp = dir / "refine_summary.json";
  {
    json j{{"schema_version", 1}, {"config", config_to_json(cfg)}};
    if (!out.dts.empty()) {
      j["dt_study"] = {{"dts", out.dts}, {"final_state_diffs", out.diffs},
                       {"fitted_order", out.fitted_order}};
    }
    if (!out.resolutions.empty()) {
      json per_n = json::array();
      for (std::size_t i = 0; i < out.resolutions.size(); ++i) {
        json audits = json::array();
        for (const auto& a : out.audits_by_resolution[i]) audits.push_back(audit_to_json(a));
        per_n.push_back(json{{"n", out.resolutions[i]}, {"audits", audits}});
      }
      j["resolution_study"] = per_n;
    }
    std::ofstream f(sp, std::ios::binary);
    if (!f) throw ConfigError("cannot open refine summary for writing: " + sp.string());
    f << j.dump(2) << '\n';
  }
  out.summary_path = sp.string();
  return out;
}

AuditRunResult run_audits(const RunConfig& cfg) {
  const Grid g = make_grid(cfg.grid.dim, cfg.grid.n, cfg.grid.length);
  const PerturbationState ic = make_initial_condition(cfg, g, cfg.params);
  const AdmissibilityReport rep = validate_state(ic, cfg.params);
  if (!rep.within_window)
    throw AdmissibilityError(rep, "audit: synthesized state outside admissibility window: " +
                                      rep.describe());

  AuditRunResult out;
  out.audits = run_all_audits(ic, cfg.params);
  const Tendency td = compute_rhs(ic, cfg.params);
  out.conservative = conservative_residual(ic, td, cfg.params);

  namespace fs = std::filesystem;
  const fs::path dir(cfg.output.dir);
  fs::create_directories(dir);
  const fs::path sp = dir / "audit_summary.json";
  json audits = json::array();
  for (const auto& a : out.audits) audits.push_back(audit_to_json(a));
  audits.push_back(audit_to_json(conservative_as_audit(out.conservative, 1e-10)));
  json j{{"schema_version", 1}, {"config", config_to_json(cfg)}, {"audits", audits}};
  std::ofstream f(sp, std::ios::binary);
  if (!f) throw ConfigError("cannot open audit summary for writing: " + sp.string());
  f << j.dump(2) << '\n';
  out.summary_path = sp.string();
  return out;
}

namespace {

void put_le_double(std::ofstream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof(bits));
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_le_double(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, sizeof(x));
  return x;
}

}  // namespace

void write_checkpoint(const PerturbationState& s, const ModelParams& p,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  const Grid& g = s.grid();
  json fields = json::array();
  fields.push_back("a");
  for (int d = 0; d < g.dim(); ++d) fields.push_back("u" + std::to_string(d + 1));
  fields.push_back("h");
  fields.push_back("m");
  fields.push_back("eps");
  json header{{"schema_version", 1}, {"dim", g.dim()},        {"n", g.n()},
              {"length", g.length()}, {"params", params_to_json(p)}, {"t", s.t},
              {"fields", fields}};
  out << header.dump() << '\n';
  auto put_field = [&](const ScalarField& f) {
    for (double x : f.v) put_le_double(out, x);
  };
  put_field(s.a);
  for (const auto& ui : s.u) put_field(ui);
  put_field(s.h);
  put_field(s.m);
  put_field(s.eps);
  if (!out) throw ConfigError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("checkpoint missing header: " + path.string());
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ConfigError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  if (header.value("schema_version", 0) != 1)
    throw ConfigError("checkpoint: unsupported schema_version");

  Checkpoint ck;
  const int dim = header.at("dim").get<int>();
  const int n = header.at("n").get<int>();
  const double length = header.at("length").get<double>();
  const json& pj = header.at("params");
  ck.params.rho_bar = pj.at("rho_bar").get<double>();
  ck.params.k_bar = pj.at("k_bar").get<double>();
  ck.params.mu = pj.at("mu").get<double>();
  ck.params.mu_t = pj.at("mu_t").get<double>();
  ck.params.c1 = pj.at("c1").get<double>();
  ck.params.c2 = pj.at("c2").get<double>();
  ck.params.gamma = pj.at("gamma").get<double>();
  ck.params.kappa = pj.at("kappa").get<double>();

  const Grid g = make_grid(dim, n, length);
  ck.state = equilibrium_state(g);
  ck.state.t = header.at("t").get<double>();
  auto get_field = [&](ScalarField& f) {
    for (double& x : f.v) x = get_le_double(in);
    if (!in) throw ConfigError("checkpoint truncated: " + path.string());
  };
  get_field(ck.state.a);
  for (auto& ui : ck.state.u) get_field(ui);
  get_field(ck.state.h);
  get_field(ck.state.m);
  get_field(ck.state.eps);
  return ck;
}

}  // namespace keps
