#pragma once

// Subcommands behind the chemotaxis-lab executable. Each returns a process
// exit code; the executable only parses arguments and dispatches here.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "chemlab/bounds.hpp"
#include "chemlab/config.hpp"
#include "chemlab/errors.hpp"
#include "chemlab/functionals.hpp"
#include "chemlab/io.hpp"
#include "chemlab/regimes.hpp"
#include "chemlab/scenarios.hpp"
#include "chemlab/solver.hpp"

namespace chemlab::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, other_error = 1, config_error = 2, divergence = 3, verdict_failure = 4 };

/// Shared logger on stderr; CHEMOTAXIS_LAB_LOG sets the level (default warn).
inline std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::get("chemotaxis-lab");
    if (!l) l = spdlog::stderr_color_mt("chemotaxis-lab");
    const char* env = std::getenv("CHEMOTAXIS_LAB_LOG");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    return l;
  }();
  return log;
}

/// Maps library errors to exit codes.
template <class F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const InvalidParameter& e) {
    err << "invalid parameter: " << e.what() << "\n";
    return config_error;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return divergence;
  } catch (const VerdictFailure& e) {
    err << "verdict failure: " << e.what() << "\n";
    return verdict_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return other_error;
  }
}

struct Context {
  config::RunConfig cfg;
  fs::path out;
  std::ostream* os = &std::cout;
  std::ostream* err = &std::cerr;
  std::optional<fs::path> restart;
};

inline fs::path output_dir(const config::RunConfig& cfg, const std::optional<fs::path>& cli_out) {
  return cli_out ? *cli_out : fs::path(cfg.output.directory);
}

// ---------------------------------------------------------------- classify

inline std::string classify_text(const config::RunConfig& cfg, nlohmann::json* j = nullptr) {
  const auto& sp = cfg.model.exact;
  auto rep = regimes::check_assumptions(sp);
  if (eq(sp.m2, Rational(1)) && eq(sp.m3, Rational(1)))
    rep.improvement_over_wang = regimes::compare_with_wang(sp);
  std::ostringstream os;
  os << regimes::render(rep, sp);
  nlohmann::json out;
  if (j) out["regime"] = io::to_json(rep);
  if (!rep.h[0].holds) {
    os << "  pfrak undefined (H1 fails)\n";
  } else {
    const Rational pf = regimes::compute_pfrak(sp);
    os << "  pfrak = " << to_string(pf) << "  (" << format_scalar(to_double(pf)) << ")\n";
    out["pfrak"] = to_string(pf);
    if (rep.lemma_hypotheses()) {
      const auto pb = regimes::pbar_infimum(sp);
      os << "  pbar infimum = " << to_string(pb.value) << "  (" << format_scalar(to_double(pb.value))
         << "), binding entry " << pb.binding << "\n";
      out["pbar_infimum"] = to_string(pb.value);
      out["pbar_binding"] = pb.binding;
      for (const auto& [name, v] : pb.entries) {
        os << "    " << name << " = " << to_string(v) << "\n";
        out["pbar_entries"][name] = to_string(v);
      }
      // Exponents at admissible strict values above the infima.
      const double margin = cfg.scenario.margin;
      const double pf_choice = regimes::admissible_above(to_double(pf), margin);
      const auto spd = cfg.model.params.structural();
      const double pbar = regimes::compute_pbar(spd, pf_choice).value;
      const double p = regimes::admissible_above(pbar, margin);
      const auto ex = regimes::evaluate_exponents(spd, pf_choice, p);
      os << "  exponents at p = " << format_scalar(p) << " (margin " << margin << ")\n";
      for (const auto& [name, v] : std::vector<std::pair<const char*, double>>{{"sigma", ex.sigma},
                                                                              {"sigma_hat", ex.sigma_hat},
                                                                              {"theta", ex.theta},
                                                                              {"theta_hat", ex.theta_hat},
                                                                              {"theta_bar", ex.theta_bar},
                                                                              {"gamma", ex.odi_gamma},
                                                                              {"delta", ex.odi_delta}}) {
        os << "    " << name << " = " << format_scalar(v) << "\n";
        out["exponents"][name] = v;
      }
      const auto bad = ex.violations();
      os << "  required relations: " << (bad.empty() ? "all hold" : std::to_string(bad.size()) + " violated") << "\n";
      for (const auto* r : bad) os << "    violated: " << r->name << " (" << r->detail << ")\n";
      out["violations"] = bad.size();
    } else {
      os << "  pbar undefined (none of H2-H4 holds)\n";
    }
  }
  if (j) *j = out;
  return os.str();
}

inline int cmd_classify(const Context& c) {
  nlohmann::json j;
  const std::string text = classify_text(c.cfg, &j);
  *c.os << text;
  if (c.cfg.output.wants("txt")) io::write_text(c.out / "report.txt", text);
  if (c.cfg.output.wants("json")) io::write_text(c.out / "report.json", j.dump(2) + "\n");
  return ok;
}

// ---------------------------------------------------------------- bound

inline int cmd_bound(const Context& c) {
  const auto& b = c.cfg.bounds;
  if (!c.cfg.has_bounds) throw ConfigError("bound needs a [bounds] table");
  OdiCoefficients coeffs;
  nlohmann::json j;
  if (b.coeffs) {
    coeffs = *b.coeffs;
  } else {
    const auto tab = io::read_csv(b.fit_series);
    const double dm = b.domain_measure.value_or(c.cfg.model.params.domain_measure());
    const auto fit = fit_odi_coefficients(tab.column("t"), tab.column(b.fit_column), b.gamma, b.delta, b.p, dm, b.coverage);
    coeffs = fit.coeffs;
    j["fit"] = {{"coverage", fit.coverage}, {"violations", fit.violations}, {"scale", fit.scale}, {"samples", fit.samples}};
    logger()->info("fitted ODI coefficients from {} samples, coverage {}", fit.samples, fit.coverage);
  }
  const auto rep = bound_report(coeffs);
  std::string text = io::render(coeffs, rep);
  j["coefficients"] = io::to_json(coeffs);
  j["bounds"] = io::to_json(rep);
  if (!b.tmax_steps.empty()) {
    const auto steps = io::read_csv(b.tmax_steps);
    const auto est = extrapolate_Tmax(steps.column("t"), steps.column("linf"));
    const bool below = rep.T_implicit <= est.T_est;
    text += "extrapolated T_max = " + io::fmt17(est.T_est) + "; T_implicit <= T_max: " + (below ? "yes" : "no") + "\n";
    j["tmax"] = {{"T_est", est.T_est}, {"kappa", est.kappa}, {"below", below}};
  }
  *c.os << text;
  if (c.cfg.output.wants("txt")) io::write_text(c.out / "report.txt", text);
  if (c.cfg.output.wants("json")) io::write_text(c.out / "report.json", j.dump(2) + "\n");
  return ok;
}

// ---------------------------------------------------------------- simulate

inline std::vector<double> initial_profile(const config::RunConfig& cfg, const RadialGrid& g) {
  const auto& p = cfg.model.params;
  const auto& sc = cfg.scenario;
  if (sc.initial == "constant") return std::vector<double>(g.N(), sc.value);
  if (sc.initial == "logistic") return std::vector<double>(g.N(), std::pow(p.lambda / p.mu, 1.0 / (p.k - 1.0)));
  InitialDataSpec d = sc.data;
  if (!sc.M0) d.M0 = 2.0 * critical_mass(p);
  return build_concentrated_u0(d, g).u0;
}

inline MomentConfig default_moment(const ModelParams& p) {
  MomentConfig m;
  m.s0 = std::min(0.1, std::pow(p.R, p.n) / 6.0);
  m.s_star = 0.1 * m.s0;
  m.eps0 = 0.1 * m.s0;
  return m;
}

inline int cmd_simulate(const Context& c) {
  const auto& cfg = c.cfg;
  const auto& p = cfg.model.params;
  validate_params(p, true);
  const RadialGrid grid(p.n, p.R, cfg.grid.N, cfg.grid.grading);

  std::optional<RadialState> restart;
  std::vector<double> u0;
  if (c.restart) {
    auto snap = io::read_snapshot(*c.restart);
    if (snap.n != p.n || snap.N != grid.N() || snap.R != p.R || snap.grading != grid.grading())
      throw ConfigError("snapshot grid does not match the configured grid");
    if (snap.state.mode != cfg.solver.backend) throw ConfigError("snapshot backend does not match solver.backend");
    u0 = snap.state.u;
    complete_fields(snap.state, grid, p, cfg.model.law);
    restart = std::move(snap.state);
  } else {
    u0 = initial_profile(cfg, grid);
  }

  const MomentConfig mc = cfg.functionals.moment.value_or(default_moment(p));
  mc.validate(p.n, p.R);
  std::vector<double> lp = cfg.functionals.lp.empty() ? std::vector<double>{1.0, 2.0} : cfg.functionals.lp;
  const double M = std::max(grid.integrate(u0), critical_mass(p));
  FunctionalRecorder rec(p, cfg.model.law, mc, lp, cfg.functionals.energy_p, M);

  const bool bin = cfg.output.wants("bin");
  std::size_t sample_index = 0;
  std::vector<NamedObserver> obs{{"functionals", [&](const RadialState& s, const RadialGrid& g) { rec(s, g); }}};
  if (bin && cfg.output.snapshot_every > 0)
    obs.push_back({"snapshots", [&](const RadialState& s, const RadialGrid& g) {
                     if (sample_index++ % cfg.output.snapshot_every == 0) {
                       char name[40];
                       std::snprintf(name, sizeof name, "sample_%06zu.bin", sample_index - 1);
                       io::write_snapshot(c.out / "snapshots" / name, g, s);
                     }
                   }});
  RunOptions ro;
  ro.sample_every = cfg.output.sample_every;
  ro.sample_dt = cfg.output.sample_dt;
  if (bin) io::write_snapshot(c.out / "snapshots" / "initial.bin", grid, restart ? *restart : initial_state(grid, u0, cfg.solver.backend, p, cfg.model.law));
  logger()->info("simulate: N = {}, grading = {}, t_end = {}", grid.N(), grid.grading(), cfg.solver.t_end);
  const auto tr = run(u0, grid, p, cfg.model.law, cfg.solver, obs, ro, std::move(restart));
  logger()->info("simulate finished: {} after {} steps", to_string(tr.status), tr.steps);

  const auto& S = rec.series();
  std::ostringstream os;
  os << "simulation\n"
     << "  grid: n = " << p.n << ", R = " << io::fmt17(p.R) << ", N = " << grid.N() << ", grading = " << grid.grading()
     << "\n"
     << "  status: " << to_string(tr.status) << " at t = " << io::fmt17(tr.t_final) << " after " << tr.steps
     << " steps (" << tr.stop_reason << ")\n"
     << "  rejections: " << tr.rejections << ", clip events: " << tr.clip_events
     << ", clipped mass: " << io::fmt17(tr.clipped_mass) << "\n"
     << "  mass: " << io::fmt17(S.mass.front()) << " -> " << io::fmt17(S.mass.back()) << "\n"
     << "  max u: " << io::fmt17(S.linf.front()) << " -> " << io::fmt17(S.linf.back()) << "\n";
  if (tr.t_blowup) os << "  declared blow-up time: " << io::fmt17(*tr.t_blowup) << "\n";
  for (const auto& e : tr.observer_errors) os << "  observer error: " << e << "\n";
  *c.os << os.str();

  if (cfg.output.wants("csv")) {
    io::write_series_csv(c.out / "series.csv", S);
    io::write_steps_csv(c.out / "steps.csv", tr.t_steps, tr.linf_steps);
  }
  if (bin) io::write_snapshot(c.out / "snapshots" / "final.bin", grid, tr.final_state);
  if (cfg.output.wants("svg")) io::write_series_plots(c.out / "plots", S, cfg.output.log_scale);
  if (cfg.output.wants("txt")) io::write_text(c.out / "report.txt", os.str());
  if (cfg.output.wants("json")) {
    nlohmann::json j{{"status", to_string(tr.status)}, {"t_final", tr.t_final},   {"steps", tr.steps},
                     {"rejections", tr.rejections},    {"clip_events", tr.clip_events}, {"clipped_mass", tr.clipped_mass},
                     {"stop_reason", tr.stop_reason},  {"observer_errors", tr.observer_errors}};
    if (tr.t_blowup) j["t_blowup"] = *tr.t_blowup;
    io::write_text(c.out / "report.json", j.dump(2) + "\n");
  }
  return ok;
}

// ---------------------------------------------------------------- blowup

inline ExperimentOptions experiment_options(const config::RunConfig& cfg) {
  ExperimentOptions o;
  const auto& root = cfg.source;
  // Solver keys left out of the config keep the experiment defaults.
  if (const auto* s = root["solver"].as_table()) {
    config::Section sec(s, "solver");
    o.N = static_cast<int>(sec.integer("N", o.N));
    o.grading = sec.real("grading", o.grading);
    auto& st = o.stepper;
    st.dt_init = sec.real("dt_init", st.dt_init);
    st.dt_min = sec.real("dt_min", st.dt_min);
    st.dt_max = sec.real("dt_max", st.dt_max);
    st.cfl_safety = sec.real("cfl_safety", st.cfl_safety);
    st.growth_limit = sec.real("growth_limit", st.growth_limit);
    st.blowup_threshold = sec.real("blowup_threshold", st.blowup_threshold);
    st.t_end = sec.real("t_end", st.t_end);
    st.max_retries = static_cast<int>(sec.integer("max_retries", st.max_retries));
    st.max_steps = sec.integer("max_steps", st.max_steps);
  }
  const auto& sc = cfg.scenario;
  o.M0 = sc.M0;
  o.c30_c31_ratio = sc.c30_c31_ratio;
  o.eps_m1_zero = sc.eps_m1_zero;
  o.margin = sc.margin;
  o.lp_list = cfg.functionals.lp;
  o.growth_factor_min = sc.growth_factor_min;
  o.concavity_tol_rel = sc.concavity_tol_rel;
  o.monotone_tol_rel = sc.monotone_tol_rel;
  o.odi_coverage = sc.odi_coverage;
  o.initial = sc.data;
  o.initial.profile = sc.initial == "gaussian" ? ProfileKind::gaussian_bump : ProfileKind::plateau_bump;
  o.sample_every = cfg.output.sample_every;
  o.enforce = false;  // verdicts are mapped to the exit code after the artifacts are written
  return o;
}

inline int cmd_blowup(const Context& c) {
  const auto& cfg = c.cfg;
  if (cfg.scenario.initial != "plateau" && cfg.scenario.initial != "gaussian")
    throw ConfigError("blowup needs scenario.initial = plateau or gaussian");
  const auto opt = experiment_options(cfg);
  logger()->info("blowup: N = {}, grading = {}, threshold = {}", opt.N, opt.grading, opt.stepper.blowup_threshold);
  const auto rep = run_blowup_experiment(cfg.model.params, cfg.model.law, opt);
  logger()->info("blowup finished: {}", to_string(rep.status));

  const std::string text = io::render(rep);
  *c.os << text;
  const RadialGrid grid(cfg.model.params.n, cfg.model.params.R, opt.N, opt.grading);
  if (cfg.output.wants("csv")) {
    io::write_series_csv(c.out / "series.csv", rep.series);
    io::write_steps_csv(c.out / "steps.csv", rep.t_steps, rep.linf_steps);
  }
  if (cfg.output.wants("bin")) {
    RadialState s0 = initial_state(grid, rep.initial.u0, Backend::reduced, cfg.model.params, cfg.model.law);
    io::write_snapshot(c.out / "snapshots" / "initial.bin", grid, s0);
    io::write_snapshot(c.out / "snapshots" / "final.bin", grid, rep.trajectory.final_state);
  }
  if (cfg.output.wants("svg")) io::write_series_plots(c.out / "plots", rep.series, true);
  if (cfg.output.wants("txt")) io::write_text(c.out / "report.txt", text);
  if (cfg.output.wants("json")) io::write_text(c.out / "report.json", io::to_json(rep).dump(2) + "\n");
  if (cfg.scenario.enforce && !rep.all_pass()) {
    *c.err << "verdict failure: at least one enforced verdict failed\n";
    return verdict_failure;
  }
  return ok;
}

// ---------------------------------------------------------------- sweep

inline int dispatch(const std::string& command, const Context& c) {
  if (command == "classify") return cmd_classify(c);
  if (command == "bound") return cmd_bound(c);
  if (command == "simulate") return cmd_simulate(c);
  if (command == "blowup") return cmd_blowup(c);
  throw ConfigError("unknown command '" + command + "'");
}

struct SweepRun {
  std::size_t index = 0;
  std::vector<std::string> values;  // one per axis, as written in the config
  fs::path dir;
  int exit_code = 0;
  std::string message;
};

inline std::string node_text(const toml::node& n) {
  std::ostringstream os;
  n.visit([&](auto&& v) {
    if constexpr (toml::is_string<decltype(v)>) {
      os << v.get();
    } else if constexpr (toml::is_floating_point<decltype(v)>) {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, v.get());
      os << std::string_view(buf, res.ptr - buf);
    } else {
      os << v;
    }
  });
  return os.str();
}

/// Runs the cartesian product of the axes with a bounded worker pool; each
/// run has its own directory, config copy, output streams and state.
inline int cmd_sweep(const Context& c, std::optional<int> workers_override = std::nullopt) {
  const auto& sw = c.cfg.sweep;
  if (!c.cfg.has_sweep) throw ConfigError("sweep needs a [sweep] table");
  std::vector<std::vector<std::size_t>> combos{{}};
  for (const auto& ax : sw.axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& prefix : combos)
      for (std::size_t i = 0; i < ax.values.size(); ++i) {
        auto v = prefix;
        v.push_back(i);
        next.push_back(std::move(v));
      }
    combos = std::move(next);
  }

  toml::table base = c.cfg.source;
  base.erase("sweep");
  std::vector<SweepRun> runs(combos.size());
  for (std::size_t r = 0; r < combos.size(); ++r) {
    runs[r].index = r;
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu", r);
    runs[r].dir = c.out / name;
    for (std::size_t a = 0; a < sw.axes.size(); ++a) runs[r].values.push_back(node_text(*sw.axes[a].values.get(combos[r][a])));
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= runs.size()) return;
      auto& run = runs[r];
      std::ostringstream out, err;
      run.exit_code = guarded(
          [&] {
            toml::table t = base;
            for (std::size_t a = 0; a < sw.axes.size(); ++a)
              t = config::with_override(t, sw.axes[a].key, *sw.axes[a].values.get(combos[r][a]));
            Context rc;
            rc.cfg = config::from_table(t);
            rc.out = run.dir;
            rc.os = &out;
            rc.err = &err;
            io::ensure_dir(run.dir);
            return dispatch(sw.command, rc);
          },
          err);
      run.message = err.str();
      if (!run.message.empty() && run.message.back() == '\n') run.message.pop_back();
      try {
        io::ensure_dir(run.dir);
        io::write_text(run.dir / "stdout.txt", out.str());
        if (!err.str().empty()) io::write_text(run.dir / "stderr.txt", err.str());
      } catch (const std::exception& e) {
        run.message += std::string(" (could not write logs: ") + e.what() + ")";
      }
      logger()->info("sweep run {} finished with exit code {}", r, run.exit_code);
    }
  };
  const int workers = std::max(1, std::min<int>(workers_override.value_or(sw.workers), static_cast<int>(runs.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // index.csv: one row per run, axis values verbatim.
  std::ostringstream idx;
  idx << "run";
  for (const auto& ax : sw.axes) idx << "," << ax.key;
  idx << ",exit_code,directory\n";
  int worst = ok;
  for (const auto& run : runs) {
    idx << run.index;
    for (const auto& v : run.values) idx << "," << v;
    idx << "," << run.exit_code << "," << run.dir.filename().string() << "\n";
    worst = std::max(worst, run.exit_code);
    *c.os << "run " << run.index << " [";
    for (std::size_t a = 0; a < run.values.size(); ++a) *c.os << (a ? ", " : "") << sw.axes[a].key << " = " << run.values[a];
    *c.os << "] exit " << run.exit_code << (run.message.empty() ? "" : ": " + run.message) << "\n";
  }
  io::write_text(c.out / "index.csv", idx.str());
  return worst;
}

}  // namespace chemlab::cli
