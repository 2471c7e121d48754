#pragma once

// TOML run configuration. Every table is read through a Section that tracks
// consumed keys, so a misspelled key is a hard error rather than a default.
// Real values accept TOML numbers or strings such as "81/50"; exponents keep
// their exact rational value for the regime checks.

#include <charconv>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "chemlab/bounds.hpp"
#include "chemlab/errors.hpp"
#include "chemlab/params.hpp"
#include "chemlab/rational.hpp"
#include "chemlab/scenarios.hpp"
#include "chemlab/solver.hpp"

namespace chemlab::config {

struct ExactReal {
  double value = 0.0;
  Rational exact;
};

inline std::string where(const toml::node& n) {
  const auto& src = n.source();
  if (!src.begin) return "";
  std::ostringstream os;
  if (src.path) os << *src.path << ":";
  os << src.begin.line << ":" << src.begin.column << ": ";
  return os.str();
}

/// Shortest round-trip decimal of x, read back as an exact rational (1.62 -> 81/50).
inline Rational decimal_rational(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return parse_rational(std::string_view(buf, res.ptr - buf));
}

class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool present() const { return t_ != nullptr; }
  const std::string& name() const { return name_; }

  bool has(const std::string& key) const { return t_ && t_->contains(key); }

  const toml::node* node(const std::string& key) {
    if (!t_) return nullptr;
    used_.insert(key);
    return t_->get(key);
  }

  std::optional<ExactReal> real_opt(const std::string& key) {
    const auto* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<int64_t>()) return ExactReal{double(*v), Rational(*v)};
    if (auto v = n->value_exact<double>()) {
      if (!std::isfinite(*v)) throw ConfigError(where(*n) + full(key) + " must be finite");
      return ExactReal{*v, decimal_rational(*v)};
    }
    if (auto v = n->value_exact<std::string>()) {
      try {
        Rational q = parse_rational(*v);
        return ExactReal{to_double(q), q};
      } catch (const InvalidParameter& e) {
        throw ConfigError(where(*n) + full(key) + ": " + e.what());
      }
    }
    throw ConfigError(where(*n) + full(key) + " must be a number or a rational string");
  }

  double real(const std::string& key, double def) {
    auto v = real_opt(key);
    return v ? v->value : def;
  }

  std::optional<double> real_maybe(const std::string& key) {
    auto v = real_opt(key);
    return v ? std::optional<double>(v->value) : std::nullopt;
  }

  long long integer(const std::string& key, long long def) {
    const auto* n = node(key);
    if (!n) return def;
    if (auto v = n->value_exact<int64_t>()) return *v;
    throw ConfigError(where(*n) + full(key) + " must be an integer");
  }

  bool boolean(const std::string& key, bool def) {
    const auto* n = node(key);
    if (!n) return def;
    if (auto v = n->value_exact<bool>()) return *v;
    throw ConfigError(where(*n) + full(key) + " must be true or false");
  }

  std::string string(const std::string& key, const std::string& def) {
    const auto* n = node(key);
    if (!n) return def;
    if (auto v = n->value_exact<std::string>()) return *v;
    throw ConfigError(where(*n) + full(key) + " must be a string");
  }

  std::string choice(const std::string& key, const std::string& def, std::initializer_list<const char*> allowed) {
    const auto* n = node(key);
    std::string v = string(key, def);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    throw ConfigError((n ? where(*n) : std::string()) + full(key) + " = '" + v + "' is not one of {" + list + "}");
  }

  std::vector<double> reals(const std::string& key) {
    const auto* n = node(key);
    if (!n) return {};
    const auto* arr = n->as_array();
    if (!arr) throw ConfigError(where(*n) + full(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *arr) {
      if (auto v = e.value<double>()) out.push_back(*v);
      else if (auto s = e.value_exact<std::string>()) out.push_back(to_double(parse_rational(*s)));
      else throw ConfigError(where(e) + full(key) + " must contain only numbers");
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> def) {
    const auto* n = node(key);
    if (!n) return def;
    const auto* arr = n->as_array();
    if (!arr) throw ConfigError(where(*n) + full(key) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *arr) {
      if (auto v = e.value_exact<std::string>()) out.push_back(*v);
      else throw ConfigError(where(e) + full(key) + " must contain only strings");
    }
    return out;
  }

  /// Throws on any key of the table that was never read.
  void finish(std::initializer_list<const char*> subtables = {}) const {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      const std::string key(k.str());
      if (used_.count(key)) continue;
      bool sub = false;
      for (const char* s : subtables) sub = sub || key == s;
      if (!sub) throw ConfigError(where(v) + "unknown key '" + full(key) + "'");
    }
  }

  std::string full(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  const toml::table* t_;
  std::string name_;
  std::set<std::string> used_;
};

struct ModelSpec {
  ModelParams params;
  ProductionLaw law;
  std::string production = "power_law";
  /// Exact exponents when every structural entry was given exactly.
  StructuralParams<Rational> exact;
};

struct GridSpec {
  int N = 512;
  double grading = 1.0;
};

struct FunctionalsSpec {
  std::optional<MomentConfig> moment;
  std::vector<double> lp;
  double energy_p = 2.0;
};

struct BoundsSpec {
  std::optional<OdiCoefficients> coeffs;
  std::string fit_series;  // series.csv to fit from
  std::string fit_column = "phi_p";
  std::string tmax_steps;  // steps.csv for the T_max comparison
  double gamma = 2.0, delta = 1.5, p = 1.0;
  std::optional<double> domain_measure;
  double coverage = 0.99;
};

struct ScenarioSpec {
  std::string initial = "plateau";  // plateau, gaussian, constant, logistic
  double value = 1.0;               // level for "constant"
  InitialDataSpec data;
  std::optional<double> M0;
  double c30_c31_ratio = 1.0;
  double eps_m1_zero = -1.0;
  double margin = 1e-3;
  double growth_factor_min = 100.0;
  double concavity_tol_rel = 1e-6;
  double monotone_tol_rel = 1e-9;
  double odi_coverage = 0.99;
  bool enforce = true;
};

struct OutputSpec {
  std::string directory = "chemotaxis-out";
  int sample_every = 1;
  double sample_dt = 0.0;
  int snapshot_every = 0;  // every k-th sample; 0 keeps initial and final only
  std::vector<std::string> formats{"csv", "svg", "bin", "txt", "json"};
  bool log_scale = false;

  bool wants(const std::string& f) const { return std::find(formats.begin(), formats.end(), f) != formats.end(); }
};

struct SweepAxis {
  std::string key;  // dotted path, e.g. "model.alpha"
  toml::array values;
};

struct SweepSpec {
  std::string command = "simulate";
  int workers = 1;
  std::vector<SweepAxis> axes;
};

struct RunConfig {
  ModelSpec model;
  StepperConfig solver;
  GridSpec grid;
  FunctionalsSpec functionals;
  BoundsSpec bounds;
  ScenarioSpec scenario;
  OutputSpec output;
  SweepSpec sweep;
  bool has_bounds = false;
  bool has_sweep = false;
  toml::table source;  // as parsed, for sweeps
};

namespace detail {

inline void read_model(Section s, ModelSpec& m) {
  auto& p = m.params;
  p.n = static_cast<int>(s.integer("n", p.n));
  m.exact.n = p.n;
  auto exact = [&](const char* key, double& slot, Rational& q) {
    if (auto v = s.real_opt(key)) {
      slot = v->value;
      q = v->exact;
    } else {
      q = decimal_rational(slot);
    }
  };
  exact("m1", p.m1, m.exact.m1);
  exact("m2", p.m2, m.exact.m2);
  exact("m3", p.m3, m.exact.m3);
  exact("alpha", p.alpha, m.exact.alpha);
  exact("beta", p.beta, m.exact.beta);
  exact("k", p.k, m.exact.k);
  p.chi = s.real("chi", p.chi);
  p.xi = s.real("xi", p.xi);
  p.lambda = s.real("lambda", p.lambda);
  p.mu = s.real("mu", p.mu);
  p.k1 = s.real("k1", p.k1);
  p.k2 = s.real("k2", p.k2);
  p.k3 = s.real("k3", p.k3);
  p.R = s.real("R", p.R);
  m.production = s.choice("production", "power_law", {"power_law", "tabulated"});
  if (m.production == "tabulated") {
    auto sv = s.reals("table_s"), f1 = s.reals("table_f1"), f2 = s.reals("table_f2");
    m.law = ProductionLaw::tabulated(sv, f1, f2);
  } else {
    m.law = ProductionLaw::power_law(p);
  }
  s.finish();
  if (p.n < 1) throw ConfigError("model.n must be a positive integer");
  if (!(p.R > 0.0)) throw ConfigError("model.R must be positive");
}

inline void read_solver(Section s, StepperConfig& c, GridSpec& g) {
  g.N = static_cast<int>(s.integer("N", g.N));
  g.grading = s.real("grading", g.grading);
  c.dt_init = s.real("dt_init", c.dt_init);
  c.dt_min = s.real("dt_min", c.dt_min);
  c.dt_max = s.real("dt_max", c.dt_max);
  c.cfl_safety = s.real("cfl_safety", c.cfl_safety);
  c.growth_limit = s.real("growth_limit", c.growth_limit);
  c.blowup_threshold = s.real("blowup_threshold", c.blowup_threshold);
  c.t_end = s.real("t_end", c.t_end);
  c.max_retries = static_cast<int>(s.integer("max_retries", c.max_retries));
  c.max_steps = s.integer("max_steps", c.max_steps);
  c.backend = s.choice("backend", to_string(c.backend), {"full", "reduced"}) == "full" ? Backend::full : Backend::reduced;
  c.scheme = s.choice("scheme", to_string(c.scheme), {"semi_implicit", "explicit_rk"}) == "semi_implicit"
                 ? Scheme::semi_implicit
                 : Scheme::explicit_rk;
  s.finish();
  if (g.N < 4) throw ConfigError("solver.N must be at least 4");
  if (!(g.grading >= 1.0)) throw ConfigError("solver.grading must be >= 1");
}

inline void read_functionals(Section s, FunctionalsSpec& f) {
  auto s0 = s.real_maybe("s0"), gm = s.real_maybe("moment_gamma"), ss = s.real_maybe("s_star"),
       e0 = s.real_maybe("eps0");
  if (s0 || gm || ss || e0) {
    MomentConfig m;
    m.s0 = s0.value_or(m.s0);
    m.moment_gamma = gm.value_or(m.moment_gamma);
    m.s_star = ss.value_or(0.1 * m.s0);
    m.eps0 = e0.value_or(0.1 * m.s0);
    f.moment = m;
  }
  f.lp = s.reals("lp");
  f.energy_p = s.real("energy_p", f.energy_p);
  s.finish();
  for (double p : f.lp)
    if (!(p >= 1.0)) throw ConfigError("functionals.lp entries must be >= 1");
  if (!(f.energy_p >= 1.0)) throw ConfigError("functionals.energy_p must be >= 1");
}

inline void read_bounds(Section s, BoundsSpec& b) {
  auto A = s.real_maybe("A"), B = s.real_maybe("B"), C = s.real_maybe("C");
  b.gamma = s.real("gamma", b.gamma);
  b.delta = s.real("delta", b.delta);
  b.p = s.real("p", b.p);
  b.domain_measure = s.real_maybe("domain_measure");
  const double phi0 = s.real("phi0", 1.0);
  b.fit_series = s.string("fit_series", "");
  b.fit_column = s.string("fit_column", b.fit_column);
  b.tmax_steps = s.string("tmax_steps", "");
  b.coverage = s.real("coverage", b.coverage);
  s.finish();
  if (A || B || C) {
    if (!b.fit_series.empty()) throw ConfigError("bounds: give either A/B/C or fit_series, not both");
    OdiCoefficients c;
    c.A = A.value_or(0.0);
    c.B = B.value_or(0.0);
    c.C = C.value_or(0.0);
    c.gamma = b.gamma;
    c.delta = b.delta;
    c.phi0 = phi0;
    c.p = b.p;
    c.domain_measure = b.domain_measure.value_or(1.0);
    b.coeffs = c;
  } else if (b.fit_series.empty()) {
    throw ConfigError("bounds: need coefficients A/B/C or a fit_series file");
  }
}

inline void read_scenario(Section s, ScenarioSpec& sc) {
  sc.initial = s.choice("initial", sc.initial, {"plateau", "gaussian", "constant", "logistic"});
  sc.value = s.real("value", sc.value);
  auto& d = sc.data;
  sc.M0 = s.real_maybe("M0");
  d.r_star = s.real("r_star", d.r_star);
  d.eps0 = s.real("eps0", d.eps0);
  d.plateau_fraction = s.real("plateau_fraction", d.plateau_fraction);
  d.shoulder_fraction = s.real("shoulder_fraction", d.shoulder_fraction);
  d.background = s.real("background", d.background);
  d.height_cap = s.real("height_cap", d.height_cap);
  d.profile = sc.initial == "gaussian" ? ProfileKind::gaussian_bump : ProfileKind::plateau_bump;
  sc.c30_c31_ratio = s.real("c30_c31_ratio", sc.c30_c31_ratio);
  sc.eps_m1_zero = s.real("eps_m1_zero", sc.eps_m1_zero);
  sc.margin = s.real("margin", sc.margin);
  sc.growth_factor_min = s.real("growth_factor_min", sc.growth_factor_min);
  sc.concavity_tol_rel = s.real("concavity_tol_rel", sc.concavity_tol_rel);
  sc.monotone_tol_rel = s.real("monotone_tol_rel", sc.monotone_tol_rel);
  sc.odi_coverage = s.real("odi_coverage", sc.odi_coverage);
  sc.enforce = s.boolean("enforce", sc.enforce);
  s.finish();
  if (sc.M0) d.M0 = *sc.M0;
}

inline void read_output(Section s, OutputSpec& o) {
  o.directory = s.string("directory", o.directory);
  o.sample_every = static_cast<int>(s.integer("sample_every", o.sample_every));
  o.sample_dt = s.real("sample_dt", o.sample_dt);
  o.snapshot_every = static_cast<int>(s.integer("snapshot_every", o.snapshot_every));
  o.formats = s.strings("formats", o.formats);
  o.log_scale = s.boolean("log_scale", o.log_scale);
  s.finish();
  if (o.sample_every < 0 || o.sample_dt < 0.0 || (o.sample_every == 0 && o.sample_dt == 0.0))
    throw ConfigError("output cadence must be positive (sample_every > 0 or sample_dt > 0)");
  if (o.snapshot_every < 0) throw ConfigError("output.snapshot_every must be >= 0");
  for (const auto& f : o.formats)
    if (f != "csv" && f != "svg" && f != "bin" && f != "txt" && f != "json")
      throw ConfigError("output.formats: unknown format '" + f + "'");
}

inline void read_sweep(const toml::table& t, SweepSpec& sw) {
  Section s(&t, "sweep");
  sw.command = s.choice("command", sw.command, {"simulate", "blowup", "classify", "bound"});
  sw.workers = static_cast<int>(s.integer("workers", sw.workers));
  if (sw.workers < 1) throw ConfigError("sweep.workers must be >= 1");
  const auto* axes = s.node("axis");
  if (!axes || !axes->is_array_of_tables()) throw ConfigError("sweep needs [[sweep.axis]] entries");
  for (const auto& e : *axes->as_array()) {
    Section a(e.as_table(), "sweep.axis");
    SweepAxis ax;
    ax.key = a.string("key", "");
    const auto* vals = a.node("values");
    a.finish();
    if (ax.key.empty()) throw ConfigError(where(e) + "sweep.axis needs a key");
    if (!vals || !vals->is_array() || vals->as_array()->empty())
      throw ConfigError(where(e) + "sweep.axis needs a non-empty values array");
    ax.values = *vals->as_array();
    sw.axes.push_back(std::move(ax));
  }
  s.finish();
}

}  // namespace detail

/// Builds a RunConfig from an already parsed document.
inline RunConfig from_table(const toml::table& root) {
  RunConfig cfg;
  cfg.source = root;
  Section top(&root, "");
  auto table = [&](const char* key) -> const toml::table* {
    const auto* n = top.node(key);
    if (!n) return nullptr;
    if (!n->is_table()) throw ConfigError(where(*n) + "'" + key + "' must be a table");
    return n->as_table();
  };
  const auto* model = table("model");
  if (!model) throw ConfigError("missing [model] table");
  detail::read_model(Section(model, "model"), cfg.model);
  detail::read_solver(Section(table("solver"), "solver"), cfg.solver, cfg.grid);
  detail::read_functionals(Section(table("functionals"), "functionals"), cfg.functionals);
  if (const auto* b = table("bounds")) {
    cfg.has_bounds = true;
    detail::read_bounds(Section(b, "bounds"), cfg.bounds);
  }
  detail::read_scenario(Section(table("scenario"), "scenario"), cfg.scenario);
  detail::read_output(Section(table("output"), "output"), cfg.output);
  if (const auto* s = table("sweep")) {
    cfg.has_sweep = true;
    detail::read_sweep(*s, cfg.sweep);
  }
  top.finish();
  return cfg;
}

inline RunConfig parse_string(std::string_view text, std::string_view source_name = "config") {
  try {
    return from_table(toml::parse(text, source_name));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ConfigError(os.str());
  }
}

inline RunConfig load(const std::filesystem::path& path) {
  try {
    return from_table(toml::parse_file(path.string()));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path.string() << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ConfigError(os.str());
  }
}

/// Copy of root with the dotted key set to value; the parent table must exist
/// or is created.
inline toml::table with_override(const toml::table& root, const std::string& dotted, const toml::node& value) {
  toml::table out = root;
  toml::table* t = &out;
  std::size_t start = 0;
  for (;;) {
    const auto dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("bad sweep key '" + dotted + "'");
    if (dot == std::string::npos) {
      value.visit([&](auto&& v) { t->insert_or_assign(part, v); });
      return out;
    }
    auto* next = t->get(part);
    if (!next) {
      t->insert(part, toml::table{});
      next = t->get(part);
    }
    if (!next->is_table()) throw ConfigError("sweep key '" + dotted + "' crosses a non-table value");
    t = next->as_table();
    start = dot + 1;
  }
}

}  // namespace chemlab::config
