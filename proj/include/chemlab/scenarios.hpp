#pragma once

// Blow-up experiments: initial-data construction following the moment
// argument (choice of gamma, s0, eps0, s_*), a reduced-mode run with
// functional recorders, and the checks that run must pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "chemlab/bounds.hpp"
#include "chemlab/errors.hpp"
#include "chemlab/functionals.hpp"
#include "chemlab/grid.hpp"
#include "chemlab/params.hpp"
#include "chemlab/regimes.hpp"
#include "chemlab/solver.hpp"

namespace chemlab {

/// (lambda/mu |Omega|^{k-1})^{1/(k-1)}.
inline double critical_mass(const ModelParams& p) {
  return std::pow(p.lambda / p.mu * std::pow(p.domain_measure(), p.k - 1.0), 1.0 / (p.k - 1.0));
}

struct GammaInterval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = 1.0;
  std::string lo_binding = "none", hi_binding = "gamma < 1";
  double midpoint() const { return std::isfinite(lo) ? 0.5 * (lo + hi) : hi - 1.0; }
};

/// Intersection of the lower/upper bounds on the moment exponent.
inline GammaInterval moment_gamma_interval(const ModelParams& p) {
  GammaInterval I;
  const double s = p.m2 + p.alpha, n = p.n;
  auto lower = [&](double v, const char* why) {
    if (v > I.lo) {
      I.lo = v;
      I.lo_binding = why;
    }
  };
  if (p.m1 >= 0.0) {
    if (!(s > p.m1)) throw RegimeError("moment exponent needs m2+alpha > m1");
    lower(2.0 - (2.0 / n) * s / (s - p.m1), "gamma > 2 - (2/n)(m2+alpha)/(m2+alpha-m1)");
  } else if (2.0 - 2.0 / n < I.hi) {
    I.hi = 2.0 - 2.0 / n;
    I.hi_binding = "gamma < 2 - 2/n";
  }
  lower(2.0 - s / p.k, "gamma > 2 - (m2+alpha)/k");
  lower(2.0 - s, "gamma > 2 - (m2+alpha)");
  if (!(I.lo < I.hi))
    throw RegimeError("empty moment-exponent interval: " + I.lo_binding + " vs " + I.hi_binding);
  return I;
}

struct S0Choice {
  double s0 = 0.0;
  double cap_radius = 0.0, cap_mass = 0.0, root = 0.0, exponent = 0.0;
  std::string binding;
};

/// s0 = min{R^n/6, M/2, root of the second smallness condition}.
/// eps_m1_zero < 0 selects the default 1e-3 (m2+alpha).
inline S0Choice select_s0(const ModelParams& p, double M, double moment_gamma, double ratio = 1.0,
                          double eps_m1_zero = -1.0) {
  const double s = p.m2 + p.alpha, n = p.n, gm = moment_gamma;
  double e;
  if (p.m1 > 0.0) e = s - (2.0 / n) * s / (s - p.m1);
  else if (p.m1 == 0.0) {
    const double eps = eps_m1_zero > 0.0 ? eps_m1_zero : 1e-3 * s;
    e = s - (2.0 / n) * s / (s - eps);
  } else e = s - 2.0 / n;
  if (!(e > 0.0)) throw RegimeError("s0 condition exponent " + format_scalar(e) + " is not positive");
  S0Choice c;
  c.exponent = e;
  c.cap_radius = std::pow(p.R, p.n) / 6.0;
  c.cap_mass = M / 2.0;
  c.root = std::pow(ratio / 2.0 * std::pow(M / (2.0 * (1.0 - gm) * (2.0 - gm) * omega_n(p.n)), s), 1.0 / e);
  c.s0 = std::min({c.cap_radius, c.cap_mass, c.root});
  c.binding = c.s0 == c.cap_radius ? "R^n/6" : c.s0 == c.cap_mass ? "M/2" : "smallness root";
  return c;
}

struct ConcentrationChoice {
  double eps0 = 0.0, s_star = 0.0;
  double lhs = 0.0, rhs = 0.0, margin = 0.0;
  int halvings = 0;
};

/// (M0-eps0)/omega int_{s*}^{s0} s^{-gamma}(s0-s) ds, closed form.
inline double concentration_lhs(double M0, double eps0, double s0, double s_star, double gm, double omega) {
  const double bracket = std::pow(s0, 2.0 - gm) / ((1.0 - gm) * (2.0 - gm)) -
                         std::pow(s_star, 1.0 - gm) * s0 / (1.0 - gm) + std::pow(s_star, 2.0 - gm) / (2.0 - gm);
  return (M0 - eps0) / omega * bracket;
}

/// Halves eps0 = s0/4 and s_* = s0/2 together until the strict integral
/// condition holds with a margin of margin_frac times its limiting slack.
inline ConcentrationChoice select_eps_sstar(double M0, double s0, double moment_gamma, double omega,
                                            double margin_frac = 0.01) {
  if (!(M0 > s0)) throw InvalidParameter("select_eps_sstar needs M0 > s0");
  if (!(moment_gamma < 1.0)) throw InvalidParameter("moment gamma must be below 1");
  const double gm = moment_gamma;
  const double unit = std::pow(s0, 2.0 - gm) / ((1.0 - gm) * (2.0 - gm) * omega);
  ConcentrationChoice c;
  c.rhs = (M0 - s0) * unit;
  c.margin = margin_frac * s0 * unit;
  double eps0 = s0 / 4.0, s_star = s0 / 2.0;
  for (int i = 0; i <= 200; ++i) {
    c.lhs = concentration_lhs(M0, eps0, s0, s_star, gm, omega);
    if (c.lhs > c.rhs + c.margin) {
      c.eps0 = eps0;
      c.s_star = s_star;
      c.halvings = i;
      return c;
    }
    eps0 *= 0.5;
    s_star *= 0.5;
  }
  throw SearchExhausted("no (eps0, s_star) satisfies the integral condition after 200 halvings");
}

enum class ProfileKind { plateau_bump, gaussian_bump, custom };

struct InitialDataSpec {
  double M0 = 1.0;
  ProfileKind profile = ProfileKind::plateau_bump;
  double r_star = 0.1;
  double eps0 = 0.01;
  /// Plateau radius and shoulder width, as fractions of r_star.
  double plateau_fraction = 0.8;
  double shoulder_fraction = 0.1;
  /// Uniform background level added everywhere.
  double background = 0.0;
  double height_cap = 1e300;
  /// Shape for ProfileKind::custom (nonincreasing, bounded), scaled to mass M0.
  std::function<double(double)> custom;
};

struct InitialData {
  std::vector<double> u0;
  double mass = 0.0;
  double inner_mass = 0.0;  // int over B_{r_star}
  double height = 0.0;
};

/// int_{B_r} u for a cell field, exact for piecewise-constant u.
inline double mass_within(const RadialGrid& g, const std::vector<double>& u, double r) {
  const auto U = accumulate_mass(g, u);
  const double s = std::pow(std::min(r, g.R()), g.n());
  const auto& sf = g.s_faces();
  auto it = std::upper_bound(sf.begin(), sf.end(), s);
  if (it == sf.end()) return g.omega() * U.back();
  const std::size_t f = std::max<std::ptrdiff_t>(it - sf.begin(), 1);
  const double w = (s - sf[f - 1]) / (sf[f] - sf[f - 1]);
  return g.omega() * (U[f - 1] + w * (U[f] - U[f - 1]));
}

inline InitialData build_concentrated_u0(const InitialDataSpec& spec, const RadialGrid& g) {
  if (!(spec.M0 > 0.0) || !(spec.r_star > 0.0) || !(spec.eps0 >= 0.0))
    throw InvalidParameter("initial data needs M0 > 0, r_star > 0, eps0 >= 0");
  const double omega = g.omega(), volume = omega * g.total_weight();
  const double inner_volume = omega * std::pow(std::min(spec.r_star, g.R()), g.n()) / g.n();
  if (spec.background < 0.0) throw InvalidParameter("background must be nonnegative");
  if (spec.background * volume >= spec.M0) throw InfeasibleSpec("background alone carries the whole mass");
  if (spec.background * (volume - inner_volume) > spec.eps0 * (1.0 + 1e-12))
    throw InfeasibleSpec("background outside B_{r_star} exceeds eps0");

  std::vector<double> shape;
  switch (spec.profile) {
    case ProfileKind::plateau_bump: {
      const double rp = spec.plateau_fraction * spec.r_star;
      const double re = rp + spec.shoulder_fraction * spec.r_star;
      if (!(rp > 0.0) || spec.shoulder_fraction < 0.0) throw InvalidParameter("plateau needs positive radius");
      auto f = [&](double r) {
        if (r <= rp) return 1.0;
        if (r >= re) return 0.0;
        return (re - r) / (re - rp);
      };
      shape = g.cell_averages(f, {rp, re});
      break;
    }
    case ProfileKind::gaussian_bump: {
      // Width so that at most half of eps0 (relative to M0) sits outside r_star.
      const double target = 0.5 * std::max(spec.eps0 - spec.background * (volume - inner_volume), 0.0) / spec.M0;
      if (!(target > 0.0)) throw InfeasibleSpec("gaussian profile needs eps0 > 0");
      const double x = boost::math::gamma_q_inv(0.5 * g.n(), std::min(target, 0.5));
      const double ell = spec.r_star / std::sqrt(x);
      shape = g.cell_averages([&](double r) { return std::exp(-(r / ell) * (r / ell)); });
      break;
    }
    case ProfileKind::custom:
      if (!spec.custom) throw InvalidParameter("custom profile needs a shape function");
      shape = g.cell_averages(spec.custom);
      break;
  }
  for (std::size_t j = 1; j < shape.size(); ++j) {
    if (shape[j] > shape[j - 1] * (1.0 + 1e-12) + 1e-300)
      throw InvalidParameter("initial profile must be radially nonincreasing");
    shape[j] = std::min(shape[j], shape[j - 1]);  // drop quadrature rounding
  }

  const double shape_mass = g.integrate(shape);
  if (!(shape_mass > 0.0)) throw InfeasibleSpec("profile carries no mass on this grid");
  const double bg_mass = spec.background * volume;
  const double h = (spec.M0 - bg_mass) / shape_mass;
  InitialData d;
  d.height = spec.background + h * shape.front();
  if (d.height > spec.height_cap) throw InfeasibleSpec("required height " + format_scalar(d.height) + " exceeds the cap");
  d.u0.resize(shape.size());
  for (std::size_t j = 0; j < shape.size(); ++j) d.u0[j] = spec.background + h * shape[j];
  d.mass = g.integrate(d.u0);
  d.inner_mass = mass_within(g, d.u0, spec.r_star);
  if (d.inner_mass < (spec.M0 - spec.eps0) * (1.0 - 1e-12))
    throw InfeasibleSpec("only " + format_scalar(d.inner_mass) + " of the mass lies inside r_star");
  return d;
}

/// Worst violations of (chi/2) f1 - c_sil9 <= chi f1 - xi f2 <= chi f1 over log-spaced s in [0, s_max].
struct SandwichCheck {
  double lower_excess = -std::numeric_limits<double>::infinity();  // max of lower - f
  double upper_excess = -std::numeric_limits<double>::infinity();  // max of f - upper
  int samples = 0;
  bool holds(double tol = 1e-12) const { return lower_excess <= tol && upper_excess <= tol; }
};

inline SandwichCheck sandwich_check(const ModelParams& p, const ProductionLaw& law, double c_sil9, double s_max,
                                    int count = 2000) {
  SandwichCheck c;
  auto probe = [&](double s) {
    const double f1 = law.f1(s), f = p.chi * f1 - p.xi * law.f2(s);
    const double scale = std::max(1.0, p.chi * f1);
    c.lower_excess = std::max(c.lower_excess, (0.5 * p.chi * f1 - c_sil9 - f) / scale);
    c.upper_excess = std::max(c.upper_excess, (f - p.chi * f1) / scale);
    ++c.samples;
  };
  probe(0.0);
  const double lo = std::log(1e-8), hi = std::log(std::max(s_max, 1e-6));
  for (int i = 0; i < count; ++i) probe(std::exp(lo + (hi - lo) * i / (count - 1)));
  return c;
}

struct LpVerdict {
  double p = 0.0;
  double growth = 0.0;
  bool above_pfrak = false;
  bool pass = true;
  std::string note;
};

/// Growth last / first-quartile of each tracked L^p norm. The first-quartile
/// sample is the first one with t >= t_last / 4.
inline std::vector<LpVerdict> verify_theorem1(const FunctionalSeries& s, double pfrak, double growth_factor_min,
                                              double M, bool blowup_declared) {
  std::vector<LpVerdict> out;
  if (s.size() == 0) return out;
  const double tl = s.t.back();
  std::size_t q = 0;
  while (q + 1 < s.size() && s.t[q] < tl / 4.0) ++q;
  double max_mass = 0.0;
  for (double m : s.mass) max_mass = std::max(max_mass, m);
  for (std::size_t i = 0; i < s.lp_exponents.size(); ++i) {
    LpVerdict v;
    v.p = s.lp_exponents[i];
    v.growth = s.lp[i].back() / s.lp[i][q];
    v.above_pfrak = v.p > pfrak;
    if (v.p == 1.0) {
      v.pass = max_mass <= M * (1.0 + 1e-6);
      v.note = v.pass ? "bounded by the mass bound" : "mass bound exceeded";
    } else if (!v.above_pfrak) {
      v.note = "below pfrak; informational";
    } else if (!blowup_declared) {
      v.note = "no growth (no blow-up declared)";
    } else {
      v.pass = v.growth >= growth_factor_min;
      v.note = v.pass ? "grows" : "insufficient growth";
    }
    out.push_back(v);
  }
  return out;
}

struct Odi2Verdict {
  double c = 0.0;
  std::size_t violations = 0;
  std::size_t samples = 0;
  bool pass = false;
};

/// Largest c >= 0 with phi'_i >= c s0^{-(3-gamma)(m2+alpha-1)} phi_i^{m2+alpha}
/// at 99% of the consecutive in-S_phi sample pairs.
inline Odi2Verdict verify_odi2(const std::vector<double>& t, const std::vector<double>& phi,
                               const std::vector<bool>& in_S, double m2, double alpha, double s0, double moment_gamma,
                               double coverage = 0.99) {
  const double power = m2 + alpha;
  const double factor = std::pow(s0, -(3.0 - moment_gamma) * (power - 1.0));
  std::vector<double> ratio;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (!in_S[i] || !in_S[i + 1] || !(t[i + 1] > t[i])) continue;
    const double slope = (phi[i + 1] - phi[i]) / (t[i + 1] - t[i]);
    ratio.push_back(slope / (factor * std::pow(phi[i], power)));
  }
  if (ratio.size() < 20) throw InsufficientSamples("need at least 20 sample pairs inside S_phi");
  std::vector<double> sorted = ratio;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t idx = static_cast<std::size_t>(std::floor((1.0 - coverage) * sorted.size()));
  Odi2Verdict v;
  v.samples = ratio.size();
  v.c = std::max(0.0, sorted[std::min(idx, sorted.size() - 1)]);
  for (double r : ratio)
    if (r < v.c) ++v.violations;
  v.pass = v.c > 0.0;
  return v;
}

struct ExperimentOptions {
  int N = 2048;
  double grading = 6.0;
  StepperConfig stepper = [] {
    StepperConfig c;
    c.backend = Backend::reduced;
    c.dt_init = 1e-12;
    c.dt_min = 1e-24;
    c.dt_max = 1e-3;
    c.cfl_safety = 0.4;
    c.growth_limit = 0.02;
    c.blowup_threshold = 1e15;
    c.t_end = 1.0;
    return c;
  }();
  std::optional<double> M0;  // default 2C
  double c30_c31_ratio = 1.0;
  double eps_m1_zero = -1.0;
  double margin = 1e-3;             // relative margin above pfrak and pbar
  std::vector<double> lp_list;      // default {1, (1+pfrak)/2, 1.5 pfrak, 2 pfrak}
  double growth_factor_min = 100.0;
  double concavity_tol_rel = 1e-6;
  double monotone_tol_rel = 1e-9;
  double odi_coverage = 0.99;
  InitialDataSpec initial;          // M0, r_star and eps0 are filled in by the pipeline
  int sample_every = 1;
  bool enforce = true;
  bool keep_states = false;
};

struct Verdict {
  std::string name;
  bool pass = false;
  bool enforced = true;
  std::string detail;
};

struct ExperimentReport {
  regimes::RegimeReport regime;
  double C = 0.0, M0 = 0.0, M = 0.0;
  GammaInterval gamma_interval;
  MomentConfig moment;
  S0Choice s0_choice;
  ConcentrationChoice concentration;
  double r_star = 0.0;
  InitialData initial;
  double pfrak = 0.0;
  regimes::ExponentSet<double> exponents;
  MassConstants constants;
  RunStatus status = RunStatus::completed;
  std::optional<double> T_blowup_observed;
  std::string stop_reason;
  std::size_t steps = 0;
  FunctionalSeries series;
  std::vector<double> t_steps, linf_steps;
  std::vector<LpVerdict> theorem1;
  std::optional<Odi2Verdict> odi2;
  std::optional<double> sphi_entry_time;
  double phi0 = 0.0;
  SandwichCheck sandwich;
  double max_concavity_ratio = 0.0;
  std::size_t phi_decreases = 0;
  double max_mt_excess = -std::numeric_limits<double>::infinity();
  std::optional<TmaxEstimate> tmax;
  std::optional<OdiFit> odi_fit;
  std::optional<BoundReport> bound;
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;
  Trajectory trajectory;  // final state and bookkeeping

  bool all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass || !v.enforced; });
  }
};

inline ExperimentReport run_blowup_experiment(const ModelParams& params, const ProductionLaw& law,
                                              const ExperimentOptions& opt = {}) {
  validate_params(params);
  ExperimentReport rep;
  rep.regime = regimes::check_assumptions(params.structural());
  if (!rep.regime.h[4].holds) throw RegimeError("H5 fails: " + rep.regime.h[4].detail);
  if (params.m2 != params.m3) throw ModelError("blow-up experiment needs m2 = m3");
  rep.C = critical_mass(params);
  rep.M0 = opt.M0.value_or(2.0 * rep.C);
  if (!(rep.M0 > rep.C)) throw InvalidParameter("M0 must exceed C = " + format_scalar(rep.C));
  rep.M = std::max(rep.M0, rep.C);

  rep.gamma_interval = moment_gamma_interval(params);
  const double gm = rep.gamma_interval.midpoint();
  rep.s0_choice = select_s0(params, rep.M, gm, opt.c30_c31_ratio, opt.eps_m1_zero);
  const double s0 = rep.s0_choice.s0;
  const double omega = omega_n(params.n);
  rep.concentration = select_eps_sstar(rep.M0, s0, gm, omega);
  rep.moment = {s0, gm, rep.concentration.s_star, rep.concentration.eps0};
  rep.moment.validate(params.n, params.R);
  rep.r_star = std::pow(rep.concentration.s_star, 1.0 / params.n);

  const RadialGrid grid(params.n, params.R, opt.N, opt.grading);
  InitialDataSpec spec = opt.initial;
  spec.M0 = rep.M0;
  spec.r_star = rep.r_star;
  spec.eps0 = rep.concentration.eps0;
  rep.initial = build_concentrated_u0(spec, grid);

  // Exponents: pfrak, pbar and the energy exponent p.
  const auto sp = params.structural();
  rep.pfrak = regimes::compute_pfrak(sp);
  const double pf_choice = regimes::admissible_above(rep.pfrak, opt.margin);
  double p_energy = 0.0;
  if (rep.regime.lemma_hypotheses()) {
    const double pbar = regimes::compute_pbar(sp, pf_choice).value;
    p_energy = regimes::admissible_above(pbar, opt.margin);
    rep.exponents = regimes::evaluate_exponents(sp, pf_choice, p_energy);
    rep.exponents.p_bar = pbar;
  }
  std::vector<double> lp = opt.lp_list;
  if (lp.empty()) lp = {1.0, 0.5 * (1.0 + rep.pfrak), 1.5 * rep.pfrak, 2.0 * rep.pfrak};

  rep.constants = c0_constant(params, law, rep.moment);
  FunctionalRecorder rec(params, law, rep.moment, lp, p_energy > 0.0 ? p_energy : 2.0, rep.M);
  double mt_excess = -std::numeric_limits<double>::infinity();
  std::vector<NamedObserver> obs{
      {"functionals", [&](const RadialState& s, const RadialGrid& g) { rec(s, g); }},
      {"m(t) bound", [&](const RadialState& s, const RadialGrid& g) {
         if (!rec.series().in_S_phi.empty() && rec.series().in_S_phi.back())
           mt_excess = std::max(mt_excess, mt_bound_excess(g, s.u, params, law, rep.constants.c0, s0));
       }}};
  StepperConfig sc = opt.stepper;
  sc.backend = Backend::reduced;
  RunOptions ro;
  ro.sample_every = opt.sample_every;
  ro.keep_states = opt.keep_states;
  rep.trajectory = run(rep.initial.u0, grid, params, law, sc, obs, ro);
  const auto& tr = rep.trajectory;
  for (const auto& e : tr.observer_errors) rep.notes.push_back("observer failed: " + e);
  rep.status = tr.status;
  rep.T_blowup_observed = tr.t_blowup;
  rep.stop_reason = tr.stop_reason;
  rep.steps = tr.steps;
  rep.t_steps = tr.t_steps;
  rep.linf_steps = tr.linf_steps;
  rep.series = rec.series();
  rep.max_mt_excess = mt_excess;
  const auto& S = rep.series;
  const bool blew_up = tr.status == RunStatus::blowup_declared;

  auto verdict = [&](std::string name, bool pass, std::string detail, bool enforced = true) {
    rep.verdicts.push_back({std::move(name), pass, enforced, std::move(detail)});
  };

  verdict("blow-up declared", blew_up,
          blew_up ? "at t = " + format_scalar(*tr.t_blowup) : "status " + std::string(to_string(tr.status)));

  rep.phi0 = S.moment_phi.front();
  verdict("phi(0) above S_phi threshold", rep.phi0 > S.sphi_threshold,
          format_scalar(rep.phi0) + " vs " + format_scalar(S.sphi_threshold));
  for (std::size_t i = 0; i < S.size(); ++i)
    if (S.in_S_phi[i]) {
      rep.sphi_entry_time = S.t[i];
      break;
    }

  double max_mass = 0.0;
  for (double m : S.mass) max_mass = std::max(max_mass, m);
  verdict("mass bound", max_mass <= rep.M * (1.0 + 1e-6),
          "max mass " + format_scalar(max_mass) + " vs M = " + format_scalar(rep.M));

  rep.theorem1 = verify_theorem1(S, rep.pfrak, opt.growth_factor_min, rep.M, blew_up);
  for (const auto& v : rep.theorem1) {
    std::ostringstream os;
    os << "L^" << v.p << " growth " << v.growth << " (" << v.note << ")";
    verdict("Lp coincidence p=" + format_scalar(v.p), v.pass, os.str());
  }

  std::size_t dec = 0;
  for (std::size_t i = 0; i + 1 < S.size(); ++i)
    if (S.in_S_phi[i] && S.in_S_phi[i + 1] &&
        S.moment_phi[i + 1] < S.moment_phi[i] - opt.monotone_tol_rel * std::abs(S.moment_phi[i]))
      ++dec;
  rep.phi_decreases = dec;
  verdict("phi nondecreasing in S_phi", dec == 0, std::to_string(dec) + " decreasing sample pairs");

  double worst = -std::numeric_limits<double>::infinity();
  bool concave = true;
  for (std::size_t i = 0; i < S.size(); ++i) {
    const double scale = std::max(S.concavity_scale[i], std::numeric_limits<double>::min());
    worst = std::max(worst, S.concavity[i] / scale);
    concave = concave && S.concavity[i] <= opt.concavity_tol_rel * S.concavity_scale[i];
  }
  rep.max_concavity_ratio = worst;
  verdict("U concave in s", concave, "max U_ss / max|U_ss| = " + format_scalar(worst));

  try {
    rep.odi2 = verify_odi2(S.t, S.moment_phi, S.in_S_phi, params.m2, params.alpha, s0, gm, opt.odi_coverage);
    verdict("superlinear moment ODI", rep.odi2->pass && rep.odi2->violations <= rep.odi2->samples / 100,
            "c = " + format_scalar(rep.odi2->c) + ", " + std::to_string(rep.odi2->violations) + "/" +
                std::to_string(rep.odi2->samples) + " violations");
  } catch (const InsufficientSamples& e) {
    verdict("superlinear moment ODI", false, e.what());
  }

  double umax = 0.0;
  for (double x : S.linf) umax = std::max(umax, x);
  rep.sandwich = sandwich_check(params, law, rep.constants.c_sil9, 10.0 * umax);
  verdict("production sandwich", rep.sandwich.holds(),
          "lower excess " + format_scalar(rep.sandwich.lower_excess) + ", upper excess " +
              format_scalar(rep.sandwich.upper_excess));

  verdict("m(t) bound on S_phi", mt_excess <= 1e-9 * std::max(1.0, rep.constants.c0),
          "max excess " + format_scalar(mt_excess), false);

  // Blow-up time estimate and the fitted ODI bound.
  if (blew_up) {
    try {
      rep.tmax = extrapolate_Tmax(tr.t_steps, tr.linf_steps);
    } catch (const FitError& e) {
      rep.notes.push_back(std::string("Tmax extrapolation failed: ") + e.what());
    }
    if (p_energy > 0.0) {
      try {
        rep.odi_fit = fit_odi_coefficients(S.t, S.phi_p, rep.exponents.odi_gamma, rep.exponents.odi_delta, p_energy,
                                           params.domain_measure(), opt.odi_coverage);
        rep.bound = bound_report(rep.odi_fit->coeffs);
      } catch (const Error& e) {
        rep.notes.push_back(std::string("ODI fit failed: ") + e.what());
      }
    }
    const bool ok = rep.tmax && rep.bound && rep.bound->T_implicit <= rep.tmax->T_est;
    verdict("fitted Osgood bound below extrapolated T_max", ok,
            rep.tmax && rep.bound
                ? "T_implicit = " + format_scalar(rep.bound->T_implicit) + ", T_est = " + format_scalar(rep.tmax->T_est)
                : "fit unavailable");
  }

  if (opt.enforce && !rep.all_pass()) {
    std::string failed;
    for (const auto& v : rep.verdicts)
      if (v.enforced && !v.pass) failed += " [" + v.name + ": " + v.detail + "]";
    throw VerdictFailure("blow-up experiment failed:" + failed);
  }
  return rep;
}

}  // namespace chemlab
