#pragma once

// Functionals tracked along radial trajectories: L^p norms, the energy
// phi_p = (1/p) int (u+1)^p, the mass accumulation U and the moment pair
// phi = int_0^{s0} s^{-gamma}(s0-s) U ds, psi = int_0^{s0} s^{1-gamma}(s0-s) U_s^{m2+alpha} ds.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "chemlab/errors.hpp"
#include "chemlab/grid.hpp"
#include "chemlab/params.hpp"
#include "chemlab/solver.hpp"

namespace chemlab {

struct MomentConfig {
  double s0 = 0.1;
  double moment_gamma = 0.5;
  double s_star = 0.01;
  double eps0 = 0.01;

  void validate(int n, double R) const {
    if (!(s0 > 0.0 && s0 <= std::pow(R, n) / 6.0 * (1.0 + 1e-12))) throw InvalidParameter("s0 must lie in (0, R^n/6]");
    if (!(moment_gamma < 1.0)) throw InvalidParameter("moment gamma must be below 1");
    if (!(s_star > 0.0 && s_star < s0)) throw InvalidParameter("s_star must lie in (0, s0)");
    if (!(eps0 > 0.0 && eps0 < s0 / 2.0)) throw InvalidParameter("eps0 must lie in (0, s0/2)");
  }
};

/// U at the faces s_f = r_f^n; U(0) = 0 and U(R^n) = int u / omega_n.
inline std::vector<double> mass_accumulation(const RadialGrid& g, const std::vector<double>& u) {
  return accumulate_mass(g, u);
}

namespace detail {

/// int_a^b s^q ds for q > -1.
inline double power_moment(double a, double b, double q) {
  return (std::pow(b, q + 1.0) - std::pow(a, q + 1.0)) / (q + 1.0);
}

}  // namespace detail

/// U is piecewise linear in s (u is piecewise constant), so the weighted
/// integral is evaluated exactly cell by cell from moments of s^{-gamma}.
inline double moment_phi(const RadialGrid& g, const std::vector<double>& U, const MomentConfig& cfg) {
  const double gm = cfg.moment_gamma, s0 = cfg.s0;
  if (!(gm < 1.0)) throw SingularQuadratureError("moment weight s^-gamma is not integrable for gamma >= 1");
  const auto& s = g.s_faces();
  double acc = 0.0;
  for (int f = 0; f < g.N() && s[f] < s0; ++f) {
    const double a = s[f], b = std::min(s[f + 1], s0);
    const double slope = (U[f + 1] - U[f]) / (s[f + 1] - s[f]);
    const double c0 = U[f] - slope * a;  // U = c0 + slope * s on the cell
    // s^{-gamma}(s0 - s)(c0 + slope s) = s0 c0 s^{-g} + (s0 slope - c0) s^{1-g} - slope s^{2-g}
    acc += s0 * c0 * detail::power_moment(a, b, -gm) + (s0 * slope - c0) * detail::power_moment(a, b, 1.0 - gm) -
           slope * detail::power_moment(a, b, 2.0 - gm);
  }
  return acc;
}

/// psi with U_s = u/n piecewise constant per cell.
inline double moment_psi(const RadialGrid& g, const std::vector<double>& U_s, const MomentConfig& cfg, double power) {
  const double gm = cfg.moment_gamma, s0 = cfg.s0;
  const auto& s = g.s_faces();
  double acc = 0.0;
  for (int j = 0; j < g.N() && s[j] < s0; ++j) {
    if (U_s[j] <= 0.0) continue;
    const double a = s[j], b = std::min(s[j + 1], s0);
    const double w = s0 * detail::power_moment(a, b, 1.0 - gm) - detail::power_moment(a, b, 2.0 - gm);
    acc += w * std::pow(U_s[j], power);
  }
  return acc;
}

inline double sphi_threshold(const ModelParams& p, const MomentConfig& cfg, double M) {
  const double gm = cfg.moment_gamma;
  return (M - cfg.s0) * std::pow(cfg.s0, 2.0 - gm) / ((1.0 - gm) * (2.0 - gm) * omega_n(p.n));
}

inline bool in_S_phi(double phi, double threshold) { return phi >= threshold; }

inline double lp_norm(const RadialGrid& g, const std::vector<double>& u, double p) {
  double acc = 0.0;
  for (int j = 0; j < g.N(); ++j) acc += g.weights()[j] * std::pow(u[j], p);
  return std::pow(g.omega() * acc, 1.0 / p);
}

/// (1/p) int (u+1)^p.
inline double energy_phi_p(const RadialGrid& g, const std::vector<double>& u, double p) {
  double acc = 0.0;
  for (int j = 0; j < g.N(); ++j) acc += g.weights()[j] * std::pow(u[j] + 1.0, p);
  return g.omega() * acc / p;
}

inline double total_mass(const RadialGrid& g, const std::vector<double>& u) { return g.integrate(u); }

/// Largest second difference of U in s over interior faces (<= 0 when u is
/// radially nonincreasing). Also reports the largest magnitude via max_abs.
inline double concavity_check(const RadialGrid& g, const std::vector<double>& U, double* max_abs = nullptr) {
  const auto& s = g.s_faces();
  double mx = -std::numeric_limits<double>::infinity(), ma = 0.0;
  for (int f = 1; f < g.N(); ++f) {
    const double dl = (U[f] - U[f - 1]) / (s[f] - s[f - 1]);
    const double dr = (U[f + 1] - U[f]) / (s[f + 1] - s[f]);
    const double d2 = 2.0 * (dr - dl) / (s[f + 1] - s[f - 1]);
    mx = std::max(mx, d2);
    ma = std::max(ma, std::abs(d2));
  }
  if (max_abs) *max_abs = ma;
  return mx;
}

/// Same test from the cell densities, where U_s = u/n holds exactly per cell.
/// Increases of u within noise_ulps ulps count as flat: on a strongly graded
/// grid the innermost s-widths are tiny and turn plateau rounding into huge U_ss.
inline double concavity_check_density(const RadialGrid& g, const std::vector<double>& u, double* max_abs = nullptr,
                                      double noise_ulps = 64.0) {
  const auto& sc = g.s_centers();
  const double eps = std::numeric_limits<double>::epsilon();
  double mx = -std::numeric_limits<double>::infinity(), ma = 0.0;
  for (int j = 1; j < g.N(); ++j) {
    double du = u[j] - u[j - 1];
    if (du > 0.0 && du <= noise_ulps * eps * std::max(std::abs(u[j]), std::abs(u[j - 1]))) du = 0.0;
    const double d2 = du / (g.n() * (sc[j] - sc[j - 1]));
    mx = std::max(mx, d2);
    ma = std::max(ma, std::abs(d2));
  }
  if (max_abs) *max_abs = ma;
  return mx;
}

/// Default K: the argument 8n / (2^gamma (3-gamma) omega_n) at which f1 enters c0.
inline double c0_evaluation_point(int n, double moment_gamma) {
  return 8.0 * n / (std::pow(2.0, moment_gamma) * (3.0 - moment_gamma) * omega_n(n));
}

/// max of |chi f1 - xi f2|, f1, f2 over [0, K].
inline double production_bound(const ModelParams& p, const ProductionLaw& law, double K, int samples = 2001) {
  double L = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double s = K * i / (samples - 1);
    const double a = law.f1(s), b = law.f2(s);
    L = std::max({L, std::abs(p.chi * a - p.xi * b), a, b});
  }
  return L;
}

struct MassConstants {
  double c0 = 0.0;
  double c_sil9 = 0.0;
  double L = 0.0;
  double K = 0.0;
};

/// c0 bounding m(t) on S_phi, and the Young constant c_Sil9 of the sandwich
/// (chi/2) f1 - c_Sil9 <= chi f1 - xi f2. Pass L_bound < 0 to use the default.
inline MassConstants c0_constant(const ModelParams& p, const ProductionLaw& law, const MomentConfig& cfg,
                                 double L_bound = -1.0, double K = -1.0) {
  if (!(p.alpha > p.beta)) throw ModelError("c0 needs alpha > beta");
  MassConstants mc;
  const double x = c0_evaluation_point(p.n, cfg.moment_gamma);
  mc.K = K > 0.0 ? K : x;
  mc.L = L_bound >= 0.0 ? L_bound : production_bound(p, law, mc.K);
  const double ratio = p.alpha / (p.alpha - p.beta);
  const double young = p.chi * p.k3 * (p.alpha - p.beta) / p.beta *
                       std::pow(2.0 * p.xi * p.k2 * p.beta / (p.chi * p.k3 * p.alpha), ratio);
  mc.c0 = p.chi * law.f1(x) + (young + mc.L * (p.chi + 2.0)) / 6.0;
  mc.c_sil9 = std::pow(2.0 * p.beta * p.xi * p.k2 / (p.chi * p.k3 * p.alpha), ratio) * p.chi * p.k3 *
              (p.alpha - p.beta) / (2.0 * p.beta);
  return mc;
}

/// Largest value of m(t) - c0 - (1/(2s)) int_0^s f(n U_s) over faces s in (0, s0];
/// nonpositive when the bound holds.
inline double mt_bound_excess(const RadialGrid& g, const std::vector<double>& u, const ModelParams& p,
                              const ProductionLaw& law, double c0, double s0) {
  const double m_t = production_means(g, u, law, p).m_t;
  const auto& s = g.s_faces();
  double integral = 0.0, worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < g.N() && s[j] < s0; ++j) {
    integral += (s[j + 1] - s[j]) * (p.chi * law.f1(u[j]) - p.xi * law.f2(u[j]));
    worst = std::max(worst, m_t - c0 - integral / (2.0 * s[j + 1]));
  }
  return worst;
}

/// Sampled time series of the tracked functionals.
struct FunctionalSeries {
  std::vector<double> lp_exponents;
  std::vector<double> t, mass, linf, phi_p, moment_phi, moment_psi, concavity, concavity_scale, m_t;
  std::vector<std::vector<double>> lp;  // lp[i][sample] for lp_exponents[i]
  std::vector<bool> in_S_phi;
  double energy_p = 1.0;
  double c0 = 0.0;
  double sphi_threshold = 0.0;

  std::size_t size() const { return t.size(); }

  static std::string lp_column(double p) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "lp_%.6g", p);
    return buf;
  }

  /// Stable column order: t, mass, linf, lp_*, phi_p, moment_phi, moment_psi, in_S_phi, extras.
  std::vector<std::string> columns() const {
    std::vector<std::string> c{"t", "mass", "linf"};
    for (double p : lp_exponents) c.push_back(lp_column(p));
    for (const char* k : {"phi_p", "moment_phi", "moment_psi", "in_S_phi", "concavity", "concavity_scale", "m_t"})
      c.push_back(k);
    return c;
  }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> r{t[i], mass[i], linf[i]};
    for (const auto& col : lp) r.push_back(col[i]);
    for (double x : {phi_p[i], moment_phi[i], moment_psi[i], in_S_phi[i] ? 1.0 : 0.0, concavity[i],
                     concavity_scale[i], m_t[i]})
      r.push_back(x);
    return r;
  }
};

/// Observer that appends one row per sampled state.
class FunctionalRecorder {
 public:
  FunctionalRecorder(const ModelParams& p, const ProductionLaw& law, MomentConfig cfg, std::vector<double> lp_exponents,
                     double energy_p, double M)
      : p_(p), law_(law), cfg_(cfg) {
    series_.lp_exponents = std::move(lp_exponents);
    series_.lp.resize(series_.lp_exponents.size());
    series_.energy_p = energy_p;
    series_.sphi_threshold = sphi_threshold(p, cfg, M);
    if (p.alpha > p.beta) series_.c0 = c0_constant(p, law, cfg).c0;
  }

  void operator()(const RadialState& s, const RadialGrid& g) {
    auto& S = series_;
    const auto U = s.mode == Backend::reduced && !s.U.empty() ? s.U : mass_accumulation(g, s.u);
    std::vector<double> Us(s.u.size());
    for (std::size_t j = 0; j < Us.size(); ++j) Us[j] = s.u[j] / g.n();
    S.t.push_back(s.t);
    S.mass.push_back(total_mass(g, s.u));
    S.linf.push_back(s.linf());
    for (std::size_t i = 0; i < S.lp_exponents.size(); ++i) S.lp[i].push_back(lp_norm(g, s.u, S.lp_exponents[i]));
    S.phi_p.push_back(energy_phi_p(g, s.u, S.energy_p));
    const double phi = moment_phi(g, U, cfg_);
    S.moment_phi.push_back(phi);
    S.moment_psi.push_back(moment_psi(g, Us, cfg_, p_.m2 + p_.alpha));
    S.in_S_phi.push_back(in_S_phi(phi, S.sphi_threshold));
    double scale = 0.0;
    S.concavity.push_back(concavity_check_density(g, s.u, &scale));
    S.concavity_scale.push_back(scale);
    S.m_t.push_back(production_means(g, s.u, law_, p_).m_t);
    for (double x : {S.mass.back(), S.phi_p.back(), phi, S.moment_psi.back()})
      if (!std::isfinite(x)) throw ObserverError("non-finite functional at t = " + format_scalar(s.t));
  }

  const FunctionalSeries& series() const { return series_; }
  FunctionalSeries& series() { return series_; }

 private:
  ModelParams p_;
  ProductionLaw law_;
  MomentConfig cfg_;
  FunctionalSeries series_;
};

}  // namespace chemlab
