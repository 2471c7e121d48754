#pragma once

// Radial finite-volume integrator for the attraction-repulsion system with
// nonlocal elliptic signals. Two backends share one discretization:
//  - full:    cell densities u with chemical fields v, w;
//  - reduced: mass accumulation U(s) = int_0^{s^{1/n}} rho^{n-1} u d rho at
//             faces, driven by the combined gradient z_r = chi v_r - xi w_r.
// The reduced update is the partial sum of the full update, so both agree to
// rounding when m2 = m3; the reduced form keeps U monotone by construction.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "chemlab/errors.hpp"
#include "chemlab/grid.hpp"
#include "chemlab/params.hpp"

namespace chemlab {

enum class Backend { full, reduced };
enum class Scheme { semi_implicit, explicit_rk };

inline const char* to_string(Backend b) { return b == Backend::full ? "full" : "reduced"; }
inline const char* to_string(Scheme s) { return s == Scheme::semi_implicit ? "semi_implicit" : "explicit_rk"; }

struct StepperConfig {
  double dt_init = 1e-4;
  double dt_min = 1e-14;
  double dt_max = 1e-2;
  double cfl_safety = 0.5;
  /// Cap on the relative change of max u per step from drift and reaction.
  double growth_limit = 0.05;
  double blowup_threshold = 1e8;
  double t_end = 1.0;
  Scheme scheme = Scheme::semi_implicit;
  Backend backend = Backend::full;
  int max_retries = 60;
  /// Accepted-step budget of run(); exhausting it ends the run as stalled.
  long long max_steps = 20000000;

  void validate(double u0_max) const {
    if (!(dt_min > 0.0 && dt_min <= dt_init && dt_init <= dt_max))
      throw InvalidParameter("time steps must satisfy 0 < dt_min <= dt_init <= dt_max");
    if (!(cfl_safety > 0.0 && cfl_safety < 1.0)) throw InvalidParameter("cfl_safety must lie in (0,1)");
    if (!(growth_limit > 0.0)) throw InvalidParameter("growth_limit must be positive");
    if (!(t_end > 0.0)) throw InvalidParameter("t_end must be positive");
    if (!(blowup_threshold > u0_max)) throw InvalidParameter("blowup_threshold must exceed the initial maximum");
    if (max_steps < 1) throw InvalidParameter("max_steps must be positive");
  }
};

/// Discrete solution at one instant. Gradients live on faces (N+1 entries,
/// zero at both ends); densities and potentials on cells.
struct RadialState {
  double t = 0.0;
  Backend mode = Backend::full;
  std::vector<double> u;       // cells
  std::vector<double> v, w;    // cells, zero quadrature mean
  std::vector<double> vr, wr;  // faces
  std::vector<double> U;       // faces, reduced mode (U[0] = 0)
  std::vector<double> zr;      // faces, reduced mode
  double m1_t = 0.0, m2_t = 0.0;
  double dt_last = 0.0;

  double linf() const {
    double m = 0.0;
    for (double x : u) m = std::max(m, x);
    return m;
  }
};

struct FieldSolution {
  std::vector<double> v, vr, w, wr;
  double m1_t = 0.0, m2_t = 0.0;
  /// |int (f_i(u) - m_i)| relative to int f_i(u); ideally rounding level.
  double residual = 0.0;
};

namespace detail {

/// Face values A_f g_r(f) = sum_{i<f} V_i (m - f(u_i)), divided by A_f.
inline std::vector<double> radial_gradient(const RadialGrid& g, const std::vector<double>& src, double mean,
                                           double* residual) {
  const int N = g.N();
  std::vector<double> out(N + 1, 0.0);
  double acc = 0.0, scale = 0.0;
  for (int i = 0; i < N; ++i) {
    acc += g.weights()[i] * (mean - src[i]);
    scale += g.weights()[i] * std::abs(src[i]);
    if (i + 1 < N) out[i + 1] = acc / g.areas()[i + 1];
  }
  if (residual) *residual = scale > 0.0 ? std::abs(acc) / scale : std::abs(acc);
  return out;
}

/// Potential from its face gradient, normalized to zero quadrature mean.
inline std::vector<double> potential(const RadialGrid& g, const std::vector<double>& gr) {
  const int N = g.N();
  std::vector<double> p(N, 0.0);
  for (int j = 1; j < N; ++j) p[j] = p[j - 1] + gr[j] * g.spacing()[j];
  const double shift = g.mean(p);
  for (double& x : p) x -= shift;
  return p;
}

inline void check_finite(const std::vector<double>& x, const char* what) {
  for (double y : x)
    if (!std::isfinite(y)) throw QuadratureError(std::string("non-finite ") + what);
}

}  // namespace detail

inline FieldSolution elliptic_solve_radial(const RadialGrid& g, const std::vector<double>& u, const ProductionLaw& law) {
  const int N = g.N();
  std::vector<double> f1(N), f2(N);
  for (int j = 0; j < N; ++j) {
    f1[j] = law.f1(u[j]);
    f2[j] = law.f2(u[j]);
  }
  detail::check_finite(f1, "attractant production");
  detail::check_finite(f2, "repellent production");
  FieldSolution s;
  s.m1_t = g.mean(f1);
  s.m2_t = g.mean(f2);
  double r1 = 0.0, r2 = 0.0;
  s.vr = detail::radial_gradient(g, f1, s.m1_t, &r1);
  s.wr = detail::radial_gradient(g, f2, s.m2_t, &r2);
  s.residual = std::max(r1, r2);
  s.v = detail::potential(g, s.vr);
  s.w = detail::potential(g, s.wr);
  return s;
}

/// Means of f1(u), f2(u) over the ball and m(t) = chi m1 - xi m2.
struct ProductionMeans {
  double m1_t, m2_t, m_t;
};

inline ProductionMeans production_means(const RadialGrid& g, const std::vector<double>& u, const ProductionLaw& law,
                                        const ModelParams& p) {
  std::vector<double> f1(u.size()), f2(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    f1[j] = law.f1(u[j]);
    f2[j] = law.f2(u[j]);
  }
  const double a = g.mean(f1), b = g.mean(f2);
  return {a, b, p.chi * a - p.xi * b};
}

/// z_r on faces from U_s = u/n on cells, with f = chi f1 - xi f2.
inline std::vector<double> reduced_gradient(const RadialGrid& g, const std::vector<double>& U_s, const ModelParams& p,
                                            const ProductionLaw& law) {
  if (p.m2 != p.m3) throw ModelError("reduced model needs m2 = m3");
  const int N = g.N();
  std::vector<double> f(N);
  for (int j = 0; j < N; ++j) {
    const double uj = g.n() * U_s[j];
    f[j] = p.chi * law.f1(uj) - p.xi * law.f2(uj);
  }
  detail::check_finite(f, "combined production");
  return detail::radial_gradient(g, f, g.mean(f), nullptr);
}

inline std::vector<double> accumulate_mass(const RadialGrid& g, const std::vector<double>& u) {
  std::vector<double> U(g.N() + 1, 0.0);
  for (int j = 0; j < g.N(); ++j) U[j + 1] = U[j] + g.weights()[j] * u[j];
  return U;
}

inline std::vector<double> density_from_mass(const RadialGrid& g, const std::vector<double>& U) {
  std::vector<double> u(g.N());
  for (int j = 0; j < g.N(); ++j) u[j] = (U[j + 1] - U[j]) / g.weights()[j];
  return u;
}

/// Fills v, w, gradients (and U, z_r in reduced mode) from the densities.
inline void complete_fields(RadialState& s, const RadialGrid& g, const ModelParams& p, const ProductionLaw& law) {
  auto fs = elliptic_solve_radial(g, s.u, law);
  s.v = std::move(fs.v);
  s.w = std::move(fs.w);
  s.vr = std::move(fs.vr);
  s.wr = std::move(fs.wr);
  s.m1_t = fs.m1_t;
  s.m2_t = fs.m2_t;
  if (s.mode == Backend::reduced) {
    s.U = accumulate_mass(g, s.u);
    s.zr.assign(g.N() + 1, 0.0);
    for (int f = 0; f <= g.N(); ++f) s.zr[f] = p.chi * s.vr[f] - p.xi * s.wr[f];
  }
}

inline RadialState initial_state(const RadialGrid& g, std::vector<double> u0, Backend mode, const ModelParams& p,
                                 const ProductionLaw& law) {
  if (static_cast<int>(u0.size()) != g.N()) throw InvalidParameter("initial profile size must match the grid");
  for (double x : u0)
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidParameter("initial density must be finite and nonnegative");
  if (mode == Backend::reduced && p.m2 != p.m3) throw ModelError("reduced model needs m2 = m3");
  RadialState s;
  s.mode = mode;
  s.u = std::move(u0);
  complete_fields(s, g, p, law);
  return s;
}

enum class StepStatus { ok, blowup_declared, completed };

struct StepDiagnostics {
  double min_u = 0.0;
  double clipped_mass = 0.0;
  int rejections = 0;
  bool positive = true;
  /// Compatibility residual of the elliptic solve at the step start.
  double compat_residual = 0.0;
};

struct StepResult {
  RadialState state;
  double dt_used = 0.0;
  StepStatus status = StepStatus::ok;
  StepDiagnostics diagnostics;
};

namespace detail {

/// Operator pieces of one step, evaluated at the current densities.
class Discretization {
 public:
  Discretization(const RadialGrid& g, const ModelParams& p, const ProductionLaw& law) : g_(g), p_(p), law_(law) {}

  /// Face drift coefficients for the current u.
  void prepare(const std::vector<double>& u, Backend mode, double* residual) {
    const int N = g_.N();
    auto fs = elliptic_solve_radial(g_, u, law_);
    if (residual) *residual = fs.residual;
    c1_.assign(N + 1, 0.0);
    c2_.assign(N + 1, 0.0);
    if (mode == Backend::reduced) {
      for (int f = 0; f <= N; ++f) c1_[f] = p_.chi * fs.vr[f] - p_.xi * fs.wr[f];
      e1_ = e2_ = p_.m2 - 1.0;
    } else {
      for (int f = 0; f <= N; ++f) {
        c1_[f] = p_.chi * fs.vr[f];
        c2_[f] = p_.xi * fs.wr[f];
      }
      e1_ = p_.m2 - 1.0;
      e2_ = p_.m3 - 1.0;
    }
    // Face diffusivities, arithmetic mean of (u+1)^{m1-1}.
    diff_.assign(N + 1, 0.0);
    for (int f = 1; f < N; ++f) {
      const double dl = std::pow(u[f - 1] + 1.0, p_.m1 - 1.0), dr = std::pow(u[f] + 1.0, p_.m1 - 1.0);
      diff_[f] = g_.areas()[f] * 0.5 * (dl + dr) / g_.spacing()[f];
    }
  }

  /// Outward drift velocity at face f carried by density s.
  double velocity(int f, double s) const {
    double a = c1_[f] == 0.0 ? 0.0 : std::pow(s + 1.0, e1_) * c1_[f];
    if (c2_[f] != 0.0) a -= std::pow(s + 1.0, e2_) * c2_[f];
    return a;
  }

  /// Upwind drift fluxes times face area; zero at the origin and at R.
  std::vector<double> drift_flux(const std::vector<double>& u) const {
    const int N = g_.N();
    std::vector<double> F(N + 1, 0.0);
    for (int f = 1; f < N; ++f) {
      const double aL = velocity(f, u[f - 1]), aR = velocity(f, u[f]);
      F[f] = g_.areas()[f] * (u[f - 1] * std::max(aL, 0.0) + u[f] * std::min(aR, 0.0));
    }
    return F;
  }

  double reaction(double s) const { return p_.lambda * s - p_.mu * std::pow(s, p_.k); }

  /// Drift + reaction tendency per cell; optionally adds explicit diffusion.
  std::vector<double> tendency(const std::vector<double>& u, bool with_diffusion) const {
    const int N = g_.N();
    auto F = drift_flux(u);
    std::vector<double> r(N);
    for (int j = 0; j < N; ++j) {
      double flux = F[j] - F[j + 1];
      if (with_diffusion) {
        if (j + 1 < N) flux += diff_[j + 1] * (u[j + 1] - u[j]);
        if (j > 0) flux -= diff_[j] * (u[j] - u[j - 1]);
      }
      r[j] = flux / g_.weights()[j] + reaction(u[j]);
    }
    return r;
  }

  /// Largest stable step for the explicit parts (before the safety factor).
  struct Limits {
    double advective, reactive, growth, diffusive;
  };

  Limits limits(const std::vector<double>& u, double growth_limit) const {
    const int N = g_.N();
    const double inf = std::numeric_limits<double>::infinity();
    Limits L{inf, inf, inf, inf};
    double umax = 0.0;
    for (double x : u) umax = std::max(umax, x);
    for (int j = 0; j < N; ++j) {
      double out = 0.0;
      if (j + 1 < N) out += g_.areas()[j + 1] * std::max(velocity(j + 1, u[j]), 0.0);
      if (j > 0) out += g_.areas()[j] * std::max(-velocity(j, u[j]), 0.0);
      if (out > 0.0) L.advective = std::min(L.advective, g_.weights()[j] / out);
      double d = (j + 1 < N ? diff_[j + 1] : 0.0) + (j > 0 ? diff_[j] : 0.0);
      if (d > 0.0) L.diffusive = std::min(L.diffusive, g_.weights()[j] / d);
    }
    const double rate = p_.lambda + p_.k * p_.mu * std::pow(umax, p_.k - 1.0);
    if (rate > 0.0) L.reactive = 1.0 / rate;
    auto tend = tendency(u, false);
    double change = 0.0;
    for (double x : tend) change = std::max(change, std::abs(x));
    if (change > 0.0 && umax > 0.0) L.growth = growth_limit * umax / change;
    return L;
  }

  /// Solves (V_j + c_j + c_{j+1}) x_j - c_j x_{j-1} - c_{j+1} x_{j+1} = V_j b_j.
  std::vector<double> implicit_diffusion(const std::vector<double>& b, double dt) const {
    const int N = g_.N();
    std::vector<double> lo(N, 0.0), di(N), up(N, 0.0), rhs(N);
    for (int j = 0; j < N; ++j) {
      const double cl = j > 0 ? dt * diff_[j] : 0.0, cr = j + 1 < N ? dt * diff_[j + 1] : 0.0;
      const double V = g_.weights()[j];
      lo[j] = -cl;
      up[j] = -cr;
      di[j] = V + cl + cr;
      rhs[j] = V * b[j];
    }
    return thomas(lo, di, up, rhs);
  }

  /// Same diffusion step written for the accumulated mass at faces 1..N-1.
  std::vector<double> implicit_diffusion_mass(const std::vector<double>& Ustar, double dt) const {
    const int N = g_.N();
    const auto& V = g_.weights();
    const int M = N - 1;
    std::vector<double> lo(M, 0.0), di(M), up(M, 0.0), rhs(M);
    for (int f = 1; f < N; ++f) {
      const double c = dt * diff_[f];
      const int i = f - 1;
      lo[i] = -c / V[f - 1];
      up[i] = -c / V[f];
      di[i] = 1.0 + c / V[f] + c / V[f - 1];
      rhs[i] = Ustar[f];
    }
    rhs[M - 1] -= up[M - 1] * Ustar[N];  // U_N is unaffected by diffusion
    up[M - 1] = 0.0;
    auto x = thomas(lo, di, up, rhs);
    std::vector<double> U(N + 1);
    U[0] = 0.0;
    for (int f = 1; f < N; ++f) U[f] = x[f - 1];
    U[N] = Ustar[N];
    return U;
  }

  static std::vector<double> thomas(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                                    std::vector<double> d) {
    const std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
      const double m = a[i] / b[i - 1];
      b[i] -= m * c[i - 1];
      d[i] -= m * d[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
    return x;
  }

 private:
  const RadialGrid& g_;
  const ModelParams& p_;
  const ProductionLaw& law_;
  std::vector<double> c1_, c2_, diff_;
  double e1_ = 0.0, e2_ = 0.0;
};

}  // namespace detail

/// One accepted time step. Undershoots below -pos_tol halve dt and retry;
/// DtUnderflow is thrown once dt would drop below dt_min.
inline StepResult advance(const RadialState& state, const RadialGrid& g, const ModelParams& p,
                          const ProductionLaw& law, const StepperConfig& cfg) {
  if (static_cast<int>(state.u.size()) != g.N()) throw InvalidParameter("state does not match grid");
  detail::Discretization op(g, p, law);
  StepResult res;
  op.prepare(state.u, state.mode, &res.diagnostics.compat_residual);

  const double umax = state.linf();
  const bool explicit_scheme = cfg.scheme == Scheme::explicit_rk;
  const auto lim = op.limits(state.u, cfg.growth_limit);
  double dt = cfg.cfl_safety * std::min({lim.advective, lim.reactive, explicit_scheme ? 0.5 * lim.diffusive : lim.reactive});
  dt = std::min({dt, lim.growth, cfg.dt_max});
  dt = std::min(dt, state.dt_last > 0.0 ? 2.0 * state.dt_last : cfg.dt_init);
  dt = std::min(dt, cfg.t_end - state.t);
  if (!(dt > 0.0)) throw InvalidParameter("no time left to integrate");

  const double pos_tol = 1e-12 * std::max(umax, std::numeric_limits<double>::min());
  const int N = g.N();
  for (int attempt = 0;; ++attempt) {
    if (dt < cfg.dt_min && dt < cfg.t_end - state.t)
      throw DtUnderflow("time step " + format_scalar(dt) + " fell below dt_min at t = " + format_scalar(state.t));
    if (attempt > cfg.max_retries) throw StepRejected("step rejected " + std::to_string(attempt) + " times");

    std::vector<double> u_new;
    std::vector<double> U_new;
    if (explicit_scheme) {
      // Heun's SSP-RK2 with explicit diffusion; coefficients frozen at t_n.
      auto k1 = op.tendency(state.u, true);
      std::vector<double> u1(N);
      for (int j = 0; j < N; ++j) u1[j] = state.u[j] + dt * k1[j];
      auto k2 = op.tendency(u1, true);
      u_new.resize(N);
      for (int j = 0; j < N; ++j) u_new[j] = 0.5 * state.u[j] + 0.5 * (u1[j] + dt * k2[j]);
    } else if (state.mode == Backend::full) {
      auto tend = op.tendency(state.u, false);
      std::vector<double> ustar(N);
      for (int j = 0; j < N; ++j) ustar[j] = state.u[j] + dt * tend[j];
      u_new = op.implicit_diffusion(ustar, dt);
    } else {
      const auto& U = state.U;
      auto F = op.drift_flux(state.u);
      std::vector<double> Ustar(N + 1, 0.0);
      double K = 0.0;
      for (int f = 1; f <= N; ++f) {
        K += g.weights()[f - 1] * std::pow(state.u[f - 1], p.k);
        Ustar[f] = U[f] + dt * (-F[f] + p.lambda * U[f] - p.mu * K);
      }
      U_new = op.implicit_diffusion_mass(Ustar, dt);
      u_new = density_from_mass(g, U_new);
    }

    double mn = std::numeric_limits<double>::infinity();
    bool finite = true;
    for (double x : u_new) {
      mn = std::min(mn, x);
      finite = finite && std::isfinite(x);
    }
    if (!finite || mn < -pos_tol) {
      ++res.diagnostics.rejections;
      dt *= 0.5;
      continue;
    }
    double clipped = 0.0;
    for (int j = 0; j < N; ++j)
      if (u_new[j] < 0.0) {
        clipped += -u_new[j] * g.weights()[j];
        u_new[j] = 0.0;
      }
    res.state.mode = state.mode;
    res.state.t = state.t + dt;
    res.state.dt_last = dt;
    res.state.u = std::move(u_new);
    if (state.mode == Backend::reduced) res.state.U = clipped > 0.0 ? accumulate_mass(g, res.state.u) : std::move(U_new);
    if (state.mode == Backend::reduced && res.state.U.empty()) res.state.U = accumulate_mass(g, res.state.u);
    res.dt_used = dt;
    res.diagnostics.min_u = mn;
    res.diagnostics.clipped_mass = g.omega() * clipped;
    res.diagnostics.positive = mn >= 0.0;
    if (res.state.linf() > cfg.blowup_threshold) res.status = StepStatus::blowup_declared;
    else if (res.state.t >= cfg.t_end) res.status = StepStatus::completed;
    return res;
  }
}

enum class RunStatus { completed, blowup_declared, stalled };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::blowup_declared: return "blowup_declared";
    case RunStatus::stalled: return "stalled";
  }
  return "?";
}

using Observer = std::function<void(const RadialState&, const RadialGrid&)>;

struct NamedObserver {
  std::string name;
  Observer fn;
};

struct RunOptions {
  /// Sample after every `sample_every` accepted steps ...
  int sample_every = 1;
  /// ... and whenever at least `sample_dt` has elapsed since the last sample (0 disables).
  double sample_dt = 0.0;
  bool keep_states = false;
};

struct Trajectory {
  RunStatus status = RunStatus::completed;
  double t_final = 0.0;
  std::optional<double> t_blowup;
  std::vector<double> t_steps, linf_steps;  // every accepted step, including t = 0
  std::vector<double> sample_times;
  std::vector<RadialState> states;  // only when keep_states
  RadialState final_state;
  std::size_t steps = 0, rejections = 0, clip_events = 0;
  double clipped_mass = 0.0;
  double max_compat_residual = 0.0;
  std::string stop_reason;
  std::vector<std::string> observer_errors;
};

/// Integrates from u0 (cell values) until t_end, threshold crossing or a
/// time-step collapse. Observers see fully populated states at sample times.
/// An observer that throws is disabled and its message recorded.
inline Trajectory run(const std::vector<double>& u0, const RadialGrid& g, const ModelParams& p,
                      const ProductionLaw& law, const StepperConfig& cfg, std::vector<NamedObserver> observers = {},
                      const RunOptions& opt = {}, std::optional<RadialState> restart = std::nullopt) {
  RadialState st = restart ? std::move(*restart) : initial_state(g, u0, cfg.backend, p, law);
  cfg.validate(st.linf());
  if (st.mode == Backend::reduced && st.U.empty()) st.U = accumulate_mass(g, st.u);

  Trajectory tr;
  std::vector<bool> alive(observers.size(), true);
  double last_sample = -std::numeric_limits<double>::infinity();
  auto sample = [&](RadialState& s) {
    complete_fields(s, g, p, law);
    for (std::size_t i = 0; i < observers.size(); ++i) {
      if (!alive[i]) continue;
      try {
        observers[i].fn(s, g);
      } catch (const std::exception& e) {
        alive[i] = false;
        tr.observer_errors.push_back(observers[i].name + ": " + e.what());
      }
    }
    tr.sample_times.push_back(s.t);
    if (opt.keep_states) tr.states.push_back(s);
    last_sample = s.t;
  };

  tr.t_steps.push_back(st.t);
  tr.linf_steps.push_back(st.linf());
  sample(st);
  std::deque<double> recent{st.linf()};

  for (;;) {
    StepResult r;
    try {
      r = advance(st, g, p, law, cfg);
    } catch (const DtUnderflow& e) {
      const double grown = recent.back() / std::max(recent.front(), std::numeric_limits<double>::min());
      tr.status = grown >= 10.0 ? RunStatus::blowup_declared : RunStatus::stalled;
      if (tr.status == RunStatus::blowup_declared) tr.t_blowup = st.t;
      tr.stop_reason = e.what();
      break;
    }
    ++tr.steps;
    tr.rejections += r.diagnostics.rejections;
    tr.max_compat_residual = std::max(tr.max_compat_residual, r.diagnostics.compat_residual);
    if (r.diagnostics.clipped_mass > 0.0) {
      ++tr.clip_events;
      tr.clipped_mass += r.diagnostics.clipped_mass;
    }
    st = std::move(r.state);
    tr.t_steps.push_back(st.t);
    tr.linf_steps.push_back(st.linf());
    recent.push_back(st.linf());
    if (recent.size() > 11) recent.pop_front();

    const bool due = (opt.sample_every > 0 && tr.steps % opt.sample_every == 0) ||
                     (opt.sample_dt > 0.0 && st.t - last_sample >= opt.sample_dt);
    if (r.status != StepStatus::ok || due) sample(st);
    if (r.status == StepStatus::blowup_declared) {
      tr.status = RunStatus::blowup_declared;
      tr.t_blowup = st.t;
      tr.stop_reason = "max u exceeded the blow-up threshold";
      break;
    }
    if (r.status == StepStatus::completed) {
      tr.status = RunStatus::completed;
      tr.stop_reason = "reached t_end";
      break;
    }
    if (static_cast<long long>(tr.steps) >= cfg.max_steps) {
      if (!due) sample(st);
      tr.status = RunStatus::stalled;
      tr.stop_reason = "step budget of " + std::to_string(cfg.max_steps) + " exhausted";
      break;
    }
  }
  tr.t_final = st.t;
  complete_fields(st, g, p, law);
  tr.final_state = std::move(st);
  return tr;
}

struct TmaxEstimate {
  double T_est = 0.0;
  double kappa = 0.0;
  double residual = 0.0;  // rms of log-residuals over the tail
  std::size_t tail_size = 0;
};

/// Fits max u ~ c (T - t)^{-kappa} to the last decade of growth.
inline TmaxEstimate extrapolate_Tmax(const std::vector<double>& t, const std::vector<double>& y,
                                     double max_residual = 0.05) {
  if (t.size() != y.size() || t.size() < 8) throw FitError("need at least 8 samples");
  const double last = y.back();
  if (!(last > 0.0)) throw FitError("series must be positive");
  std::size_t start = y.size() - 1;
  while (start > 0 && y[start - 1] >= last / 10.0) --start;
  if (start == 0 && y.front() > last / 10.0) throw FitError("series never grows by a decade; no blow-up signature");
  const std::size_t m = y.size() - start;
  if (m < 8) throw FitError("fewer than 8 samples in the last decade of growth");
  for (std::size_t i = start + 1; i < y.size(); ++i)
    if (!(y[i] > y[i - 1]) || !(t[i] > t[i - 1])) throw FitError("growth is not strictly monotone over the tail");

  const double tl = t.back(), span = tl - t[start];
  // For fixed T the fit of log y = log c - kappa log(T - t) is linear.
  auto fit = [&](double T, double* kappa, double* logc) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = start; i < y.size(); ++i) {
      const double x = -std::log(T - t[i]), z = std::log(y[i]);
      sx += x;
      sy += z;
      sxx += x * x;
      sxy += x * z;
    }
    const double n = double(m), det = n * sxx - sx * sx;
    const double k = det != 0.0 ? (n * sxy - sx * sy) / det : 0.0;
    const double b = (sy - k * sx) / n;
    double ss = 0;
    for (std::size_t i = start; i < y.size(); ++i) {
      const double r = std::log(y[i]) - b + k * std::log(T - t[i]);
      ss += r * r;
    }
    if (kappa) *kappa = k;
    if (logc) *logc = b;
    return std::sqrt(ss / n);
  };
  auto objective = [&](double x) { return fit(tl + std::exp(x), nullptr, nullptr); };

  // Coarse scan for a bracket, then Brent.
  const double lo = std::log(span * 1e-9), hi = std::log(span * 1e3);
  const int K = 240;
  int best = 0;
  double bestv = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= K; ++i) {
    const double v = objective(lo + (hi - lo) * i / K);
    if (v < bestv) {
      bestv = v;
      best = i;
    }
  }
  const double a = lo + (hi - lo) * std::max(best - 1, 0) / K, b = lo + (hi - lo) * std::min(best + 1, K) / K;
  auto [xbest, fbest] = boost::math::tools::brent_find_minima(objective, a, b, 52);
  TmaxEstimate est;
  est.T_est = tl + std::exp(xbest);
  est.residual = fit(est.T_est, &est.kappa, nullptr);
  est.tail_size = m;
  (void)fbest;
  if (!(est.kappa > 0.0)) throw FitError("fitted exponent is not positive");
  if (est.residual > max_residual)
    throw FitError("tail fit residual " + format_scalar(est.residual) + " exceeds " + format_scalar(max_residual));
  return est;
}

}  // namespace chemlab
