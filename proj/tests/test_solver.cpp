#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "chemlab/solver.hpp"

using namespace chemlab;

namespace {

ModelParams linear_production() {
  ModelParams p;
  p.n = 2;
  p.R = 1.0;
  p.alpha = p.beta = 1.0;
  p.k2 = p.k3 = 1.0;
  return p;
}

std::vector<double> gaussian(const RadialGrid& g, double height, double width) {
  return g.cell_averages([&](double r) { return height * std::exp(-r * r / (width * width)); });
}

double weighted_mass(const RadialGrid& g, const std::vector<double>& u) {
  double m = 0.0;
  for (int j = 0; j < g.N(); ++j) m += g.weights()[j] * u[j];
  return m;
}

}  // namespace

TEST(Grid, GradedFacesAndWeights) {
  RadialGrid g(3, 2.0, 10, 3.0);
  EXPECT_DOUBLE_EQ(g.faces()[5], 2.0 * 0.125);
  EXPECT_DOUBLE_EQ(g.faces().back(), 2.0);
  const double total = std::accumulate(g.weights().begin(), g.weights().end(), 0.0);
  EXPECT_NEAR(total, 8.0 / 3.0, 1e-14);
  EXPECT_NEAR(g.integrate(std::vector<double>(10, 1.0)), 4.0 / 3.0 * std::numbers::pi * 8.0, 1e-12);
  EXPECT_THROW(RadialGrid(2, 1.0, 10, 0.5), InvalidParameter);
  EXPECT_THROW(RadialGrid(2, -1.0, 10), InvalidParameter);
}

TEST(Elliptic, RadialGradientMatchesClosedForm) {
  // n = 2, u = r^2, f1(u) = u + 1 on the unit disc: mean 3/2 and
  // (1/r)(r v_r)' = 1/2 - r^2, so v_r = (r - r^3)/4.
  const auto p = linear_production();
  const auto law = ProductionLaw::power_law(p);
  for (double q : {1.0, 2.0}) {
    RadialGrid g(2, 1.0, 200, q);
    const auto u = g.cell_averages([](double r) { return r * r; });
    const auto fs = elliptic_solve_radial(g, u, law);
    EXPECT_NEAR(fs.m1_t, 1.5, 1e-13);
    for (int f = 1; f < g.N(); ++f) {
      const double r = g.faces()[f];
      EXPECT_NEAR(fs.vr[f], 0.25 * (r - r * r * r), 1e-13) << "face " << f;
    }
    EXPECT_EQ(fs.vr.front(), 0.0);
    EXPECT_EQ(fs.vr.back(), 0.0);
    EXPECT_LT(fs.residual, 1e-14);
    EXPECT_NEAR(g.mean(fs.v), 0.0, 1e-15);
  }
}

TEST(Elliptic, PotentialConvergesAtSecondOrder) {
  // v = r^2/8 - r^4/16 up to a constant fixed by zero mean.
  const auto p = linear_production();
  const auto law = ProductionLaw::power_law(p);
  auto error = [&](int N) {
    RadialGrid g(2, 1.0, N);
    const auto u = g.cell_averages([](double r) { return r * r; });
    const auto fs = elliptic_solve_radial(g, u, law);
    std::vector<double> exact(N);
    for (int j = 0; j < N; ++j) {
      const double r = g.centers()[j];
      exact[j] = r * r / 8.0 - std::pow(r, 4) / 16.0;
    }
    const double shift = g.mean(exact);
    double e = 0.0;
    for (int j = 0; j < N; ++j) e = std::max(e, std::abs(fs.v[j] - (exact[j] - shift)));
    return e;
  };
  const double e1 = error(100), e2 = error(200);
  EXPECT_GT(std::log2(e1 / e2), 1.8);
}

TEST(Elliptic, MassRoundTrip) {
  RadialGrid g(3, 1.5, 64, 2.0);
  const auto u = gaussian(g, 4.0, 0.3);
  const auto U = accumulate_mass(g, u);
  EXPECT_EQ(U.front(), 0.0);
  EXPECT_NEAR(U.back(), weighted_mass(g, u), 1e-14);
  const auto back = density_from_mass(g, U);
  for (int j = 0; j < g.N(); ++j) EXPECT_NEAR(back[j], u[j], 1e-12 * (1.0 + u[j]));
}

TEST(Solver, StepConservesMassUpToReaction) {
  ModelParams p;
  p.n = 2;
  p.R = 1.0;
  p.m1 = 1.0;
  p.chi = 2.0;
  p.xi = 1.0;
  p.lambda = 0.3;
  p.mu = 0.2;
  p.k = 1.5;
  p.alpha = 1.2;
  p.beta = 0.5;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 128, 1.5);
  const auto u0 = gaussian(g, 5.0, 0.2);
  StepperConfig cfg;
  cfg.dt_init = 1e-5;
  cfg.t_end = 1.0;
  for (Backend b : {Backend::full, Backend::reduced}) {
    if (b == Backend::reduced) p.m3 = p.m2;
    cfg.backend = b;
    const auto st = initial_state(g, u0, b, p, law);
    const auto r = advance(st, g, p, law, cfg);
    double expected = weighted_mass(g, u0);
    for (int j = 0; j < g.N(); ++j) expected += r.dt_used * g.weights()[j] * (p.lambda * u0[j] - p.mu * std::pow(u0[j], p.k));
    EXPECT_NEAR(weighted_mass(g, r.state.u), expected, 1e-12 * expected) << to_string(b);
    EXPECT_TRUE(r.diagnostics.positive);
  }
}

TEST(Solver, ReducedAgreesWithFullWhenSensitivitiesMatch) {
  ModelParams p;
  p.n = 2;
  p.R = 1.0;
  p.m1 = 0.8;
  p.m2 = p.m3 = 1.0;
  p.chi = 3.0;
  p.xi = 1.0;
  p.alpha = 1.2;
  p.beta = 0.5;
  p.lambda = p.mu = 0.1;
  p.k = 1.1;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 160, 2.0);
  const auto u0 = gaussian(g, 20.0, 0.25);
  StepperConfig cfg;
  cfg.dt_init = 1e-6;
  cfg.t_end = 2e-3;
  cfg.blowup_threshold = 1e9;
  cfg.backend = Backend::full;
  const auto full = run(u0, g, p, law, cfg, {}, {.sample_every = 0});
  cfg.backend = Backend::reduced;
  const auto red = run(u0, g, p, law, cfg, {}, {.sample_every = 0});
  ASSERT_EQ(full.status, RunStatus::completed);
  ASSERT_EQ(red.status, RunStatus::completed);
  EXPECT_EQ(full.steps, red.steps);
  const double scale = full.final_state.linf();
  for (int j = 0; j < g.N(); ++j)
    EXPECT_NEAR(red.final_state.u[j], full.final_state.u[j], 1e-9 * scale) << "cell " << j;
}

TEST(Solver, LogisticReactionConvergesAtFirstOrderInTime) {
  // chi = xi = 0 and constant data: pure logistic ODE u' = u - u^2/2.
  ModelParams p;
  p.chi = p.xi = 0.0;
  p.lambda = 1.0;
  p.mu = 0.5;
  p.k = 2.0;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 16);
  const double c = 0.25, T = 1.0;
  const double exact = 2.0 / (1.0 + (2.0 / c - 1.0) * std::exp(-T));
  auto error = [&](double dt) {
    StepperConfig cfg;
    cfg.dt_init = cfg.dt_max = dt;
    cfg.t_end = T;
    cfg.blowup_threshold = 10.0;
    const auto tr = run(std::vector<double>(16, c), g, p, law, cfg, {}, {.sample_every = 0});
    EXPECT_EQ(tr.status, RunStatus::completed);
    double e = 0.0;
    for (double x : tr.final_state.u) e = std::max(e, std::abs(x - exact));
    return e;
  };
  const double e1 = error(4e-3), e2 = error(2e-3);
  EXPECT_LT(e1, 5e-3);
  EXPECT_NEAR(e1 / e2, 2.0, 0.1);
}

TEST(Solver, LogisticFixedPointIsReached) {
  ModelParams p;
  p.chi = p.xi = 0.0;
  p.lambda = 1.0;
  p.mu = 0.5;
  p.k = 2.0;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 64);
  StepperConfig cfg;
  cfg.dt_init = 1e-3;
  cfg.dt_max = 0.05;
  cfg.t_end = 40.0;
  cfg.blowup_threshold = 100.0;
  const auto u0 = g.cell_averages([](double r) { return 0.5 + 0.4 * std::cos(3.0 * r); });
  const auto tr = run(u0, g, p, law, cfg, {}, {.sample_every = 0});
  ASSERT_EQ(tr.status, RunStatus::completed);
  for (double x : tr.final_state.u) EXPECT_NEAR(x, 2.0, 1e-9);
}

TEST(Solver, SemiImplicitAndExplicitSchemesAgree) {
  ModelParams p;
  p.chi = 1.0;
  p.xi = 0.5;
  p.lambda = p.mu = 0.1;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 48);
  const auto u0 = gaussian(g, 2.0, 0.4);
  StepperConfig cfg;
  cfg.dt_init = 1e-6;
  cfg.dt_max = 2e-5;
  cfg.t_end = 5e-3;
  const auto a = run(u0, g, p, law, cfg, {}, {.sample_every = 0});
  cfg.scheme = Scheme::explicit_rk;
  const auto b = run(u0, g, p, law, cfg, {}, {.sample_every = 0});
  for (int j = 0; j < g.N(); ++j) EXPECT_NEAR(a.final_state.u[j], b.final_state.u[j], 2e-3);
}

TEST(Solver, ThresholdCrossingIsDeclared) {
  ModelParams p;
  p.chi = p.xi = 0.0;
  p.lambda = 2.0;
  p.mu = 1e-3;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(1, 1.0, 8);
  StepperConfig cfg;
  cfg.dt_init = 1e-3;
  cfg.blowup_threshold = 1.5;
  cfg.t_end = 10.0;
  const auto tr = run(std::vector<double>(8, 1.0), g, p, law, cfg);
  EXPECT_EQ(tr.status, RunStatus::blowup_declared);
  ASSERT_TRUE(tr.t_blowup.has_value());
  EXPECT_GT(tr.final_state.linf(), 1.5);
  // ln 1.5 / 2 is the crossing time of u' = 2u; the cubic correction is tiny.
  EXPECT_NEAR(*tr.t_blowup, std::log(1.5) / 2.0, 5e-3);
  EXPECT_EQ(tr.t_steps.size(), tr.linf_steps.size());
  EXPECT_EQ(tr.t_steps.size(), tr.steps + 1);
}

TEST(Solver, StepBudgetEndsRunAsStalled) {
  ModelParams p;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 16);
  StepperConfig cfg;
  cfg.dt_init = cfg.dt_max = 1e-4;
  cfg.max_steps = 25;
  const auto tr = run(std::vector<double>(16, 0.5), g, p, law, cfg, {}, {.sample_every = 10});
  EXPECT_EQ(tr.status, RunStatus::stalled);
  EXPECT_EQ(tr.steps, 25u);
  EXPECT_DOUBLE_EQ(tr.sample_times.back(), tr.t_final);
}

TEST(Solver, FailingObserverIsIsolated) {
  ModelParams p;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 16);
  StepperConfig cfg;
  cfg.dt_init = cfg.dt_max = 1e-3;
  cfg.t_end = 0.02;
  int calls_bad = 0, calls_good = 0;
  std::vector<NamedObserver> obs{
      {"flaky", [&](const RadialState&, const RadialGrid&) {
         if (++calls_bad == 3) throw ObserverError("third sample refused");
       }},
      {"steady", [&](const RadialState& s, const RadialGrid&) {
         ++calls_good;
         EXPECT_EQ(s.v.size(), 16u);
       }}};
  const auto tr = run(gaussian(g, 1.0, 0.5), g, p, law, cfg, obs);
  EXPECT_EQ(tr.status, RunStatus::completed);
  EXPECT_EQ(calls_bad, 3);
  EXPECT_EQ(calls_good, static_cast<int>(tr.sample_times.size()));
  ASSERT_EQ(tr.observer_errors.size(), 1u);
  EXPECT_NE(tr.observer_errors[0].find("flaky"), std::string::npos);
}

TEST(Solver, SampleEveryAndSampleDt) {
  ModelParams p;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 16);
  StepperConfig cfg;
  cfg.dt_init = cfg.dt_max = 1e-3;
  cfg.t_end = 0.1;
  const auto a = run(std::vector<double>(16, 0.5), g, p, law, cfg, {}, {.sample_every = 10, .keep_states = true});
  EXPECT_EQ(a.states.size(), a.sample_times.size());
  EXPECT_LE(a.sample_times.size(), a.steps / 10 + 2);
  const auto b = run(std::vector<double>(16, 0.5), g, p, law, cfg, {}, {.sample_every = 0, .sample_dt = 0.02});
  EXPECT_GE(b.sample_times.size(), 5u);
  EXPECT_LE(b.sample_times.size(), 7u);
}

TEST(Solver, RestartContinuesTrajectory) {
  ModelParams p;
  p.chi = 2.0;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 32);
  StepperConfig cfg;
  cfg.dt_init = cfg.dt_max = 1e-4;
  cfg.t_end = 0.01;
  const auto u0 = gaussian(g, 3.0, 0.3);
  const auto whole = run(u0, g, p, law, cfg, {}, {.sample_every = 0});
  cfg.t_end = 0.005;
  const auto first = run(u0, g, p, law, cfg, {}, {.sample_every = 0});
  cfg.t_end = 0.01;
  const auto second = run({}, g, p, law, cfg, {}, {.sample_every = 0}, first.final_state);
  EXPECT_NEAR(second.t_final, 0.01, 1e-15);
  for (int j = 0; j < g.N(); ++j) EXPECT_NEAR(second.final_state.u[j], whole.final_state.u[j], 1e-10);
}

TEST(Solver, InputValidation) {
  ModelParams p;
  const auto law = ProductionLaw::power_law(p);
  RadialGrid g(2, 1.0, 16);
  StepperConfig cfg;
  EXPECT_THROW(run(std::vector<double>(15, 1.0), g, p, law, cfg), InvalidParameter);
  auto bad = std::vector<double>(16, 1.0);
  bad[3] = -1.0;
  EXPECT_THROW(run(bad, g, p, law, cfg), InvalidParameter);
  cfg.blowup_threshold = 0.5;
  EXPECT_THROW(run(std::vector<double>(16, 1.0), g, p, law, cfg), InvalidParameter);
  cfg = {};
  cfg.backend = Backend::reduced;
  p.m3 = 2.0;
  EXPECT_THROW(run(std::vector<double>(16, 1.0), g, p, law, cfg), ModelError);
  ModelParams q;
  q.k = 1.0;
  EXPECT_THROW(validate_params(q), InvalidParameter);
  q = {};
  q.chi = 0.0;
  EXPECT_THROW(validate_params(q), InvalidParameter);
  EXPECT_NO_THROW(validate_params(q, true));
}

TEST(Extrapolation, RecoversSyntheticBlowupTime) {
  const double T = 0.37, kappa = 0.8;
  std::vector<double> t, y;
  for (int i = 0; i < 200; ++i) {
    const double ti = T - 0.1 * std::pow(0.95, i);
    t.push_back(ti);
    y.push_back(2.5 * std::pow(T - ti, -kappa));
  }
  const auto est = extrapolate_Tmax(t, y);
  EXPECT_NEAR(est.T_est, T, 1e-9);
  EXPECT_NEAR(est.kappa, kappa, 1e-6);
  EXPECT_LT(est.residual, 1e-8);
}

TEST(Extrapolation, RejectsSeriesWithoutGrowth) {
  std::vector<double> t(20), y(20);
  for (int i = 0; i < 20; ++i) {
    t[i] = i;
    y[i] = 1.0 + 0.01 * i;
  }
  EXPECT_THROW(extrapolate_Tmax(t, y), FitError);
  EXPECT_THROW(extrapolate_Tmax({0, 1}, {1, 2}), FitError);
}
