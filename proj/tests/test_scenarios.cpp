#include <cmath>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "chemlab/scenarios.hpp"

using namespace chemlab;

namespace {

ModelParams attraction_dominated() {
  ModelParams p;
  p.n = 2;
  p.m1 = p.m2 = p.m3 = 1.0;
  p.alpha = 1.2;
  p.beta = 0.5;
  p.k = 1.1;
  p.chi = 5.0;
  p.xi = 1.0;
  p.lambda = p.mu = 0.1;
  p.R = 1.2;
  return p;
}

}  // namespace

TEST(Scenario, CriticalMassEqualsVolumeWhenRatesMatch) {
  // lambda = mu makes C = |Omega| for every k.
  auto p = attraction_dominated();
  EXPECT_NEAR(critical_mass(p), std::numbers::pi * 1.44, 1e-12);
  p.lambda = 0.4;
  p.k = 2.0;
  EXPECT_NEAR(critical_mass(p), 4.0 * std::numbers::pi * 1.44, 1e-12);
}

TEST(Scenario, MomentExponentInterval) {
  const auto p = attraction_dominated();
  const auto I = moment_gamma_interval(p);
  // Lower bounds 2 - 2.2/1.2, 2 - 2.2/1.1 and 2 - 2.2; the first binds.
  EXPECT_NEAR(I.lo, 1.0 / 6.0, 1e-15);
  EXPECT_EQ(I.hi, 1.0);
  EXPECT_NEAR(I.midpoint(), 7.0 / 12.0, 1e-15);
  auto q = p;
  q.m1 = -0.5;
  q.n = 3;
  const auto J = moment_gamma_interval(q);
  EXPECT_NEAR(J.hi, 2.0 - 2.0 / 3.0 > 1.0 ? 1.0 : 2.0 - 2.0 / 3.0, 1e-15);
  q = p;
  q.alpha = 0.1;
  q.m2 = 0.5;
  EXPECT_THROW(moment_gamma_interval(q), RegimeError);
}

TEST(Scenario, S0SelectionTakesTheSmallestCap) {
  const auto p = attraction_dominated();
  const double M = 2.0 * critical_mass(p);
  const auto c = select_s0(p, M, 7.0 / 12.0);
  EXPECT_NEAR(c.s0, 0.24, 1e-15);
  EXPECT_EQ(c.binding, "R^n/6");
  EXPECT_GT(c.root, c.s0);
  const auto tiny = select_s0(p, M, 7.0 / 12.0, 1e-9);
  EXPECT_EQ(tiny.binding, "smallness root");
  EXPECT_LT(tiny.s0, 0.24);
  const auto small_mass = select_s0(p, 0.2, 7.0 / 12.0, 1e4);
  EXPECT_EQ(small_mass.binding, "M/2");
}

TEST(Scenario, ConcentrationConditionHoldsAgainstQuadrature) {
  const double M0 = 9.0, s0 = 0.24, gm = 7.0 / 12.0, omega = 2.0 * std::numbers::pi;
  const auto c = select_eps_sstar(M0, s0, gm, omega);
  boost::math::quadrature::tanh_sinh<double> ts;
  auto lhs = [&](double eps0, double s_star) {
    return (M0 - eps0) / omega * ts.integrate([&](double s) { return std::pow(s, -gm) * (s0 - s); }, s_star, s0);
  };
  const double rhs = (M0 - s0) / omega * std::pow(s0, 2.0 - gm) / ((1.0 - gm) * (2.0 - gm));
  EXPECT_NEAR(c.lhs, lhs(c.eps0, c.s_star), 1e-12 * c.lhs);
  EXPECT_NEAR(c.rhs, rhs, 1e-12 * rhs);
  EXPECT_GT(lhs(c.eps0, c.s_star), rhs);
  ASSERT_GT(c.halvings, 0);
  // One halving fewer does not clear the condition with its margin.
  EXPECT_LE(lhs(2.0 * c.eps0, 2.0 * c.s_star), rhs + c.margin);
  EXPECT_DOUBLE_EQ(c.eps0 / c.s_star, 0.5);
  EXPECT_THROW(select_eps_sstar(0.1, 0.24, gm, omega), InvalidParameter);
}

TEST(Scenario, ConcentratedDataCarriesTheMass) {
  RadialGrid g(2, 1.2, 512, 6.0);
  InitialDataSpec spec;
  spec.M0 = 9.0;
  spec.r_star = 0.02;
  spec.eps0 = 1e-4;
  for (auto kind : {ProfileKind::plateau_bump, ProfileKind::gaussian_bump}) {
    spec.profile = kind;
    const auto d = build_concentrated_u0(spec, g);
    EXPECT_NEAR(d.mass, 9.0, 1e-11);
    EXPECT_GE(d.inner_mass, 9.0 - 1e-4);
    for (std::size_t j = 1; j < d.u0.size(); ++j) EXPECT_LE(d.u0[j], d.u0[j - 1]);
    EXPECT_DOUBLE_EQ(d.height, d.u0.front());
  }
  spec.profile = ProfileKind::plateau_bump;
  const auto d = build_concentrated_u0(spec, g);
  // Plateau to 0.8 r_star, linear shoulder to 0.9 r_star.
  const double rp = 0.016, re = 0.018;
  const double shoulder = (re * (re * re - rp * rp) / 2.0 - (re * re * re - rp * rp * rp) / 3.0) / (re - rp);
  const double exact = 9.0 / (2.0 * std::numbers::pi * (rp * rp / 2.0 + shoulder));
  EXPECT_NEAR(d.height, exact, 1e-9 * exact);
}

TEST(Scenario, InfeasibleDataIsReported) {
  RadialGrid g(2, 1.0, 64, 2.0);
  InitialDataSpec spec;
  spec.M0 = 1.0;
  spec.background = 1.0;
  EXPECT_THROW(build_concentrated_u0(spec, g), InfeasibleSpec);
  spec.background = 0.0;
  spec.height_cap = 10.0;
  EXPECT_THROW(build_concentrated_u0(spec, g), InfeasibleSpec);
  spec.height_cap = 1e300;
  spec.profile = ProfileKind::custom;
  spec.custom = [](double r) { return r; };
  EXPECT_THROW(build_concentrated_u0(spec, g), InvalidParameter);
  spec.M0 = -1.0;
  EXPECT_THROW(build_concentrated_u0(spec, g), InvalidParameter);
}

TEST(Scenario, MassWithinIsExactForConstants) {
  RadialGrid g(3, 2.0, 40, 2.0);
  std::vector<double> u(g.N(), 2.0);
  for (double r : {0.0, 0.3, 1.0, 1.7, 2.0, 5.0}) {
    const double rr = std::min(r, 2.0);
    EXPECT_NEAR(mass_within(g, u, r), 2.0 * 4.0 / 3.0 * std::numbers::pi * rr * rr * rr, 1e-12);
  }
}

TEST(Scenario, ProductionSandwichHoldsForDefaultLaw) {
  const auto p = attraction_dominated();
  const auto law = ProductionLaw::power_law(p);
  MomentConfig cfg;
  const auto mc = c0_constant(p, law, cfg);
  const auto s = sandwich_check(p, law, mc.c_sil9, 1e12);
  EXPECT_TRUE(s.holds());
  EXPECT_EQ(s.samples, 2001);
  // Strong repulsion at low density breaks the lower bound without the constant.
  auto q = p;
  q.xi = 10.0;
  const auto lq = ProductionLaw::power_law(q);
  EXPECT_TRUE(sandwich_check(q, lq, c0_constant(q, lq, cfg).c_sil9, 1e12).holds());
  EXPECT_FALSE(sandwich_check(q, lq, 0.0, 1e3).holds());
}

TEST(Scenario, LpVerdictsUseFirstQuartile) {
  FunctionalSeries s;
  s.lp_exponents = {1.0, 0.9, 2.0};
  s.lp.resize(3);
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.01 * i;
    s.t.push_back(t);
    s.mass.push_back(5.0);
    s.lp[0].push_back(5.0);
    s.lp[1].push_back(1.0 + t);
    s.lp[2].push_back(1.0 / (1.0 - 0.999 * t));
  }
  auto v = verify_theorem1(s, 1.2, 100.0, 5.0, true);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_TRUE(v[0].pass);
  EXPECT_TRUE(v[1].pass);
  EXPECT_FALSE(v[1].above_pfrak);
  // First quartile sample is t = 0.25: growth 1000 / (1/(1-0.24975)).
  EXPECT_NEAR(v[2].growth, 1000.0 * (1.0 - 0.999 * 0.25), 1e-9);
  EXPECT_TRUE(v[2].pass);
  v = verify_theorem1(s, 1.2, 1000.0, 5.0, true);
  EXPECT_FALSE(v[2].pass);
  v = verify_theorem1(s, 1.2, 100.0, 4.0, true);
  EXPECT_FALSE(v[0].pass);
}

TEST(Scenario, SuperlinearOdiCheck) {
  // phi' = c K phi^P with K = s0^{-(3-g)(P-1)} solved exactly.
  const double P = 2.2, s0 = 0.24, gm = 7.0 / 12.0, c = 0.3;
  const double K = std::pow(s0, -(3.0 - gm) * (P - 1.0));
  const double phi0 = 1.0, T = std::pow(phi0, 1.0 - P) / ((P - 1.0) * c * K);
  std::vector<double> t, phi;
  for (int i = 0; i < 200; ++i) {
    const double ti = T * (1.0 - std::pow(0.97, i));
    t.push_back(ti);
    phi.push_back(std::pow(std::pow(phi0, 1.0 - P) - (P - 1.0) * c * K * ti, 1.0 / (1.0 - P)));
  }
  std::vector<bool> in(200, true);
  const auto v = verify_odi2(t, phi, in, 1.0, 1.2, s0, gm);
  EXPECT_TRUE(v.pass);
  EXPECT_GE(v.c, c);
  EXPECT_LT(v.c, 1.2 * c);
  EXPECT_LE(v.violations, v.samples / 100);
  std::vector<bool> few(200, false);
  for (int i = 0; i < 10; ++i) few[i] = true;
  EXPECT_THROW(verify_odi2(t, phi, few, 1.0, 1.2, s0, gm), InsufficientSamples);
}

TEST(Scenario, CoarseExperimentRunsEndToEnd) {
  const auto p = attraction_dominated();
  const auto law = ProductionLaw::power_law(p);
  ExperimentOptions opt;
  opt.N = 256;
  opt.enforce = false;
  const auto rep = run_blowup_experiment(p, law, opt);
  EXPECT_NEAR(rep.C, std::numbers::pi * 1.44, 1e-12);
  EXPECT_NEAR(rep.M0, 2.0 * rep.C, 1e-12);
  EXPECT_NEAR(rep.moment.moment_gamma, 7.0 / 12.0, 1e-15);
  EXPECT_NEAR(rep.moment.s0, 0.24, 1e-15);
  EXPECT_NEAR(rep.initial.mass, rep.M0, 1e-9 * rep.M0);
  EXPECT_GT(rep.phi0, rep.series.sphi_threshold);
  EXPECT_EQ(rep.status, RunStatus::blowup_declared);
  ASSERT_TRUE(rep.T_blowup_observed.has_value());
  EXPECT_GT(*rep.T_blowup_observed, 0.0);
  ASSERT_FALSE(rep.verdicts.empty());
  EXPECT_EQ(rep.verdicts.front().name, "blow-up declared");
  EXPECT_TRUE(rep.verdicts.front().pass);

  opt.growth_factor_min = 1e300;
  EXPECT_FALSE(run_blowup_experiment(p, law, opt).all_pass());
  opt.enforce = true;
  EXPECT_THROW(run_blowup_experiment(p, law, opt), VerdictFailure);
}

TEST(Scenario, ExperimentRejectsUnsuitableParameters) {
  auto p = attraction_dominated();
  p.m3 = 1.5;
  const auto law = ProductionLaw::power_law(p);
  ExperimentOptions opt;
  opt.N = 64;
  EXPECT_THROW(run_blowup_experiment(p, law, opt), ModelError);
  p = attraction_dominated();
  p.alpha = 0.4;
  EXPECT_THROW(run_blowup_experiment(p, ProductionLaw::power_law(p), opt), RegimeError);
  p = attraction_dominated();
  opt.M0 = 1.0;
  EXPECT_THROW(run_blowup_experiment(p, ProductionLaw::power_law(p), opt), InvalidParameter);
}
