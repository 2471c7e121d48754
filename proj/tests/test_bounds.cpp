#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "chemlab/bounds.hpp"
#include "support/oracles.hpp"

using namespace chemlab;


TEST(Quadrature, AdaptiveDriverHandlesEndpointSingularity) {
  const auto r = quad::integrate([](double x) { return x > 0 ? 1.0 / std::sqrt(x) : 0.0; }, quad::geometric_breaks(), 0.0,
                                 1e-13);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  const auto s = quad::integrate([](double x) { return std::sin(x); }, {0.0, std::numbers::pi}, 0.0, 1e-14);
  EXPECT_NEAR(s.value, 2.0, 1e-14);
  EXPECT_THROW(quad::integrate([](double) { return 1.0; }, {0.0}, 0.0, 1e-10), QuadratureError);
}

TEST(Osgood, UnitCase) {
  OdiCoefficients c;
  c.A = 1.0;
  c.gamma = 2.0;
  c.phi0 = 1.0;
  const auto r = bound_report(c);
  EXPECT_NEAR(r.T_implicit, 1.0, 1e-13);
  EXPECT_NEAR(r.T_explicit, 1.0, 1e-15);
  EXPECT_TRUE(r.consistent);
}

TEST(Osgood, CubicPlusQuadratic) {
  // 1/(t^3 + t^2) = 1/t^2 - 1/t + 1/(t+1), so the integral over [1, inf) is 1 - ln 2.
  OdiCoefficients c;
  c.A = 1.0;
  c.gamma = 3.0;
  c.B = 1.0;
  c.delta = 2.0;
  c.phi0 = 1.0;
  const double closed = 1.0 - std::log(2.0);
  EXPECT_NEAR(osgood_integral(c).value, closed, 1e-12);
  EXPECT_NEAR(oracle::osgood(c), closed, 1e-15);
}

TEST(Osgood, RandomCoefficientsAgainstHighPrecisionOracle) {
  std::mt19937_64 rng(424242);
  for (int i = 0; i < 100; ++i) {
    const auto c = oracle::random_coefficients(rng);
    const double mine = osgood_integral(c).value, oracle = oracle::osgood(c);
    EXPECT_NEAR(mine, oracle, 1e-8 * oracle) << "set " << i << " A=" << c.A << " B=" << c.B << " C=" << c.C
                                             << " g=" << c.gamma << " d=" << c.delta << " phi0=" << c.phi0;
  }
}

TEST(Osgood, ExplicitBoundNeverExceedsImplicitForAdmissiblePhi0) {
  std::mt19937_64 rng(99);
  int tested = 0;
  for (int i = 0; i < 300; ++i) {
    auto c = oracle::random_coefficients(rng);
    c.phi0 = std::max(c.phi0, c.domain_measure / c.p);
    ASSERT_TRUE(c.phi0_admissible());
    const auto r = bound_report(c);
    EXPECT_TRUE(r.consistent) << r.T_explicit << " > " << r.T_implicit;
    EXPECT_LE(r.T_explicit, r.T_implicit * (1 + 1e-12));
    ++tested;
  }
  EXPECT_EQ(tested, 300);
}

TEST(Osgood, DivergentAndInvalidInputs) {
  OdiCoefficients c;
  c.A = 1.0;
  c.gamma = 1.0;
  EXPECT_THROW(osgood_integral(c), DivergenceError);
  EXPECT_THROW(explicit_bound(c), DivergenceError);
  c.gamma = 0.5;
  EXPECT_THROW(osgood_integral(c), DivergenceError);
  OdiCoefficients flat;
  flat.A = 0.0;
  flat.C = 1.0;
  EXPECT_THROW(osgood_integral(flat), DivergenceError);
  OdiCoefficients neg;
  neg.A = -1.0;
  EXPECT_THROW(osgood_integral(neg), InvalidParameter);
  OdiCoefficients order;
  order.B = 1.0;
  order.delta = 3.0;
  EXPECT_THROW(osgood_integral(order), InvalidParameter);
}

TEST(OdiFit, RecoversKnownRiccatiGrowth) {
  // phi' = 2 phi^2 + 1/2 has phi = (1/2) tan(t + atan(2 phi0)).
  const double A = 2.0, C = 0.5, phi0 = 1.0;
  const double c0 = std::atan(2.0 * phi0);
  const double T = std::numbers::pi / 2.0 - c0;
  std::vector<double> t, phi;
  for (int i = 0; i < 400; ++i) {
    const double ti = T * (1.0 - std::pow(0.985, i));
    t.push_back(ti);
    phi.push_back(0.5 * std::tan(ti + c0));
  }
  const auto fit = fit_odi_coefficients(t, phi, 2.0, 1.5, 1.0, 1.0, 0.99);
  EXPECT_GE(fit.coverage, 0.99);
  EXPECT_GE(fit.scale, 1.0);
  EXPECT_NEAR(fit.coeffs.A, A, 0.1 * A);
  EXPECT_LT(fit.coeffs.C, 2.0 * C + 0.5);
  EXPECT_DOUBLE_EQ(fit.coeffs.phi0, phi0);
  // The fitted envelope dominates the slopes, so its blow-up time is no later than the true one.
  EXPECT_LE(osgood_integral(fit.coeffs).value, T * 1.05);
}

TEST(OdiFit, RejectsShortOrUnorderedSeries) {
  std::vector<double> t(10, 0.0), phi(10, 1.0);
  EXPECT_THROW(fit_odi_coefficients(t, phi, 2.0, 1.5, 1.0, 1.0), FitError);
  t.assign(30, 0.0);
  phi.assign(30, 1.0);
  for (int i = 0; i < 30; ++i) t[i] = i;
  t[10] = t[9];
  EXPECT_THROW(fit_odi_coefficients(t, phi, 2.0, 1.5, 1.0, 1.0), FitError);
}

TEST(OdiFit, FlatSeriesGivesZeroCoefficients) {
  std::vector<double> t(30), phi(30, 3.0);
  for (int i = 0; i < 30; ++i) t[i] = 0.1 * i;
  const auto fit = fit_odi_coefficients(t, phi, 2.0, 1.5, 1.0, 1.0);
  EXPECT_EQ(fit.coeffs.A, 0.0);
  EXPECT_EQ(fit.coverage, 1.0);
}
