#pragma once

// Lower bounds for the blow-up time from phi' <= A phi^gamma + B phi^delta + C:
// the Osgood integral and the explicit closed-form bound.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chemlab/errors.hpp"
#include "chemlab/quadrature.hpp"
#include "chemlab/rational.hpp"

namespace chemlab {

struct OdiCoefficients {
  double A = 1.0, B = 0.0, C = 0.0;
  double gamma = 2.0, delta = 1.5;
  double phi0 = 1.0;
  double p = 1.0;
  double domain_measure = 1.0;

  double C_bar() const { return p * C / domain_measure; }
  double D() const { return A + B * std::pow(phi0, delta - gamma) + C_bar() * std::pow(phi0, 1.0 - gamma); }
  double psi(double tau) const { return A * std::pow(tau, gamma) + B * std::pow(tau, delta) + C; }

  void validate() const {
    for (double x : {A, B, C})
      if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidParameter("ODI coefficients must be finite and nonnegative");
    if (!(phi0 > 0.0)) throw InvalidParameter("phi0 must be positive");
    if (!(p > 0.0) || !(domain_measure > 0.0)) throw InvalidParameter("p and the domain measure must be positive");
    if (B > 0.0 && !(delta <= gamma)) throw InvalidParameter("delta must not exceed gamma");
  }

  /// phi0 >= |Omega|/p, which nonnegative data always satisfy and the explicit bound relies on.
  bool phi0_admissible() const { return phi0 * p >= domain_measure * (1.0 - 1e-12); }
};

struct BoundReport {
  double T_implicit = 0.0;
  double T_explicit = 0.0;
  double quadrature_error_estimate = 0.0;
  bool consistent = false;  // T_explicit <= T_implicit (+ error estimate)
};

struct OsgoodResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// int_{phi0}^inf d tau / Psi(tau) after tau = phi0 x^{-1/(e-1)}, e the leading
/// exponent. The x-integrand is bounded near 0 whenever A > 0.
inline OsgoodResult osgood_integral(const OdiCoefficients& c, double rel_tol = 1e-13) {
  c.validate();
  double lead = 0.0;
  if (c.A > 0.0) lead = c.gamma;
  else if (c.B > 0.0) lead = c.delta;
  if (c.A > 0.0 && c.B > 0.0) lead = std::max(c.gamma, c.delta);
  if (c.A == 0.0 && c.B == 0.0) throw DivergenceError("Psi is constant; the Osgood integral diverges");
  if (!(lead > 1.0)) throw DivergenceError("leading ODI exponent " + format_scalar(lead) + " <= 1; integral diverges");

  // A single power integrates in closed form; this also keeps the pure case
  // bit-identical to explicit_bound, which it equals exactly.
  if (c.C == 0.0 && (c.A == 0.0 || c.B == 0.0)) {
    const double coef = c.A > 0.0 ? c.A : c.B;
    return {std::pow(c.phi0, 1.0 - lead) / (coef * (lead - 1.0)), 0.0};
  }

  const double a = 1.0 / (lead - 1.0);
  const double pref = a * std::pow(c.phi0, 1.0 - lead);
  auto f = [&](double x) {
    if (x <= 0.0) {
      // limit tau -> infinity: only the leading power survives
      const double top = (c.A > 0.0 && c.gamma == lead ? c.A : 0.0) + (c.B > 0.0 && c.delta == lead ? c.B : 0.0);
      return top > 0.0 ? pref / top : 0.0;
    }
    const double tau = c.phi0 * std::pow(x, -a);
    double den = 0.0;
    if (c.A > 0.0) den += c.A * std::pow(tau, c.gamma - lead);
    if (c.B > 0.0) den += c.B * std::pow(tau, c.delta - lead);
    if (c.C > 0.0) den += c.C * std::pow(tau, -lead);
    return pref / den;
  };
  const auto r = quad::integrate(f, quad::geometric_breaks(), 0.0, rel_tol);
  return {r.value, r.error};
}

/// phi0^{1-gamma} / (D (gamma - 1)).
inline double explicit_bound(const OdiCoefficients& c) {
  c.validate();
  if (!(c.gamma > 1.0)) throw DivergenceError("gamma <= 1; no finite explicit bound");
  const double D = c.D();
  if (!(D > 0.0)) throw InvalidParameter("D must be positive");
  return std::pow(c.phi0, 1.0 - c.gamma) / (D * (c.gamma - 1.0));
}

inline BoundReport bound_report(const OdiCoefficients& c) {
  BoundReport r;
  const auto o = osgood_integral(c);
  r.T_implicit = o.value;
  r.quadrature_error_estimate = o.error_estimate;
  r.T_explicit = explicit_bound(c);
  r.consistent = r.T_explicit <= r.T_implicit + std::max(r.quadrature_error_estimate, 1e-12 * r.T_implicit);
  return r;
}

struct OdiFit {
  OdiCoefficients coeffs;
  double coverage = 0.0;      // share of samples with Psi(phi_i) >= slope_i
  std::size_t violations = 0;
  double scale = 1.0;         // envelope factor applied after least squares
  std::size_t samples = 0;
};

/// Nonnegative weighted least-squares fit of Psi to secant slopes of the
/// energy series, lifted so Psi covers the slopes at the requested share.
inline OdiFit fit_odi_coefficients(const std::vector<double>& t, const std::vector<double>& phi, double gamma,
                                   double delta, double p, double domain_measure, double coverage = 0.99) {
  if (t.size() != phi.size() || t.size() < 20) throw FitError("need at least 20 samples of the energy series");
  const std::size_t m = t.size() - 1;
  std::vector<double> x(m), d(m);
  double dmax = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(t[i + 1] > t[i])) throw FitError("sample times must increase strictly");
    x[i] = phi[i];
    d[i] = (phi[i + 1] - phi[i]) / (t[i + 1] - t[i]);
    if (!std::isfinite(d[i]) || !(x[i] > 0.0)) throw FitError("energy series must be positive and finite");
    dmax = std::max(dmax, std::abs(d[i]));
  }

  OdiFit out;
  out.samples = m;
  out.coeffs = {0.0, 0.0, 0.0, gamma, delta, phi.front(), p, domain_measure};
  if (dmax == 0.0) {
    out.coverage = 1.0;
    return out;
  }

  // Columns phi^gamma, phi^delta, 1, rows weighted by 1/|slope|; columns normalized.
  Eigen::MatrixXd X(m, 3);
  Eigen::VectorXd y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double w = 1.0 / std::max(std::abs(d[i]), 1e-12 * dmax);
    X(i, 0) = std::pow(x[i], gamma) * w;
    X(i, 1) = std::pow(x[i], delta) * w;
    X(i, 2) = w;
    y(i) = d[i] * w;
  }
  Eigen::Vector3d norm;
  for (int j = 0; j < 3; ++j) {
    norm(j) = X.col(j).norm();
    if (norm(j) > 0.0) X.col(j) /= norm(j);
  }
  // Exhaustive active-set search; three unknowns make this exact NNLS.
  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  double best_res = y.squaredNorm();
  for (int mask = 1; mask < 8; ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < 3; ++j)
      if (mask & (1 << j)) cols.push_back(j);
    Eigen::MatrixXd Xs(m, cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) Xs.col(k) = X.col(cols[k]);
    Eigen::VectorXd beta = Xs.colPivHouseholderQr().solve(y);
    if ((beta.array() < 0.0).any() || !beta.allFinite()) continue;
    const double res = (Xs * beta - y).squaredNorm();
    if (res < best_res) {
      best_res = res;
      best.setZero();
      for (std::size_t k = 0; k < cols.size(); ++k) best(cols[k]) = beta(k);
    }
  }
  for (int j = 0; j < 3; ++j) best(j) = norm(j) > 0.0 ? best(j) / norm(j) : 0.0;

  auto psi = [&](double s, const Eigen::Vector3d& c) {
    return c(0) * std::pow(s, gamma) + c(1) * std::pow(s, delta) + c(2);
  };
  // Envelope: scale so that the requested quantile of slope / Psi is <= 1.
  std::vector<double> ratio;
  ratio.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (d[i] <= 0.0) continue;
    const double ps = psi(x[i], best);
    ratio.push_back(ps > 0.0 ? d[i] / ps : std::numeric_limits<double>::infinity());
  }
  double scale = 1.0;
  if (!ratio.empty()) {
    std::sort(ratio.begin(), ratio.end());
    const std::size_t allowed = static_cast<std::size_t>(std::floor((1.0 - coverage) * m));
    const std::size_t idx = ratio.size() > allowed ? ratio.size() - 1 - allowed : 0;
    if (ratio.size() > allowed) {
      if (!std::isfinite(ratio[idx])) throw FitError("no nonnegative Psi covers the slopes at the required level");
      scale = std::max(1.0, ratio[idx] * (1.0 + 16.0 * std::numeric_limits<double>::epsilon()));
    }
  }
  best *= scale;
  out.scale = scale;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (psi(x[i], best) < d[i]) ++bad;
  out.violations = bad;
  out.coverage = 1.0 - double(bad) / m;
  if (out.coverage + 1e-12 < coverage) throw FitError("fitted envelope covers only " + format_scalar(out.coverage));
  out.coeffs.A = best(0);
  out.coeffs.B = best(1);
  out.coeffs.C = best(2);
  return out;
}

}  // namespace chemlab
