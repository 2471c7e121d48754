#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "chemlab/errors.hpp"
#include "chemlab/rational.hpp"

namespace chemlab {

/// Surface measure of the unit sphere, n * |B_1(0)|.
inline double omega_n(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// |B_R(0)| in R^n.
inline double ball_measure(int n, double R) { return omega_n(n) * std::pow(R, n) / n; }

/// Exponents entering the regime conditions; T is double or Rational.
template <class T>
struct StructuralParams {
  int n = 1;
  T m1{1}, m2{1}, m3{1};
  T alpha{1}, beta{1};
  T k{2};

  template <class U>
  StructuralParams<U> as() const {
    auto cv = [](const T& x) {
      if constexpr (std::is_same_v<U, double>) return to_double(x);
      else return U(x);
    };
    return {n, cv(m1), cv(m2), cv(m3), cv(alpha), cv(beta), cv(k)};
  }
};

/// All constants of the attraction-repulsion system with logistic source.
struct ModelParams {
  int n = 2;
  double m1 = 1.0, m2 = 1.0, m3 = 1.0;
  double chi = 1.0, xi = 1.0;
  double lambda = 1.0, mu = 1.0;
  double k = 2.0;
  double alpha = 1.0, beta = 1.0;
  double k1 = 1.0, k2 = 1.0, k3 = 1.0;
  double R = 1.0;

  double domain_measure() const { return ball_measure(n, R); }
  double omega() const { return omega_n(n); }

  StructuralParams<double> structural() const { return {n, m1, m2, m3, alpha, beta, k}; }
};

/// zero_sensitivity admits chi = xi = 0 (pure logistic diffusion runs).
inline const ModelParams& validate_params(const ModelParams& p, bool zero_sensitivity = false) {
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) throw InvalidParameter(std::string(name) + " must be positive");
  };
  if (p.n < 1) throw InvalidParameter("n must be a positive integer");
  for (auto [v, name] : {std::pair{p.m1, "m1"}, {p.m2, "m2"}, {p.m3, "m3"}})
    if (!std::isfinite(v)) throw InvalidParameter(std::string(name) + " must be finite");
  if (zero_sensitivity) {
    if (!(p.chi >= 0.0) || !(p.xi >= 0.0)) throw InvalidParameter("chi and xi must be nonnegative");
  } else {
    positive(p.chi, "chi");
    positive(p.xi, "xi");
  }
  positive(p.lambda, "lambda");
  positive(p.mu, "mu");
  if (!(p.k > 1.0) || !std::isfinite(p.k)) throw InvalidParameter("k must exceed 1");
  positive(p.alpha, "alpha");
  positive(p.beta, "beta");
  positive(p.k1, "k1");
  positive(p.k2, "k2");
  positive(p.k3, "k3");
  positive(p.R, "R");
  return p;
}

/// Sensitivity/production laws f1 (attractant) and f2 (repellent).
class ProductionLaw {
 public:
  enum class Kind { power_law_exact, custom_tabulated };

  /// f1(s) = k3 (s+1)^alpha, f2(s) = k2 (s+1)^beta.
  static ProductionLaw power_law(const ModelParams& p) {
    ProductionLaw law;
    law.kind_ = Kind::power_law_exact;
    law.k3_ = p.k3;
    law.alpha_ = p.alpha;
    law.k2_ = p.k2;
    law.beta_ = p.beta;
    return law;
  }

  /// Piecewise-linear tables on nodes s (strictly increasing, s[0] = 0),
  /// extended linearly past the last node.
  static ProductionLaw tabulated(std::vector<double> s, std::vector<double> f1, std::vector<double> f2) {
    if (s.size() < 2 || f1.size() != s.size() || f2.size() != s.size())
      throw InvalidParameter("tabulated production needs >= 2 nodes and matching columns");
    if (s.front() != 0.0) throw InvalidParameter("tabulated production must start at s = 0");
    for (std::size_t i = 1; i < s.size(); ++i)
      if (!(s[i] > s[i - 1])) throw InvalidParameter("tabulated production nodes must increase strictly");
    ProductionLaw law;
    law.kind_ = Kind::custom_tabulated;
    law.s_ = std::move(s);
    law.t1_ = std::move(f1);
    law.t2_ = std::move(f2);
    return law;
  }

  Kind kind() const { return kind_; }

  double f1(double s) const {
    return kind_ == Kind::power_law_exact ? k3_ * std::pow(s + 1.0, alpha_) : interp(t1_, s);
  }
  double f2(double s) const {
    return kind_ == Kind::power_law_exact ? k2_ * std::pow(s + 1.0, beta_) : interp(t2_, s);
  }

  const std::vector<double>& nodes() const { return s_; }
  const std::vector<double>& table_f1() const { return t1_; }
  const std::vector<double>& table_f2() const { return t2_; }

 private:
  double interp(const std::vector<double>& t, double s) const {
    auto it = std::upper_bound(s_.begin(), s_.end(), s);
    std::size_t hi = std::clamp<std::size_t>(it - s_.begin(), 1, s_.size() - 1);
    std::size_t lo = hi - 1;
    double w = (s - s_[lo]) / (s_[hi] - s_[lo]);
    return t[lo] + w * (t[hi] - t[lo]);
  }

  Kind kind_ = Kind::power_law_exact;
  double k3_ = 1.0, alpha_ = 1.0, k2_ = 1.0, beta_ = 1.0;
  std::vector<double> s_, t1_, t2_;
};

/// Sample points 0 and a log-spaced ladder up to s_max.
inline std::vector<double> production_samples(double s_max = 1e6, int count = 400) {
  std::vector<double> s{0.0};
  const double lo = std::log(1e-6), hi = std::log(s_max);
  for (int i = 0; i < count; ++i) s.push_back(std::exp(lo + (hi - lo) * i / (count - 1)));
  return s;
}

/// Checks nonnegativity, monotonicity and the two-sided growth conditions
/// f1 >= k3 (s+1)^alpha, f2 <= k2 (s+1)^beta at the samples.
inline void validate_production(const ProductionLaw& law, const ModelParams& p,
                                const std::vector<double>& samples = production_samples()) {
  double prev1 = -1.0, prev2 = -1.0;
  for (double s : samples) {
    const double a = law.f1(s), b = law.f2(s);
    const std::string at = " at s = " + format_scalar(s);
    if (!(a >= 0.0) || !(b >= 0.0)) throw InvalidParameter("production must be nonnegative" + at);
    if (a < prev1 || b < prev2) throw InvalidParameter("production must be nondecreasing" + at);
    const double lo1 = p.k3 * std::pow(s + 1.0, p.alpha), hi2 = p.k2 * std::pow(s + 1.0, p.beta);
    if (a < lo1 * (1.0 - 1e-12)) throw InvalidParameter("f1 violates f1(s) >= k3 (s+1)^alpha" + at);
    if (b > hi2 * (1.0 + 1e-12)) throw InvalidParameter("f2 violates f2(s) <= k2 (s+1)^beta" + at);
    prev1 = a;
    prev2 = b;
  }
}

/// Upper growth bound f1 <= k1 (s+1)^alpha (and f2 <= k2 (s+1)^beta) at the samples.
inline bool satisfies_upper_growth(const ProductionLaw& law, const ModelParams& p,
                                   const std::vector<double>& samples = production_samples()) {
  return std::all_of(samples.begin(), samples.end(), [&](double s) {
    return law.f1(s) <= p.k1 * std::pow(s + 1.0, p.alpha) * (1.0 + 1e-12) &&
           law.f2(s) <= p.k2 * std::pow(s + 1.0, p.beta) * (1.0 + 1e-12);
  });
}

}  // namespace chemlab
