#pragma once

#include <cmath>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "chemlab/errors.hpp"

namespace chemlab::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
};

namespace detail {

struct Piece {
  double a, b, value, error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

/// 15-point Kronrod estimate with the embedded 7-point Gauss rule as error proxy.
template <class F>
Piece gk15(F& f, double a, double b) {
  using K = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const auto& xk = K::abscissa();
  const auto& wk = K::weights();
  const auto& xg = G::abscissa();
  const auto& wg = G::weights();
  double k = wk[0] * f(c);
  for (std::size_t i = 1; i < xk.size(); ++i) k += wk[i] * (f(c - h * xk[i]) + f(c + h * xk[i]));
  double g = wg[0] * f(c);
  for (std::size_t i = 1; i < xg.size(); ++i) g += wg[i] * (f(c - h * xg[i]) + f(c + h * xg[i]));
  return {a, b, h * k, std::abs(h * (k - g))};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod on [a, b] starting from the given
/// breakpoints; the worst interval is bisected until the summed error
/// estimate meets max(abs_tol, rel_tol |I|).
template <class F>
Result integrate(F f, std::vector<double> breaks, double abs_tol, double rel_tol, int max_intervals = 20000) {
  if (breaks.size() < 2) throw QuadratureError("need at least one interval");
  std::priority_queue<detail::Piece> heap;
  double value = 0.0, error = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    auto p = detail::gk15(f, breaks[i], breaks[i + 1]);
    value += p.value;
    error += p.error;
    heap.push(p);
  }
  int count = static_cast<int>(heap.size());
  while (error > std::max(abs_tol, rel_tol * std::abs(value))) {
    if (count >= max_intervals) throw QuadratureError("adaptive quadrature did not converge");
    auto worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {  // interval exhausted at machine precision
      heap.push({worst.a, worst.b, worst.value, 0.0});
      error -= worst.error;
      continue;
    }
    auto l = detail::gk15(f, worst.a, m), r = detail::gk15(f, m, worst.b);
    value += l.value + r.value - worst.value;
    error += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
    ++count;
  }
  // Re-sum for a clean total.
  value = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  if (!std::isfinite(value)) throw QuadratureError("non-finite integrand");
  return {value, error, count};
}

/// Breakpoints 0, 2^-levels, ..., 1/4, 1/2, 1 for integrands rough at 0.
inline std::vector<double> geometric_breaks(int levels = 60) {
  std::vector<double> b{0.0};
  for (int k = levels; k >= 0; --k) b.push_back(std::ldexp(1.0, -k));
  return b;
}

}  // namespace chemlab::quad
