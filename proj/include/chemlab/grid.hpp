#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "chemlab/errors.hpp"
#include "chemlab/params.hpp"

namespace chemlab {

/// Finite-volume grid on [0, R] in the radial variable.
///
/// Faces sit at r_f = R (f/N)^grading, so grading > 1 clusters cells at the
/// origin. Cell volumes are the exact measures (r_{f+1}^n - r_f^n)/n, i.e.
/// the weights for integrals of the form int_0^R rho^{n-1} g(rho) d rho;
/// multiply by omega_n for integrals over the ball.
class RadialGrid {
 public:
  RadialGrid(int n, double R, int N, double grading = 1.0) : n_(n), R_(R), N_(N), grading_(grading) {
    if (n < 1) throw InvalidParameter("grid dimension must be positive");
    if (!(R > 0.0)) throw InvalidParameter("grid radius must be positive");
    if (N < 2) throw InvalidParameter("grid needs at least two cells");
    if (!(grading >= 1.0)) throw InvalidParameter("grid grading must be >= 1");

    faces_.resize(N + 1);
    sface_.resize(N + 1);
    area_.resize(N + 1);
    for (int f = 0; f <= N; ++f) {
      faces_[f] = f == N ? R : R * std::pow(double(f) / N, grading);
      sface_[f] = std::pow(faces_[f], n);
      area_[f] = n == 1 ? 1.0 : std::pow(faces_[f], n - 1);
    }
    centers_.resize(N);
    vol_.resize(N);
    scenter_.resize(N);
    for (int j = 0; j < N; ++j) {
      centers_[j] = 0.5 * (faces_[j] + faces_[j + 1]);
      vol_[j] = (sface_[j + 1] - sface_[j]) / n;
      scenter_[j] = std::pow(centers_[j], n);
    }
    // Center-to-center spacing across each interior face.
    spacing_.assign(N + 1, 0.0);
    for (int f = 1; f < N; ++f) spacing_[f] = centers_[f] - centers_[f - 1];
  }

  int n() const { return n_; }
  double R() const { return R_; }
  int N() const { return N_; }
  double grading() const { return grading_; }

  const std::vector<double>& faces() const { return faces_; }
  const std::vector<double>& centers() const { return centers_; }
  /// Quadrature weights for int_0^R rho^{n-1}(.) d rho; they sum to R^n/n.
  const std::vector<double>& weights() const { return vol_; }
  const std::vector<double>& areas() const { return area_; }
  const std::vector<double>& spacing() const { return spacing_; }
  /// Mass coordinate s = r^n at faces and at cell centers.
  const std::vector<double>& s_faces() const { return sface_; }
  const std::vector<double>& s_centers() const { return scenter_; }

  double total_weight() const { return sface_.back() / n_; }
  double omega() const { return omega_n(n_); }

  /// int_Omega g for a cell field g.
  double integrate(const std::vector<double>& g) const {
    double acc = 0.0;
    for (int j = 0; j < N_; ++j) acc += vol_[j] * g[j];
    return omega() * acc;
  }

  /// Mean of a cell field over the ball.
  double mean(const std::vector<double>& g) const {
    double acc = 0.0;
    for (int j = 0; j < N_; ++j) acc += vol_[j] * g[j];
    return acc / total_weight();
  }

  /// Exact-to-quadrature cell averages of a radial profile. Cells are split
  /// at the given kink radii so piecewise-smooth profiles integrate cleanly.
  std::vector<double> cell_averages(const std::function<double(double)>& g,
                                    std::vector<double> kinks = {}) const {
    std::sort(kinks.begin(), kinks.end());
    std::vector<double> out(N_);
    auto weighted = [&](double r) { return (n_ == 1 ? 1.0 : std::pow(r, n_ - 1)) * g(r); };
    for (int j = 0; j < N_; ++j) {
      double a = faces_[j], b = faces_[j + 1], acc = 0.0;
      for (double k : kinks) {
        if (k <= a || k >= b) continue;
        acc += boost::math::quadrature::gauss<double, 10>::integrate(weighted, a, k);
        a = k;
      }
      acc += boost::math::quadrature::gauss<double, 10>::integrate(weighted, a, b);
      out[j] = acc / vol_[j];
    }
    return out;
  }

 private:
  int n_;
  double R_;
  int N_;
  double grading_;
  std::vector<double> faces_, centers_, vol_, area_, spacing_, sface_, scenter_;
};

}  // namespace chemlab
