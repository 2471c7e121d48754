#pragma once

// Parameter-regime classification for the attraction-repulsion system:
// assumptions H1..H5, the critical exponent pfrak, the working exponent
// pbar and the Gagliardo-Nirenberg exponent family used by the L^p energy
// estimates. Everything is templated on the scalar so that rational inputs
// are processed exactly.

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chemlab/errors.hpp"
#include "chemlab/params.hpp"
#include "chemlab/rational.hpp"

namespace chemlab::regimes {

struct AssumptionVerdict {
  bool holds = false;
  std::string detail;
};

enum class Improvement { same, strictly_larger, not_comparable };

inline const char* to_string(Improvement i) {
  switch (i) {
    case Improvement::same: return "same";
    case Improvement::strictly_larger: return "strictly_larger";
    case Improvement::not_comparable: return "not_comparable";
  }
  return "?";
}

/// Which of H2..H4 carries the energy estimate. H4 has two alternatives.
enum class Path { none, h2, h3, h4a, h4b };

inline const char* to_string(Path p) {
  switch (p) {
    case Path::none: return "none";
    case Path::h2: return "H2";
    case Path::h3: return "H3";
    case Path::h4a: return "H4 (m3 <= 1)";
    case Path::h4b: return "H4 (m2+alpha >= m3)";
  }
  return "?";
}

struct RegimeReport {
  std::array<AssumptionVerdict, 5> h;  // h[0] = H1 ... h[4] = H5
  Path path = Path::none;
  bool blowup_predicted = false;
  std::optional<Improvement> improvement_over_wang;

  bool lemma_hypotheses() const { return h[0].holds && path != Path::none; }
};

namespace detail {

template <class T>
std::string relation(const char* lhs_name, const T& lhs, const char* op, const char* rhs_name, const T& rhs) {
  return std::string(lhs_name) + " = " + format_scalar(lhs) + " " + op + " " + rhs_name + " = " + format_scalar(rhs);
}

template <class T>
AssumptionVerdict strict(const char* lhs_name, const T& lhs, const char* rhs_name, const T& rhs) {
  const bool ok = gt(lhs, rhs);
  return {ok, relation(lhs_name, lhs, ok ? ">" : "<=", rhs_name, rhs)};
}

template <class T>
AssumptionVerdict loose(const char* lhs_name, const T& lhs, const char* rhs_name, const T& rhs) {
  const bool ok = ge(lhs, rhs);
  return {ok, relation(lhs_name, lhs, ok ? ">=" : "<", rhs_name, rhs)};
}

inline AssumptionVerdict both(const AssumptionVerdict& a, const AssumptionVerdict& b) {
  return {a.holds && b.holds, a.detail + "; " + b.detail};
}

template <class T>
T tmax(const T& a, const T& b) { return a < b ? b : a; }

}  // namespace detail

template <class T>
T two_over_n(const StructuralParams<T>& p) { return T(2) / T(p.n); }

/// Evaluates H1..H5 exactly as stated; strict where strict, non-strict where non-strict.
template <class T>
RegimeReport check_assumptions(const StructuralParams<T>& p) {
  using namespace detail;
  RegimeReport r;
  const T s = p.m2 + p.alpha;
  const T one(1), zero(0);
  const T m1_floor = one - two_over_n(p);

  r.h[0] = strict("m2+alpha", s, "m1+2/n", T(p.m1 + two_over_n(p)));
  r.h[1] = strict("m2+alpha", s, "max{1, m3+beta}", tmax(one, T(p.m3 + p.beta)));
  r.h[2] = both(loose("m2+alpha", s, "m3+beta", T(p.m3 + p.beta)), strict("m1", p.m1, "1-2/n", m1_floor));

  const bool beta_small = gt(p.beta, zero) && le(p.beta, one);
  const auto h4a = both(loose("1", one, "m3", p.m3), strict("m1", p.m1, "1-2/n", m1_floor));
  const auto h4b = both(loose("m2+alpha", s, "m3", p.m3), strict("m1", p.m1, "1-2/n", m1_floor));
  if (!beta_small) {
    r.h[3] = {false, "beta = " + format_scalar(p.beta) + " outside (0,1]"};
  } else if (h4a.holds) {
    r.h[3] = {true, "[m3 <= 1 variant] " + h4a.detail};
  } else if (h4b.holds) {
    r.h[3] = {true, "[m2+alpha >= m3 variant] " + h4b.detail};
  } else {
    r.h[3] = {false, "neither variant: " + h4a.detail + " | " + h4b.detail};
  }

  const T k2n = two_over_n(p) * p.k;
  AssumptionVerdict growth = ge(p.m1, zero) ? strict("m2+alpha", s, "max{m1+2k/n, k}", tmax(T(p.m1 + k2n), p.k))
                                            : strict("m2+alpha", s, "max{2k/n, k}", tmax(k2n, p.k));
  r.h[4] = both(strict("alpha", p.alpha, "beta", p.beta), growth);

  if (r.h[1].holds) r.path = Path::h2;
  else if (r.h[2].holds) r.path = Path::h3;
  else if (r.h[3].holds) r.path = h4a.holds ? Path::h4a : Path::h4b;

  r.blowup_predicted = r.h[4].holds && eq(p.m2, p.m3) && gt(p.m2, zero);
  return r;
}

/// Infimum of the admissible critical exponents, n (m2 - m1 + alpha) / 2.
template <class T>
T compute_pfrak(const StructuralParams<T>& p) {
  auto r = check_assumptions(p);
  if (!r.h[0].holds) throw RegimeError("H1 fails: " + r.h[0].detail);
  return T(p.n) * (p.m2 - p.m1 + p.alpha) / T(2);
}

/// Strict admissible value above an infimum: inf + margin * |inf|.
template <class T>
T admissible_above(const T& infimum, const T& margin) {
  const T mag = infimum < T(0) ? T(-infimum) : infimum;
  return infimum + margin * (mag == T(0) ? T(1) : mag);
}

template <class T>
struct PbarResult {
  T value;                                         // the max, i.e. the infimum of pbar
  std::string binding;                             // name of the first maximal entry
  std::vector<std::pair<std::string, T>> entries;  // all nine candidates
};

namespace detail {

template <class T>
PbarResult<T> pbar_max(const StructuralParams<T>& p, const T& first) {
  const T one(1), n(p.n);
  const T big = (n + T(2)) * (n + T(1));
  PbarResult<T> out;
  out.entries = {
      {"pfrak", first},
      {"1-m1(n+2)", one - p.m1 * (n + T(2))},
      {"1-m2", one - p.m2},
      {"1-m3", one - p.m3},
      {"2-m1-2/n", T(2) - p.m1 - two_over_n(p)},
      {"n*alpha", n * p.alpha},
      {"n*beta", n * p.beta},
      {"m2(n+2)(n+1)", p.m2 * big},
      {"m3(n+2)(n+1)", p.m3 * big},
  };
  out.value = out.entries.front().second;
  out.binding = out.entries.front().first;
  for (const auto& [name, v] : out.entries)
    if (v > out.value) {
      out.value = v;
      out.binding = name;
    }
  return out;
}

template <class T>
void require_lemma(const StructuralParams<T>& p) {
  const auto report = check_assumptions(p);
  if (!report.lemma_hypotheses())
    throw RegimeError("pbar needs H1 and one of H2-H4: H1: " + report.h[0].detail);
}

}  // namespace detail

template <class T>
PbarResult<T> compute_pbar(const StructuralParams<T>& p, const T& pfrak_choice) {
  detail::require_lemma(p);
  const T pf = compute_pfrak(p);
  if (!gt(pfrak_choice, pf))
    throw RegimeError("pfrak choice " + format_scalar(pfrak_choice) + " must exceed " + format_scalar(pf));
  return detail::pbar_max(p, pfrak_choice);
}

/// Limit of compute_pbar as the pfrak choice decreases to pfrak.
template <class T>
PbarResult<T> pbar_infimum(const StructuralParams<T>& p) {
  detail::require_lemma(p);
  return detail::pbar_max(p, compute_pfrak(p));
}

/// One of the inequalities the energy method needs for p >= pbar.
template <class T>
struct Relation {
  std::string name;
  T value;
  bool holds = false;
  bool required = false;
  std::string detail;
};

template <class T>
struct ExponentSet {
  T p_frak, p_bar, p;
  T sigma, sigma_hat;
  T theta, theta_hat, theta_bar;
  T odi_gamma, odi_delta;
  Path path = Path::none;
  std::vector<Relation<T>> relations;

  std::vector<const Relation<T>*> violations() const {
    std::vector<const Relation<T>*> out;
    for (const auto& r : relations)
      if (r.required && !r.holds) out.push_back(&r);
    return out;
  }
};

/// Closed forms for sigma, sigma_hat, theta, theta_hat, theta_bar, gamma,
/// delta, and a check of every relation at the given p. Never throws.
template <class T>
ExponentSet<T> evaluate_exponents(const StructuralParams<T>& sp, const T& pfrak_choice, const T& p_choice) {
  ExponentSet<T> e;
  const T one(1), two(2), zero(0), n(sp.n);
  const T& p = p_choice;
  const T q = p + sp.m1 - one;         // p + m1 - 1
  const T P = p + sp.m2 + sp.alpha - one;  // p + m2 + alpha - 1
  const T half = one / two;
  auto safe_div = [&](const T& a, const T& b) { return b == zero ? T(0) : T(a / b); };

  e.p_frak = pfrak_choice;
  e.p = p;
  e.sigma = safe_div(two * P, q);
  e.sigma_hat = safe_div(two * p, q);
  const T base = (sp.m1 - sp.m2 - sp.alpha) / two + p / n;
  e.odi_gamma = safe_div(base + (sp.m2 + sp.alpha - one) / n, base);
  e.odi_delta = safe_div(P, p);
  e.theta = safe_div(q / (two * pfrak_choice) - safe_div(q, two * P), q / (two * pfrak_choice) + one / n - half);
  e.theta_hat = safe_div(q / two - safe_div(q, two * p), q / two + one / n - half);
  e.theta_bar = safe_div(safe_div(q, two * p) - safe_div(q, two * P), safe_div(q, two * p) + one / n - half);

  const auto report = check_assumptions(sp);
  e.path = report.path;
  const bool h2 = e.path == Path::h2, h3 = e.path == Path::h3;
  const bool h4a = e.path == Path::h4a, h4b = e.path == Path::h4b;
  const bool relaxed = h3 || h4a || h4b;  // ratios may reach 1 in these cases

  auto unit = [&](std::string name, const T& v, bool required, bool allow_one) {
    const bool ok = gt(v, zero) && (allow_one ? le(v, one) : lt(v, one));
    e.relations.push_back({std::move(name), v, ok, required,
                           "value " + format_scalar(v) + (allow_one ? " in (0,1]" : " in (0,1)")});
  };

  const T lower2 = n * (one - sp.m1) / two;
  e.relations.push_back({"p > n(1-m1)/2", p, gt(p, lower2), true,
                         format_scalar(p) + " vs " + format_scalar(lower2)});
  unit("theta", e.theta, true, false);
  unit("sigma*theta/2", T(e.sigma * e.theta / two), true, false);
  unit("theta_hat", e.theta_hat, true, false);
  unit("sigma_hat*theta_hat/2", T(e.sigma_hat * e.theta_hat / two), h3 || h4a || h4b, false);
  unit("(p+m3-1)/(p+m2+alpha-1)", safe_div(p + sp.m3 - one, P), h2 || h3 || h4b, relaxed);
  unit("beta/(p+m2+alpha-1)", safe_div(sp.beta, P), h2 || h3, false);
  {
    const T sum = safe_div(p + sp.m3 - one + sp.beta, P);
    const bool ok = relaxed ? le(sum, one) : lt(sum, one);
    e.relations.push_back({"(p+m3-1+beta)/(p+m2+alpha-1) < 1", sum, ok, h2 || h3,
                           "sum " + format_scalar(sum)});
  }
  unit("p/(p+m2+alpha-1)", safe_div(p, P), true, false);
  e.relations.push_back({"gamma > delta > 1", e.odi_gamma,
                         gt(e.odi_gamma, e.odi_delta) && gt(e.odi_delta, one), true,
                         "gamma = " + format_scalar(e.odi_gamma) + ", delta = " + format_scalar(e.odi_delta)});
  unit("theta_bar", e.theta_bar, true, false);
  unit("sigma*theta_bar/2", T(e.sigma * e.theta_bar / two), true, false);
  unit("(p+m3-1)/p", safe_div(p + sp.m3 - one, p), h4a, relaxed);
  return e;
}

template <class T>
ExponentSet<T> compute_exponents(const StructuralParams<T>& sp, const T& pfrak_choice, const T& p_choice) {
  const auto report = check_assumptions(sp);
  if (!report.lemma_hypotheses()) throw RegimeError("exponent set needs H1 and one of H2-H4");
  auto e = evaluate_exponents(sp, pfrak_choice, p_choice);
  e.p_bar = compute_pbar(sp, pfrak_choice).value;
  if (auto bad = e.violations(); !bad.empty()) {
    std::string msg = "violated:";
    for (const auto* r : bad) msg += " [" + r->name + ": " + r->detail + "]";
    throw ExponentInequalityViolation(msg);
  }
  return e;
}

/// Compares the alpha-thresholds of the present blow-up condition and of the
/// earlier linear-sensitivity result (both with m2 = m3 = 1).
template <class T>
Improvement compare_with_wang(const StructuralParams<T>& p) {
  if (!eq(p.m2, T(1)) || !eq(p.m3, T(1))) throw RegimeError("comparison needs m2 = m3 = 1");
  using detail::tmax;
  const T one(1), zero(0);
  const T k2n = two_over_n(p) * p.k;
  const T ours = ge(p.m1, zero) ? tmax(T(p.m1 + k2n - one), T(p.k - one)) : tmax(T(k2n - one), T(p.k - one));
  const T theirs = gt(p.m1, one) ? tmax(T(p.m1 + k2n - one), T(p.k - one)) : tmax(k2n, T(p.k - one));
  if (eq(ours, theirs)) return Improvement::same;
  return lt(ours, theirs) ? Improvement::strictly_larger : Improvement::not_comparable;
}

/// Human-readable block.
template <class T>
std::string render(const RegimeReport& r, const StructuralParams<T>& p) {
  std::ostringstream os;
  os << "regime classification (n = " << p.n << ")\n";
  for (int i = 0; i < 5; ++i)
    os << "  H" << (i + 1) << ": " << (r.h[i].holds ? "holds" : "fails") << "  (" << r.h[i].detail << ")\n";
  os << "  energy path: " << to_string(r.path) << "\n";
  os << "  " << (r.blowup_predicted ? "blow-up predicted" : "no blow-up prediction") << "\n";
  if (r.improvement_over_wang) os << "  comparison with linear-sensitivity result: " << to_string(*r.improvement_over_wang) << "\n";
  return os.str();
}

}  // namespace chemlab::regimes
