#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

#include "chemlab/errors.hpp"

namespace chemlab {

using Rational = boost::multiprecision::cpp_rational;

/// Parses "81/50", "-149/100", "12", "1.62" or "2.5e-3" exactly.
inline Rational parse_rational(std::string_view text) {
  auto fail = [&] { return InvalidParameter("not a rational literal: '" + std::string(text) + "'"); };
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw fail();

  if (auto slash = s.find('/'); slash != std::string::npos) {
    Rational num = parse_rational(s.substr(0, slash));
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw fail();
    return num / den;
  }

  std::size_t i = 0;
  bool negative = false;
  if (s[i] == '+' || s[i] == '-') negative = (s[i++] == '-');
  boost::multiprecision::cpp_int digits = 0;
  int decimals = 0;
  bool any = false, dot = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits = digits * 10 + (c - '0');
      any = true;
      if (dot) ++decimals;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (!any) throw fail();
  long exponent = 0;
  if (i < s.size()) {
    if (s[i] != 'e' && s[i] != 'E') throw fail();
    std::string rest = s.substr(i + 1);
    if (rest.empty()) throw fail();
    std::size_t used = 0;
    try {
      exponent = std::stol(rest, &used);
    } catch (const std::exception&) {
      throw fail();
    }
    if (used != rest.size()) throw fail();
  }
  exponent -= decimals;
  Rational value(digits);
  boost::multiprecision::cpp_int scale = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                    static_cast<unsigned>(std::labs(exponent)));
  value = exponent >= 0 ? value * Rational(scale) : value / Rational(scale);
  return negative ? Rational(-value) : value;
}

inline std::string to_string(const Rational& q) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (denominator(q) == 1) return numerator(q).str();
  return numerator(q).str() + "/" + denominator(q).str();
}

inline double to_double(const Rational& q) { return q.convert_to<double>(); }
inline double to_double(double x) { return x; }

/// Comparison policy: exact for rationals, 1e-12 relative slack for doubles.
template <class T>
struct Compare;

template <>
struct Compare<double> {
  static constexpr double kSlack = 1e-12;
  static double tol(double a, double b) { return kSlack * std::max({1.0, std::abs(a), std::abs(b)}); }
  static bool greater(double a, double b) { return a - b > tol(a, b); }
  static bool greater_equal(double a, double b) { return a - b >= -tol(a, b); }
  static bool equal(double a, double b) { return std::abs(a - b) <= tol(a, b); }
};

template <>
struct Compare<Rational> {
  static bool greater(const Rational& a, const Rational& b) { return a > b; }
  static bool greater_equal(const Rational& a, const Rational& b) { return a >= b; }
  static bool equal(const Rational& a, const Rational& b) { return a == b; }
};

template <class T>
bool gt(const T& a, const T& b) { return Compare<T>::greater(a, b); }
template <class T>
bool ge(const T& a, const T& b) { return Compare<T>::greater_equal(a, b); }
template <class T>
bool lt(const T& a, const T& b) { return Compare<T>::greater(b, a); }
template <class T>
bool le(const T& a, const T& b) { return Compare<T>::greater_equal(b, a); }
template <class T>
bool eq(const T& a, const T& b) { return Compare<T>::equal(a, b); }

inline std::string format_scalar(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
inline std::string format_scalar(const Rational& q) { return to_string(q); }

}  // namespace chemlab
