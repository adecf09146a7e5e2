#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "optstop/errors.hpp"

namespace optstop {

// Exact arithmetic backing the engine's "rational" mode. The stop-region test
// v = phi is an equality, so the oracle and every equality-sensitive code path
// run on this type; doubles are reserved for large lattices and Monte Carlo.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

namespace detail {

// Decimal integer with optional sign, accumulated digit by digit: cpp_int's
// own string constructor treats a leading zero as octal.
inline bool parse_decimal_int(const std::string& text, BigInt& out) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  if (i >= text.size()) return false;
  BigInt value = 0;
  for (; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
    value = value * 10 + (text[i] - '0');
  }
  out = negative ? BigInt(-value) : value;
  return true;
}

// Parses "p/q", integer, or decimal strings ("0.5", "-1.25e-2") into an exact
// rational. Decimal strings convert exactly via powers of ten.
inline Rational parse_rational(const std::string& text) {
  const auto bad = [&]() -> Rational {
    fail(Errc::MalformedSpec, "cannot parse numeric literal '" + text + "'");
  };
  if (text.empty()) return bad();

  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    if (slash == 0 || slash + 1 >= text.size()) return bad();
    BigInt num, den;
    if (!parse_decimal_int(text.substr(0, slash), num) ||
        !parse_decimal_int(text.substr(slash + 1), den) || den == 0)
      return bad();
    return Rational(num, den);
  }

  std::size_t i = 0;
  bool negative = false;
  if (text[i] == '+' || text[i] == '-') {
    negative = text[i] == '-';
    ++i;
  }
  std::string digits;
  long frac_len = 0;
  bool seen_digit = false, seen_dot = false;
  for (; i < text.size() && text[i] != 'e' && text[i] != 'E'; ++i) {
    const char c = text[i];
    if (c == '.') {
      if (seen_dot) return bad();
      seen_dot = true;
    } else if (c >= '0' && c <= '9') {
      digits.push_back(c);
      seen_digit = true;
      if (seen_dot) ++frac_len;
    } else {
      return bad();
    }
  }
  if (!seen_digit) return bad();
  long exp10 = 0;
  if (i < text.size()) {  // exponent part
    ++i;
    if (i >= text.size()) return bad();
    try {
      std::size_t used = 0;
      exp10 = std::stol(text.substr(i), &used);
      if (used != text.size() - i) return bad();
    } catch (const std::exception&) {
      return bad();
    }
  }
  BigInt mantissa;
  if (!parse_decimal_int(digits, mantissa)) return bad();
  if (negative) mantissa = -mantissa;
  const long shift = exp10 - frac_len;
  BigInt pow10 = 1;
  for (long k = 0; k < (shift < 0 ? -shift : shift); ++k) pow10 *= 10;
  return shift >= 0 ? Rational(mantissa * pow10) : Rational(mantissa, pow10);
}

inline double parse_double(const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    const Rational r = parse_rational(text);
    return r.convert_to<double>();
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size())
      fail(Errc::MalformedSpec, "cannot parse numeric literal '" + text + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(Errc::MalformedSpec, "cannot parse numeric literal '" + text + "'");
  }
}

}  // namespace detail

// Per-arithmetic-mode policy: comparison semantics, parsing, formatting.
//
// Equality conventions (see the double specialization): rational mode is
// always exact; float mode uses a relative tolerance with a unit absolute
// floor, 1e-12 for model-level identities and 1e-9 for the stopping-time
// equality tests v = phi and v = continuation, where a near-tie watch list
// is also kept.
template <class T>
struct ArithmeticTraits;

template <>
struct ArithmeticTraits<Rational> {
  static constexpr bool exact = true;
  static constexpr double model_tol = 0.0;
  static constexpr double stop_tol = 0.0;

  static const char* name() { return "rational"; }
  static bool eq(const Rational& a, const Rational& b, double = 0.0) { return a == b; }
  // "definitely less": in exact mode, plain order.
  static bool less(const Rational& a, const Rational& b, double = 0.0) { return a < b; }
  static bool near_tie(const Rational&, const Rational&, double = 0.0) { return false; }
  static Rational parse(const std::string& s) { return detail::parse_rational(s); }
  static std::string str(const Rational& v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static Rational from_double(double d) { return Rational(d); }  // exact binary expansion
  static Rational from_int(long long n) { return Rational(n); }
};

template <>
struct ArithmeticTraits<double> {
  static constexpr bool exact = false;
  static constexpr double model_tol = 1e-12;
  static constexpr double stop_tol = 1e-9;
  static constexpr double near_band = 1e-6;

  static const char* name() { return "float"; }

  static double scale(double a, double b) {
    double s = 1.0;
    if (std::fabs(a) > s) s = std::fabs(a);
    if (std::fabs(b) > s) s = std::fabs(b);
    return s;
  }
  static bool eq(double a, double b, double tol = model_tol) {
    return std::fabs(a - b) <= tol * scale(a, b);
  }
  static bool less(double a, double b, double tol = model_tol) {
    return (b - a) > tol * scale(a, b);
  }
  // Relative difference just beyond the stop tolerance: worth a warning,
  // because a silent float tie would flip a stop/continue decision.
  static bool near_tie(double a, double b, double tol = stop_tol) {
    const double rel = std::fabs(a - b) / scale(a, b);
    return rel > tol && rel <= near_band;
  }
  static double parse(const std::string& s) { return detail::parse_double(s); }
  static std::string str(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static double to_double(double v) { return v; }
  static double from_double(double d) { return d; }
  static double from_int(long long n) { return static_cast<double>(n); }
};

}  // namespace optstop
