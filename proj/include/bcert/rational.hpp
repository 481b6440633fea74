#pragma once

#include <gmpxx.h>

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>

#include "bcert/error.hpp"

namespace bcert {

using Rational = mpq_class;

/// Exact value of a decimal literal such as "-1.25e-3".
inline Rational rational_from_decimal(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  std::string digits;
  long exponent10 = 0;
  bool seen_digit = false;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    digits.push_back(text[i++]);
    seen_digit = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      digits.push_back(text[i++]);
      --exponent10;
      seen_digit = true;
    }
  }
  if (!seen_digit) {
    throw SyntaxError("malformed number '" + std::string(text) + "'");
  }
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      exp_negative = text[i] == '-';
      ++i;
    }
    long e = 0;
    bool any = false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      e = e * 10 + (text[i++] - '0');
      any = true;
      if (e > 100000) throw SyntaxError("exponent out of range in '" + std::string(text) + "'");
    }
    if (!any) throw SyntaxError("malformed exponent in '" + std::string(text) + "'");
    exponent10 += exp_negative ? -e : e;
  }
  if (i != text.size()) {
    throw SyntaxError("malformed number '" + std::string(text) + "'");
  }
  mpz_class numerator(digits, 10);
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(exponent10)));
  Rational q;
  if (exponent10 >= 0) {
    q = Rational(numerator * scale);
  } else {
    q = Rational(numerator, scale);
    q.canonicalize();
  }
  return negative ? Rational(-q) : q;
}

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Rational equal to the shortest decimal representation of `v`, so that 0.1
/// maps to 1/10 instead of its binary expansion.
inline Rational rational_from_double(double v) {
  if (!std::isfinite(v)) throw SyntaxError("non-finite number");
  return rational_from_decimal(format_double(v));
}

/// Exact binary value of `v`.
inline Rational rational_exact(double v) {
  if (!std::isfinite(v)) throw SyntaxError("non-finite number");
  return Rational(v);
}

/// Nearest double to `q` (mpq_get_d truncates, so neighbours are compared).
inline double to_double(const Rational& q) {
  double d = q.get_d();
  if (!std::isfinite(d)) return d;
  double best = d;
  Rational best_err = abs(q - Rational(d));
  for (double cand : {std::nextafter(d, HUGE_VAL), std::nextafter(d, -HUGE_VAL)}) {
    if (!std::isfinite(cand)) continue;
    Rational err = abs(q - Rational(cand));
    if (err < best_err) {
      best_err = err;
      best = cand;
    }
  }
  return best;
}

inline std::string to_string(const Rational& q) { return q.get_str(); }

}  // namespace bcert
