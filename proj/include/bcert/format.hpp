#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "bcert/polynomial.hpp"

namespace bcert {

namespace detail {

inline std::string coefficient_text(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// Terms by descending total degree; within one degree, basis order
// (x1^2 before x1*x2 before x2^2).
template <class Coeff>
std::vector<std::pair<Monomial, Coeff>> display_order(const Polynomial<Coeff>& p) {
  std::vector<std::pair<Monomial, Coeff>> out(p.terms().begin(), p.terms().end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.first.degree() > b.first.degree(); });
  return out;
}

}  // namespace detail

/// Canonical text form, highest degree first, e.g.
/// `3.0*x1^2*x2 - 0.5`. Coefficients use the shortest round-trip decimal
/// so parsing the text reproduces the same doubles.
inline std::string to_text(const RealPoly& p) {
  if (p.is_zero()) return "0.0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [m, c] : detail::display_order(p)) {
    const bool negative = c < 0;
    if (first) {
      if (negative) out << "-";
    } else {
      out << (negative ? " - " : " + ");
    }
    out << detail::coefficient_text(negative ? -c : c);
    for (std::size_t v = 0; v < m.size(); ++v) {
      if (m[v] == 0) continue;
      out << "*" << p.vars()->name(v);
      if (m[v] > 1) out << "^" << m[v];
    }
    first = false;
  }
  return out.str();
}

inline std::string to_text(const RationalPoly& p) { return to_text(to_real(p)); }

/// One term of the structured form: exponents per variable and the
/// coefficient as a decimal string.
struct TermRecord {
  std::vector<unsigned> exponents;
  std::string coeff;
};

inline std::vector<TermRecord> to_records(const RealPoly& p) {
  std::vector<TermRecord> out;
  for (const auto& [m, c] : detail::display_order(p)) {
    TermRecord r;
    r.exponents.assign(m.exponents().begin(), m.exponents().end());
    r.coeff = format_double(c);
    out.push_back(std::move(r));
  }
  return out;
}

inline RealPoly from_records(const std::vector<TermRecord>& records, const VarTablePtr& vars) {
  RealPoly p(vars);
  for (const auto& r : records) {
    if (r.exponents.size() != vars->size()) {
      throw DimensionMismatch("term has " + std::to_string(r.exponents.size()) + " exponents, expected " +
                              std::to_string(vars->size()));
    }
    std::vector<std::uint16_t> e(r.exponents.begin(), r.exponents.end());
    p.add_term(Monomial(std::move(e)), to_double(rational_from_decimal(r.coeff)));
  }
  return p;
}

}  // namespace bcert
