#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "bcert/polynomial.hpp"

namespace bcert {

namespace detail {

// Recursive-descent parser over
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary (('^' | '**') unary)?
//   primary := number | identifier | '(' expr ')'
// Exponents must reduce to nonnegative integer constants and divisors to
// nonzero constants.
class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, VarTablePtr vars) : text_(text), vars_(std::move(vars)) {}

  RationalPoly parse() {
    skip_space();
    if (pos_ == text_.size()) fail("empty expression");
    RationalPoly p = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool peek_is(std::string_view s) {
    skip_space();
    return text_.substr(pos_, s.size()) == s;
  }

  RationalPoly parse_expr() {
    RationalPoly acc = parse_term();
    for (;;) {
      if (accept('+')) {
        acc += parse_term();
      } else if (accept('-')) {
        acc -= parse_term();
      } else {
        return acc;
      }
    }
  }

  RationalPoly parse_term() {
    RationalPoly acc = parse_unary();
    for (;;) {
      if (peek_is("**")) return acc;  // handled by parse_power
      if (accept('*')) {
        acc = acc * parse_unary();
      } else if (accept('/')) {
        const std::size_t at = pos_;
        RationalPoly d = parse_unary();
        if (d.degree() > 0) {
          pos_ = at;
          throw NonPolynomial("division by a non-constant expression in '" + std::string(text_) + "'");
        }
        if (d.is_zero()) throw NonPolynomial("division by zero in '" + std::string(text_) + "'");
        Rational inv = 1 / d.coefficient(Monomial(vars_->size()));
        acc = acc.scaled(inv);
      } else {
        return acc;
      }
    }
  }

  RationalPoly parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  RationalPoly parse_power() {
    RationalPoly base = parse_primary();
    bool is_pow = false;
    if (peek_is("**")) {
      pos_ += 2;
      is_pow = true;
    } else if (accept('^')) {
      is_pow = true;
    }
    if (!is_pow) return base;
    RationalPoly e = parse_unary();
    if (e.degree() > 0) throw NonPolynomial("non-constant exponent in '" + std::string(text_) + "'");
    Rational k = e.is_zero() ? Rational(0) : e.coefficient(Monomial(vars_->size()));
    if (k.get_den() != 1 || sgn(k) < 0) {
      throw NonPolynomial("exponent " + k.get_str() + " is not a nonnegative integer in '" + std::string(text_) + "'");
    }
    if (k > 64) throw NonPolynomial("exponent " + k.get_str() + " too large");
    return pow(base, static_cast<unsigned>(k.get_num().get_ui()));
  }

  RationalPoly parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      RationalPoly inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  RationalPoly parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    Rational q = rational_from_decimal(text_.substr(start, pos_ - start));
    return RationalPoly::constant(vars_, q);
  }

  RationalPoly parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      throw NonPolynomial("function call '" + name + "(...)' is not polynomial");
    }
    auto idx = vars_->find(name);
    if (!idx) throw UnknownSymbol("undeclared identifier '" + name + "' in '" + std::string(text_) + "'");
    return RationalPoly::variable(vars_, *idx);
  }

  std::string_view text_;
  VarTablePtr vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a polynomial expression over the declared variables and returns it
/// expanded in canonical form.
inline RationalPoly parse_polynomial(std::string_view text, const VarTablePtr& vars) {
  return detail::ExpressionParser(text, vars).parse();
}

}  // namespace bcert
