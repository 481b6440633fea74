#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bcert/error.hpp"
#include "bcert/rational.hpp"

namespace bcert {

// ---------------------------------------------------------------------------
// Variables
// ---------------------------------------------------------------------------

/// Ordered state names (x1..xn) followed by noise names (varsigma1..varsigmam).
class VariableTable {
 public:
  VariableTable(std::vector<std::string> state_names, std::vector<std::string> noise_names = {})
      : state_(std::move(state_names)), noise_(std::move(noise_names)) {
    if (state_.empty()) throw DimensionMismatch("a variable table needs at least one state");
    for (std::size_t i = 0; i < size(); ++i) {
      if (!index_.emplace(name(i), i).second) {
        throw DimensionMismatch("duplicate variable name '" + name(i) + "'");
      }
    }
  }

  /// x1..xn and varsigma1..varsigmam.
  static std::shared_ptr<const VariableTable> standard(std::size_t n, std::size_t m = 0) {
    std::vector<std::string> s, w;
    for (std::size_t i = 1; i <= n; ++i) s.push_back("x" + std::to_string(i));
    for (std::size_t i = 1; i <= m; ++i) w.push_back("varsigma" + std::to_string(i));
    return std::make_shared<const VariableTable>(std::move(s), std::move(w));
  }

  std::size_t size() const { return state_.size() + noise_.size(); }
  std::size_t state_count() const { return state_.size(); }
  std::size_t noise_count() const { return noise_.size(); }
  bool is_noise(std::size_t i) const { return i >= state_.size(); }

  const std::string& name(std::size_t i) const {
    return i < state_.size() ? state_[i] : noise_[i - state_.size()];
  }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::string>& state_names() const { return state_; }
  const std::vector<std::string>& noise_names() const { return noise_; }

  friend bool operator==(const VariableTable& a, const VariableTable& b) {
    return a.state_ == b.state_ && a.noise_ == b.noise_;
  }

 private:
  std::vector<std::string> state_;
  std::vector<std::string> noise_;
  std::unordered_map<std::string, std::size_t> index_;
};

using VarTablePtr = std::shared_ptr<const VariableTable>;

inline bool same_table(const VarTablePtr& a, const VarTablePtr& b) {
  return a == b || (a && b && *a == *b);
}

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

/// Exponent vector over a variable table. Ordered graded-lexicographically:
/// lower total degree first, then x1 before x2 within a degree
/// (1 < x1 < x2 < x1^2 < x1*x2 < x2^2).
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::size_t nvars) : exps_(nvars, 0) {}
  explicit Monomial(std::vector<std::uint16_t> exps) : exps_(std::move(exps)) {
    degree_ = std::accumulate(exps_.begin(), exps_.end(), 0u);
  }

  static Monomial variable(std::size_t nvars, std::size_t index, unsigned power = 1) {
    Monomial m(nvars);
    m.exps_[index] = static_cast<std::uint16_t>(power);
    m.degree_ = power;
    return m;
  }

  std::size_t size() const { return exps_.size(); }
  unsigned degree() const { return degree_; }
  unsigned operator[](std::size_t i) const { return exps_[i]; }
  const std::vector<std::uint16_t>& exponents() const { return exps_; }

  void set(std::size_t i, unsigned e) {
    degree_ = degree_ - exps_[i] + e;
    exps_[i] = static_cast<std::uint16_t>(e);
  }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    Monomial r(a.exps_);
    for (std::size_t i = 0; i < b.exps_.size(); ++i) r.exps_[i] += b.exps_[i];
    r.degree_ = a.degree_ + b.degree_;
    return r;
  }

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.exps_ == b.exps_; }

  friend bool operator<(const Monomial& a, const Monomial& b) {
    if (a.degree_ != b.degree_) return a.degree_ < b.degree_;
    return b.exps_ < a.exps_;
  }

 private:
  std::vector<std::uint16_t> exps_;
  unsigned degree_ = 0;
};

/// All monomials of total degree <= d in the first n of `nvars` variables, in
/// graded-lex order. Count is C(n+d, d).
inline std::vector<Monomial> monomial_basis(std::size_t n, unsigned d, std::size_t nvars = 0) {
  if (n == 0) throw DimensionMismatch("monomial basis needs n >= 1");
  if (nvars == 0) nvars = n;
  std::vector<Monomial> out;
  std::vector<std::uint16_t> e(nvars, 0);
  // Distributes `left` over variables i..n-1, highest power on the earliest
  // variable first.
  auto fill = [&](auto&& self, std::size_t i, unsigned left) -> void {
    if (i + 1 == n) {
      e[i] = static_cast<std::uint16_t>(left);
      out.emplace_back(e);
      e[i] = 0;
      return;
    }
    for (int k = static_cast<int>(left); k >= 0; --k) {
      e[i] = static_cast<std::uint16_t>(k);
      self(self, i + 1, left - k);
    }
    e[i] = 0;
  };
  for (unsigned deg = 0; deg <= d; ++deg) fill(fill, 0, deg);
  return out;
}

inline std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// ---------------------------------------------------------------------------
// Coefficient operations. Overloaded per coefficient type; other coefficient
// types (sos::AffineExpr) provide the same set through ADL.
// ---------------------------------------------------------------------------

inline bool coeff_is_zero(const Rational& c) { return sgn(c) == 0; }
inline bool coeff_is_zero(double c) { return c == 0.0; }
inline Rational coeff_mul(const Rational& a, const Rational& b) { return a * b; }
inline double coeff_mul(double a, double b) { return a * b; }
inline Rational coeff_scale(const Rational& a, long k) { return a * k; }
inline double coeff_scale(double a, long k) { return a * static_cast<double>(k); }

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

template <class Coeff>
class Polynomial;

/// Mixed-coefficient product; `Out` must be constructible from
/// coeff_mul(A, B).
template <class Out, class A, class B>
Polynomial<Out> multiply(const Polynomial<A>& a, const Polynomial<B>& b);

/// Sparse polynomial. Terms are kept in graded-lex order with no zero
/// coefficients. Values are immutable once built and safe to share.
template <class Coeff>
class Polynomial {
 public:
  using Terms = std::map<Monomial, Coeff>;

  Polynomial() = default;
  explicit Polynomial(VarTablePtr vars) : vars_(std::move(vars)) {}

  static Polynomial constant(VarTablePtr vars, const Coeff& c) {
    Polynomial p(vars);
    p.add_term(Monomial(p.nvars()), c);
    return p;
  }

  static Polynomial variable(VarTablePtr vars, std::size_t index) {
    Polynomial p(vars);
    if (index >= p.nvars()) throw DimensionMismatch("variable index out of range");
    p.add_term(Monomial::variable(p.nvars(), index), Coeff(1));
    return p;
  }

  static Polynomial monomial(VarTablePtr vars, const Monomial& m, const Coeff& c) {
    Polynomial p(vars);
    p.add_term(m, c);
    return p;
  }

  const VarTablePtr& vars() const { return vars_; }
  std::size_t nvars() const { return vars_ ? vars_->size() : 0; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  /// Total degree; -1 for the zero polynomial.
  int degree() const { return terms_.empty() ? -1 : static_cast<int>(terms_.rbegin()->first.degree()); }

  Coeff coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Coeff(0) : it->second;
  }

  void add_term(const Monomial& m, const Coeff& c) {
    if (coeff_is_zero(c)) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second = it->second + c;
      if (coeff_is_zero(it->second)) terms_.erase(it);
    }
  }

  Polynomial& operator+=(const Polynomial& o) {
    adopt_table(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }

  Polynomial& operator-=(const Polynomial& o) {
    adopt_table(o);
    for (const auto& [m, c] : o.terms_) add_term(m, Coeff(-c));
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }

  friend Polynomial operator-(const Polynomial& a) {
    Polynomial r(a.vars_);
    for (const auto& [m, c] : a.terms_) r.terms_.emplace_hint(r.terms_.end(), m, Coeff(-c));
    return r;
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    return multiply<Coeff>(a, b);
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    if (!a.terms_.empty() || !b.terms_.empty()) {
      if (!same_table(a.vars_, b.vars_)) return false;
    }
    return a.terms_ == b.terms_;
  }

  /// Multiplies every coefficient by `k`.
  template <class K>
  Polynomial scaled(const K& k) const {
    Polynomial r(vars_);
    for (const auto& [m, c] : terms_) r.add_term(m, Coeff(coeff_mul(c, k)));
    return r;
  }

  /// Applies `fn` to each coefficient, dropping terms that become zero.
  template <class Out, class Fn>
  Polynomial<Out> map_coefficients(Fn&& fn) const {
    Polynomial<Out> r(vars_);
    for (const auto& [m, c] : terms_) r.add_term(m, fn(c));
    return r;
  }

  /// Same terms reinterpreted over another table with identical leading
  /// variables. Used to move state-only polynomials between a state table and
  /// a state+noise table.
  Polynomial retabled(VarTablePtr target) const {
    Polynomial r(target);
    for (const auto& [m, c] : terms_) {
      std::vector<std::uint16_t> e(target->size(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == 0) continue;
        if (i >= target->size() || target->name(i) != vars_->name(i)) {
          throw DimensionMismatch("variable '" + vars_->name(i) + "' has no counterpart in target table");
        }
        e[i] = static_cast<std::uint16_t>(m[i]);
      }
      r.add_term(Monomial(std::move(e)), c);
    }
    return r;
  }

 private:
  void adopt_table(const Polynomial& o) {
    if (!vars_) {
      vars_ = o.vars_;
    } else if (o.vars_ && !same_table(vars_, o.vars_)) {
      throw DimensionMismatch("polynomials over different variable tables");
    }
  }

  VarTablePtr vars_;
  Terms terms_;
};

template <class Out, class A, class B>
Polynomial<Out> multiply(const Polynomial<A>& a, const Polynomial<B>& b) {
  VarTablePtr vars = a.vars() ? a.vars() : b.vars();
  if (a.vars() && b.vars() && !same_table(a.vars(), b.vars())) {
    throw DimensionMismatch("polynomials over different variable tables");
  }
  Polynomial<Out> r(vars);
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) r.add_term(ma * mb, Out(coeff_mul(ca, cb)));
  }
  return r;
}

using RationalPoly = Polynomial<Rational>;
using RealPoly = Polynomial<double>;

/// Integer power by repeated squaring.
template <class Coeff>
Polynomial<Coeff> pow(const Polynomial<Coeff>& p, unsigned k) {
  Polynomial<Coeff> result = Polynomial<Coeff>::constant(p.vars(), Coeff(1));
  Polynomial<Coeff> base = p;
  while (k > 0) {
    if (k & 1u) result = result * base;
    k >>= 1u;
    if (k > 0) base = base * base;
  }
  return result;
}

/// Formal partial derivative of order 1 or 2 in one variable.
template <class Coeff>
Polynomial<Coeff> differentiate(const Polynomial<Coeff>& p, std::size_t var, unsigned order = 1) {
  if (var >= p.nvars()) throw DimensionMismatch("derivative variable out of range");
  Polynomial<Coeff> r(p.vars());
  for (const auto& [m, c] : p.terms()) {
    const unsigned e = m[var];
    if (e < order) continue;
    long factor = 1;
    for (unsigned j = 0; j < order; ++j) factor *= static_cast<long>(e - j);
    Monomial dm = m;
    dm.set(var, e - order);
    r.add_term(dm, coeff_scale(c, factor));
  }
  return r;
}

/// Mixed second derivative d^2 p / (dx_i dx_j).
template <class Coeff>
Polynomial<Coeff> differentiate2(const Polynomial<Coeff>& p, std::size_t i, std::size_t j) {
  if (i == j) return differentiate(p, i, 2);
  return differentiate(differentiate(p, i), j);
}

/// Composition p(g_1, ..., g_k): every variable of `p` that appears in
/// `bindings` is replaced, others are kept. When the binding polynomials live
/// on a different table than `p`, every variable that occurs in `p` must be
/// bound and the result lives on the bindings' table.
template <class Coeff, class G>
Polynomial<Coeff> substitute(const Polynomial<Coeff>& p, const std::map<std::size_t, Polynomial<G>>& bindings) {
  VarTablePtr out_vars = p.vars();
  for (const auto& [v, g] : bindings) {
    if (v >= p.nvars()) throw DimensionMismatch("binding for unknown variable index");
    if (g.vars()) {
      out_vars = g.vars();
      break;
    }
  }
  const bool same = same_table(out_vars, p.vars());

  // Cached powers of each binding.
  std::vector<std::vector<Polynomial<G>>> powers(p.nvars());
  auto power_of = [&](std::size_t v, unsigned e) -> const Polynomial<G>& {
    auto& cache = powers[v];
    if (cache.empty()) {
      auto it = bindings.find(v);
      Polynomial<G> base;
      if (it != bindings.end()) {
        base = it->second;
        if (!base.vars()) base = Polynomial<G>(out_vars);
      } else if (same) {
        base = Polynomial<G>::variable(out_vars, v);
      } else {
        throw DimensionMismatch("variable '" + p.vars()->name(v) + "' is not bound");
      }
      cache.push_back(Polynomial<G>::constant(out_vars, G(1)));
      cache.push_back(std::move(base));
    }
    while (cache.size() <= e) cache.push_back(cache.back() * cache[1]);
    return cache[e];
  };

  Polynomial<Coeff> r(out_vars);
  for (const auto& [m, c] : p.terms()) {
    Polynomial<G> prod = Polynomial<G>::constant(out_vars, G(1));
    for (std::size_t v = 0; v < m.size(); ++v) {
      if (m[v] == 0) continue;
      prod = prod * power_of(v, m[v]);
    }
    for (const auto& [pm, pc] : prod.terms()) r.add_term(pm, Coeff(coeff_mul(c, pc)));
  }
  return r;
}

/// Evaluates at a point whose length equals the table size.
template <class Coeff>
double evaluate(const Polynomial<Coeff>& p, std::span<const double> point) {
  if (p.is_zero()) {
    if (p.vars() && point.size() != p.nvars()) {
      throw DimensionMismatch("point has " + std::to_string(point.size()) + " entries, expected " +
                              std::to_string(p.nvars()));
    }
    return 0.0;
  }
  if (point.size() != p.nvars()) {
    throw DimensionMismatch("point has " + std::to_string(point.size()) + " entries, expected " +
                            std::to_string(p.nvars()));
  }
  const unsigned max_deg = static_cast<unsigned>(p.degree());
  // powers[v][k] = point[v]^k
  std::vector<double> powers(point.size() * (max_deg + 1));
  for (std::size_t v = 0; v < point.size(); ++v) {
    double acc = 1.0;
    for (unsigned k = 0; k <= max_deg; ++k) {
      powers[v * (max_deg + 1) + k] = acc;
      acc *= point[v];
    }
  }
  double sum = 0.0;
  for (const auto& [m, c] : p.terms()) {
    double term;
    if constexpr (std::is_same_v<Coeff, double>) {
      term = c;
    } else {
      term = to_double(c);
    }
    for (std::size_t v = 0; v < m.size(); ++v) {
      if (m[v] != 0) term *= powers[v * (max_deg + 1) + m[v]];
    }
    sum += term;
  }
  return sum;
}

template <class Coeff>
double evaluate(const Polynomial<Coeff>& p, std::initializer_list<double> point) {
  std::vector<double> v(point);
  return evaluate(p, std::span<const double>(v));
}

inline RealPoly to_real(const RationalPoly& p) {
  return p.map_coefficients<double>([](const Rational& c) { return to_double(c); });
}

/// Exact rational image of a double-coefficient polynomial.
inline RationalPoly to_rational_exact(const RealPoly& p) {
  return p.map_coefficients<Rational>([](double c) { return rational_exact(c); });
}

/// Largest absolute coefficient difference between two polynomials over the
/// same table.
inline double max_coefficient_difference(const RealPoly& a, const RealPoly& b) {
  double worst = 0.0;
  for (const auto& [m, c] : a.terms()) worst = std::max(worst, std::abs(c - b.coefficient(m)));
  for (const auto& [m, c] : b.terms()) {
    if (a.terms().find(m) == a.terms().end()) worst = std::max(worst, std::abs(c));
  }
  return worst;
}

/// True when no term involves a noise variable.
template <class Coeff>
bool is_state_only(const Polynomial<Coeff>& p) {
  for (const auto& [m, c] : p.terms()) {
    for (std::size_t v = p.vars()->state_count(); v < m.size(); ++v) {
      if (m[v] != 0) return false;
    }
  }
  return true;
}

}  // namespace bcert
