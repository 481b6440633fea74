#pragma once

#include <map>
#include <string>
#include <vector>

#include "bcert/polynomial.hpp"
#include "bcert/sdp.hpp"

namespace bcert {

// ---------------------------------------------------------------------------
// Affine expressions over program decision variables
// ---------------------------------------------------------------------------

/// constant + sum_v coeff_v * var_v with exact coefficients.
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(int c) : constant_(c) {}  // NOLINT(google-explicit-constructor)
  AffineExpr(const Rational& c) : constant_(c) {}  // NOLINT(google-explicit-constructor)

  static AffineExpr variable(int id, const Rational& coeff = 1) {
    AffineExpr e;
    e.add(id, coeff);
    return e;
  }

  const Rational& constant() const { return constant_; }
  const std::map<int, Rational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty() && sgn(constant_) == 0; }
  bool is_constant() const { return terms_.empty(); }

  void add(int id, const Rational& coeff) {
    if (sgn(coeff) == 0) return;
    auto [it, inserted] = terms_.try_emplace(id, coeff);
    if (!inserted) {
      it->second += coeff;
      if (sgn(it->second) == 0) terms_.erase(it);
    }
  }

  AffineExpr& operator+=(const AffineExpr& o) {
    constant_ += o.constant_;
    for (const auto& [id, c] : o.terms_) add(id, c);
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& o) {
    constant_ -= o.constant_;
    for (const auto& [id, c] : o.terms_) add(id, -c);
    return *this;
  }
  AffineExpr& operator*=(const Rational& k) {
    if (sgn(k) == 0) {
      terms_.clear();
      constant_ = 0;
      return *this;
    }
    constant_ *= k;
    for (auto& [id, c] : terms_) c *= k;
    return *this;
  }

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator-(AffineExpr a) { return a *= Rational(-1); }
  friend AffineExpr operator*(AffineExpr a, const Rational& k) { return a *= k; }
  friend AffineExpr operator*(const Rational& k, AffineExpr a) { return a *= k; }
  friend bool operator==(const AffineExpr& a, const AffineExpr& b) {
    return a.constant_ == b.constant_ && a.terms_ == b.terms_;
  }

  /// Value under an assignment of all referenced variables.
  template <class Values>
  double value(const Values& vals) const {
    double acc = to_double(constant_);
    for (const auto& [id, c] : terms_) acc += to_double(c) * vals[id];
    return acc;
  }

 private:
  Rational constant_ = 0;
  std::map<int, Rational> terms_;
};

inline bool coeff_is_zero(const AffineExpr& e) { return e.is_zero(); }
inline AffineExpr coeff_mul(const AffineExpr& a, const Rational& k) { return a * k; }
inline AffineExpr coeff_mul(const Rational& k, const AffineExpr& a) { return a * k; }
inline AffineExpr coeff_scale(const AffineExpr& a, long k) { return a * Rational(k); }

using AffinePoly = Polynomial<AffineExpr>;

inline AffinePoly to_affine(const RationalPoly& p) {
  return p.map_coefficients<AffineExpr>([](const Rational& c) { return AffineExpr(c); });
}

/// sum_k coeffs[k] * images[k], where coeffs are affine and images are exact.
/// This is how linear operators act on unknown-coefficient polynomials.
inline AffinePoly combine(const std::vector<AffineExpr>& coeffs, const std::vector<RationalPoly>& images,
                          const VarTablePtr& vars) {
  std::map<Monomial, AffineExpr> acc;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (coeffs[k].is_zero()) continue;
    for (const auto& [m, r] : images[k].terms()) acc[m] += coeffs[k] * r;
  }
  AffinePoly out(vars);
  for (auto& [m, e] : acc) out.add_term(m, e);
  return out;
}

// ---------------------------------------------------------------------------
// Sets and unknowns
// ---------------------------------------------------------------------------

/// {x : g_k(x) >= 0 for all k}.
struct SemiAlgebraicSet {
  std::vector<RationalPoly> inequalities;
};

/// [x_i - L_i, U_i - x_i] for every dimension.
inline SemiAlgebraicSet box_to_semialgebraic(const std::vector<Rational>& lower, const std::vector<Rational>& upper,
                                             const VarTablePtr& vars) {
  if (lower.size() != upper.size()) throw DimensionMismatch("box bounds have different lengths");
  if (lower.size() != vars->state_count()) {
    throw DimensionMismatch("box has " + std::to_string(lower.size()) + " bounds, expected " +
                            std::to_string(vars->state_count()));
  }
  SemiAlgebraicSet s;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (lower[i] > upper[i]) {
      throw EmptyBox("lower bound " + lower[i].get_str() + " exceeds upper bound " + upper[i].get_str() +
                     " in dimension " + std::to_string(i + 1));
    }
    RationalPoly x = RationalPoly::variable(vars, i);
    s.inequalities.push_back(x - RationalPoly::constant(vars, lower[i]));
    s.inequalities.push_back(RationalPoly::constant(vars, upper[i]) - x);
  }
  return s;
}

struct UnknownPoly {
  AffinePoly poly;
  std::vector<Monomial> basis;      // monomials of `poly` (free) or Gram half-basis (SOS)
  std::vector<AffineExpr> coeffs;   // coefficient of each monomial of degree <= degree, in basis order
  std::vector<Monomial> monomials;  // full monomial list matching `coeffs`
  int gram_block = -1;
  unsigned degree = 0;
  bool sos = false;
};

enum class GramPadding {
  kTrim,  // basis degree floor(d/2): odd top degree must cancel
  kPad,   // basis degree ceil(d/2)
};

struct SosConstraint {
  AffinePoly expr;
  std::string label;
};

enum class ScalarKind { kFree, kNonnegative };

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

struct CompiledSos;

/// SOS program over the state variables of one table. Decision variables are
/// Gram entries, nonnegative scalars and free scalars; every constraint is
/// affine in them.
class SosProgram {
 public:
  enum class VarKind { kGram, kNonneg, kFree };
  struct VarInfo {
    VarKind kind;
    int block = -1;  // Gram block (program-local numbering)
    int row = 0, col = 0;
    std::string name;
  };

  explicit SosProgram(VarTablePtr vars) : vars_(std::move(vars)) {}

  const VarTablePtr& vars() const { return vars_; }
  std::size_t state_count() const { return vars_->state_count(); }
  const std::vector<VarInfo>& variables() const { return var_info_; }
  const std::vector<std::vector<Monomial>>& gram_bases() const { return gram_bases_; }
  const std::vector<std::string>& gram_labels() const { return gram_labels_; }
  const std::vector<SosConstraint>& sos_constraints() const { return sos_; }
  const std::vector<AffineExpr>& equalities() const { return eqs_; }
  const std::vector<AffineExpr>& inequalities() const { return ineqs_; }
  const AffineExpr& objective() const { return objective_; }
  bool has_objective() const { return has_objective_; }

  int new_scalar(const std::string& name, ScalarKind kind) {
    var_info_.push_back({kind == ScalarKind::kFree ? VarKind::kFree : VarKind::kNonneg, -1, 0, 0, name});
    return static_cast<int>(var_info_.size()) - 1;
  }

  /// Polynomial of total degree <= `degree` in the state variables with
  /// unknown coefficients; if `sos`, it is z^T Q z for a PSD Gram matrix Q over
  /// the half-degree basis z.
  UnknownPoly new_unknown_polynomial(unsigned degree, bool sos, const std::string& name = "p") {
    UnknownPoly u;
    u.degree = degree;
    u.sos = sos;
    const std::size_t n = state_count();
    u.monomials = monomial_basis(n, degree, vars_->size());
    std::map<Monomial, AffineExpr> acc;
    if (sos) {
      if (degree % 2 != 0) throw OddDegree("SOS polynomial '" + name + "' needs even degree, got " + std::to_string(degree));
      u.basis = monomial_basis(n, degree / 2, vars_->size());
      u.gram_block = new_gram_block(u.basis, name);
      const auto& ids = gram_vars_.back();
      const int d = static_cast<int>(u.basis.size());
      for (int p = 0; p < d; ++p) {
        for (int q = p; q < d; ++q) acc[u.basis[p] * u.basis[q]].add(ids[idx(p, q, d)], p == q ? 1 : 2);
      }
    } else {
      u.basis = u.monomials;
      for (std::size_t k = 0; k < u.monomials.size(); ++k) {
        acc[u.monomials[k]].add(new_scalar(name + "_c" + std::to_string(k), ScalarKind::kFree), 1);
      }
    }
    u.poly = AffinePoly(vars_);
    for (const auto& m : u.monomials) {
      auto it = acc.find(m);
      u.coeffs.push_back(it == acc.end() ? AffineExpr() : it->second);
      if (it != acc.end()) u.poly.add_term(m, it->second);
    }
    return u;
  }

  /// Requires `expr` to be SOS. Returns the constraint id.
  int add_sos_constraint(AffinePoly expr, std::string label = {}) {
    if (expr.vars() && !same_table(expr.vars(), vars_)) throw DimensionMismatch("SOS constraint over a foreign table");
    if (!is_state_only(expr)) throw DimensionMismatch("SOS constraint involves noise variables");
    if (label.empty()) label = "sos" + std::to_string(sos_.size());
    sos_.push_back({std::move(expr), std::move(label)});
    return static_cast<int>(sos_.size()) - 1;
  }

  /// e == 0.
  void add_equality(AffineExpr e) { eqs_.push_back(std::move(e)); }
  /// e >= 0.
  void add_inequality(AffineExpr e) { ineqs_.push_back(std::move(e)); }

  /// Minimize `e`.
  void set_objective(AffineExpr e) {
    objective_ = std::move(e);
    has_objective_ = true;
  }

  CompiledSos compile(GramPadding padding = GramPadding::kTrim) const;

  static int idx(int p, int q, int d) { return p * d - p * (p - 1) / 2 + (q - p); }

 private:
  friend struct CompiledSos;

  int new_gram_block(const std::vector<Monomial>& basis, const std::string& label) {
    const int block = static_cast<int>(gram_bases_.size());
    const int d = static_cast<int>(basis.size());
    std::vector<int> ids;
    for (int p = 0; p < d; ++p) {
      for (int q = p; q < d; ++q) {
        var_info_.push_back({VarKind::kGram, block, p, q, label});
        ids.push_back(static_cast<int>(var_info_.size()) - 1);
      }
    }
    gram_bases_.push_back(basis);
    gram_labels_.push_back(label);
    gram_vars_.push_back(std::move(ids));
    return block;
  }

  VarTablePtr vars_;
  std::vector<VarInfo> var_info_;
  std::vector<std::vector<Monomial>> gram_bases_;
  std::vector<std::string> gram_labels_;
  std::vector<std::vector<int>> gram_vars_;
  std::vector<SosConstraint> sos_;
  std::vector<AffineExpr> eqs_;
  std::vector<AffineExpr> ineqs_;
  AffineExpr objective_;
  bool has_objective_ = false;
};

/// SDP image of a program plus the bookkeeping needed to map a solution back.
struct CompiledSos {
  SdpProblem sdp;
  const SosProgram* program = nullptr;
  std::vector<int> lp_pos, lp_neg;  // per program variable; -1 when unused
  int first_constraint_block = 0;   // Gram blocks of SOS constraints follow the unknowns' blocks
  std::vector<std::vector<Monomial>> block_bases;
  std::vector<std::string> block_labels;
  std::vector<int> constraint_block;  // per SOS constraint; -1 if the expression is identically zero
  double objective_offset = 0;
};

/// Numeric solution of a compiled program.
class SosSolution {
 public:
  SosSolution() = default;
  SosSolution(const CompiledSos& c, SdpSolution s) : c_(&c), sdp_(std::move(s)) {
    const auto& vars = c.program->variables();
    values_.assign(vars.size(), 0.0);
    if (sdp_.blocks.size() != c.sdp.block_dims.size()) return;
    for (std::size_t v = 0; v < vars.size(); ++v) {
      if (vars[v].kind == SosProgram::VarKind::kGram) {
        values_[v] = sdp_.blocks[vars[v].block](vars[v].row, vars[v].col);
      } else {
        double x = c.lp_pos[v] >= 0 ? sdp_.lp[c.lp_pos[v]] : 0.0;
        if (c.lp_neg[v] >= 0) x -= sdp_.lp[c.lp_neg[v]];
        values_[v] = x;
      }
    }
  }

  SdpStatus status() const { return sdp_.status; }
  bool ok() const { return sdp_.ok(); }
  const SdpSolution& sdp() const { return sdp_; }
  const std::vector<double>& values() const { return values_; }

  double value(const AffineExpr& e) const { return e.value(values_); }
  double value(int var) const { return values_[var]; }

  RealPoly polynomial(const AffinePoly& p) const {
    return p.map_coefficients<double>([&](const AffineExpr& e) { return e.value(values_); });
  }

  /// Symmetric Gram matrix of SDP block `b`.
  Eigen::MatrixXd gram(int block) const {
    const Eigen::MatrixXd& m = sdp_.blocks[block];
    return 0.5 * (m + m.transpose());
  }

  /// z^T Q z for SDP block `b`.
  RealPoly gram_polynomial(int block) const {
    const auto& basis = c_->block_bases[block];
    const Eigen::MatrixXd q = gram(block);
    RealPoly out(c_->program->vars());
    for (std::size_t p = 0; p < basis.size(); ++p) {
      for (std::size_t r = 0; r < basis.size(); ++r) out.add_term(basis[p] * basis[r], q(p, r));
    }
    return out;
  }

  /// Largest coefficient gap between z^T Q z and the instantiated expression
  /// of SOS constraint `k`.
  double reconstruction_error(int k) const {
    const auto& con = c_->program->sos_constraints()[k];
    RealPoly expr = polynomial(con.expr);
    const int block = c_->constraint_block[k];
    if (block < 0) return max_coefficient_difference(expr, RealPoly(c_->program->vars()));
    return max_coefficient_difference(gram_polynomial(block), expr);
  }

 private:
  const CompiledSos* c_ = nullptr;
  SdpSolution sdp_;
  std::vector<double> values_;
};

inline CompiledSos SosProgram::compile(GramPadding padding) const {
  CompiledSos out;
  out.program = this;
  SdpProblem& sdp = out.sdp;
  const std::size_t n = state_count();

  // Unknowns' Gram blocks first, in creation order.
  for (const auto& basis : gram_bases_) {
    sdp.block_dims.push_back(static_cast<int>(basis.size()));
    out.block_bases.push_back(basis);
  }
  out.block_labels = gram_labels_;
  out.first_constraint_block = static_cast<int>(sdp.block_dims.size());

  // Scalars become LP variables; free ones are split.
  out.lp_pos.assign(var_info_.size(), -1);
  out.lp_neg.assign(var_info_.size(), -1);
  for (std::size_t v = 0; v < var_info_.size(); ++v) {
    if (var_info_[v].kind == VarKind::kGram) continue;
    out.lp_pos[v] = sdp.lp_dim++;
    if (var_info_[v].kind == VarKind::kFree) out.lp_neg[v] = sdp.lp_dim++;
  }

  // Appends  coeff * var  for a program variable to an SDP row.
  auto emit = [&](std::vector<SdpEntry>& row, int var, double coeff) {
    const VarInfo& info = var_info_[var];
    if (info.kind == VarKind::kGram) {
      row.push_back({info.block, info.row, info.col, info.row == info.col ? coeff : 0.5 * coeff});
    } else {
      row.push_back({kLpBlock, out.lp_pos[var], out.lp_pos[var], coeff});
      if (out.lp_neg[var] >= 0) row.push_back({kLpBlock, out.lp_neg[var], out.lp_neg[var], -coeff});
    }
  };
  // Row:  sum(extra) + e = 0  ->  entries with rhs -constant.
  auto emit_affine = [&](const AffineExpr& e, std::vector<SdpEntry>& row) {
    for (const auto& [var, c] : e.terms()) emit(row, var, to_double(c));
    return -to_double(e.constant());
  };

  for (const auto& e : eqs_) {
    std::vector<SdpEntry> row;
    double rhs = emit_affine(e, row);
    sdp.rows.push_back(std::move(row));
    sdp.rhs.push_back(rhs);
  }
  for (const auto& e : ineqs_) {
    std::vector<SdpEntry> row;
    double rhs = emit_affine(e, row);
    const int slack = sdp.lp_dim++;
    row.push_back({kLpBlock, slack, slack, -1.0});
    sdp.rows.push_back(std::move(row));
    sdp.rhs.push_back(rhs);
  }

  for (const auto& con : sos_) {
    const int deg = con.expr.degree();
    if (deg < 0) {
      out.constraint_block.push_back(-1);
      continue;
    }
    const unsigned half = padding == GramPadding::kTrim ? static_cast<unsigned>(deg) / 2 : (static_cast<unsigned>(deg) + 1) / 2;
    auto basis = monomial_basis(n, half, vars_->size());
    const int block = static_cast<int>(sdp.block_dims.size());
    const int d = static_cast<int>(basis.size());
    sdp.block_dims.push_back(d);
    out.block_bases.push_back(basis);
    out.block_labels.push_back(con.label);
    out.constraint_block.push_back(block);

    // One row per monomial: sum of Gram entries - expr coefficient = 0.
    std::map<Monomial, std::vector<SdpEntry>> rows;
    for (int p = 0; p < d; ++p) {
      for (int q = p; q < d; ++q) rows[basis[p] * basis[q]].push_back({block, p, q, 1.0});
    }
    std::map<Monomial, double> rhs;
    for (const auto& [m, e] : con.expr.terms()) {
      auto& row = rows[m];
      AffineExpr neg = -e;
      rhs[m] = emit_affine(neg, row);
    }
    for (auto& [m, row] : rows) {
      sdp.rows.push_back(std::move(row));
      auto it = rhs.find(m);
      sdp.rhs.push_back(it == rhs.end() ? 0.0 : it->second);
    }
  }

  if (has_objective_) {
    std::vector<SdpEntry> obj;
    for (const auto& [var, c] : objective_.terms()) emit(obj, var, to_double(c));
    sdp.objective = std::move(obj);
    out.objective_offset = to_double(objective_.constant());
  }
  return out;
}

/// Compiles and solves.
inline SosSolution solve(const CompiledSos& compiled, const SdpOptions& opt = {}) {
  return SosSolution(compiled, solve_sdp(compiled.sdp, opt));
}

}  // namespace bcert
