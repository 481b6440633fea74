#pragma once

#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "bcert/error.hpp"
#include "bcert/moments.hpp"
#include "bcert/polynomial.hpp"
#include "bcert/sos.hpp"

namespace bcert {

// ---------------------------------------------------------------------------
// Boxes
// ---------------------------------------------------------------------------

/// Axis-aligned box [lower, upper] in R^n.
struct Box {
  std::vector<Rational> lower, upper;

  std::size_t dimension() const { return lower.size(); }

  void check(const std::string& what) const {
    if (lower.size() != upper.size()) throw DimensionMismatch(what + ": bounds have different lengths");
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (lower[i] > upper[i]) throw EmptyBox(what + ": lower bound exceeds upper bound in dimension " + std::to_string(i + 1));
    }
  }

  bool contains(const Box& o) const {
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (o.lower[i] < lower[i] || o.upper[i] > upper[i]) return false;
    }
    return true;
  }

  /// Closed boxes: touching faces count as intersecting.
  bool intersects(const Box& o) const {
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (o.upper[i] < lower[i] || o.lower[i] > upper[i]) return false;
    }
    return true;
  }

  SemiAlgebraicSet to_set(const VarTablePtr& vars) const { return box_to_semialgebraic(lower, upper, vars); }

  friend bool operator==(const Box& a, const Box& b) { return a.lower == b.lower && a.upper == b.upper; }
};

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

using PolyVector = std::vector<RationalPoly>;
/// Row-major: `m[i][k]` is entry (i, k).
using PolyMatrix = std::vector<std::vector<RationalPoly>>;

/// x(k+1) = f(x(k), varsigma(k)); f lives on a state+noise table.
struct DtSs {
  PolyVector f;
  NoiseSpec noise;
};

/// x(k+1) = f(x(k)).
struct DtDs {
  PolyVector f;
};

/// dx = f dt + delta dW + rho dP, with Poisson rates `rates`.
struct CtSs {
  PolyVector f;
  PolyMatrix delta;  // n x b
  PolyMatrix rho;    // n x r
  std::vector<Rational> rates;
};

/// dx/dt = f(x).
struct CtDs {
  PolyVector f;
};

using SystemSpec = std::variant<DtSs, DtDs, CtSs, CtDs>;

enum class SystemClass { kDtSs, kDtDs, kCtSs, kCtDs };

inline std::string to_string(SystemClass c) {
  switch (c) {
    case SystemClass::kDtSs: return "dt-SS";
    case SystemClass::kDtDs: return "dt-DS";
    case SystemClass::kCtSs: return "ct-SS";
    case SystemClass::kCtDs: return "ct-DS";
  }
  return "?";
}

inline SystemClass system_class(const SystemSpec& s) { return static_cast<SystemClass>(s.index()); }

inline bool is_stochastic(SystemClass c) { return c == SystemClass::kDtSs || c == SystemClass::kCtSs; }

inline const PolyVector& dynamics(const SystemSpec& s) {
  return std::visit([](const auto& sys) -> const PolyVector& { return sys.f; }, s);
}

/// State table of a system (the noise variables are stripped for dt-SS).
inline VarTablePtr state_table(const SystemSpec& s) {
  const PolyVector& f = dynamics(s);
  if (f.empty() || !f[0].vars()) throw DimensionMismatch("system has no dynamics");
  const VariableTable& t = *f[0].vars();
  if (t.noise_count() == 0) return f[0].vars();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < t.state_count(); ++i) names.push_back(t.name(i));
  return std::make_shared<const VariableTable>(names, std::vector<std::string>{});
}

/// Checks the dimension invariants of a system.
inline void check_system(const SystemSpec& s) {
  const PolyVector& f = dynamics(s);
  if (f.empty()) throw DimensionMismatch("dynamics are empty");
  const VarTablePtr& vars = f[0].vars();
  if (!vars) throw DimensionMismatch("dynamics have no variable table");
  const std::size_t n = vars->state_count();
  if (f.size() != n) {
    throw DimensionMismatch("dynamics have " + std::to_string(f.size()) + " components for " + std::to_string(n) + " states");
  }
  for (const auto& fi : f) {
    if (!same_table(fi.vars(), vars)) throw DimensionMismatch("dynamics components use different variable tables");
  }
  std::visit(
      [&](const auto& sys) {
        using T = std::decay_t<decltype(sys)>;
        if constexpr (std::is_same_v<T, DtSs>) {
          if (vars->noise_count() > sys.noise.dimension()) {
            throw DimensionMismatch("noise specification covers fewer variables than the dynamics use");
          }
          sys.noise.validate();
        } else {
          if (vars->noise_count() != 0) throw DimensionMismatch("deterministic or continuous dynamics cannot use noise variables");
        }
        if constexpr (std::is_same_v<T, CtSs>) {
          auto check_matrix = [&](const PolyMatrix& m, const char* name) {
            if (m.empty()) return std::size_t{0};
            if (m.size() != n) throw DimensionMismatch(std::string(name) + " must have " + std::to_string(n) + " rows");
            for (const auto& row : m) {
              if (row.size() != m[0].size()) throw DimensionMismatch(std::string(name) + " rows have different lengths");
              for (const auto& e : row) {
                if (e.vars() && !same_table(e.vars(), vars)) throw DimensionMismatch(std::string(name) + " uses a foreign table");
              }
            }
            return m[0].size();
          };
          check_matrix(sys.delta, "delta");
          const std::size_t r = check_matrix(sys.rho, "rho");
          if (r != sys.rates.size()) {
            throw DimensionMismatch("rho has " + std::to_string(r) + " columns but " + std::to_string(sys.rates.size()) + " rates are given");
          }
          for (const auto& w : sys.rates) {
            if (sgn(w) < 0) throw DimensionMismatch("Poisson rates must be nonnegative");
          }
        }
      },
      s);
}

// ---------------------------------------------------------------------------
// Operators on barrier candidates
// ---------------------------------------------------------------------------

namespace detail {

inline std::map<std::size_t, RationalPoly> bindings_of(const PolyVector& f) {
  std::map<std::size_t, RationalPoly> out;
  for (std::size_t i = 0; i < f.size(); ++i) out.emplace(i, f[i]);
  return out;
}

}  // namespace detail

/// L_f B = grad(B) . f
inline RationalPoly lie_derivative(const RationalPoly& b, const PolyVector& f) {
  if (f.empty()) throw DimensionMismatch("empty vector field");
  const VarTablePtr& vars = f[0].vars();
  if (!b.vars() || b.vars()->size() != f.size() || vars->size() != f.size()) {
    throw DimensionMismatch("barrier has " + std::to_string(b.vars() ? b.vars()->size() : 0) + " variables, vector field has " +
                            std::to_string(f.size()) + " components");
  }
  RationalPoly out(vars);
  const RationalPoly bb = b.retabled(vars);
  for (std::size_t i = 0; i < f.size(); ++i) out += differentiate(bb, i) * f[i];
  return out;
}

/// Generator of the jump-diffusion:
///   grad(B) f + 1/2 Tr(delta delta^T Hess(B)) + sum_j w_j (B(x + rho e_j) - B(x)).
inline RationalPoly infinitesimal_generator(const RationalPoly& b, const CtSs& sys) {
  RationalPoly out = lie_derivative(b, sys.f);
  const VarTablePtr& vars = sys.f[0].vars();
  const RationalPoly bb = b.retabled(vars);
  const std::size_t n = sys.f.size();
  if (!sys.delta.empty()) {
    if (sys.delta.size() != n) throw DimensionMismatch("delta must have one row per state");
    const std::size_t cols = sys.delta[0].size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        RationalPoly s(vars);  // (delta delta^T)_ij
        for (std::size_t k = 0; k < cols; ++k) {
          if (sys.delta[i][k].is_zero() || sys.delta[j][k].is_zero()) continue;
          s += sys.delta[i][k] * sys.delta[j][k];
        }
        if (s.is_zero()) continue;
        RationalPoly h = differentiate2(bb, i, j);
        // Off-diagonal entries appear twice in the trace.
        out += (s * h).scaled(Rational(i == j ? 1 : 2, 2));
      }
    }
  }
  if (!sys.rho.empty()) {
    if (sys.rho.size() != n) throw DimensionMismatch("rho must have one row per state");
    const std::size_t r = sys.rho[0].size();
    if (r != sys.rates.size()) throw DimensionMismatch("rho columns and rates differ in count");
    for (std::size_t j = 0; j < r; ++j) {
      if (sgn(sys.rates[j]) == 0) continue;
      std::map<std::size_t, RationalPoly> shift;
      for (std::size_t i = 0; i < n; ++i) shift.emplace(i, RationalPoly::variable(vars, i) + sys.rho[i][j]);
      out += (substitute(bb, shift) - bb).scaled(sys.rates[j]);
    }
  }
  return out;
}

/// E[B(f(x, varsigma)) | x].
inline RationalPoly expected_next(const RationalPoly& b, const DtSs& sys, const VarTablePtr& state) {
  if (!b.vars() || b.vars()->size() != sys.f.size()) throw DimensionMismatch("barrier and dynamics dimensions differ");
  const RationalPoly composed = substitute(b, detail::bindings_of(sys.f));
  if (composed.vars()->noise_count() == 0) return composed.retabled(state);
  return expect_over_noise(composed, sys.noise, state);
}

/// B(f(x)).
inline RationalPoly next_value(const RationalPoly& b, const DtDs& sys) {
  if (!b.vars() || b.vars()->size() != sys.f.size()) throw DimensionMismatch("barrier and dynamics dimensions differ");
  return substitute(b, detail::bindings_of(sys.f));
}

/// The quantity the class condition bounds from above:
/// E[B(f)] - B, B(f) - B, LB or L_f B. Linear in B.
inline RationalPoly barrier_increase(const RationalPoly& b, const SystemSpec& sys) {
  const VarTablePtr state = state_table(sys);
  const RationalPoly bs = b.retabled(state);
  return std::visit(
      [&](const auto& s) -> RationalPoly {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DtSs>) {
          return expected_next(bs, s, state) - bs;
        } else if constexpr (std::is_same_v<T, DtDs>) {
          return next_value(bs, s) - bs;
        } else if constexpr (std::is_same_v<T, CtSs>) {
          return infinitesimal_generator(bs, s);
        } else {
          return lie_derivative(bs, s.f);
        }
      },
      sys);
}

// ---------------------------------------------------------------------------
// Coordinate normalization x = center + half .* u
// ---------------------------------------------------------------------------

struct Normalization {
  std::vector<Rational> center, half;

  static Normalization identity(std::size_t n) { return {std::vector<Rational>(n, Rational(0)), std::vector<Rational>(n, Rational(1))}; }

  /// Maps `box` onto [-1, 1]^n. Degenerate widths keep unit scale.
  static Normalization of(const Box& box) {
    Normalization z;
    for (std::size_t i = 0; i < box.dimension(); ++i) {
      Rational c = (box.lower[i] + box.upper[i]) / 2;
      Rational h = (box.upper[i] - box.lower[i]) / 2;
      if (sgn(h) == 0) h = 1;
      z.center.push_back(c);
      z.half.push_back(h);
    }
    return z;
  }

  /// x_i -> center_i + half_i * x_i over `vars` (first n variables).
  std::map<std::size_t, RationalPoly> to_x(const VarTablePtr& vars) const {
    std::map<std::size_t, RationalPoly> out;
    for (std::size_t i = 0; i < center.size(); ++i) {
      out.emplace(i, RationalPoly::constant(vars, center[i]) + RationalPoly::variable(vars, i).scaled(half[i]));
    }
    return out;
  }

  /// x_i -> (x_i - center_i) / half_i.
  std::map<std::size_t, RationalPoly> to_u(const VarTablePtr& vars) const {
    std::map<std::size_t, RationalPoly> out;
    for (std::size_t i = 0; i < center.size(); ++i) {
      Rational inv = 1 / half[i];
      out.emplace(i, RationalPoly::variable(vars, i).scaled(inv) - RationalPoly::constant(vars, center[i] * inv));
    }
    return out;
  }

  Box box_to_u(const Box& b) const {
    Box out;
    for (std::size_t i = 0; i < center.size(); ++i) {
      out.lower.push_back((b.lower[i] - center[i]) / half[i]);
      out.upper.push_back((b.upper[i] - center[i]) / half[i]);
    }
    return out;
  }

  std::vector<double> point_to_u(std::span<const double> x) const {
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = (x[i] - center[i].get_d()) / half[i].get_d();
    return u;
  }

  /// B(x) from B~(u).
  template <class Coeff>
  Polynomial<Coeff> barrier_to_x(const Polynomial<Coeff>& bu) const {
    std::map<std::size_t, Polynomial<Coeff>> m;
    for (auto& [i, p] : to_u(bu.vars())) m.emplace(i, p.template map_coefficients<Coeff>([](const Rational& c) {
      if constexpr (std::is_same_v<Coeff, double>) {
        return to_double(c);
      } else {
        return Coeff(c);
      }
    }));
    return substitute(bu, m);
  }

  /// The same system written in u = (x - center) / half.
  SystemSpec system_to_u(const SystemSpec& sys) const {
    const VarTablePtr& vars = dynamics(sys)[0].vars();
    const auto to_x_map = to_x(vars);
    // Maps-to-state quantities shift and scale; rates-of-change only scale.
    auto state_map = [&](const PolyVector& f) {
      PolyVector out;
      for (std::size_t i = 0; i < f.size(); ++i) {
        out.push_back((substitute(f[i], to_x_map) - RationalPoly::constant(vars, center[i])).scaled(Rational(1) / half[i]));
      }
      return out;
    };
    auto rate_map = [&](const PolyVector& f) {
      PolyVector out;
      for (std::size_t i = 0; i < f.size(); ++i) out.push_back(substitute(f[i], to_x_map).scaled(Rational(1) / half[i]));
      return out;
    };
    auto matrix_map = [&](const PolyMatrix& m) {
      PolyMatrix out = m;
      for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t k = 0; k < m[i].size(); ++k) {
          RationalPoly e = m[i][k].vars() ? m[i][k] : RationalPoly(vars);
          out[i][k] = substitute(e, to_x_map).scaled(Rational(1) / half[i]);
        }
      }
      return out;
    };
    return std::visit(
        [&](const auto& s) -> SystemSpec {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, DtSs>) {
            return DtSs{state_map(s.f), s.noise};
          } else if constexpr (std::is_same_v<T, DtDs>) {
            return DtDs{state_map(s.f)};
          } else if constexpr (std::is_same_v<T, CtSs>) {
            return CtSs{rate_map(s.f), matrix_map(s.delta), matrix_map(s.rho), s.rates};
          } else {
            return CtDs{rate_map(s.f)};
          }
        },
        sys);
  }
};

}  // namespace bcert
