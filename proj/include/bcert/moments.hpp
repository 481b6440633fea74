#pragma once

#include <string>
#include <vector>

#include "bcert/polynomial.hpp"

namespace bcert {

enum class NoiseKind { kNormal, kUniform, kExponential };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kNormal:
      return "normal";
    case NoiseKind::kUniform:
      return "uniform";
    case NoiseKind::kExponential:
      return "exponential";
  }
  return "?";
}

/// Independent per-dimension noise. Only the vectors belonging to `kind` are
/// read: normal uses mean/sigma (standard deviations), uniform uses a/b,
/// exponential uses rate.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kNormal;
  std::vector<Rational> mean, sigma;
  std::vector<Rational> a, b;
  std::vector<Rational> rate;
  unsigned max_order = 16;

  static NoiseSpec normal(std::vector<Rational> mean, std::vector<Rational> sigma) {
    NoiseSpec s;
    s.kind = NoiseKind::kNormal;
    s.mean = std::move(mean);
    s.sigma = std::move(sigma);
    return s;
  }
  static NoiseSpec uniform(std::vector<Rational> a, std::vector<Rational> b) {
    NoiseSpec s;
    s.kind = NoiseKind::kUniform;
    s.a = std::move(a);
    s.b = std::move(b);
    return s;
  }
  static NoiseSpec exponential(std::vector<Rational> rate) {
    NoiseSpec s;
    s.kind = NoiseKind::kExponential;
    s.rate = std::move(rate);
    return s;
  }

  std::size_t dimension() const {
    switch (kind) {
      case NoiseKind::kNormal:
        return mean.size();
      case NoiseKind::kUniform:
        return a.size();
      case NoiseKind::kExponential:
        return rate.size();
    }
    return 0;
  }

  /// Throws ConfigError naming the offending field.
  void validate() const {
    switch (kind) {
      case NoiseKind::kNormal:
        if (mean.size() != sigma.size()) throw ConfigError("sigma: expected one entry per entry of mean");
        for (const auto& s : sigma) {
          if (sgn(s) < 0) throw ConfigError("sigma: standard deviations must be >= 0");
        }
        break;
      case NoiseKind::kUniform:
        if (a.size() != b.size()) throw ConfigError("b: expected one entry per entry of a");
        for (std::size_t i = 0; i < a.size(); ++i) {
          if (!(b[i] > a[i])) throw ConfigError("b: upper bound must exceed a in dimension " + std::to_string(i + 1));
        }
        break;
      case NoiseKind::kExponential:
        for (const auto& r : rate) {
          if (sgn(r) <= 0) throw ConfigError("rate: rates must be > 0");
        }
        break;
    }
  }
};

/// E[w_dim^k] for the given noise component, exact.
inline Rational raw_moment(const NoiseSpec& spec, std::size_t dim, unsigned k) {
  if (k > spec.max_order) {
    throw MomentOrderExceeded("moment order " + std::to_string(k) + " exceeds maximum " +
                              std::to_string(spec.max_order));
  }
  if (dim >= spec.dimension()) throw DimensionMismatch("noise dimension " + std::to_string(dim + 1) + " not specified");
  if (k == 0) return 1;
  switch (spec.kind) {
    case NoiseKind::kNormal: {
      const Rational& mu = spec.mean[dim];
      const Rational var = spec.sigma[dim] * spec.sigma[dim];
      Rational prev = 1, cur = mu;
      for (unsigned j = 2; j <= k; ++j) {
        Rational next = mu * cur + Rational(j - 1) * var * prev;
        prev = std::move(cur);
        cur = std::move(next);
      }
      return cur;
    }
    case NoiseKind::kUniform: {
      const Rational& lo = spec.a[dim];
      const Rational& hi = spec.b[dim];
      Rational hk = 1, lk = 1;
      for (unsigned j = 0; j <= k; ++j) {
        hk *= hi;
        lk *= lo;
      }
      return Rational(hk - lk) / (Rational(k + 1) * (hi - lo));
    }
    case NoiseKind::kExponential: {
      Rational out = 1;
      for (unsigned j = 1; j <= k; ++j) out *= Rational(j) / spec.rate[dim];
      return out;
    }
  }
  return 0;
}

/// Replaces every noise monomial by its expectation. `p` lives on a
/// state+noise table; the result lives on `state_vars`, whose names must be
/// the state prefix of p's table.
inline RationalPoly expect_over_noise(const RationalPoly& p, const NoiseSpec& spec, const VarTablePtr& state_vars) {
  RationalPoly out(state_vars);
  if (p.is_zero()) return out;
  const VariableTable& full = *p.vars();
  const std::size_t n = full.state_count();
  if (state_vars->size() != n || state_vars->noise_count() != 0) {
    throw DimensionMismatch("expectation target must be the state-only table");
  }
  if (full.noise_count() > spec.dimension()) {
    throw DimensionMismatch("noise specification covers " + std::to_string(spec.dimension()) + " of " +
                            std::to_string(full.noise_count()) + " noise variables");
  }
  std::vector<std::vector<Rational>> cache(full.noise_count());
  auto moment = [&](std::size_t j, unsigned k) -> const Rational& {
    auto& c = cache[j];
    while (c.size() <= k) c.push_back(raw_moment(spec, j, static_cast<unsigned>(c.size())));
    return c[k];
  };
  for (const auto& [m, c] : p.terms()) {
    Rational factor = c;
    for (std::size_t j = 0; j < full.noise_count(); ++j) {
      const unsigned k = m[n + j];
      if (k != 0) factor *= moment(j, k);
    }
    if (sgn(factor) == 0) continue;
    std::vector<std::uint16_t> e(m.exponents().begin(), m.exponents().begin() + static_cast<long>(n));
    out.add_term(Monomial(std::move(e)), factor);
  }
  return out;
}

}  // namespace bcert
