#pragma once

// Independent numerical oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "bcert/system.hpp"

namespace bcert::oracle {

// Independent oracle: composite 20-point Gauss-Legendre quadrature with
// nodes computed by Newton iteration on P_20.
class GaussLegendre {
 public:
  GaussLegendre() {
    constexpr int n = 20;
    for (int i = 1; i <= n; ++i) {
      double x = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
      double dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes_.push_back(x);
      weights_.push_back(2 / ((1 - x * x) * dp * dp));
    }
  }

  double integrate(const std::function<double(double)>& f, double lo, double hi, int panels) const {
    double sum = 0, h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      double mid = lo + (p + 0.5) * h;
      for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(mid + 0.5 * h * nodes_[i]);
    }
    return sum * 0.5 * h;
  }

 private:
  std::vector<double> nodes_, weights_;
};

inline double uniform_moment_oracle(double a, double b, int k) {
  GaussLegendre gl;
  return gl.integrate([&](double x) { return std::pow(x, k); }, a, b, 4) / (b - a);
}

inline double normal_moment_oracle(double mu, double sigma, int k, bool absolute = false) {
  GaussLegendre gl;
  auto f = [&](double x) {
    double z = (x - mu) / sigma;
    double v = std::pow(x, k);
    return (absolute ? std::abs(v) : v) * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi));
  };
  return gl.integrate(f, mu - 14 * sigma, mu + 14 * sigma, 400);
}

inline RationalPoly RandomPoly(std::size_t n, unsigned degree, std::mt19937& rng) {
  std::uniform_int_distribution<int> coef(-5, 5);
  RationalPoly p(VariableTable::standard(n));
  for (const auto& m : monomial_basis(n, degree)) {
    Rational c(coef(rng), 4);
    c.canonicalize();
    p.add_term(m, c);
  }
  return p;
}

inline std::vector<double> RandomPoint(const Box& box, std::mt19937& rng) {
  std::vector<double> x;
  for (std::size_t i = 0; i < box.dimension(); ++i) {
    std::uniform_real_distribution<double> d(to_double(box.lower[i]), to_double(box.upper[i]));
    x.push_back(d(rng));
  }
  return x;
}

// Oracle: one Euler-Maruyama step, expectation by tensor Gauss-Hermite
// quadrature (exact for the polynomial degrees used), extrapolated difference
// quotient; jumps evaluated pointwise.
inline double GeneratorOracle(const RealPoly& b, const CtSs& sys, const std::vector<double>& x) {
  const std::size_t n = x.size();
  auto eval = [&](const RationalPoly& p, const std::vector<double>& pt) {
    return p.vars() ? evaluate(to_real(p), std::span<const double>(pt)) : 0.0;
  };
  const std::size_t cols = sys.delta.empty() ? 0 : sys.delta[0].size();
  const std::vector<double> nodes = {0.0, std::sqrt(3.0), -std::sqrt(3.0)};
  const std::vector<double> weights = {2.0 / 3, 1.0 / 6, 1.0 / 6};
  auto expected_step = [&](double h) {
    double total = 0;
    std::size_t combos = 1;
    for (std::size_t k = 0; k < cols; ++k) combos *= 3;
    for (std::size_t idx = 0; idx < combos; ++idx) {
      std::size_t rest = idx;
      double w = 1;
      std::vector<double> z(cols);
      for (std::size_t k = 0; k < cols; ++k) {
        z[k] = nodes[rest % 3];
        w *= weights[rest % 3];
        rest /= 3;
      }
      std::vector<double> next(x);
      for (std::size_t i = 0; i < n; ++i) {
        next[i] += h * eval(sys.f[i], x);
        for (std::size_t k = 0; k < cols; ++k) next[i] += std::sqrt(h) * eval(sys.delta[i][k], x) * z[k];
      }
      total += w * evaluate(b, std::span<const double>(next));
    }
    return (total - evaluate(b, std::span<const double>(x))) / h;
  };
  // The difference quotient is a polynomial in h of degree < deg(B), so
  // Neville extrapolation to h = 0 from five nodes is exact up to rounding.
  std::vector<double> hs, ds;
  for (int k = 1; k <= 5; ++k) {
    hs.push_back(1e-2 * k);
    ds.push_back(expected_step(hs.back()));
  }
  for (std::size_t level = 1; level < hs.size(); ++level) {
    for (std::size_t i = hs.size() - 1; i >= level; --i) {
      ds[i] = (hs[i] * ds[i - 1] - hs[i - level] * ds[i]) / (hs[i] - hs[i - level]);
    }
  }
  double out = ds.back();
  for (std::size_t j = 0; j < sys.rates.size(); ++j) {
    std::vector<double> jumped(x);
    for (std::size_t i = 0; i < n; ++i) jumped[i] += eval(sys.rho[i][j], x);
    out += to_double(sys.rates[j]) *
           (evaluate(b, std::span<const double>(jumped)) - evaluate(b, std::span<const double>(x)));
  }
  return out;
}

// d/dt B(x + t f(x)) at t = 0 by the five-point central stencil, which is
// exact for polynomials of degree <= 4 in t. The step is scaled by |f(x)| so
// that x + t f(x) stays near x for fast dynamics.
inline double LieOracle(const RealPoly& b, const PolyVector& f, const std::vector<double>& x, double step = 1e-3) {
  std::vector<double> fx;
  double norm = 0;
  for (const auto& fi : f) {
    fx.push_back(evaluate(to_real(fi), std::span<const double>(x)));
    norm = std::max(norm, std::abs(fx.back()));
  }
  const double h = step / std::max(1.0, norm);
  auto at = [&](double t) {
    std::vector<double> y(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += t * fx[i];
    return evaluate(b, std::span<const double>(y));
  };
  return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

}  // namespace bcert::oracle
