#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "bcert/system.hpp"

namespace bcert::app {

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::optional<std::size_t> left_space_at;  // first index outside X
};

namespace detail {

inline std::vector<RealPoly> real_all(const PolyVector& f) {
  std::vector<RealPoly> out;
  for (const auto& p : f) out.push_back(to_real(p));
  return out;
}

inline std::vector<std::vector<RealPoly>> real_all(const PolyMatrix& m) {
  std::vector<std::vector<RealPoly>> out;
  for (const auto& row : m) out.push_back(real_all(row));
  return out;
}

inline double eval_at(const RealPoly& p, std::span<const double> x) {
  if (p.is_zero()) return 0.0;
  return evaluate(p, x);
}

inline bool inside(const Box& box, const std::vector<double>& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < to_double(box.lower[i]) || x[i] > to_double(box.upper[i])) return false;
  }
  return true;
}

}  // namespace detail

/// Samples a trajectory. Discrete classes iterate the map for `horizon`
/// steps (rounded); continuous classes integrate to time `horizon` with
/// Euler-Maruyama steps of `dt_step`:
///   x += f dt + delta sqrt(dt) N(0, I) + rho Poisson(w dt).
/// Leaving X is recorded, not fatal.
inline Trajectory simulate_trajectory(const SystemSpec& sys, const Box& space, const std::vector<double>& x0, double horizon,
                                      double dt_step, std::uint64_t seed) {
  check_system(sys);
  const std::size_t n = dynamics(sys).size();
  if (x0.size() != n) throw DimensionMismatch("x0 has " + std::to_string(x0.size()) + " entries, expected " + std::to_string(n));
  if (!detail::inside(space, x0)) throw InvalidProblem("x0 lies outside the state set");
  if (!(horizon >= 0)) throw InvalidProblem("horizon must be nonnegative");
  const SystemClass cls = system_class(sys);
  const bool continuous = cls == SystemClass::kCtDs || cls == SystemClass::kCtSs;
  if (continuous && !(dt_step > 0)) throw InvalidProblem("dt_step must be positive for continuous classes");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Trajectory tr;
  std::vector<double> x = x0;
  const std::size_t steps = continuous ? static_cast<std::size_t>(std::llround(horizon / dt_step))
                                       : static_cast<std::size_t>(std::llround(horizon));
  const double h = continuous ? dt_step : 1.0;
  tr.times.push_back(0.0);
  tr.states.push_back(x);

  const auto f = detail::real_all(dynamics(sys));
  std::vector<std::vector<RealPoly>> delta, rho;
  std::vector<double> rates;
  NoiseSpec noise;
  if (const auto* s = std::get_if<CtSs>(&sys)) {
    delta = detail::real_all(s->delta);
    rho = detail::real_all(s->rho);
    for (const auto& w : s->rates) rates.push_back(to_double(w));
  }
  std::size_t noise_dim = 0;
  if (const auto* s = std::get_if<DtSs>(&sys)) {
    noise = s->noise;
    noise_dim = f[0].vars()->noise_count();
  }
  auto draw = [&](std::size_t k) {
    switch (noise.kind) {
      case NoiseKind::kNormal: {
        std::normal_distribution<double> d(to_double(noise.mean[k]), to_double(noise.sigma[k]));
        return d(rng);
      }
      case NoiseKind::kUniform: {
        std::uniform_real_distribution<double> d(to_double(noise.a[k]), to_double(noise.b[k]));
        return d(rng);
      }
      case NoiseKind::kExponential: {
        std::exponential_distribution<double> d(to_double(noise.rate[k]));
        return d(rng);
      }
    }
    return 0.0;
  };

  std::vector<double> point(n + noise_dim), next(n);
  for (std::size_t step = 1; step <= steps; ++step) {
    if (!continuous) {
      std::copy(x.begin(), x.end(), point.begin());
      for (std::size_t k = 0; k < noise_dim; ++k) point[n + k] = draw(k);
      for (std::size_t i = 0; i < n; ++i) next[i] = detail::eval_at(f[i], point);
    } else {
      for (std::size_t i = 0; i < n; ++i) next[i] = x[i] + h * detail::eval_at(f[i], x);
      if (!delta.empty()) {
        std::vector<double> dw(delta[0].size());
        for (auto& v : dw) v = std::sqrt(h) * gauss(rng);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < dw.size(); ++k) next[i] += detail::eval_at(delta[i][k], x) * dw[k];
        }
      }
      if (!rho.empty()) {
        std::vector<double> jumps(rates.size());
        for (std::size_t k = 0; k < rates.size(); ++k) {
          std::poisson_distribution<int> d(rates[k] * h);
          jumps[k] = rates[k] > 0 ? d(rng) : 0;
        }
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < jumps.size(); ++k) next[i] += detail::eval_at(rho[i][k], x) * jumps[k];
        }
      }
    }
    x = next;
    tr.times.push_back(static_cast<double>(step) * h);
    tr.states.push_back(x);
    if (!tr.left_space_at && !detail::inside(space, x)) tr.left_space_at = step;
  }
  return tr;
}

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
  nlohmann::json j;
  j["times"] = t.times;
  j["states"] = t.states;
  j["left_space_at"] = t.left_space_at ? nlohmann::json(*t.left_space_at) : nlohmann::json(nullptr);
  return j;
}

/// Values of a two-dimensional barrier on a regular grid, for contouring.
/// values[j][i] = B(xs[i], ys[j]); a single sample sits at the lower corner.
struct LevelSetGrid {
  std::vector<double> xs, ys;
  std::vector<std::vector<double>> values;
  double gamma = 0, lambda = 0;
  Box box;
};

inline LevelSetGrid level_set_grid(const RealPoly& b, double gamma, double lambda, const Box& box, std::size_t resolution) {
  if (box.dimension() != 2 || (b.vars() && b.vars()->state_count() != 2)) {
    throw NotTwoDimensional("level-set grids need a two-dimensional state space");
  }
  if (resolution == 0) throw InvalidProblem("resolution must be >= 1");
  LevelSetGrid g;
  g.gamma = gamma;
  g.lambda = lambda;
  g.box = box;
  auto axis = [&](std::size_t d) {
    std::vector<double> v;
    const double lo = to_double(box.lower[d]), hi = to_double(box.upper[d]);
    for (std::size_t i = 0; i < resolution; ++i) {
      v.push_back(resolution == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1));
    }
    return v;
  };
  g.xs = axis(0);
  g.ys = axis(1);
  for (double y : g.ys) {
    std::vector<double> row;
    for (double x : g.xs) row.push_back(evaluate(b, {x, y}));
    g.values.push_back(std::move(row));
  }
  return g;
}

inline nlohmann::json grid_to_json(const LevelSetGrid& g) {
  nlohmann::json j;
  j["x"] = g.xs;
  j["y"] = g.ys;
  j["values"] = g.values;
  j["gamma"] = g.gamma;
  j["lambda"] = g.lambda;
  j["resolution"] = g.xs.size();
  j["box"] = {{"lower", {to_double(g.box.lower[0]), to_double(g.box.lower[1])}},
              {"upper", {to_double(g.box.upper[0]), to_double(g.box.upper[1])}}};
  return j;
}

}  // namespace bcert::app
