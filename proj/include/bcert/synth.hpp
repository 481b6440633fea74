#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bcert/error.hpp"
#include "bcert/sdp.hpp"
#include "bcert/sos.hpp"
#include "bcert/system.hpp"

namespace bcert {

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

enum class SynthMode { kFeasibility, kOptimizeConfidence, kTargetConfidence };

inline std::string to_string(SynthMode m) {
  switch (m) {
    case SynthMode::kFeasibility: return "feasibility";
    case SynthMode::kOptimizeConfidence: return "optimize_confidence";
    case SynthMode::kTargetConfidence: return "target_confidence";
  }
  return "?";
}

struct SafetyProblem {
  Box space, initial;
  std::vector<Box> unsafe;
  std::optional<unsigned> horizon;  // T; stochastic classes only
  SynthMode mode = SynthMode::kFeasibility;
  Rational target_confidence = 0;  // phi_min in target mode
  unsigned b_degree = 2;
  std::optional<unsigned> l_degree;  // defaults to b_degree
  std::optional<Rational> gam, lam, c_val;
  Rational eps_gap = Rational(1, 1000000);
  GramPadding padding = GramPadding::kTrim;
  SdpOptions solver;

  unsigned multiplier_degree() const { return l_degree.value_or(b_degree); }
};

/// Validates `prob` against `sys`; returns non-fatal warnings.
inline std::vector<std::string> check_problem(const SystemSpec& sys, const SafetyProblem& prob) {
  check_system(sys);
  std::vector<std::string> warnings;
  const std::size_t n = dynamics(sys).size();
  auto check_box = [&](const Box& b, const std::string& what) {
    b.check(what);
    if (b.dimension() != n) {
      throw DimensionMismatch(what + " has " + std::to_string(b.dimension()) + " dimensions, system has " + std::to_string(n));
    }
  };
  check_box(prob.space, "state set");
  check_box(prob.initial, "initial set");
  if (prob.unsafe.empty()) throw InvalidProblem("at least one unsafe region is required");
  for (std::size_t j = 0; j < prob.unsafe.size(); ++j) check_box(prob.unsafe[j], "unsafe region " + std::to_string(j + 1));

  if (!prob.space.contains(prob.initial)) throw InvalidProblem("initial set is not contained in the state set");
  for (std::size_t j = 0; j < prob.unsafe.size(); ++j) {
    if (prob.initial.intersects(prob.unsafe[j])) {
      throw InvalidProblem("initial set intersects unsafe region " + std::to_string(j + 1));
    }
    if (!prob.space.contains(prob.unsafe[j])) {
      warnings.push_back("unsafe region " + std::to_string(j + 1) + " extends beyond the state set");
    }
  }
  if (prob.b_degree == 0 || prob.b_degree % 2 != 0) {
    throw OddDegree("barrier degree must be a positive even integer, got " + std::to_string(prob.b_degree));
  }
  if (prob.multiplier_degree() % 2 != 0) {
    throw OddDegree("multiplier degree must be even, got " + std::to_string(prob.multiplier_degree()));
  }
  const SystemClass cls = system_class(sys);
  if (is_stochastic(cls)) {
    if (!prob.horizon) throw InvalidProblem("t required for stochastic classes");
    if (prob.mode == SynthMode::kTargetConfidence &&
        (sgn(prob.target_confidence) < 0 || prob.target_confidence > 1)) {
      throw InvalidProblem("confidence must lie in [0, 1]");
    }
  }
  if (prob.lam && sgn(*prob.lam) <= 0) throw NonpositiveLambda("lam must be positive");
  if (prob.gam && sgn(*prob.gam) < 0) throw InvalidProblem("gam must be nonnegative");
  if (prob.c_val && sgn(*prob.c_val) < 0) throw InvalidProblem("c_val must be nonnegative");
  if (prob.gam && prob.lam && *prob.lam - *prob.gam < prob.eps_gap) {
    throw InvalidProblem("pinned lam must exceed pinned gam");
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// phi = clamp(1 - (gamma + c T) / lambda, 0, 1).
inline double confidence_bound(double gamma, double lambda, double c, double horizon) {
  if (!(lambda > 0)) throw NonpositiveLambda("lambda must be positive, got " + format_double(lambda));
  return std::clamp(1.0 - (gamma + c * horizon) / lambda, 0.0, 1.0);
}

/// Gram matrix certifying that one polynomial of the certificate is SOS.
struct SosWitness {
  enum class Kind { kBarrier, kInitialMultiplier, kUnsafeMultiplier, kSpaceMultiplier, kInitial, kUnsafe, kCondition };
  Kind kind = Kind::kBarrier;
  int region = 0;  // unsafe region index for kUnsafe*
  int index = 0;   // inequality index for multipliers
  std::vector<Monomial> basis;
  Eigen::MatrixXd gram;
};

inline std::string label(const SosWitness& w) {
  const std::string r = std::to_string(w.region + 1), k = std::to_string(w.index + 1);
  switch (w.kind) {
    case SosWitness::Kind::kBarrier: return "barrier";
    case SosWitness::Kind::kInitialMultiplier: return "l_initial[" + k + "]";
    case SosWitness::Kind::kUnsafeMultiplier: return "l_unsafe" + r + "[" + k + "]";
    case SosWitness::Kind::kSpaceMultiplier: return "l_space[" + k + "]";
    case SosWitness::Kind::kInitial: return "initial";
    case SosWitness::Kind::kUnsafe: return "unsafe" + r;
    case SosWitness::Kind::kCondition: return "condition";
  }
  return "?";
}

struct ValidationReport {
  bool ok = false;
  double min_gram_eigenvalue = std::numeric_limits<double>::infinity();
  double max_reconstruction_error = 0;
  // Worst sampled slack of each condition; negative means violated.
  double initial_margin = std::numeric_limits<double>::infinity();
  double unsafe_margin = std::numeric_limits<double>::infinity();
  double condition_margin = std::numeric_limits<double>::infinity();
  double level_gap = 0;
  std::size_t samples = 0;
  std::vector<std::string> failures;
};

struct ValidationOptions {
  std::size_t samples = 10000;
  double tol = 1e-6;
  std::uint64_t seed = 0x5eed;
};

struct Certificate {
  SystemClass system_class = SystemClass::kDtDs;
  unsigned degree = 0;
  RealPoly barrier;  // original coordinates
  double gamma = 0, lambda = 0, c = 0;
  std::optional<double> confidence;
  // Data in normalized coordinates u = (x - center) / half.
  Normalization normalization;
  RealPoly barrier_u;
  std::vector<RealPoly> initial_multipliers;
  std::vector<std::vector<RealPoly>> unsafe_multipliers;
  std::vector<RealPoly> space_multipliers;
  std::vector<SosWitness> witnesses;
  ValidationReport validation;
  SdpDiagnostics diagnostics;
  double solve_seconds = 0;
  double total_seconds = 0;
};

// ---------------------------------------------------------------------------
// Checking
// ---------------------------------------------------------------------------

namespace detail {

/// z^T Q z.
inline RealPoly gram_polynomial(const std::vector<Monomial>& basis, const Eigen::MatrixXd& q, const VarTablePtr& vars) {
  RealPoly out(vars);
  for (std::size_t p = 0; p < basis.size(); ++p) {
    for (std::size_t r = 0; r < basis.size(); ++r) out.add_term(basis[p] * basis[r], q(static_cast<long>(p), static_cast<long>(r)));
  }
  return out;
}

/// Sum_k l_k g_k.
inline RationalPoly localize(const std::vector<RealPoly>& l, const SemiAlgebraicSet& set, const VarTablePtr& vars) {
  if (l.size() != set.inequalities.size()) {
    throw InvalidCertificate("multiplier count " + std::to_string(l.size()) + " does not match " +
                             std::to_string(set.inequalities.size()) + " set inequalities");
  }
  RationalPoly out(vars);
  for (std::size_t k = 0; k < l.size(); ++k) out += to_rational_exact(l[k]).retabled(vars) * set.inequalities[k];
  return out;
}

struct NormalizedData {
  SystemSpec sys;
  VarTablePtr vars;
  SemiAlgebraicSet initial, space;
  std::vector<SemiAlgebraicSet> unsafe;
};

inline NormalizedData normalize(const SystemSpec& sys, const SafetyProblem& prob, const Normalization& z) {
  NormalizedData d{z.system_to_u(sys), nullptr, {}, {}, {}};
  d.vars = state_table(d.sys);
  d.initial = z.box_to_u(prob.initial).to_set(d.vars);
  d.space = z.box_to_u(prob.space).to_set(d.vars);
  for (const auto& b : prob.unsafe) d.unsafe.push_back(z.box_to_u(b).to_set(d.vars));
  return d;
}

/// The polynomial each witness must reproduce, rebuilt exactly from the
/// certificate's barrier, multipliers and levels.
inline RealPoly expected_witness_polynomial(const SosWitness& w, const Certificate& cert, const NormalizedData& d) {
  const VarTablePtr& vars = d.vars;
  auto at = [&](const auto& v, std::size_t i) -> const auto& {
    if (i >= v.size()) throw InvalidCertificate("witness " + label(w) + " refers to a missing polynomial");
    return v[i];
  };
  switch (w.kind) {
    case SosWitness::Kind::kBarrier: return cert.barrier_u;
    case SosWitness::Kind::kInitialMultiplier: return at(cert.initial_multipliers, w.index);
    case SosWitness::Kind::kUnsafeMultiplier: return at(at(cert.unsafe_multipliers, w.region), w.index);
    case SosWitness::Kind::kSpaceMultiplier: return at(cert.space_multipliers, w.index);
    default: break;
  }
  const RationalPoly b = to_rational_exact(cert.barrier_u).retabled(vars);
  RationalPoly e(vars);
  switch (w.kind) {
    case SosWitness::Kind::kInitial:
      e = RationalPoly::constant(vars, rational_exact(cert.gamma)) - b - localize(cert.initial_multipliers, d.initial, vars);
      break;
    case SosWitness::Kind::kUnsafe:
      e = b - RationalPoly::constant(vars, rational_exact(cert.lambda)) -
          localize(at(cert.unsafe_multipliers, w.region), at(d.unsafe, w.region), vars);
      break;
    case SosWitness::Kind::kCondition:
      e = RationalPoly::constant(vars, rational_exact(cert.c)) - barrier_increase(b, d.sys) -
          localize(cert.space_multipliers, d.space, vars);
      break;
    default: break;
  }
  return to_real(e);
}

/// Adjusts Q by the least Frobenius-norm change so that z^T Q z matches
/// `target` on every monomial z_p z_q.
inline void project_gram(const std::vector<Monomial>& basis, Eigen::MatrixXd& q, const RealPoly& target) {
  std::map<Monomial, std::vector<std::pair<int, int>>> pairs;
  const int d = static_cast<int>(basis.size());
  for (int p = 0; p < d; ++p) {
    for (int r = 0; r < d; ++r) pairs[basis[p] * basis[r]].emplace_back(p, r);
  }
  for (const auto& [m, list] : pairs) {
    double current = 0;
    for (auto [p, r] : list) current += q(p, r);
    const double delta = (target.coefficient(m) - current) / static_cast<double>(list.size());
    for (auto [p, r] : list) q(p, r) += delta;
  }
}

inline std::vector<std::vector<double>> sample_box(const Box& box, std::size_t count, std::mt19937_64& rng) {
  const std::size_t n = box.dimension();
  std::vector<std::vector<double>> pts;
  if (n <= 10) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = ((mask >> i) & 1u) ? box.upper[i].get_d() : box.lower[i].get_d();
      pts.push_back(std::move(p));
    }
  }
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = std::uniform_real_distribution<double>(box.lower[i].get_d(), box.upper[i].get_d())(rng);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace detail

/// Independent check of a certificate: PSD witnesses, exact reconstruction
/// of every SOS identity, level-set order, and sampled conditions in the
/// original coordinates. Never throws for a failed check; see
/// validate_certificate.
inline ValidationReport check_certificate(const Certificate& cert, const SystemSpec& sys, const SafetyProblem& prob,
                                          const ValidationOptions& opt = {}) {
  ValidationReport rep;
  const double tol = opt.tol;
  auto fail = [&](const std::string& clause) {
    if (std::find(rep.failures.begin(), rep.failures.end(), clause) == rep.failures.end()) rep.failures.push_back(clause);
  };
  const SystemClass cls = system_class(sys);
  const bool stochastic = is_stochastic(cls);

  // Level sets.
  rep.level_gap = cert.lambda - cert.gamma;
  if (!(rep.level_gap > 0) || rep.level_gap < to_double(prob.eps_gap) - tol) fail("level-set order");
  if (!stochastic && cert.c != 0) fail("deterministic c must be zero");
  if (stochastic) {
    if (!prob.horizon) {
      fail("horizon missing");
    } else if (!(cert.lambda > 0) || !cert.confidence ||
               std::abs(*cert.confidence - confidence_bound(std::max(cert.gamma, 0.0), cert.lambda, std::max(cert.c, 0.0),
                                                            *prob.horizon)) > 1e-9) {
      fail("confidence");
    }
  }

  // SOS witnesses.
  const detail::NormalizedData d = detail::normalize(sys, prob, cert.normalization);
  if (cert.witnesses.empty()) fail("sos witnesses missing");
  std::size_t expected_witnesses = 1 + 3;
  expected_witnesses += d.initial.inequalities.size() + d.space.inequalities.size() + prob.unsafe.size() - 1;
  for (const auto& u : d.unsafe) expected_witnesses += u.inequalities.size();
  if (!cert.witnesses.empty() && cert.witnesses.size() != expected_witnesses) fail("sos witness count");
  for (const auto& w : cert.witnesses) {
    if (w.gram.rows() != static_cast<long>(w.basis.size()) || w.gram.cols() != w.gram.rows()) {
      fail("gram shape " + label(w));
      continue;
    }
    if (w.gram.size() > 0) {
      try {
        PsdCheck psd = check_gram_psd(w.gram, tol);
        rep.min_gram_eigenvalue = std::min(rep.min_gram_eigenvalue, psd.min_eigenvalue);
        if (!psd.ok) fail("gram psd " + label(w));
      } catch (const NotSymmetric&) {
        fail("gram symmetry " + label(w));
      }
    }
    RealPoly expected(d.vars);
    try {
      expected = detail::expected_witness_polynomial(w, cert, d);
    } catch (const InvalidCertificate& e) {
      fail(e.what());
      continue;
    }
    const double err =
        max_coefficient_difference(detail::gram_polynomial(w.basis, w.gram, d.vars), expected.retabled(d.vars));
    rep.max_reconstruction_error = std::max(rep.max_reconstruction_error, err);
    if (err > tol) fail("reconstruction " + label(w));
  }

  // Sampled conditions in original coordinates.
  const VarTablePtr state = state_table(sys);
  const RationalPoly bx = to_rational_exact(cert.barrier).retabled(state);
  const RealPoly bxr = to_real(bx);
  const RealPoly inc = to_real(barrier_increase(bx, sys));
  const RealPoly bu = cert.barrier_u.retabled(d.vars);
  std::mt19937_64 rng(opt.seed);
  auto consistent = [&](std::span<const double> x, double bval) {
    const std::vector<double> u = cert.normalization.point_to_u(x);
    const double buv = evaluate(bu, std::span<const double>(u));
    if (std::abs(buv - bval) > tol * std::max(1.0, std::abs(bval))) fail("barrier consistency");
  };
  for (const auto& x : detail::sample_box(prob.initial, opt.samples, rng)) {
    const double v = evaluate(bxr, std::span<const double>(x));
    rep.initial_margin = std::min(rep.initial_margin, cert.gamma - v);
    consistent(x, v);
    ++rep.samples;
  }
  for (const auto& box : prob.unsafe) {
    for (const auto& x : detail::sample_box(box, opt.samples, rng)) {
      const double v = evaluate(bxr, std::span<const double>(x));
      rep.unsafe_margin = std::min(rep.unsafe_margin, v - cert.lambda);
      consistent(x, v);
      ++rep.samples;
    }
  }
  for (const auto& x : detail::sample_box(prob.space, opt.samples, rng)) {
    const double v = evaluate(bxr, std::span<const double>(x));
    if (v < -tol) fail("barrier nonnegativity");
    rep.condition_margin = std::min(rep.condition_margin, cert.c - evaluate(inc, std::span<const double>(x)));
    ++rep.samples;
  }
  if (rep.initial_margin < -tol) fail("sampled initial level");
  if (rep.unsafe_margin < -tol) fail("sampled unsafe level");
  if (rep.condition_margin < -tol) fail("sampled " + to_string(cls) + " condition");
  rep.ok = rep.failures.empty();
  return rep;
}

/// Throws InvalidCertificate naming the first violated clause.
inline ValidationReport validate_certificate(const Certificate& cert, const SystemSpec& sys, const SafetyProblem& prob,
                                             const ValidationOptions& opt = {}) {
  ValidationReport rep = check_certificate(cert, sys, prob, opt);
  if (!rep.ok) throw InvalidCertificate(rep.failures.front());
  return rep;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

enum class SynthStatus { kFeasible, kInfeasible, kNumericalFailure, kCancelled, kUnverified };

inline std::string to_string(SynthStatus s) {
  switch (s) {
    case SynthStatus::kFeasible: return "Feasible";
    case SynthStatus::kInfeasible: return "Infeasible";
    case SynthStatus::kNumericalFailure: return "NumericalFailure";
    case SynthStatus::kCancelled: return "Cancelled";
    case SynthStatus::kUnverified: return "Unverified";
  }
  return "?";
}

struct SynthResult {
  SynthStatus status = SynthStatus::kInfeasible;
  unsigned degree = 0;
  std::optional<Certificate> certificate;  // set when Feasible; kept for inspection when Unverified
  SdpDiagnostics diagnostics;
  std::vector<std::string> warnings;
  std::string message;
  double seconds = 0;

  bool feasible() const { return status == SynthStatus::kFeasible; }
};

namespace detail {

/// The SOS program for one barrier degree, in normalized coordinates and at
/// the internal scale where a pinned lambda equals 1.
struct CertificateProgram {
  SosProgram program;
  UnknownPoly barrier;
  std::vector<UnknownPoly> initial_l, space_l;
  std::vector<std::vector<UnknownPoly>> unsafe_l;
  AffineExpr gamma, lambda, c;
  int initial_con = -1, condition_con = -1;
  std::vector<int> unsafe_con;

  explicit CertificateProgram(VarTablePtr vars) : program(std::move(vars)) {}
};

inline std::unique_ptr<CertificateProgram> build_program(const NormalizedData& d, const SafetyProblem& prob, SystemClass cls,
                                                   const std::optional<Rational>& lam, double scale) {
  const VarTablePtr& vars = d.vars;
  auto lp = std::make_unique<CertificateProgram>(vars);
  SosProgram& prog = lp->program;
  const bool stochastic = is_stochastic(cls);
  const Rational inv = 1 / rational_exact(scale);

  lp->barrier = prog.new_unknown_polynomial(prob.b_degree, true, "barrier");
  auto multipliers = [&](const SemiAlgebraicSet& set, const std::string& name) {
    std::vector<UnknownPoly> ls;
    for (std::size_t k = 0; k < set.inequalities.size(); ++k) {
      ls.push_back(prog.new_unknown_polynomial(prob.multiplier_degree(), true, name + "[" + std::to_string(k + 1) + "]"));
    }
    return ls;
  };
  auto localize_unknown = [&](const std::vector<UnknownPoly>& ls, const SemiAlgebraicSet& set) {
    AffinePoly out(vars);
    for (std::size_t k = 0; k < ls.size(); ++k) out += multiply<AffineExpr>(ls[k].poly, set.inequalities[k]);
    return out;
  };
  lp->initial_l = multipliers(d.initial, "l_initial");
  for (std::size_t j = 0; j < d.unsafe.size(); ++j) lp->unsafe_l.push_back(multipliers(d.unsafe[j], "l_unsafe" + std::to_string(j + 1)));
  lp->space_l = multipliers(d.space, "l_space");

  lp->gamma = prob.gam ? AffineExpr(*prob.gam * inv) : AffineExpr::variable(prog.new_scalar("gamma", ScalarKind::kNonnegative));
  lp->lambda = lam ? AffineExpr(*lam * inv) : AffineExpr::variable(prog.new_scalar("lambda", ScalarKind::kNonnegative));
  if (stochastic) {
    lp->c = prob.c_val ? AffineExpr(*prob.c_val * inv) : AffineExpr::variable(prog.new_scalar("c", ScalarKind::kNonnegative));
  }

  // Class operator applied monomial by monomial.
  std::vector<RationalPoly> images;
  for (const auto& m : lp->barrier.monomials) images.push_back(barrier_increase(RationalPoly::monomial(vars, m, 1), d.sys));
  const AffinePoly increase = combine(lp->barrier.coeffs, images, vars);
  auto constant = [&](const AffineExpr& e) { return AffinePoly::constant(vars, e); };

  lp->initial_con = prog.add_sos_constraint(constant(lp->gamma) - lp->barrier.poly - localize_unknown(lp->initial_l, d.initial), "initial");
  for (std::size_t j = 0; j < d.unsafe.size(); ++j) {
    lp->unsafe_con.push_back(prog.add_sos_constraint(
        lp->barrier.poly - constant(lp->lambda) - localize_unknown(lp->unsafe_l[j], d.unsafe[j]), "unsafe" + std::to_string(j + 1)));
  }
  AffinePoly cond = -increase - localize_unknown(lp->space_l, d.space);
  if (stochastic) cond += constant(lp->c);
  lp->condition_con = prog.add_sos_constraint(cond, "condition");

  const AffineExpr eps(prob.eps_gap * inv);
  if (!(prob.gam && lam)) prog.add_inequality(lp->lambda - lp->gamma - eps);
  if (stochastic && prob.mode != SynthMode::kFeasibility) {
    const AffineExpr risk = lp->gamma + lp->c * Rational(*prob.horizon);
    if (prob.mode == SynthMode::kOptimizeConfidence) {
      prog.set_objective(risk);
    } else {
      prog.add_inequality(lp->lambda * (Rational(1) - prob.target_confidence) - risk);
    }
  }
  return lp;
}

}  // namespace detail

/// Searches for a barrier certificate of degree `prob.b_degree`.
inline SynthResult synthesize(const SystemSpec& sys, const SafetyProblem& prob) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthResult res;
  res.degree = prob.b_degree;
  res.warnings = check_problem(sys, prob);
  const SystemClass cls = system_class(sys);
  const bool stochastic = is_stochastic(cls);

  // Pinned lambda (default 1 for the confidence modes) sets the internal scale.
  std::optional<Rational> lam = prob.lam;
  if (stochastic && prob.mode != SynthMode::kFeasibility && !lam) lam = Rational(1);
  const double scale = lam ? to_double(*lam) : 1.0;

  auto cancelled = [&] {
    res.status = SynthStatus::kCancelled;
    res.message = "cancelled";
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };
  if (prob.solver.cancel.stop_requested()) return cancelled();
  const Normalization z = Normalization::of(prob.space);
  const detail::NormalizedData d = detail::normalize(sys, prob, z);
  auto lp = detail::build_program(d, prob, cls, lam, scale);
  const CompiledSos compiled = lp->program.compile(prob.padding);
  if (prob.solver.cancel.stop_requested()) return cancelled();

  const auto ts = std::chrono::steady_clock::now();
  const SosSolution sol = solve(compiled, prob.solver);
  const double solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
  res.diagnostics = sol.sdp().diagnostics;
  auto done = [&](SynthStatus st, std::string msg) {
    res.status = st;
    res.message = std::move(msg);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };
  switch (sol.status()) {
    case SdpStatus::kOptimal:
    case SdpStatus::kFeasible: break;
    case SdpStatus::kInfeasible:
    case SdpStatus::kUnbounded: return done(SynthStatus::kInfeasible, "no certificate of degree " + std::to_string(prob.b_degree));
    case SdpStatus::kCancelled: return done(SynthStatus::kCancelled, "cancelled");
    case SdpStatus::kNumericalFailure: return done(SynthStatus::kNumericalFailure, res.diagnostics.message);
  }

  // Extract at user scale.
  Certificate cert;
  cert.system_class = cls;
  cert.degree = prob.b_degree;
  cert.normalization = z;
  auto poly = [&](const UnknownPoly& u) { return sol.polynomial(u.poly).scaled(scale); };
  cert.barrier_u = poly(lp->barrier);
  for (const auto& l : lp->initial_l) cert.initial_multipliers.push_back(poly(l));
  for (const auto& ls : lp->unsafe_l) {
    cert.unsafe_multipliers.emplace_back();
    for (const auto& l : ls) cert.unsafe_multipliers.back().push_back(poly(l));
  }
  for (const auto& l : lp->space_l) cert.space_multipliers.push_back(poly(l));
  cert.gamma = std::max(0.0, sol.value(lp->gamma) * scale);
  cert.lambda = sol.value(lp->lambda) * scale;
  cert.c = stochastic ? std::max(0.0, sol.value(lp->c) * scale) : 0.0;
  if (stochastic) cert.confidence = confidence_bound(cert.gamma, cert.lambda, cert.c, *prob.horizon);
  if (stochastic && prob.mode == SynthMode::kOptimizeConfidence && *cert.confidence <= 0) {
    return done(SynthStatus::kInfeasible, "no certificate of degree " + std::to_string(prob.b_degree) +
                                              " with positive confidence; try a higher degree or target-confidence mode");
  }
  cert.barrier = z.barrier_to_x(cert.barrier_u);

  // Witnesses: unknowns' Gram blocks, then constraint blocks projected onto
  // the exact affine slice of their expressions.
  using Kind = SosWitness::Kind;
  auto witness = [&](Kind kind, int region, int index, int block) {
    SosWitness w{kind, region, index, {}, Eigen::MatrixXd(0, 0)};
    if (block >= 0) {
      w.basis = compiled.block_bases[block];
      w.gram = sol.gram(block) * scale;
    }
    return w;
  };
  cert.witnesses.push_back(witness(Kind::kBarrier, 0, 0, lp->barrier.gram_block));
  for (std::size_t k = 0; k < lp->initial_l.size(); ++k) {
    cert.witnesses.push_back(witness(Kind::kInitialMultiplier, 0, static_cast<int>(k), lp->initial_l[k].gram_block));
  }
  for (std::size_t j = 0; j < lp->unsafe_l.size(); ++j) {
    for (std::size_t k = 0; k < lp->unsafe_l[j].size(); ++k) {
      cert.witnesses.push_back(
          witness(Kind::kUnsafeMultiplier, static_cast<int>(j), static_cast<int>(k), lp->unsafe_l[j][k].gram_block));
    }
  }
  for (std::size_t k = 0; k < lp->space_l.size(); ++k) {
    cert.witnesses.push_back(witness(Kind::kSpaceMultiplier, 0, static_cast<int>(k), lp->space_l[k].gram_block));
  }
  cert.witnesses.push_back(witness(Kind::kInitial, 0, 0, compiled.constraint_block[lp->initial_con]));
  for (std::size_t j = 0; j < lp->unsafe_con.size(); ++j) {
    cert.witnesses.push_back(witness(Kind::kUnsafe, static_cast<int>(j), 0, compiled.constraint_block[lp->unsafe_con[j]]));
  }
  cert.witnesses.push_back(witness(Kind::kCondition, 0, 0, compiled.constraint_block[lp->condition_con]));
  for (auto& w : cert.witnesses) {
    if (w.kind == Kind::kInitial || w.kind == Kind::kUnsafe || w.kind == Kind::kCondition) {
      detail::project_gram(w.basis, w.gram, detail::expected_witness_polynomial(w, cert, d));
    }
  }

  cert.diagnostics = res.diagnostics;
  cert.solve_seconds = solve_seconds;
  cert.validation = check_certificate(cert, sys, prob);
  cert.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = cert.validation.ok;
  std::string msg = ok ? "" : "validation failed: " + cert.validation.failures.front();
  res.certificate = std::move(cert);
  return done(ok ? SynthStatus::kFeasible : SynthStatus::kUnverified, msg);
}

inline SynthResult synth_dt_ss(const DtSs& sys, const SafetyProblem& prob) { return synthesize(SystemSpec(sys), prob); }
inline SynthResult synth_dt_ds(const DtDs& sys, const SafetyProblem& prob) { return synthesize(SystemSpec(sys), prob); }
inline SynthResult synth_ct_ss(const CtSs& sys, const SafetyProblem& prob) { return synthesize(SystemSpec(sys), prob); }
inline SynthResult synth_ct_ds(const CtDs& sys, const SafetyProblem& prob) { return synthesize(SystemSpec(sys), prob); }

}  // namespace bcert
