#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "bcert/synth.hpp"

namespace bcert {

enum class SearchPolicy { kFirstFeasible, kBestConfidence };

inline std::string to_string(SearchPolicy p) {
  return p == SearchPolicy::kFirstFeasible ? "first_feasible" : "best_confidence";
}

/// Degrees to try and how to pick among the results.
struct SearchPlan {
  std::vector<unsigned> degrees;
  std::map<unsigned, SdpOptions> solver_options;  // per-degree overrides of prob.solver
  SearchPolicy policy = SearchPolicy::kFirstFeasible;
  unsigned max_workers = 0;                       // 0: hardware concurrency

  /// {2, 4, ..., max_degree} with the policy matching the system class.
  static SearchPlan up_to(unsigned max_degree, SystemClass cls) {
    if (max_degree < 2 || max_degree % 2 != 0) throw OddDegree("max degree must be even and >= 2, got " + std::to_string(max_degree));
    SearchPlan plan;
    for (unsigned d = 2; d <= max_degree; d += 2) plan.degrees.push_back(d);
    plan.policy = policy_for(cls);
    return plan;
  }

  static SearchPlan single(unsigned degree, SystemClass cls) {
    SearchPlan plan;
    plan.degrees = {degree};
    plan.policy = policy_for(cls);
    return plan;
  }

  static SearchPolicy policy_for(SystemClass cls) {
    return is_stochastic(cls) ? SearchPolicy::kBestConfidence : SearchPolicy::kFirstFeasible;
  }

  void validate() const {
    if (degrees.empty()) throw InvalidProblem("degree list is empty");
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      if (degrees[i] < 2 || degrees[i] % 2 != 0) {
        throw OddDegree("degrees must be even and >= 2, got " + std::to_string(degrees[i]));
      }
      if (i > 0 && degrees[i] <= degrees[i - 1]) throw InvalidProblem("degrees must be strictly ascending");
    }
  }
};

/// Outcome of one degree.
struct DegreeLog {
  unsigned degree = 0;
  SynthStatus status = SynthStatus::kCancelled;
  double seconds = 0;
  std::string message;
  std::optional<double> confidence;
  SdpDiagnostics diagnostics;
};

struct SearchResult {
  SynthStatus status = SynthStatus::kInfeasible;
  std::optional<SynthResult> best;  // the selected feasible result
  std::vector<DegreeLog> log;       // one entry per planned degree, ascending
  double wall_seconds = 0;
  bool parallel = false;

  bool feasible() const { return status == SynthStatus::kFeasible; }
};

namespace detail {

inline SafetyProblem problem_for_degree(const SafetyProblem& prob, const SearchPlan& plan, unsigned degree) {
  SafetyProblem p = prob;
  p.b_degree = degree;
  if (auto it = plan.solver_options.find(degree); it != plan.solver_options.end()) {
    p.solver = it->second;
    p.solver.cancel = prob.solver.cancel;
  }
  return p;
}

inline DegreeLog log_of(const SynthResult& r) {
  DegreeLog l;
  l.degree = r.degree;
  l.status = r.status;
  l.seconds = r.seconds;
  l.message = r.message;
  l.diagnostics = r.diagnostics;
  if (r.certificate) l.confidence = r.certificate->confidence;
  return l;
}

/// Strict preference: higher confidence, then lower degree, then lower gamma.
inline bool better(const SynthResult& a, const SynthResult& b) {
  const double pa = a.certificate->confidence.value_or(0), pb = b.certificate->confidence.value_or(0);
  if (pa != pb) return pa > pb;
  if (a.degree != b.degree) return a.degree < b.degree;
  return a.certificate->gamma < b.certificate->gamma;
}

inline SynthResult run_degree(const SystemSpec& sys, const SafetyProblem& prob) {
  try {
    return synthesize(sys, prob);
  } catch (const std::exception& e) {
    // A failing worker reports a message instead of unwinding the search.
    SynthResult r;
    r.degree = prob.b_degree;
    r.status = SynthStatus::kNumericalFailure;
    r.message = e.what();
    return r;
  }
}

/// `winner` is the first-feasible pick; best-confidence plans choose here.
inline SearchResult assemble(const std::vector<std::optional<SynthResult>>& results, const SearchPlan& plan,
                             std::optional<std::size_t> winner) {
  SearchResult out;
  if (winner) out.best = *results[*winner];
  for (std::size_t i = 0; i < plan.degrees.size(); ++i) {
    if (!results[i]) {
      DegreeLog l;
      l.degree = plan.degrees[i];
      l.status = SynthStatus::kCancelled;
      l.message = "not started";
      out.log.push_back(std::move(l));
      continue;
    }
    const SynthResult& r = *results[i];
    out.log.push_back(log_of(r));
    if (!r.feasible() || plan.policy == SearchPolicy::kFirstFeasible) continue;
    if (!out.best || better(r, *out.best)) out.best = r;
  }
  if (out.best) {
    out.status = SynthStatus::kFeasible;
    return out;
  }
  // No certificate: Infeasible only if every planned degree said so. Solver
  // failures take precedence over cancellation.
  out.status = SynthStatus::kInfeasible;
  for (const auto& l : out.log) {
    if (l.status == SynthStatus::kInfeasible) continue;
    if (l.status != SynthStatus::kCancelled) {
      out.status = l.status;
      break;
    }
    out.status = SynthStatus::kCancelled;
  }
  return out;
}

inline void check_all(const SystemSpec& sys, const SafetyProblem& prob, const SearchPlan& plan) {
  plan.validate();
  for (unsigned d : plan.degrees) check_problem(sys, problem_for_degree(prob, plan, d));
}

}  // namespace detail

/// Tries the plan's degrees in ascending order. First-feasible plans stop at
/// the first certificate unless `exhaustive` is set; best-confidence plans
/// always try every degree.
inline SearchResult serial_search(const SystemSpec& sys, const SafetyProblem& prob, const SearchPlan& plan,
                                  bool exhaustive = false) {
  detail::check_all(sys, prob, plan);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::optional<SynthResult>> results(plan.degrees.size());
  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < plan.degrees.size(); ++i) {
    SafetyProblem p = detail::problem_for_degree(prob, plan, plan.degrees[i]);
    if (p.solver.cancel.stop_requested()) break;
    results[i] = detail::run_degree(sys, p);
    if (results[i]->feasible() && plan.policy == SearchPolicy::kFirstFeasible) {
      if (!winner) winner = i;
      if (!exhaustive) break;
    }
  }
  SearchResult out = detail::assemble(results, plan, winner);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Runs degrees concurrently on min(#degrees, max_workers) threads. Under the
/// first-feasible policy the first certificate cancels every other worker.
inline SearchResult parallel_search(const SystemSpec& sys, const SafetyProblem& prob, const SearchPlan& plan) {
  detail::check_all(sys, prob, plan);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t count = plan.degrees.size();
  unsigned hw = plan.max_workers != 0 ? plan.max_workers : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(count, hw);

  std::stop_source stop;
  // An outer cancel token propagates to every worker.
  std::stop_callback forward(prob.solver.cancel, [&stop] { stop.request_stop(); });

  std::mutex mu;
  std::vector<std::optional<SynthResult>> results(count);
  std::optional<std::size_t> winner;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || stop.stop_requested()) return;
      SafetyProblem p = detail::problem_for_degree(prob, plan, plan.degrees[i]);
      p.solver.cancel = stop.get_token();
      SynthResult r = detail::run_degree(sys, p);
      std::lock_guard lock(mu);
      if (r.feasible() && plan.policy == SearchPolicy::kFirstFeasible && !winner) {
        winner = i;
        stop.request_stop();
      }
      results[i] = std::move(r);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  SearchResult out = detail::assemble(results, plan, winner);
  out.parallel = true;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace bcert
