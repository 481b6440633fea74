#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stop_token>
#include <string>
#include <vector>

#include "bcert/app/config.hpp"
#include "bcert/app/result.hpp"

namespace bcert::app {

/// Command-line and service overrides applied on top of a config.
struct RunOptions {
  std::optional<std::vector<unsigned>> degrees;
  std::optional<bool> parallel;
  std::optional<double> feas_tol;
  std::optional<int> max_iter;
  unsigned max_workers = 0;
  std::stop_token cancel;
};

/// Applies overrides and checks the result; throws on invalid input.
inline BuiltRun prepare(RunConfig config, const RunOptions& opt = {}) {
  if (opt.degrees) config.degrees = *opt.degrees;
  if (opt.parallel) config.parallel = *opt.parallel;
  BuiltRun run = build_run(config);
  if (opt.feas_tol) {
    if (!(*opt.feas_tol > 0)) throw ConfigError("feas_tol: must be positive");
    run.problem.solver.feas_tol = *opt.feas_tol;
    run.problem.solver.gap_tol = *opt.feas_tol;
  }
  if (opt.max_iter) {
    if (*opt.max_iter < 1) throw ConfigError("max_iter: must be >= 1");
    run.problem.solver.max_iter = *opt.max_iter;
  }
  run.problem.solver.cancel = opt.cancel;
  run.plan.max_workers = opt.max_workers;
  return run;
}

inline RunResult execute(const BuiltRun& run) {
  const SearchResult s = run.parallel ? parallel_search(run.system, run.problem, run.plan)
                                      : serial_search(run.system, run.problem, run.plan);
  RunResult r;
  r.status = s.status;
  r.log = s.log;
  r.wall_seconds = s.wall_seconds;
  r.parallel = s.parallel;
  r.warnings = check_problem(run.system, run.problem);
  if (s.best) {
    r.certificate = s.best->certificate;
    r.message = s.best->message;
  } else {
    // Infeasible everywhere: summarize each degree.
    std::ostringstream msg;
    for (std::size_t i = 0; i < s.log.size(); ++i) {
      if (i) msg << "; ";
      msg << "degree " << s.log[i].degree << ": " << to_string(s.log[i].status);
      if (!s.log[i].message.empty()) msg << " (" << s.log[i].message << ")";
    }
    r.message = msg.str();
  }
  return r;
}

/// Runs a config document end to end.
inline RunResult run_config(const RunConfig& config, const RunOptions& opt = {}) { return execute(prepare(config, opt)); }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("file: cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

/// Accepts either a result document or a bare certificate document.
inline Certificate load_certificate(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("certificate: not valid JSON (") + e.what() + ")");
  }
  if (j.contains("status")) {
    if (!j.contains("certificate") || j.at("certificate").is_null()) {
      throw ConfigError("certificate: result document holds no certificate");
    }
    return certificate_from_json(j.at("certificate"));
  }
  return certificate_from_json(j);
}

/// Exit code for an error escaping a run: malformed input versus failure.
inline int exit_code_for(const Error& e) {
  static const std::vector<std::string> input = {"ConfigError", "SyntaxError",   "UnknownSymbol",     "NonPolynomial",
                                                 "DimensionMismatch", "EmptyBox", "OddDegree", "InvalidProblem",
                                                 "NonpositiveLambda", "NotTwoDimensional", "MomentOrderExceeded"};
  for (const auto& k : input) {
    if (e.kind() == k) return kExitInvalidInput;
  }
  return kExitInternal;
}

}  // namespace bcert::app
