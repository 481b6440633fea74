#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcert/engine.hpp"
#include "bcert/format.hpp"

#ifndef BCERT_VERSION
#define BCERT_VERSION "0.0.0"
#endif

namespace bcert::app {

using Json = nlohmann::json;

inline constexpr const char* kToolName = "bcert";
inline constexpr const char* kToolVersion = BCERT_VERSION;

/// Outcome of a run: the selected certificate (if any), the per-degree log
/// and timings.
struct RunResult {
  SynthStatus status = SynthStatus::kInfeasible;
  std::string message;
  std::optional<Certificate> certificate;
  std::vector<DegreeLog> log;
  std::vector<std::string> warnings;
  double wall_seconds = 0;
  bool parallel = false;
  std::string version = kToolVersion;
};

/// 0 feasible, 1 infeasible, 2 invalid input, 3 internal failure.
enum ExitCode : int { kExitFeasible = 0, kExitInfeasible = 1, kExitInvalidInput = 2, kExitInternal = 3 };

inline int exit_code(SynthStatus s) {
  switch (s) {
    case SynthStatus::kFeasible: return kExitFeasible;
    case SynthStatus::kInfeasible: return kExitInfeasible;
    case SynthStatus::kCancelled:
    case SynthStatus::kNumericalFailure:
    case SynthStatus::kUnverified: return kExitInternal;
  }
  return kExitInternal;
}

inline SynthStatus synth_status_from(const std::string& s) {
  for (auto st : {SynthStatus::kFeasible, SynthStatus::kInfeasible, SynthStatus::kNumericalFailure, SynthStatus::kCancelled,
                  SynthStatus::kUnverified}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("status: unknown value '" + s + "'");
}

inline SystemClass system_class_from(const std::string& s) {
  for (auto c : {SystemClass::kDtSs, SystemClass::kDtDs, SystemClass::kCtSs, SystemClass::kCtDs}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("mode: unknown value '" + s + "'");
}

namespace detail {

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double number_from(const Json& j, double fallback = std::numeric_limits<double>::infinity()) {
  return j.is_null() ? fallback : j.get<double>();
}

inline Json poly_to_json(const RealPoly& p) {
  Json terms = Json::array();
  for (const auto& r : to_records(p)) terms.push_back({{"exponents", r.exponents}, {"coeff", r.coeff}});
  return terms;
}

inline RealPoly poly_from_json(const Json& j, const VarTablePtr& vars) {
  std::vector<TermRecord> records;
  for (const auto& t : j) records.push_back({t.at("exponents").get<std::vector<unsigned>>(), t.at("coeff").get<std::string>()});
  return from_records(records, vars);
}

inline Json rationals_to_json(const std::vector<Rational>& v) {
  Json out = Json::array();
  for (const auto& q : v) out.push_back(q.get_str());
  return out;
}

inline std::vector<Rational> rationals_from_json(const Json& j) {
  std::vector<Rational> out;
  for (const auto& s : j) {
    Rational q(s.get<std::string>());
    q.canonicalize();
    out.push_back(q);
  }
  return out;
}

inline const char* kind_name(SosWitness::Kind k) {
  switch (k) {
    case SosWitness::Kind::kBarrier: return "barrier";
    case SosWitness::Kind::kInitialMultiplier: return "initial_multiplier";
    case SosWitness::Kind::kUnsafeMultiplier: return "unsafe_multiplier";
    case SosWitness::Kind::kSpaceMultiplier: return "space_multiplier";
    case SosWitness::Kind::kInitial: return "initial";
    case SosWitness::Kind::kUnsafe: return "unsafe";
    case SosWitness::Kind::kCondition: return "condition";
  }
  return "?";
}

inline SosWitness::Kind kind_from(const std::string& s) {
  for (auto k : {SosWitness::Kind::kBarrier, SosWitness::Kind::kInitialMultiplier, SosWitness::Kind::kUnsafeMultiplier,
                 SosWitness::Kind::kSpaceMultiplier, SosWitness::Kind::kInitial, SosWitness::Kind::kUnsafe,
                 SosWitness::Kind::kCondition}) {
    if (s == kind_name(k)) return k;
  }
  throw ConfigError("witnesses: unknown kind '" + s + "'");
}

inline Json witness_to_json(const SosWitness& w) {
  Json basis = Json::array();
  for (const auto& m : w.basis) basis.push_back(std::vector<unsigned>(m.exponents().begin(), m.exponents().end()));
  Json gram = Json::array();
  for (Eigen::Index i = 0; i < w.gram.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < w.gram.cols(); ++k) row.push_back(w.gram(i, k));
    gram.push_back(std::move(row));
  }
  return {{"kind", kind_name(w.kind)}, {"region", w.region}, {"index", w.index}, {"basis", basis}, {"gram", gram}};
}

inline SosWitness witness_from_json(const Json& j) {
  SosWitness w;
  w.kind = kind_from(j.at("kind").get<std::string>());
  w.region = j.at("region").get<int>();
  w.index = j.at("index").get<int>();
  for (const auto& e : j.at("basis")) {
    auto v = e.get<std::vector<std::uint16_t>>();
    w.basis.emplace_back(std::move(v));
  }
  const Json& g = j.at("gram");
  w.gram.resize(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].size() != g.size()) throw ConfigError("witnesses: gram matrix is not square");
    for (std::size_t k = 0; k < g.size(); ++k) w.gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = g[i][k].get<double>();
  }
  return w;
}

inline Json validation_to_json(const ValidationReport& v) {
  return {{"ok", v.ok},
          {"min_gram_eigenvalue", number_or_null(v.min_gram_eigenvalue)},
          {"max_reconstruction_error", number_or_null(v.max_reconstruction_error)},
          {"initial_margin", number_or_null(v.initial_margin)},
          {"unsafe_margin", number_or_null(v.unsafe_margin)},
          {"condition_margin", number_or_null(v.condition_margin)},
          {"level_gap", number_or_null(v.level_gap)},
          {"samples", v.samples},
          {"failures", v.failures}};
}

inline ValidationReport validation_from_json(const Json& j) {
  ValidationReport v;
  v.ok = j.at("ok").get<bool>();
  v.min_gram_eigenvalue = number_from(j.at("min_gram_eigenvalue"));
  v.max_reconstruction_error = number_from(j.at("max_reconstruction_error"));
  v.initial_margin = number_from(j.at("initial_margin"));
  v.unsafe_margin = number_from(j.at("unsafe_margin"));
  v.condition_margin = number_from(j.at("condition_margin"));
  v.level_gap = number_from(j.at("level_gap"));
  v.samples = j.at("samples").get<std::size_t>();
  v.failures = j.at("failures").get<std::vector<std::string>>();
  return v;
}

inline Json diagnostics_to_json(const SdpDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"primal_residual", number_or_null(d.primal_residual)},
          {"dual_residual", number_or_null(d.dual_residual)},
          {"gap", number_or_null(d.gap)},
          {"seconds", d.wall_seconds},
          {"face_removed", d.face_removed},
          {"message", d.message}};
}

inline SdpDiagnostics diagnostics_from_json(const Json& j) {
  SdpDiagnostics d;
  d.iterations = j.at("iterations").get<int>();
  d.primal_residual = number_from(j.at("primal_residual"), 0);
  d.dual_residual = number_from(j.at("dual_residual"), 0);
  d.gap = number_from(j.at("gap"), 0);
  d.wall_seconds = j.at("seconds").get<double>();
  d.face_removed = j.at("face_removed").get<int>();
  d.message = j.at("message").get<std::string>();
  return d;
}

}  // namespace detail

/// Everything needed to re-validate a certificate.
inline Json certificate_to_json(const Certificate& c) {
  using namespace detail;
  const auto& vars = c.barrier.vars();
  Json j;
  j["mode"] = to_string(c.system_class);
  j["degree"] = c.degree;
  j["variables"] = Json::array();
  for (std::size_t i = 0; i < vars->size(); ++i) j["variables"].push_back(vars->name(i));
  j["barrier"] = poly_to_json(c.barrier);
  j["barrier_text"] = to_text(c.barrier);
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["c"] = c.c;
  j["confidence"] = c.confidence ? Json(*c.confidence) : Json(nullptr);
  j["normalization"] = {{"center", rationals_to_json(c.normalization.center)}, {"half", rationals_to_json(c.normalization.half)}};
  j["barrier_u"] = poly_to_json(c.barrier_u);
  j["initial_multipliers"] = Json::array();
  for (const auto& p : c.initial_multipliers) j["initial_multipliers"].push_back(poly_to_json(p));
  j["unsafe_multipliers"] = Json::array();
  for (const auto& ps : c.unsafe_multipliers) {
    Json region = Json::array();
    for (const auto& p : ps) region.push_back(poly_to_json(p));
    j["unsafe_multipliers"].push_back(std::move(region));
  }
  j["space_multipliers"] = Json::array();
  for (const auto& p : c.space_multipliers) j["space_multipliers"].push_back(poly_to_json(p));
  j["witnesses"] = Json::array();
  for (const auto& w : c.witnesses) j["witnesses"].push_back(witness_to_json(w));
  j["validation"] = validation_to_json(c.validation);
  j["diagnostics"] = diagnostics_to_json(c.diagnostics);
  j["solve_seconds"] = c.solve_seconds;
  j["total_seconds"] = c.total_seconds;
  return j;
}

inline Certificate certificate_from_json(const Json& j) {
  using namespace detail;
  try {
    Certificate c;
    c.system_class = system_class_from(j.at("mode").get<std::string>());
    c.degree = j.at("degree").get<unsigned>();
    auto vars = std::make_shared<const VariableTable>(j.at("variables").get<std::vector<std::string>>());
    c.barrier = poly_from_json(j.at("barrier"), vars);
    c.gamma = j.at("gamma").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.c = j.at("c").get<double>();
    if (!j.at("confidence").is_null()) c.confidence = j.at("confidence").get<double>();
    c.normalization.center = rationals_from_json(j.at("normalization").at("center"));
    c.normalization.half = rationals_from_json(j.at("normalization").at("half"));
    c.barrier_u = poly_from_json(j.at("barrier_u"), vars);
    for (const auto& p : j.at("initial_multipliers")) c.initial_multipliers.push_back(poly_from_json(p, vars));
    for (const auto& ps : j.at("unsafe_multipliers")) {
      c.unsafe_multipliers.emplace_back();
      for (const auto& p : ps) c.unsafe_multipliers.back().push_back(poly_from_json(p, vars));
    }
    for (const auto& p : j.at("space_multipliers")) c.space_multipliers.push_back(poly_from_json(p, vars));
    for (const auto& w : j.at("witnesses")) c.witnesses.push_back(witness_from_json(w));
    c.validation = validation_from_json(j.at("validation"));
    c.diagnostics = diagnostics_from_json(j.at("diagnostics"));
    c.solve_seconds = j.at("solve_seconds").get<double>();
    c.total_seconds = j.at("total_seconds").get<double>();
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("certificate: malformed document (") + e.what() + ")");
  }
}

inline Json result_to_json(const RunResult& r) {
  using namespace detail;
  Json j;
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  if (r.certificate) {
    const Certificate& c = *r.certificate;
    j["degree"] = c.degree;
    j["barrier"] = {{"text", to_text(c.barrier)}, {"terms", poly_to_json(c.barrier)}};
    j["gamma"] = c.gamma;
    j["lambda"] = c.lambda;
    j["c"] = c.c;
    j["confidence"] = c.confidence ? Json(*c.confidence) : Json(nullptr);
    j["validation"] = validation_to_json(c.validation);
    j["certificate"] = certificate_to_json(c);
  } else {
    for (const char* k : {"degree", "barrier", "gamma", "lambda", "c", "confidence", "validation", "certificate"}) j[k] = nullptr;
  }
  j["degrees"] = Json::array();
  for (const auto& l : r.log) {
    j["degrees"].push_back({{"degree", l.degree},
                            {"status", to_string(l.status)},
                            {"seconds", l.seconds},
                            {"message", l.message},
                            {"confidence", l.confidence ? Json(*l.confidence) : Json(nullptr)},
                            {"diagnostics", diagnostics_to_json(l.diagnostics)}});
  }
  j["timings"] = {{"wall_seconds", r.wall_seconds}, {"parallel", r.parallel}};
  j["warnings"] = r.warnings;
  j["tool"] = {{"name", kToolName}, {"version", r.version}};
  return j;
}

inline RunResult result_from_json(const Json& j) {
  using namespace detail;
  try {
    RunResult r;
    r.status = synth_status_from(j.at("status").get<std::string>());
    r.message = j.at("message").get<std::string>();
    if (!j.at("certificate").is_null()) r.certificate = certificate_from_json(j.at("certificate"));
    for (const auto& l : j.at("degrees")) {
      DegreeLog d;
      d.degree = l.at("degree").get<unsigned>();
      d.status = synth_status_from(l.at("status").get<std::string>());
      d.seconds = l.at("seconds").get<double>();
      d.message = l.at("message").get<std::string>();
      if (!l.at("confidence").is_null()) d.confidence = l.at("confidence").get<double>();
      d.diagnostics = diagnostics_from_json(l.at("diagnostics"));
      r.log.push_back(std::move(d));
    }
    r.wall_seconds = j.at("timings").at("wall_seconds").get<double>();
    r.parallel = j.at("timings").at("parallel").get<bool>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.version = j.at("tool").at("version").get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("result: malformed document (") + e.what() + ")");
  }
}

}  // namespace bcert::app
