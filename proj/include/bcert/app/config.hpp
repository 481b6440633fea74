#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcert/engine.hpp"
#include "bcert/parse.hpp"

namespace bcert::app {

using Json = nlohmann::json;

/// A number as written in a document: either a JSON number or a string
/// expression such as "0.156*48". Kept verbatim so export reproduces import.
struct Scalar {
  std::string text;
  bool quoted = false;

  friend bool operator==(const Scalar&, const Scalar&) = default;
};

using ScalarList = std::vector<Scalar>;

/// Configuration document. Field names follow the tool's parameter names.
struct RunConfig {
  std::string mode;  // dt-SS, dt-DS, ct-SS, ct-DS
  unsigned dim = 0;
  unsigned b_degree = 0;
  std::optional<unsigned> l_degree;
  ScalarList L_space, U_space, L_initial, U_initial;
  std::vector<ScalarList> L_unsafe, U_unsafe;
  ScalarList f;
  std::optional<unsigned> t;
  std::optional<std::string> NoiseType;
  std::optional<ScalarList> mean, sigma, rate, a, b;
  std::optional<ScalarList> delta, rho, p_rate;
  std::optional<bool> optimize;
  std::optional<Scalar> confidence, gam, lam, c_val;
  std::optional<std::string> solver;
  std::optional<bool> parallel;
  std::optional<std::vector<unsigned>> degrees;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// System, problem and search plan described by a config.
struct BuiltRun {
  SystemSpec system;
  SafetyProblem problem;
  SearchPlan plan;
  bool parallel = false;
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "mode", "dim",  "b_degree", "l_degree", "L_space", "U_space",  "L_initial", "U_initial", "L_unsafe",
      "U_unsafe", "f", "t",       "NoiseType", "mean",   "sigma",    "rate",      "a",         "b",
      "delta",    "rho", "p_rate", "optimize", "confidence", "gam",  "lam",       "c_val",     "solver",
      "parallel", "degrees"};
  return keys;
}

namespace detail {

[[noreturn]] inline void config_fail(const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); }

inline Scalar scalar_from(const Json& j, const std::string& key) {
  if (j.is_string()) return {j.get<std::string>(), true};
  if (j.is_number()) return {j.dump(), false};
  config_fail(key, "expected a number or an expression string");
}

inline ScalarList list_from(const Json& j, const std::string& key) {
  if (!j.is_array()) config_fail(key, "expected an array");
  ScalarList out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(scalar_from(j[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

inline unsigned uint_from(const Json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) config_fail(key, "expected a nonnegative integer");
  return j.get<unsigned>();
}

inline Json scalar_to(const Scalar& s) {
  if (s.quoted) return s.text;
  return Json::parse(s.text);
}

inline Json list_to(const ScalarList& l) {
  Json out = Json::array();
  for (const auto& s : l) out.push_back(scalar_to(s));
  return out;
}

inline VarTablePtr constant_table() {
  static const VarTablePtr t = std::make_shared<const VariableTable>(std::vector<std::string>{});
  return t;
}

inline Rational to_rational(const Scalar& s, const std::string& key) {
  try {
    if (!s.quoted) return rational_from_decimal(s.text);
    RationalPoly p = parse_polynomial(s.text, constant_table());
    return p.coefficient(Monomial(std::vector<std::uint16_t>{}));
  } catch (const Error& e) {
    config_fail(key, e.what());
  }
}

inline std::vector<Rational> to_rationals(const ScalarList& l, const std::string& key) {
  std::vector<Rational> out;
  for (std::size_t i = 0; i < l.size(); ++i) out.push_back(to_rational(l[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

inline RationalPoly to_poly(const Scalar& s, const VarTablePtr& vars, const std::string& key) {
  try {
    return parse_polynomial(s.text, vars);
  } catch (const Error& e) {
    config_fail(key, e.what());
  }
}

inline void expect_size(const ScalarList& l, std::size_t n, const std::string& key) {
  if (l.size() != n) config_fail(key, "expected " + std::to_string(n) + " entries, got " + std::to_string(l.size()));
}

inline Box to_box(const ScalarList& lo, const ScalarList& hi, std::size_t n, const std::string& lkey, const std::string& ukey) {
  expect_size(lo, n, lkey);
  expect_size(hi, n, ukey);
  Box b{to_rationals(lo, lkey), to_rationals(hi, ukey)};
  for (std::size_t i = 0; i < n; ++i) {
    if (b.lower[i] > b.upper[i]) config_fail(ukey, "upper bound below lower bound in dimension " + std::to_string(i + 1));
  }
  return b;
}

inline bool is_stochastic_mode(const std::string& m) { return m == "dt-SS" || m == "ct-SS"; }

}  // namespace detail

/// Parses and schema-checks a config document. Throws ConfigError whose
/// message starts with the offending key.
inline RunConfig config_from_json(const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  const auto& keys = config_keys();
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) config_fail(k, "unknown key");
  }
  auto required = [&](const char* k) -> const Json& {
    if (!j.contains(k) || j.at(k).is_null()) config_fail(k, "required");
    return j.at(k);
  };
  auto present = [&](const char* k) { return j.contains(k) && !j.at(k).is_null(); };

  RunConfig c;
  const Json& mode = required("mode");
  if (!mode.is_string()) config_fail("mode", "expected a string");
  c.mode = mode.get<std::string>();
  if (c.mode != "dt-SS" && c.mode != "dt-DS" && c.mode != "ct-SS" && c.mode != "ct-DS") {
    config_fail("mode", "must be one of dt-SS, dt-DS, ct-SS, ct-DS");
  }
  c.dim = uint_from(required("dim"), "dim");
  if (c.dim < 1) config_fail("dim", "must be >= 1");
  c.b_degree = uint_from(required("b_degree"), "b_degree");
  if (present("l_degree")) c.l_degree = uint_from(j.at("l_degree"), "l_degree");
  c.L_space = list_from(required("L_space"), "L_space");
  c.U_space = list_from(required("U_space"), "U_space");
  c.L_initial = list_from(required("L_initial"), "L_initial");
  c.U_initial = list_from(required("U_initial"), "U_initial");
  for (const char* k : {"L_unsafe", "U_unsafe"}) {
    const Json& u = required(k);
    if (!u.is_array() || u.empty()) config_fail(k, "expected a nonempty array of regions");
    auto& dst = std::string(k) == "L_unsafe" ? c.L_unsafe : c.U_unsafe;
    for (std::size_t r = 0; r < u.size(); ++r) {
      if (!u[r].is_array()) config_fail(k, "expected an array of arrays, one per unsafe region");
      dst.push_back(list_from(u[r], std::string(k) + "[" + std::to_string(r) + "]"));
    }
  }
  c.f = list_from(required("f"), "f");
  if (present("t")) {
    c.t = uint_from(j.at("t"), "t");
    if (*c.t == 0) config_fail("t", "must be a positive integer");
  }
  if (present("NoiseType")) {
    if (!j.at("NoiseType").is_string()) config_fail("NoiseType", "expected a string");
    c.NoiseType = j.at("NoiseType").get<std::string>();
  }
  auto opt_list = [&](const char* k, std::optional<ScalarList>& dst) {
    if (present(k)) dst = list_from(j.at(k), k);
  };
  opt_list("mean", c.mean);
  opt_list("sigma", c.sigma);
  opt_list("rate", c.rate);
  opt_list("a", c.a);
  opt_list("b", c.b);
  opt_list("delta", c.delta);
  opt_list("rho", c.rho);
  opt_list("p_rate", c.p_rate);
  auto opt_bool = [&](const char* k, std::optional<bool>& dst) {
    if (!present(k)) return;
    if (!j.at(k).is_boolean()) config_fail(k, "expected true or false");
    dst = j.at(k).get<bool>();
  };
  opt_bool("optimize", c.optimize);
  opt_bool("parallel", c.parallel);
  auto opt_scalar = [&](const char* k, std::optional<Scalar>& dst) {
    if (present(k)) dst = scalar_from(j.at(k), k);
  };
  opt_scalar("confidence", c.confidence);
  opt_scalar("gam", c.gam);
  opt_scalar("lam", c.lam);
  opt_scalar("c_val", c.c_val);
  if (present("solver")) {
    if (!j.at("solver").is_string()) config_fail("solver", "expected a string");
    c.solver = j.at("solver").get<std::string>();
  }
  if (present("degrees")) {
    const Json& d = j.at("degrees");
    if (!d.is_array()) config_fail("degrees", "expected an array of even integers");
    std::vector<unsigned> ds;
    for (std::size_t i = 0; i < d.size(); ++i) ds.push_back(uint_from(d[i], "degrees[" + std::to_string(i) + "]"));
    c.degrees = std::move(ds);
  }
  return c;
}

/// Canonical document; omitted optional fields stay omitted.
inline Json config_to_json(const RunConfig& c) {
  using namespace detail;
  Json j;
  j["mode"] = c.mode;
  j["dim"] = c.dim;
  j["b_degree"] = c.b_degree;
  if (c.l_degree) j["l_degree"] = *c.l_degree;
  j["L_space"] = list_to(c.L_space);
  j["U_space"] = list_to(c.U_space);
  j["L_initial"] = list_to(c.L_initial);
  j["U_initial"] = list_to(c.U_initial);
  j["L_unsafe"] = Json::array();
  for (const auto& r : c.L_unsafe) j["L_unsafe"].push_back(list_to(r));
  j["U_unsafe"] = Json::array();
  for (const auto& r : c.U_unsafe) j["U_unsafe"].push_back(list_to(r));
  j["f"] = list_to(c.f);
  if (c.t) j["t"] = *c.t;
  if (c.NoiseType) j["NoiseType"] = *c.NoiseType;
  auto opt_list = [&](const char* k, const std::optional<ScalarList>& v) {
    if (v) j[k] = list_to(*v);
  };
  opt_list("mean", c.mean);
  opt_list("sigma", c.sigma);
  opt_list("rate", c.rate);
  opt_list("a", c.a);
  opt_list("b", c.b);
  opt_list("delta", c.delta);
  opt_list("rho", c.rho);
  opt_list("p_rate", c.p_rate);
  if (c.optimize) j["optimize"] = *c.optimize;
  auto opt_scalar = [&](const char* k, const std::optional<Scalar>& v) {
    if (v) j[k] = scalar_to(*v);
  };
  opt_scalar("confidence", c.confidence);
  opt_scalar("gam", c.gam);
  opt_scalar("lam", c.lam);
  opt_scalar("c_val", c.c_val);
  if (c.solver) j["solver"] = *c.solver;
  if (c.parallel) j["parallel"] = *c.parallel;
  if (c.degrees) j["degrees"] = *c.degrees;
  return j;
}

inline RunConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON (") + e.what() + ")");
  }
  return config_from_json(j);
}

/// Builds the system, problem and plan; every semantic check runs here, before
/// any polynomial arithmetic on the dynamics.
inline BuiltRun build_run(const RunConfig& c) {
  using namespace detail;
  const std::size_t n = c.dim;
  const bool stochastic = is_stochastic_mode(c.mode);
  auto forbid = [&](bool set, const char* key, const char* why) {
    if (set) config_fail(key, why);
  };

  if (c.b_degree < 2 || c.b_degree % 2 != 0) config_fail("b_degree", "must be even and >= 2");
  if (c.l_degree && *c.l_degree % 2 != 0) config_fail("l_degree", "must be even");
  expect_size(c.f, n, "f");
  if (c.L_unsafe.size() != c.U_unsafe.size()) config_fail("U_unsafe", "expected one upper bound array per region in L_unsafe");
  if (c.solver && *c.solver != "ipm") config_fail("solver", "unsupported solver '" + *c.solver + "'; available: ipm");

  BuiltRun out;
  SafetyProblem& p = out.problem;
  p.space = to_box(c.L_space, c.U_space, n, "L_space", "U_space");
  p.initial = to_box(c.L_initial, c.U_initial, n, "L_initial", "U_initial");
  for (std::size_t r = 0; r < c.L_unsafe.size(); ++r) {
    const std::string s = "[" + std::to_string(r) + "]";
    p.unsafe.push_back(to_box(c.L_unsafe[r], c.U_unsafe[r], n, "L_unsafe" + s, "U_unsafe" + s));
  }
  if (!p.space.contains(p.initial)) config_fail("L_initial", "initial set is not contained in the state set");
  p.b_degree = c.b_degree;
  p.l_degree = c.l_degree;

  const bool noise_keys = c.NoiseType || c.mean || c.sigma || c.rate || c.a || c.b;
  const bool diffusion_keys = c.delta || c.rho || c.p_rate;
  forbid(c.mode != "dt-SS" && noise_keys, c.NoiseType ? "NoiseType" : "mean", "noise parameters apply to dt-SS only");
  forbid(c.mode != "ct-SS" && diffusion_keys, c.delta ? "delta" : (c.rho ? "rho" : "p_rate"),
         "diffusion and jump parameters apply to ct-SS only");
  if (!stochastic) {
    forbid(c.optimize.value_or(false), "optimize", "applies to stochastic classes only");
    forbid(c.confidence.has_value(), "confidence", "applies to stochastic classes only");
    forbid(c.c_val.has_value(), "c_val", "applies to stochastic classes only");
  }

  if (stochastic) {
    if (!c.t) config_fail("t", "t required for stochastic classes");
    p.horizon = *c.t;
    const bool optimize = c.optimize.value_or(false);
    if (optimize && c.confidence) config_fail("confidence", "set either optimize or confidence, not both");
    if (optimize) p.mode = SynthMode::kOptimizeConfidence;
    if (c.confidence) {
      p.mode = SynthMode::kTargetConfidence;
      p.target_confidence = to_rational(*c.confidence, "confidence");
      if (sgn(p.target_confidence) <= 0 || p.target_confidence >= 1) config_fail("confidence", "must lie in (0, 1)");
    }
  }
  if (c.gam) p.gam = to_rational(*c.gam, "gam");
  if (c.lam) {
    p.lam = to_rational(*c.lam, "lam");
    if (sgn(*p.lam) <= 0) config_fail("lam", "must be positive");
  }
  if (c.c_val) p.c_val = to_rational(*c.c_val, "c_val");
  if (p.gam && sgn(*p.gam) < 0) config_fail("gam", "must be nonnegative");
  if (p.c_val && sgn(*p.c_val) < 0) config_fail("c_val", "must be nonnegative");

  // Dynamics.
  std::size_t noise_dim = 0;
  NoiseSpec noise;
  if (c.mode == "dt-SS") {
    const std::string type = c.NoiseType.value_or("normal");
    if (type == "normal") {
      if (!c.mean || !c.sigma) config_fail(c.mean ? "sigma" : "mean", "mean and sigma required for normal noise");
      noise = NoiseSpec::normal(to_rationals(*c.mean, "mean"), to_rationals(*c.sigma, "sigma"));
    } else if (type == "uniform") {
      if (!c.a || !c.b) config_fail(c.a ? "b" : "a", "a and b required for uniform noise");
      noise = NoiseSpec::uniform(to_rationals(*c.a, "a"), to_rationals(*c.b, "b"));
    } else if (type == "exponential") {
      if (!c.rate) config_fail("rate", "rate required for exponential noise");
      noise = NoiseSpec::exponential(to_rationals(*c.rate, "rate"));
    } else {
      config_fail("NoiseType", "must be one of normal, uniform, exponential");
    }
    noise.validate();
    noise_dim = noise.dimension();
  }
  const VarTablePtr vars = VariableTable::standard(n, noise_dim);
  PolyVector f;
  for (std::size_t i = 0; i < n; ++i) f.push_back(to_poly(c.f[i], vars, "f[" + std::to_string(i) + "]"));

  if (c.mode == "dt-SS") {
    out.system = DtSs{std::move(f), noise};
  } else if (c.mode == "dt-DS") {
    out.system = DtDs{std::move(f)};
  } else if (c.mode == "ct-DS") {
    out.system = CtDs{std::move(f)};
  } else {
    CtSs s{std::move(f), {}, {}, {}};
    auto diagonal = [&](const std::optional<ScalarList>& l, const char* key) {
      PolyMatrix m;
      if (!l) return m;
      expect_size(*l, n, key);
      m.assign(n, std::vector<RationalPoly>(n, RationalPoly(vars)));
      for (std::size_t i = 0; i < n; ++i) m[i][i] = to_poly((*l)[i], vars, std::string(key) + "[" + std::to_string(i) + "]");
      return m;
    };
    s.delta = diagonal(c.delta, "delta");
    s.rho = diagonal(c.rho, "rho");
    if (c.rho) {
      if (!c.p_rate) config_fail("p_rate", "required when rho is set");
      expect_size(*c.p_rate, n, "p_rate");
      s.rates = to_rationals(*c.p_rate, "p_rate");
      for (const auto& w : s.rates) {
        if (sgn(w) < 0) config_fail("p_rate", "rates must be >= 0");
      }
    } else if (c.p_rate) {
      config_fail("rho", "required when p_rate is set");
    }
    out.system = std::move(s);
  }

  // Search plan.
  const SystemClass cls = system_class(out.system);
  out.parallel = c.parallel.value_or(false);
  if (c.degrees) {
    if (c.degrees->empty()) config_fail("degrees", "must not be empty");
    for (std::size_t i = 0; i < c.degrees->size(); ++i) {
      const unsigned d = (*c.degrees)[i];
      if (d < 2 || d % 2 != 0) config_fail("degrees", "entries must be even and >= 2");
      if (i > 0 && d <= (*c.degrees)[i - 1]) config_fail("degrees", "entries must be strictly ascending");
    }
    out.plan.degrees = *c.degrees;
    out.plan.policy = SearchPlan::policy_for(cls);
  } else if (out.parallel) {
    out.plan = SearchPlan::up_to(c.b_degree, cls);
  } else {
    out.plan = SearchPlan::single(c.b_degree, cls);
  }
  return out;
}

}  // namespace bcert::app
