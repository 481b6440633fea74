#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bcert/app/bundled.hpp"
#include "bcert/app/runner.hpp"
#include "bcert/app/simulate.hpp"
#include "bcert/format.hpp"
#include "bcert/parse.hpp"

namespace bcert::app {
namespace {

Json BundledJson(const std::string& name) { return Json::parse(std::string(*bundled_text(name))); }

std::string KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() + " " + e.what();
  }
  return "no error";
}

// Runs `fn`, expecting a ConfigError whose message starts with "key:".
void ExpectConfigError(const std::function<void()>& fn, const std::string& key) {
  try {
    fn();
    ADD_FAILURE() << "expected ConfigError for " << key;
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ConfigError: " + key + ":"), std::string::npos) << msg;
    EXPECT_EQ(exit_code_for(e), kExitInvalidInput);
  }
}

// ---------------------------------------------------------------------------
// Config documents
// ---------------------------------------------------------------------------

TEST(Config, BundledSetIsComplete) {
  const std::vector<std::string> expected = {
      "1d_system", "barr2room_dt", "dc_motor",   "ex_lin1",    "ex_nonlin1",  "hi_ord_4",    "hi_ord_4_ctss", "hi_ord_6_1", "hi_ord_6_2",
      "hi_ord_8_1", "hi_ord_8_2",  "jet_engine", "room3d_dtss", "room_temp_ctss", "room_temp_dtss", "two_tanks", "vdp_dtss"};
  EXPECT_EQ(bundled_names(), expected);
  EXPECT_FALSE(bundled_text("nope").has_value());
  ExpectConfigError([] { bundled_config("nope"); }, "example");
}

TEST(Config, RoundTripIsIdentityOnEveryBundledExample) {
  for (const auto& name : bundled_names()) {
    const Json original = BundledJson(name);
    const RunConfig c = config_from_json(original);
    const Json exported = config_to_json(c);
    EXPECT_EQ(exported, original) << name;
    EXPECT_EQ(parse_config(exported.dump()), c) << name;
    EXPECT_NO_THROW(build_run(c)) << name;
  }
}

TEST(Config, ExpressionStringsSurviveVerbatim) {
  Json j = BundledJson("dc_motor");
  j["U_space"] = {"0.5", 1};
  const Json back = config_to_json(config_from_json(j));
  EXPECT_EQ(back["U_space"][0], Json("0.5"));
  EXPECT_EQ(back["U_space"][1], Json(1));
}

TEST(Config, SchemaErrorsNameTheKey) {
  auto with = [](const std::string& name, const std::function<void(Json&)>& edit) {
    Json j = BundledJson(name);
    edit(j);
    return [j] { build_run(config_from_json(j)); };
  };
  ExpectConfigError(with("dc_motor", [](Json& j) { j["bogus"] = 1; }), "bogus");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["dim"] = 0; }), "dim");
  ExpectConfigError(with("dc_motor", [](Json& j) { j.erase("f"); }), "f");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["mode"] = "hybrid"; }), "mode");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["b_degree"] = 3; }), "b_degree");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["l_degree"] = 1; }), "l_degree");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["solver"] = "mosek"; }), "solver");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["L_unsafe"] = {0.45, 0.6}; }), "L_unsafe");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["f"] = {"x1"}; }), "f");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["optimize"] = true; }), "optimize");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["sigma"] = {0.1, 0.1}; }), "mean");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["degrees"] = {2, 3}; }), "degrees");
  ExpectConfigError(with("dc_motor", [](Json& j) { j["degrees"] = {4, 2}; }), "degrees");
  ExpectConfigError(with("two_tanks", [](Json& j) { j.erase("t"); }), "t");
  ExpectConfigError(with("two_tanks", [](Json& j) { j["t"] = 0; }), "t");
  ExpectConfigError(with("two_tanks", [](Json& j) { j["confidence"] = 0.9; }), "confidence");
  ExpectConfigError(with("two_tanks", [](Json& j) { j["lam"] = 0; }), "lam");
  ExpectConfigError(with("two_tanks", [](Json& j) { j["NoiseType"] = "cauchy"; }), "NoiseType");
  ExpectConfigError(with("two_tanks", [](Json& j) { j["delta"] = {"0", "0"}; }), "delta");
  ExpectConfigError(with("ex_lin1", [](Json& j) { j["p_rate"] = {1, 1}; }), "rho");
  ExpectConfigError(with("ex_lin1", [](Json& j) { j["rho"] = {"0.1", "0.1"}; }), "p_rate");
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
}

TEST(Config, MissingHorizonMessage) {
  Json j = BundledJson("two_tanks");
  j.erase("t");
  EXPECT_EQ(KindOf([&] { build_run(config_from_json(j)); }), "ConfigError ConfigError: t: t required for stochastic classes");
}

TEST(Config, BadExpressionIsInvalidInput) {
  Json j = BundledJson("dc_motor");
  j["f"][0] = "x1 +";
  try {
    build_run(config_from_json(j));
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(exit_code_for(e), kExitInvalidInput) << e.what();
  }
  j["f"][0] = "sin(x1)";
  try {
    build_run(config_from_json(j));
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(exit_code_for(e), kExitInvalidInput) << e.what();
  }
}

TEST(Config, PlanFollowsParallelAndDegrees) {
  RunConfig c = bundled_config("dc_motor");
  c.b_degree = 6;
  EXPECT_EQ(build_run(c).plan.degrees, std::vector<unsigned>({6}));
  c.parallel = true;
  EXPECT_EQ(build_run(c).plan.degrees, std::vector<unsigned>({2, 4, 6}));
  c.degrees = std::vector<unsigned>{4};
  EXPECT_EQ(build_run(c).plan.degrees, std::vector<unsigned>({4}));
  EXPECT_EQ(build_run(bundled_config("ex_lin1")).plan.policy, SearchPolicy::kBestConfidence);
}

// ---------------------------------------------------------------------------
// Runs, results and exit codes
// ---------------------------------------------------------------------------

TEST(Runner, ExitCodes) {
  EXPECT_EQ(exit_code(SynthStatus::kFeasible), 0);
  EXPECT_EQ(exit_code(SynthStatus::kInfeasible), 1);
  EXPECT_EQ(exit_code(SynthStatus::kNumericalFailure), 3);
  EXPECT_EQ(exit_code(SynthStatus::kUnverified), 3);
  EXPECT_EQ(exit_code(SynthStatus::kCancelled), 3);
  EXPECT_EQ(exit_code_for(ConfigError("x")), kExitInvalidInput);
  EXPECT_EQ(exit_code_for(OddDegree("x")), kExitInvalidInput);
  EXPECT_EQ(exit_code_for(InvalidCertificate("x")), kExitInternal);
}

TEST(Runner, DcMotorIsFeasible) {
  const RunResult r = run_config(bundled_config("dc_motor"));
  ASSERT_EQ(r.status, SynthStatus::kFeasible) << r.message;
  EXPECT_EQ(exit_code(r.status), kExitFeasible);
  ASSERT_TRUE(r.certificate.has_value());
  EXPECT_LT(r.certificate->gamma, r.certificate->lambda);
  EXPECT_TRUE(r.certificate->validation.ok);
}

TEST(Runner, VdpDegreeFourIsInfeasible) {
  RunOptions opt;
  opt.degrees = std::vector<unsigned>{4};
  const RunResult r = run_config(bundled_config("vdp_dtss"), opt);
  EXPECT_EQ(r.status, SynthStatus::kInfeasible);
  EXPECT_EQ(exit_code(r.status), kExitInfeasible);
  EXPECT_FALSE(r.certificate.has_value());
  EXPECT_NE(r.message.find("degree 4: Infeasible"), std::string::npos) << r.message;
}

TEST(Runner, OverridesAreChecked) {
  RunOptions opt;
  opt.feas_tol = -1;
  ExpectConfigError([&] { prepare(bundled_config("dc_motor"), opt); }, "feas_tol");
  opt = {};
  opt.max_iter = 0;
  ExpectConfigError([&] { prepare(bundled_config("dc_motor"), opt); }, "max_iter");
  opt = {};
  opt.max_iter = 1;
  const BuiltRun run = prepare(bundled_config("dc_motor"), opt);
  EXPECT_EQ(run.problem.solver.max_iter, 1);
}

TEST(Runner, UnsafeBeyondSpaceIsAWarning) {
  const RunResult r = run_config(bundled_config("hi_ord_4"));
  EXPECT_EQ(r.status, SynthStatus::kFeasible);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find("extends beyond the state set"), std::string::npos);
}

TEST(Result, JsonRoundTrip) {
  for (const char* name : {"dc_motor", "ex_lin1"}) {
    const RunResult r = run_config(bundled_config(name));
    ASSERT_TRUE(r.certificate.has_value()) << name;
    const Json j = result_to_json(r);
    EXPECT_EQ(j["status"], "Feasible");
    EXPECT_EQ(j["tool"]["name"], "bcert");
    const RunResult back = result_from_json(Json::parse(j.dump()));
    EXPECT_EQ(result_to_json(back), j) << name;
    EXPECT_EQ(to_text(back.certificate->barrier), to_text(r.certificate->barrier));
    EXPECT_EQ(back.certificate->gamma, r.certificate->gamma);
    EXPECT_EQ(back.certificate->confidence, r.certificate->confidence);
    ASSERT_EQ(back.certificate->witnesses.size(), r.certificate->witnesses.size());
    for (std::size_t k = 0; k < r.certificate->witnesses.size(); ++k) {
      EXPECT_EQ(back.certificate->witnesses[k].gram, r.certificate->witnesses[k].gram);
    }
    // The reparsed barrier text is the same polynomial.
    const RealPoly reparsed = to_real(parse_polynomial(j["barrier"]["text"].get<std::string>(), r.certificate->barrier.vars()));
    for (const auto& [m, c] : r.certificate->barrier.terms()) EXPECT_NEAR(reparsed.coefficient(m), c, 1e-12 * (1 + std::abs(c)));

    const BuiltRun run = prepare(bundled_config(name));
    EXPECT_TRUE(check_certificate(*back.certificate, run.system, run.problem).ok) << name;
  }
}

TEST(Result, InfeasibleDocumentHasNullCertificate) {
  RunOptions opt;
  opt.degrees = std::vector<unsigned>{4};
  const Json j = result_to_json(run_config(bundled_config("vdp_dtss"), opt));
  EXPECT_EQ(j["status"], "Infeasible");
  EXPECT_TRUE(j["certificate"].is_null());
  EXPECT_TRUE(j["barrier"].is_null());
  ASSERT_EQ(j["degrees"].size(), 1u);
  EXPECT_EQ(j["degrees"][0]["degree"], 4);
  EXPECT_EQ(result_to_json(result_from_json(j)), j);
}

TEST(Result, LoadCertificateFromResultOrBareDocument) {
  const RunResult r = run_config(bundled_config("dc_motor"));
  const auto dir = std::filesystem::temp_directory_path();
  const auto full = dir / "bcert_app_test_result.json";
  const auto bare = dir / "bcert_app_test_cert.json";
  std::ofstream(full) << result_to_json(r).dump();
  std::ofstream(bare) << certificate_to_json(*r.certificate).dump();
  const BuiltRun run = prepare(bundled_config("dc_motor"));
  for (const auto& path : {full, bare}) {
    const Certificate c = load_certificate(path.string());
    EXPECT_TRUE(check_certificate(c, run.system, run.problem).ok) << path;
  }
  std::ofstream(full) << "{\"status\": \"Infeasible\", \"certificate\": null}";
  ExpectConfigError([&] { load_certificate(full.string()); }, "certificate");
  ExpectConfigError([&] { load_certificate((dir / "bcert_app_test_missing.json").string()); }, "file");
  std::filesystem::remove(full);
  std::filesystem::remove(bare);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

TEST(Simulate, DiscreteStepCountAndReproducibility) {
  const BuiltRun motor = prepare(bundled_config("dc_motor"));
  const Trajectory t = simulate_trajectory(motor.system, motor.problem.space, {0.3, 0.5}, 100, 0.01, 1);
  EXPECT_EQ(t.times.size(), 101u);
  EXPECT_EQ(t.states.size(), 101u);
  EXPECT_EQ(t.times.back(), 100.0);

  const BuiltRun tanks = prepare(bundled_config("two_tanks"));
  const Trajectory a = simulate_trajectory(tanks.system, tanks.problem.space, {2, 2}, 50, 0.01, 42);
  const Trajectory b = simulate_trajectory(tanks.system, tanks.problem.space, {2, 2}, 50, 0.01, 42);
  const Trajectory c = simulate_trajectory(tanks.system, tanks.problem.space, {2, 2}, 50, 0.01, 43);
  EXPECT_EQ(a.states, b.states);
  EXPECT_NE(a.states, c.states);
}

TEST(Simulate, DiscreteMapMatchesDirectIteration) {
  const BuiltRun motor = prepare(bundled_config("dc_motor"));
  const Trajectory t = simulate_trajectory(motor.system, motor.problem.space, {0.3, 0.5}, 10, 0.01, 0);
  double x1 = 0.3, x2 = 0.5;
  for (int k = 1; k <= 10; ++k) {
    const double n1 = x1 + 0.01 * (-100 * x1 - x2), n2 = x2 + 0.01 * (x1 - 100 * x2);
    x1 = n1;
    x2 = n2;
    EXPECT_NEAR(t.states[k][0], x1, 1e-14);
    EXPECT_NEAR(t.states[k][1], x2, 1e-14);
  }
  // The motor decays to the origin, leaving X = [0.1, 0.5] x [0.1, 1].
  ASSERT_TRUE(t.left_space_at.has_value());
  EXPECT_GE(*t.left_space_at, 1u);
}

TEST(Simulate, ZeroNoiseContinuousMatchesEuler) {
  RunConfig stochastic = bundled_config("ex_lin1");
  stochastic.delta = ScalarList{{"0", true}, {"0", true}};
  RunConfig deterministic = stochastic;
  deterministic.mode = "ct-DS";
  deterministic.t.reset();
  deterministic.delta.reset();
  deterministic.optimize.reset();
  deterministic.lam.reset();
  const BuiltRun s = prepare(stochastic), d = prepare(deterministic);
  const Trajectory ts = simulate_trajectory(s.system, s.problem.space, {0, 3}, 1.0, 0.01, 7);
  const Trajectory td = simulate_trajectory(d.system, d.problem.space, {0, 3}, 1.0, 0.01, 99);
  ASSERT_EQ(ts.states.size(), 101u);
  EXPECT_EQ(ts.states, td.states);
}

TEST(Simulate, EulerLocalErrorIsSecondOrder) {
  const BuiltRun jet = prepare(bundled_config("jet_engine"));
  auto f = [](const std::array<double, 2>& x) {
    return std::array<double, 2>{-x[1] - 1.5 * x[0] * x[0] - 0.5 * x[0] * x[0] * x[0], x[0]};
  };
  auto rk4 = [&](std::array<double, 2> x, double h) {
    auto add = [](std::array<double, 2> a, const std::array<double, 2>& b, double s) {
      return std::array<double, 2>{a[0] + s * b[0], a[1] + s * b[1]};
    };
    const auto k1 = f(x), k2 = f(add(x, k1, h / 2)), k3 = f(add(x, k2, h / 2)), k4 = f(add(x, k3, h));
    for (int i = 0; i < 2; ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    return x;
  };
  const std::array<double, 2> x0 = {0.5, 0.5};
  std::vector<double> errors;
  for (double h : {0.02, 0.01, 0.005}) {
    const Trajectory t = simulate_trajectory(jet.system, jet.problem.space, {x0[0], x0[1]}, h, h, 0);
    ASSERT_EQ(t.states.size(), 2u);
    const auto ref = rk4(x0, h);
    errors.push_back(std::hypot(t.states[1][0] - ref[0], t.states[1][1] - ref[1]));
  }
  for (std::size_t i = 1; i < errors.size(); ++i) EXPECT_NEAR(std::log2(errors[i - 1] / errors[i]), 2.0, 0.1);
}

TEST(Simulate, RejectsBadInput) {
  const BuiltRun jet = prepare(bundled_config("jet_engine"));
  EXPECT_THROW(simulate_trajectory(jet.system, jet.problem.space, {0.5}, 1, 0.01, 0), DimensionMismatch);
  EXPECT_THROW(simulate_trajectory(jet.system, jet.problem.space, {5, 5}, 1, 0.01, 0), InvalidProblem);
  EXPECT_THROW(simulate_trajectory(jet.system, jet.problem.space, {0.5, 0.5}, 1, 0.0, 0), InvalidProblem);
  EXPECT_THROW(simulate_trajectory(jet.system, jet.problem.space, {0.5, 0.5}, -1, 0.01, 0), InvalidProblem);
}

// ---------------------------------------------------------------------------
// Level-set grids
// ---------------------------------------------------------------------------

Box UnitBox(std::size_t n) {
  Box b;
  for (std::size_t i = 0; i < n; ++i) {
    b.lower.push_back(Rational(-1));
    b.upper.push_back(Rational(1));
  }
  return b;
}

TEST(LevelSetGrid, OrientationAndSpacing) {
  const auto vars = VariableTable::standard(2);
  const RealPoly b = to_real(parse_polynomial("x1 + 10*x2", vars));
  const LevelSetGrid g = level_set_grid(b, 0.5, 2.0, UnitBox(2), 3);
  EXPECT_EQ(g.xs, std::vector<double>({-1, 0, 1}));
  EXPECT_EQ(g.ys, std::vector<double>({-1, 0, 1}));
  ASSERT_EQ(g.values.size(), 3u);
  EXPECT_DOUBLE_EQ(g.values[0][2], 1 - 10);  // x = 1, y = -1
  EXPECT_DOUBLE_EQ(g.values[2][0], -1 + 10);  // x = -1, y = 1
  EXPECT_DOUBLE_EQ(g.values[1][1], 0);
  const Json j = grid_to_json(g);
  EXPECT_EQ(j["resolution"], 3);
  EXPECT_EQ(j["gamma"], 0.5);
  EXPECT_EQ(j["lambda"], 2.0);
  EXPECT_EQ(j["box"]["lower"], Json({-1.0, -1.0}));
}

TEST(LevelSetGrid, SingleSampleSitsAtLowerCorner) {
  const auto vars = VariableTable::standard(2);
  const RealPoly b = to_real(parse_polynomial("x1^2 + 3*x2", vars));
  const LevelSetGrid g = level_set_grid(b, 0, 1, UnitBox(2), 1);
  ASSERT_EQ(g.values.size(), 1u);
  ASSERT_EQ(g.values[0].size(), 1u);
  EXPECT_DOUBLE_EQ(g.values[0][0], 1 - 3);
}

TEST(LevelSetGrid, Errors) {
  const RealPoly b3 = to_real(parse_polynomial("x1 + x2 + x3", VariableTable::standard(3)));
  EXPECT_THROW(level_set_grid(b3, 0, 1, UnitBox(3), 5), NotTwoDimensional);
  const RealPoly b2 = to_real(parse_polynomial("x1", VariableTable::standard(2)));
  EXPECT_THROW(level_set_grid(b2, 0, 1, UnitBox(3), 5), NotTwoDimensional);
  EXPECT_THROW(level_set_grid(b2, 0, 1, UnitBox(2), 0), InvalidProblem);
}

TEST(LevelSetGrid, CertificateSeparatesInitialFromUnsafe) {
  const RunResult r = run_config(bundled_config("dc_motor"));
  ASSERT_TRUE(r.certificate.has_value());
  const BuiltRun run = prepare(bundled_config("dc_motor"));
  const Certificate& c = *r.certificate;
  const LevelSetGrid g = level_set_grid(c.barrier, c.gamma, c.lambda, run.problem.space, 41);
  for (std::size_t j = 0; j < g.ys.size(); ++j) {
    for (std::size_t i = 0; i < g.xs.size(); ++i) {
      const double x = g.xs[i], y = g.ys[j];
      if (x <= 0.4 && y >= 0.1) EXPECT_LE(g.values[j][i], c.gamma + 1e-6);
      if (x >= 0.45 && y >= 0.6) EXPECT_GE(g.values[j][i], c.lambda - 1e-6);
    }
  }
}

}  // namespace
}  // namespace bcert::app
