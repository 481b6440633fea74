#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "bcert/format.hpp"
#include "bcert/parse.hpp"
#include "bcert/synth.hpp"
#include "oracles.hpp"

namespace bcert {

void PrintTo(const RationalPoly& p, std::ostream* os) { *os << to_text(p); }

namespace {

using oracle::GeneratorOracle;
using oracle::LieOracle;
using oracle::RandomPoint;
using oracle::RandomPoly;

Rational Q(const char* s) { return rational_from_decimal(s); }

PolyVector Parse(const std::vector<const char*>& exprs, const VarTablePtr& vars) {
  PolyVector out;
  for (const char* e : exprs) out.push_back(parse_polynomial(e, vars));
  return out;
}

PolyMatrix Diag(const std::vector<const char*>& exprs, const VarTablePtr& vars) {
  PolyMatrix m(exprs.size(), std::vector<RationalPoly>(exprs.size(), RationalPoly(vars)));
  for (std::size_t i = 0; i < exprs.size(); ++i) m[i][i] = parse_polynomial(exprs[i], vars);
  return m;
}

Box MakeBox(std::vector<const char*> lo, std::vector<const char*> hi) {
  Box b;
  for (auto s : lo) b.lower.push_back(Q(s));
  for (auto s : hi) b.upper.push_back(Q(s));
  return b;
}

// ---------------------------------------------------------------------------
// Benchmark systems
// ---------------------------------------------------------------------------

DtDs DcMotor() {
  auto v = VariableTable::standard(2);
  return DtDs{Parse({"x1 + 0.01*(-100*x1 - 1*x2)", "x2 + 0.01*(1*x1 - 100*x2)"}, v)};
}

SafetyProblem DcMotorProblem() {
  SafetyProblem p;
  p.space = MakeBox({"0.1", "0.1"}, {"0.5", "1"});
  p.initial = MakeBox({"0.1", "0.1"}, {"0.4", "1"});
  p.unsafe = {MakeBox({"0.45", "0.6"}, {"0.5", "1"})};
  p.b_degree = 2;
  return p;
}

CtDs JetEngine() {
  auto v = VariableTable::standard(2);
  return CtDs{Parse({"-x2 - 1.5*x1^2 - 0.5*x1^3", "x1"}, v)};
}

SafetyProblem JetEngineProblem() {
  SafetyProblem p;
  p.space = MakeBox({"0.1", "0.1"}, {"1", "1"});
  p.initial = MakeBox({"0.1", "0.1"}, {"0.5", "0.5"});
  p.unsafe = {MakeBox({"0.7", "0.7"}, {"1", "1"})};
  return p;
}

CtSs ExLin() {
  auto v = VariableTable::standard(2);
  return CtSs{Parse({"-5*x1 - 4*x2", "-x1 - 2*x2"}, v), Diag({"0", "0.5*x2"}, v), {}, {}};
}

SafetyProblem ExLinProblem() {
  SafetyProblem p;
  p.space = MakeBox({"-3", "-1.5"}, {"3", "3.5"});
  p.initial = MakeBox({"-0.25", "2.75"}, {"0.25", "3.25"});
  p.unsafe = {MakeBox({"-3", "-1.5"}, {"3", "-1"})};
  p.horizon = 5;
  p.lam = Q("10");
  p.mode = SynthMode::kOptimizeConfidence;
  p.b_degree = 4;
  return p;
}

CtSs ExNonlin() {
  auto v = VariableTable::standard(2);
  return CtSs{Parse({"x2", "-x1 - x2 - 0.5*x1^3"}, v), Diag({"0", "0.5"}, v), {}, {}};
}

Box ExNonlinSpace() { return MakeBox({"-3", "-3"}, {"3", "3"}); }

CtSs RoomCt() {
  auto v = VariableTable::standard(1);
  return CtSs{Parse({"(-2*0.005 - 0.6 - 0.156*(-0.0120155*x1 + 0.7))*x1 + 0.156*48*(-0.0120155*x1 + 0.7) + 0.6*(-15)"}, v),
              Diag({"0.1"}, v), Diag({"0.1"}, v), {Q("0.1")}};
}

DtSs TwoTanks() {
  auto v = VariableTable::standard(2, 2);
  return DtSs{Parse({"(1 - 0.1*1)*x1 + 0.1*4.5 + varsigma1", "0.1*1*x1 + (1 - 0.1*1)*x2 + 0.1*(-3) + varsigma2"}, v),
              NoiseSpec::normal({Q("0"), Q("0")}, {Q("0.01"), Q("0.01")})};
}

SafetyProblem TwoTanksProblem() {
  SafetyProblem p;
  p.space = MakeBox({"1", "1"}, {"10", "10"});
  p.initial = MakeBox({"1.75", "1.75"}, {"2.25", "2.25"});
  p.unsafe = {MakeBox({"9", "9"}, {"10", "10"})};
  p.horizon = 5;
  p.lam = Q("10");
  p.mode = SynthMode::kOptimizeConfidence;
  p.b_degree = 4;
  return p;
}

DtSs Vdp() {
  auto v = VariableTable::standard(2, 2);
  return DtSs{Parse({"x1 + 0.1*x2 + varsigma1", "x2 + 0.1*(-x1 + (1 - x1^2)*x2) + varsigma2"}, v),
              NoiseSpec::uniform({Q("-0.02"), Q("-0.02")}, {Q("0.02"), Q("0.02")})};
}

SafetyProblem VdpProblem() {
  SafetyProblem p;
  p.space = MakeBox({"-7", "-7"}, {"7", "7"});
  p.initial = MakeBox({"-5", "-5"}, {"5", "5"});
  p.unsafe = {MakeBox({"-7", "-7"}, {"-6", "7"}), MakeBox({"6", "-7"}, {"7", "7"})};
  p.horizon = 5;
  p.lam = Q("1000");
  p.mode = SynthMode::kOptimizeConfidence;
  p.b_degree = 4;
  return p;
}

// Every certificate handed out must pass the independent validator.
void ExpectValid(const SynthResult& r, const SystemSpec& sys, const SafetyProblem& prob) {
  ASSERT_EQ(r.status, SynthStatus::kFeasible) << to_string(r.status) << ": " << r.message;
  ASSERT_TRUE(r.certificate.has_value());
  const Certificate& c = *r.certificate;
  EXPECT_TRUE(c.validation.ok);
  EXPECT_NO_THROW(validate_certificate(c, sys, prob));
  EXPECT_GE(c.validation.min_gram_eigenvalue, -1e-6);
  EXPECT_LE(c.validation.max_reconstruction_error, 1e-6);
  EXPECT_GE(c.lambda - c.gamma, to_double(prob.eps_gap) - 1e-9);
}

// ---------------------------------------------------------------------------
// confidence_bound
// ---------------------------------------------------------------------------

TEST(ConfidenceBound, Examples) {
  EXPECT_NEAR(confidence_bound(4.8e-5, 10, 9.6e-6, 5), 0.99999, 1e-5);
  EXPECT_NEAR(confidence_bound(97.5, 1000, 3.53, 5), 0.88485, 1e-5);
  EXPECT_EQ(confidence_bound(0, 1, 0, 100), 1.0);
  EXPECT_EQ(confidence_bound(20, 10, 0, 5), 0.0);
  EXPECT_THROW(confidence_bound(0, 0, 0, 1), NonpositiveLambda);
  EXPECT_THROW(confidence_bound(0, -1, 0, 1), NonpositiveLambda);
}

TEST(ConfidenceBound, ReproducesPublishedRows) {
  struct Row {
    double gamma, lambda, c, horizon, phi;
  };
  const std::vector<Row> rows = {
      {4.8e-5, 10, 9.6e-6, 5, 0.99}, {4.4e-5, 10, 8.9e-6, 5, 0.99}, {1.39, 10, 0.26, 5, 0.73},
      {3.34, 10, 0.53, 5, 0.40},     {1.0e-6, 10, 3.4e-8, 5, 0.99}, {1.1e-8, 10, 7.5e-9, 3, 0.99},
      {0.02, 10, 0.02, 3, 0.99},     {1.1e-6, 10, 2.3e-7, 5, 0.99}, {4.4e-7, 10, 1.0e-7, 5, 0.99},
      {97.5, 1000, 3.53, 5, 0.88},   {0.34, 10, 0.04, 5, 0.95},     {1.84, 10, 0.2, 5, 0.72},
      {1.8e-3, 10, 1.2e-3, 3, 0.99},
  };
  for (const auto& r : rows) {
    const double phi = std::round(confidence_bound(r.gamma, r.lambda, r.c, r.horizon) * 100) / 100;
    EXPECT_NEAR(phi, r.phi, 0.01 + 1e-12) << r.gamma << " " << r.c;
  }
}

TEST(ConfidenceBound, MonotoneAndClamped) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 2), l(0.1, 5), h(0, 10);
  for (int i = 0; i < 500; ++i) {
    const double g = u(rng), c = u(rng), lam = l(rng), t = h(rng), d = u(rng);
    const double phi = confidence_bound(g, lam, c, t);
    EXPECT_GE(phi, 0.0);
    EXPECT_LE(phi, 1.0);
    EXPECT_LE(confidence_bound(g + d, lam, c, t), phi);
    EXPECT_LE(confidence_bound(g, lam, c + d, t), phi);
    EXPECT_GE(confidence_bound(g, lam + d, c, t), phi);
  }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

TEST(LieDerivative, JetEngineExample) {
  auto v = VariableTable::standard(2);
  const RationalPoly b = parse_polynomial("x1^2 + x2^2", v);
  EXPECT_EQ(lie_derivative(b, JetEngine().f), parse_polynomial("-3*x1^3 - x1^4", v));
}

TEST(LieDerivative, TrivialCases) {
  auto v = VariableTable::standard(2);
  EXPECT_TRUE(lie_derivative(parse_polynomial("3", v), JetEngine().f).is_zero());
  EXPECT_TRUE(lie_derivative(parse_polynomial("x1^3*x2 + 2", v), Parse({"0", "0"}, v)).is_zero());
  EXPECT_THROW(lie_derivative(parse_polynomial("x1", VariableTable::standard(3)), JetEngine().f), DimensionMismatch);
}

// Directional central differences of B along f.
TEST(LieDerivative, MatchesFiniteDifferences) {
  std::mt19937 rng(11);
  const std::vector<std::pair<PolyVector, Box>> cases = {
      {JetEngine().f, JetEngineProblem().space},
      {ExLin().f, ExLinProblem().space},
      {ExNonlin().f, ExNonlinSpace()},
  };
  for (const auto& [f, box] : cases) {
    const RationalPoly b = RandomPoly(f.size(), 4, rng).retabled(f[0].vars());
    const RealPoly lie = to_real(lie_derivative(b, f));
    const RealPoly br = to_real(b);
    for (int k = 0; k < 10; ++k) {
      const std::vector<double> x = RandomPoint(box, rng);
      const double fd = LieOracle(br, f, x);
      const double exact = evaluate(lie, std::span<const double>(x));
      EXPECT_LE(std::abs(fd - exact), 1e-6 * std::max(1.0, std::abs(exact))) << k;
    }
  }
}

TEST(InfinitesimalGenerator, BrownianExample) {
  auto v = VariableTable::standard(2);
  CtSs sys{Parse({"x2", "-x1 - x2 - 0.5*x1^3"}, v), {{RationalPoly(v)}, {parse_polynomial("0.5", v)}}, {}, {}};
  EXPECT_EQ(infinitesimal_generator(parse_polynomial("x2^2", v), sys),
            parse_polynomial("-2*x1*x2 - 2*x2^2 - x1^3*x2 + 0.25", v));
}

TEST(InfinitesimalGenerator, JumpExample) {
  auto v = VariableTable::standard(1);
  CtSs sys{Parse({"0"}, v), {}, Diag({"0.1"}, v), {Q("0.1")}};
  EXPECT_EQ(infinitesimal_generator(parse_polynomial("x1^2", v), sys), parse_polynomial("0.02*x1 + 0.001", v));
}

TEST(InfinitesimalGenerator, DegenerateNoiseIsLieDerivative) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + trial % 3;
    auto v = VariableTable::standard(n);
    PolyVector f;
    for (std::size_t i = 0; i < n; ++i) f.push_back(RandomPoly(n, 3, rng).retabled(v));
    const RationalPoly b = RandomPoly(n, 4, rng).retabled(v);
    PolyMatrix zero(n, std::vector<RationalPoly>(n, RationalPoly(v)));
    EXPECT_EQ(infinitesimal_generator(b, CtSs{f, {}, {}, {}}), lie_derivative(b, f));
    EXPECT_EQ(infinitesimal_generator(b, CtSs{f, zero, zero, std::vector<Rational>(n, Rational(1))}), lie_derivative(b, f));
  }
}

TEST(InfinitesimalGenerator, MatchesEulerMaruyamaOracle) {
  std::mt19937 rng(17);
  const std::vector<std::pair<CtSs, Box>> cases = {
      {ExLin(), ExLinProblem().space},
      {ExNonlin(), ExNonlinSpace()},
      {RoomCt(), MakeBox({"1"}, {"50"})},
  };
  for (const auto& [sys, box] : cases) {
    const std::size_t n = sys.f.size();
    RationalPoly b = RandomPoly(n, n == 1 ? 2 : 4, rng).retabled(sys.f[0].vars());
    if (n == 1) b = b.scaled(Rational(1, 100));  // keeps values moderate on [1, 50]
    const RealPoly gen = to_real(infinitesimal_generator(b, sys));
    const RealPoly br = to_real(b);
    for (int k = 0; k < 10; ++k) {
      const std::vector<double> x = RandomPoint(box, rng);
      const double exact = evaluate(gen, std::span<const double>(x));
      const double oracle = GeneratorOracle(br, sys, x);
      EXPECT_LE(std::abs(exact - oracle), 1e-6 * std::max(1.0, std::abs(exact))) << k << " " << exact << " " << oracle;
    }
  }
}

TEST(ExpectedNext, Examples) {
  auto v = VariableTable::standard(1, 1);
  auto s = VariableTable::standard(1);
  DtSs shift{Parse({"x1 + varsigma1"}, v), NoiseSpec::normal({Q("0")}, {Q("0.3")})};
  EXPECT_EQ(expected_next(parse_polynomial("x1", s), shift, s), parse_polynomial("x1", s));
  DtSs small{Parse({"x1 + varsigma1"}, v), NoiseSpec::normal({Q("0")}, {Q("0.01")})};
  EXPECT_EQ(expected_next(parse_polynomial("x1^2", s), small, s), parse_polynomial("x1^2 + 0.0001", s));
  DtSs uni{Parse({"0.9*x1 + varsigma1"}, v), NoiseSpec::uniform({Q("-0.02")}, {Q("0.02")})};
  const RationalPoly e = expected_next(parse_polynomial("x1^2", s), uni, s);
  EXPECT_EQ(e, parse_polynomial("0.81*x1^2", s) + RationalPoly::constant(s, Rational(1, 7500)));
  EXPECT_NEAR(to_double(e.coefficient(Monomial(std::vector<std::uint16_t>{0}))), 1.3333e-4, 1e-8);
}

TEST(ExpectedNext, UniformMatchesMonteCarlo) {
  auto v = VariableTable::standard(1, 1);
  auto s = VariableTable::standard(1);
  DtSs uni{Parse({"0.9*x1 + varsigma1"}, v), NoiseSpec::uniform({Q("-0.02")}, {Q("0.02")})};
  const RealPoly e = to_real(expected_next(parse_polynomial("x1^2", s), uni, s));
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> w(-0.02, 0.02);
  for (double x : {0.0, 0.05, 1.0}) {
    double sum = 0;
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) {
      const double next = 0.9 * x + w(rng);
      sum += next * next;
    }
    const double mc = sum / draws;
    EXPECT_NEAR(evaluate(e, {x}), mc, 0.01 * mc) << x;
  }
}

TEST(ExpectedNext, ZeroNoiseIsSubstitution) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    auto v = VariableTable::standard(2, 2);
    auto s = VariableTable::standard(2);
    PolyVector f;
    for (int i = 0; i < 2; ++i) {
      f.push_back(RandomPoly(2, 2, rng).retabled(v) + RationalPoly::variable(v, 2 + i));
    }
    DtSs sys{f, NoiseSpec::normal({Q("0"), Q("0")}, {Q("0"), Q("0")})};
    const RationalPoly b = RandomPoly(2, 3, rng).retabled(s);
    std::map<std::size_t, RationalPoly> noiseless;
    for (int i = 0; i < 2; ++i) {
      std::map<std::size_t, RationalPoly> drop = {{2, RationalPoly(v)}, {3, RationalPoly(v)}};
      noiseless.emplace(i, substitute(f[i], drop).retabled(s));
    }
    EXPECT_EQ(expected_next(b, sys, s), substitute(b, noiseless));
  }
}

// The class operator commutes with the change of coordinates x = c + h u.
TEST(Normalization, CommutesWithClassOperators) {
  std::mt19937 rng(31);
  const std::vector<std::pair<SystemSpec, Box>> cases = {
      {DcMotor(), DcMotorProblem().space},
      {JetEngine(), JetEngineProblem().space},
      {ExLin(), ExLinProblem().space},
      {RoomCt(), MakeBox({"1"}, {"50"})},
      {TwoTanks(), TwoTanksProblem().space},
  };
  for (const auto& [sys, box] : cases) {
    const Normalization z = Normalization::of(box);
    const VarTablePtr state = state_table(sys);
    const RationalPoly bx = RandomPoly(state->size(), 3, rng).retabled(state);
    const RationalPoly bu = substitute(bx, z.to_x(state));
    const RationalPoly lhs = barrier_increase(bu, z.system_to_u(sys));
    const RationalPoly rhs = substitute(barrier_increase(bx, sys), z.to_x(state));
    EXPECT_EQ(lhs, rhs) << to_string(system_class(sys));
    EXPECT_EQ(z.barrier_to_x(bu), bx);
  }
}

// ---------------------------------------------------------------------------
// Problem checks
// ---------------------------------------------------------------------------

TEST(CheckProblem, RejectsOverlapAndMissingHorizon) {
  auto v = VariableTable::standard(1);
  DtDs sys{Parse({"0.5*x1"}, v)};
  SafetyProblem p;
  p.space = MakeBox({"-1"}, {"3"});
  p.initial = MakeBox({"0"}, {"1"});
  p.unsafe = {MakeBox({"0.5"}, {"2"})};
  EXPECT_THROW(synth_dt_ds(sys, p), InvalidProblem);

  p.unsafe = {MakeBox({"2"}, {"3"})};
  EXPECT_NO_THROW(check_problem(sys, p));
  p.unsafe.clear();
  EXPECT_THROW(check_problem(sys, p), InvalidProblem);

  SafetyProblem q = ExLinProblem();
  q.horizon.reset();
  EXPECT_THROW(check_problem(ExLin(), q), InvalidProblem);
  q = ExLinProblem();
  q.b_degree = 3;
  EXPECT_THROW(check_problem(ExLin(), q), OddDegree);
  q = ExLinProblem();
  q.lam = Q("0");
  EXPECT_THROW(check_problem(ExLin(), q), NonpositiveLambda);
}

TEST(CheckProblem, UnsafeOutsideSpaceOnlyWarns) {
  auto v = VariableTable::standard(1);
  DtDs sys{Parse({"0.5*x1"}, v)};
  SafetyProblem p;
  p.space = MakeBox({"-1"}, {"3"});
  p.initial = MakeBox({"0"}, {"1"});
  p.unsafe = {MakeBox({"2.5"}, {"4"})};
  EXPECT_EQ(check_problem(sys, p).size(), 1u);
}

// Independent enumeration of the Gram blocks the dt-DS program must contain:
// barrier, one multiplier per affine inequality, then one block per SOS
// constraint sized by the half-degree of its expression.
TEST(Program, BlockCountMatchesEnumeration) {
  const SafetyProblem prob = DcMotorProblem();
  const SystemSpec sys = DcMotor();
  for (GramPadding pad : {GramPadding::kTrim, GramPadding::kPad}) {
    SafetyProblem p = prob;
    p.padding = pad;
    const Normalization z = Normalization::of(p.space);
    const auto d = detail::normalize(sys, p, z);
    auto lp = detail::build_program(d, p, SystemClass::kDtDs, std::nullopt, 1.0);
    const CompiledSos c = lp->program.compile(pad);

    const std::size_t n = 2;
    const std::size_t inequalities = 4 + 4 + 4;
    std::vector<int> expected;
    expected.push_back(static_cast<int>(binomial(n + 1, 1)));  // B, degree 2
    for (std::size_t k = 0; k < inequalities; ++k) expected.push_back(static_cast<int>(binomial(n + 1, 1)));
    // Constraint expressions have degree 3 (multiplier times affine).
    const std::size_t half = pad == GramPadding::kTrim ? 1 : 2;
    for (int k = 0; k < 3; ++k) expected.push_back(static_cast<int>(binomial(n + half, half)));
    std::vector<int> got = c.sdp.block_dims;
    std::sort(got.begin(), got.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(got, expected);
    EXPECT_EQ(got.size(), 16u);
  }
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

TEST(SynthDtDs, DcMotorDegreeTwo) {
  const SafetyProblem p = DcMotorProblem();
  SynthResult r = synth_dt_ds(DcMotor(), p);
  ExpectValid(r, DcMotor(), p);
  EXPECT_FALSE(r.certificate->confidence.has_value());
  EXPECT_EQ(r.certificate->c, 0.0);
  EXPECT_EQ(r.certificate->degree, 2u);
}

TEST(SynthDtDs, DuplicateUnsafeRegionKeepsStatus) {
  SafetyProblem p = DcMotorProblem();
  p.unsafe.push_back(p.unsafe.front());
  SynthResult r = synth_dt_ds(DcMotor(), p);
  ExpectValid(r, DcMotor(), p);
}

TEST(SynthDtDs, HorizonIsIgnored) {
  SafetyProblem p = DcMotorProblem();
  SynthResult a = synth_dt_ds(DcMotor(), p);
  p.horizon = 7;
  p.mode = SynthMode::kOptimizeConfidence;
  SynthResult b = synth_dt_ds(DcMotor(), p);
  ASSERT_EQ(a.status, b.status);
  ASSERT_TRUE(a.certificate && b.certificate);
  EXPECT_NEAR(a.certificate->gamma, b.certificate->gamma, 1e-9);
  EXPECT_NEAR(a.certificate->lambda, b.certificate->lambda, 1e-9);
}

TEST(SynthDtDs, OneDimensionalSystem) {
  auto v = VariableTable::standard(1);
  DtDs sys{Parse({"x1 + 5*(15 - x1 + 0.1*3.6e-3*(55 - x1))"}, v)};
  SafetyProblem p;
  p.space = MakeBox({"-6"}, {"6"});
  p.initial = MakeBox({"-0.5"}, {"0.5"});
  p.unsafe = {MakeBox({"-6"}, {"-5"})};
  ExpectValid(synth_dt_ds(sys, p), sys, p);
}

TEST(SynthCtDs, JetEngineDegreeTwo) {
  const SafetyProblem p = JetEngineProblem();
  ExpectValid(synth_ct_ds(JetEngine(), p), JetEngine(), p);
}

TEST(SynthCtSs, ExLinOptimizeDegreeFour) {
  const SafetyProblem p = ExLinProblem();
  SynthResult r = synth_ct_ss(ExLin(), p);
  ExpectValid(r, ExLin(), p);
  ASSERT_TRUE(r.certificate->confidence.has_value());
  EXPECT_GE(*r.certificate->confidence, 0.70);
  EXPECT_DOUBLE_EQ(r.certificate->lambda, 10.0);
}

TEST(SynthCtSs, TargetConfidence) {
  SafetyProblem p = ExLinProblem();
  p.mode = SynthMode::kTargetConfidence;
  p.target_confidence = Q("0.5");
  SynthResult r = synth_ct_ss(ExLin(), p);
  ExpectValid(r, ExLin(), p);
  EXPECT_GE(*r.certificate->confidence, 0.5 - 1e-6);

  p.target_confidence = Q("0.99");
  EXPECT_EQ(synth_ct_ss(ExLin(), p).status, SynthStatus::kInfeasible);
}

TEST(SynthDtSs, TwoTanksOptimize) {
  const SafetyProblem p = TwoTanksProblem();
  SynthResult r = synth_dt_ss(TwoTanks(), p);
  ExpectValid(r, TwoTanks(), p);
  EXPECT_GE(*r.certificate->confidence, 0.99);
}

TEST(SynthDtSs, VdpDegreeFourHasNoPositiveConfidence) {
  SynthResult r = synth_dt_ss(Vdp(), VdpProblem());
  EXPECT_EQ(r.status, SynthStatus::kInfeasible) << r.message;
  EXPECT_FALSE(r.certificate.has_value());
}

TEST(SynthDtSs, FeasibilityModeFreesLevels) {
  SafetyProblem p = TwoTanksProblem();
  p.mode = SynthMode::kFeasibility;
  p.lam.reset();
  p.b_degree = 2;
  SynthResult r = synth_dt_ss(TwoTanks(), p);
  ExpectValid(r, TwoTanks(), p);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

TEST(Validation, CorruptedBarrierFails) {
  const SafetyProblem p = DcMotorProblem();
  SynthResult r = synth_dt_ds(DcMotor(), p);
  ASSERT_TRUE(r.certificate);
  const Certificate& good = *r.certificate;
  auto shifted = [&](double delta) {
    Certificate c = good;
    const Monomial one(std::vector<std::uint16_t>(2, 0));
    c.barrier.add_term(one, delta);
    c.barrier_u.add_term(one, delta);
    return c;
  };
  auto has = [](const ValidationReport& rep, const std::string& clause) {
    return std::find(rep.failures.begin(), rep.failures.end(), clause) != rep.failures.end();
  };
  // Shifts of 0.1 beyond the worst sampled margins.
  const double down_by = good.validation.unsafe_margin + 0.1;
  const ValidationReport down = check_certificate(shifted(-down_by), DcMotor(), p);
  EXPECT_FALSE(down.ok);
  EXPECT_TRUE(has(down, "sampled unsafe level"));
  const ValidationReport up = check_certificate(shifted(good.validation.initial_margin + 0.1), DcMotor(), p);
  EXPECT_FALSE(up.ok);
  EXPECT_TRUE(has(up, "sampled initial level"));
  EXPECT_THROW(validate_certificate(shifted(-down_by), DcMotor(), p), InvalidCertificate);
}

TEST(Validation, LevelSetOrder) {
  const SafetyProblem p = DcMotorProblem();
  SynthResult r = synth_dt_ds(DcMotor(), p);
  ASSERT_TRUE(r.certificate);
  Certificate c = *r.certificate;
  c.lambda = c.gamma;
  try {
    validate_certificate(c, DcMotor(), p);
    FAIL() << "expected InvalidCertificate";
  } catch (const InvalidCertificate& e) {
    EXPECT_EQ(std::string(e.what()), "InvalidCertificate: level-set order");
  }
}

TEST(Validation, CorruptedGramFails) {
  const SafetyProblem p = DcMotorProblem();
  SynthResult r = synth_dt_ds(DcMotor(), p);
  ASSERT_TRUE(r.certificate);
  Certificate c = *r.certificate;
  c.witnesses.front().gram(0, 0) -= 10;
  const ValidationReport rep = check_certificate(c, DcMotor(), p);
  EXPECT_FALSE(rep.ok);
  EXPECT_GT(rep.max_reconstruction_error, 1);
}

}  // namespace
}  // namespace bcert
