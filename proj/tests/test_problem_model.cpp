#include <gtest/gtest.h>

#include <cmath>

#include "subreg/finite_difference.hpp"
#include "subreg/problem_file.hpp"

using namespace subreg;

namespace {

ScalarField parse_field(const std::string& expr, int n) {
  auto def = parse_problem_file("class: nlp\ndims: " + std::to_string(n) +
                                "\nobjective: " + expr + "\n");
  return def.nlp->objective;
}

}  // namespace

TEST(EvaluateWithDerivatives, SumOfSquares) {
  auto e = evaluate_with_derivatives(parse_field("x1^2 + x2^2", 2), Vec::Map(std::vector<double>{1, 2}.data(), 2));
  EXPECT_DOUBLE_EQ(e.value, 5.0);
  EXPECT_DOUBLE_EQ(e.gradient(0), 2.0);
  EXPECT_DOUBLE_EQ(e.gradient(1), 4.0);
  EXPECT_TRUE(e.hessian.isApprox(Mat(2.0 * Mat::Identity(2, 2))));
}

TEST(EvaluateWithDerivatives, AffineAndBilinear) {
  Vec p(2);
  p << 0.5, 0.5;
  auto g = evaluate_with_derivatives(parse_field("x1 + x2 - 1", 2), p);
  EXPECT_DOUBLE_EQ(g.value, 0.0);
  EXPECT_DOUBLE_EQ(g.gradient(0), 1.0);
  EXPECT_DOUBLE_EQ(g.gradient(1), 1.0);
  EXPECT_EQ(g.hessian.cwiseAbs().maxCoeff(), 0.0);

  p << 3, -1;
  auto b = evaluate_with_derivatives(parse_field("x1*x2", 2), p);
  EXPECT_DOUBLE_EQ(b.value, -3.0);
  EXPECT_DOUBLE_EQ(b.gradient(0), -1.0);
  EXPECT_DOUBLE_EQ(b.gradient(1), 3.0);
  EXPECT_DOUBLE_EQ(b.hessian(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(b.hessian(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(b.hessian(0, 0), 0.0);
}

TEST(EvaluateWithDerivatives, DimensionMismatchIsInputError) {
  EXPECT_THROW(evaluate_with_derivatives(parse_field("x1", 2), Vec::Zero(3)),
               InputError);
}

TEST(ParseProblemFile, EqualityConstrainedQuadratic) {
  auto def = parse_problem_file(
      "# min x1^2+x2^2 s.t. x1+x2-1=0\n"
      "class: nlp\n"
      "dims: 2\n"
      "objective: x1^2 + x2^2\n"
      "eq:\n"
      "  x1 + x2 - 1\n");
  ASSERT_TRUE(def.nlp);
  EXPECT_EQ(def.nlp->n, 2);
  EXPECT_EQ(def.nlp->neq(), 1);
  EXPECT_EQ(def.nlp->m(), 0);
}

TEST(ParseProblemFile, TimeVaryingExampleByStateAugmentation) {
  // x1 is the clock (x1' = 1, x1(0) = 0), x2' = x1 u - u^2, u >= 0.
  auto def = parse_problem_file(
      "class: ocp\n"
      "dims: 2, 1, 1\n"
      "dynamics:\n"
      "  1\n"
      "  x1*u1 - u1^2\n"
      "endpoint: q4 - q2\n"
      "control_ineq: -u1\n");
  ASSERT_TRUE(def.ocp);
  EXPECT_EQ(def.ocp->n, 2);
  EXPECT_EQ(def.ocp->m, 1);
  EXPECT_EQ(def.ocp->k(), 1);
  Vec w(3);
  w << 0.3, 7.0, 0.1;
  EXPECT_NEAR(def.ocp->dynamics[1].value(w), 0.3 * 0.1 - 0.01, 1e-15);
}

TEST(ParseProblemFile, MalformedExponentReportsPosition) {
  try {
    parse_problem_file("class: nlp\ndims: 1\nobjective: 3*x1^a\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.column(), 17);
  }
  EXPECT_THROW(parse_problem_file("class: nlp\ndims: 1\nobjective: x1^2.5\n"),
               ParseError);
  EXPECT_THROW(parse_problem_file("class: nlp\ndims: 1\nobjective: x1^-2\n"),
               ParseError);
}

TEST(ParseProblemFile, ErrorPaths) {
  EXPECT_THROW(parse_problem_file("class: sqp\ndims: 1\nobjective: x1\n"),
               ParseError);
  EXPECT_THROW(parse_problem_file("class: nlp\ndims: 1\nobjective: x2\n"),
               ParseError);
  EXPECT_THROW(parse_problem_file("class: ocp\ndims: 1,1\ndynamics: u1\n"
                                  "endpoint: q1\n"),
               InputError);
  EXPECT_THROW(parse_problem_file("class: nlp\ndims: 1\n"), InputError);
  EXPECT_THROW(parse_problem_file("class: nlp\ndims: 1\nobjective: x1 x1\n"),
               ParseError);
  // U = {u : 1 + u^2 <= 0} is empty.
  EXPECT_THROW(parse_problem_file("class: ocp\ndims: 1,1,1\ndynamics: u1\n"
                                  "endpoint: q2\ncontrol_ineq: 1 + u1^2\n"),
               InputError);
}

TEST(ParseProblemFile, SolutionBlock) {
  auto def = parse_problem_file(
      "class: nlp\ndims: 2\nobjective: x1^2+x2^2\neq: x1+x2-1\n"
      "solution:\n  x = 0.5, 0.5\n  ystar = -1\n");
  ASSERT_TRUE(def.solution.x);
  EXPECT_DOUBLE_EQ((*def.solution.x)(1), 0.5);
  EXPECT_DOUBLE_EQ((*def.solution.ystar)(0), -1.0);
}

// Random polynomial problems survive serialize -> parse with identical
// oracles at random points.
TEST(ProblemFileProperty, RoundTripAgreesAtRandomPoints) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 3);
    auto random_poly = [&](int dim) {
      Polynomial p(dim);
      const int terms = 1 + static_cast<int>(rng.uniform() * 5);
      for (int t = 0; t < terms; ++t) {
        std::vector<int> e(dim);
        for (int& v : e) v = static_cast<int>(rng.uniform() * 4);
        p.add_term(rng.normal() * std::pow(10.0, rng.uniform(-3, 3)), e);
      }
      return ScalarField(p);
    };
    ProblemDefinition def;
    def.cls = ProblemClass::Nlp;
    NlpProblem nlp;
    nlp.n = n;
    nlp.objective = random_poly(n);
    nlp.inequalities = {random_poly(n), random_poly(n)};
    nlp.equalities = {random_poly(n)};
    def.nlp = nlp;
    const auto back = parse_problem_file(serialize_problem(def));
    for (int k = 0; k < 100; ++k) {
      const Vec x = rng.normal_vec(n);
      auto a = nlp.objective.eval(x);
      auto b = back.nlp->objective.eval(x);
      EXPECT_NEAR(a.value, b.value, 1e-12 * (1 + std::abs(a.value)));
      EXPECT_LE((a.gradient - b.gradient).norm(), 1e-12 * (1 + a.gradient.norm()));
      EXPECT_LE((a.hessian - b.hessian).norm(), 1e-12 * (1 + a.hessian.norm()));
      for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(nlp.inequalities[i].value(x), back.nlp->inequalities[i].value(x),
                    1e-12 * (1 + std::abs(nlp.inequalities[i].value(x))));
      }
    }
  }
}

TEST(ProblemFileProperty, ControlProblemRoundTrip) {
  const std::string text =
      "class: mayer\ndims: 2, 1\nhorizon: 0, 2\ndynamics:\n  u1\n  0.5*u1^2\n"
      "objective: q4 + 0.5*q1^2\neq:\n  q3 - 1\n  q2\n";
  auto def = parse_problem_file(text);
  auto again = parse_problem_file(serialize_problem(def));
  EXPECT_EQ(again.mayer->t1, 2.0);
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    Vec q = rng.normal_vec(4);
    EXPECT_NEAR(def.mayer->endpoint_cost.value(q), again.mayer->endpoint_cost.value(q), 1e-12);
    Vec w = rng.normal_vec(3);
    EXPECT_NEAR(def.mayer->dynamics[1].value(w), again.mayer->dynamics[1].value(w), 1e-12);
  }
}

TEST(HessianSymmetry, HoldsForRandomPolynomials) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Polynomial p(3);
    for (int t = 0; t < 6; ++t) {
      p.add_term(rng.normal(), {static_cast<int>(rng.uniform() * 3),
                                static_cast<int>(rng.uniform() * 3),
                                static_cast<int>(rng.uniform() * 3)});
    }
    auto e = ScalarField(p).eval(rng.normal_vec(3));
    EXPECT_LE((e.hessian - e.hessian.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FiniteDifferenceCheck, QuadraticIsExact) {
  auto f = parse_field("3*x1^2 - x1*x2 + 2*x2 + 7", 2);
  Vec x(2);
  x << 0.3, -1.2;
  auto rep = finite_difference_check(f, x, {1e-1, 1e-2, 1e-3});
  EXPECT_TRUE(rep.passed);
  for (const auto& r : rep.rows) EXPECT_LE(r.remainder, 1e-12);
}

TEST(FiniteDifferenceCheck, CubicRemainderIsStepCubed) {
  // (1+h)^3 - 1 - 3h - 3h^2 = h^3.
  auto f = parse_field("x1^3", 1);
  auto rep = finite_difference_check(f, Vec::Ones(1), {1e-1, 1e-2});
  EXPECT_TRUE(rep.passed);
  const double r = rep.rows[1].remainder;
  EXPECT_GT(r, 0.5e-6);
  EXPECT_LT(r, 2e-6);
  EXPECT_NEAR(rep.rows[1].order, 3.0, 0.05);
}

TEST(FiniteDifferenceCheck, WrongGradientFlagged) {
  ScalarField bad(1, [](const Vec& x) {
    FieldEval e;
    e.value = x(0) * x(0) * x(0);
    e.gradient = RowVec::Constant(1, 3.0 * x(0) * x(0) + 0.1);
    e.hessian = Mat::Constant(1, 1, 6.0 * x(0));
    return e;
  });
  auto rep = finite_difference_check(bad, Vec::Ones(1), {1e-1, 1e-2, 1e-3});
  EXPECT_FALSE(rep.passed);
  EXPECT_NEAR(rep.min_order, 1.0, 0.1);
}

TEST(FiniteDifferenceCheck, RejectsNonDecreasingSteps) {
  auto f = parse_field("x1", 1);
  EXPECT_THROW(finite_difference_check(f, Vec::Ones(1), {1e-2, 1e-1}), InputError);
}
