#include <gtest/gtest.h>

#include <cmath>

#include "subreg/cone.hpp"

using namespace subreg;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

struct RandomPair {
  QuadraticFormRep form;
  PolyhedralCone cone;
};

RandomPair random_pair(Rng& rng) {
  const int d = 1 + static_cast<int>(rng.uniform() * 5);
  const int rows = static_cast<int>(rng.uniform() * 5);
  const int eqs = d > 2 ? static_cast<int>(rng.uniform() * 2) : 0;
  Mat H = Mat::NullaryExpr(d, d, [&] { return rng.normal(); });
  H = 0.5 * (H + H.transpose()).eval();
  Mat G = Mat::Identity(d, d);
  if (rng.uniform() < 0.3) {
    Mat L = Mat::NullaryExpr(d, d, [&] { return 0.3 * rng.normal(); });
    G += L * L.transpose();
  }
  Mat A = Mat::NullaryExpr(rows, d, [&] { return rng.normal(); });
  Mat B = Mat::NullaryExpr(eqs, d, [&] { return rng.normal(); });
  return {QuadraticFormRep(H, G), PolyhedralCone(A, B, d)};
}

}  // namespace

TEST(Nnls, MatchesKnownSolution) {
  Mat A(3, 2);
  A << 1, 0, 0, 1, 1, 1;
  Vec b(3);
  b << -1, 2, 1;
  auto r = nnls(A, b);
  // Unconstrained LS gives x1 < 0; the solution clamps x1 = 0, x2 = 1.5.
  EXPECT_NEAR(r.x(0), 0.0, 1e-12);
  EXPECT_NEAR(r.x(1), 1.5, 1e-12);
}

TEST(Nullspace, StructuredMatchesDense) {
  Mat B(2, 4);
  B << 0, 3, 0, 0,
       1, 0, 1, 1;
  Mat Z = nullspace_structured(B, 4);
  EXPECT_EQ(Z.cols(), 2);
  EXPECT_LE((B * Z).norm(), 1e-12);
  EXPECT_LE((Z.transpose() * Z - Mat::Identity(2, 2)).norm(), 1e-12);
  EXPECT_EQ(nullspace(B, 4).cols(), 2);
}

TEST(PositiveDependence, OppositeVectors) {
  Mat P(1, 2);
  P << 1, -1;
  auto w = positive_dependence(P);
  ASSERT_TRUE(w);
  EXPECT_NEAR((*w)(0), 0.5, 1e-12);
  EXPECT_NEAR((*w)(1), 0.5, 1e-12);
  Mat Q(2, 2);
  Q << 1, 0, 0, 1;
  EXPECT_FALSE(positive_dependence(Q));
}

TEST(ProjectOntoCone, MoreauDecomposition) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    Mat A = Mat::NullaryExpr(3, 4, [&] { return rng.normal(); });
    Vec v = rng.normal_vec(4);
    Vec p = project_onto_cone(A, v);
    EXPECT_LE((A * p).maxCoeff(), 1e-10);
    // v - p lies in the polar cone and is orthogonal to p.
    EXPECT_NEAR(p.dot(v - p), 0.0, 1e-10);
  }
}

TEST(CertifyCoercivity, LineInPlane) {
  PolyhedralCone cone(Mat(0, 2), mat2(1, 1, 0, 0).topRows(1), 2);
  auto c = certify_coercivity(QuadraticFormRep(Mat(2.0 * Mat::Identity(2, 2))), cone);
  EXPECT_TRUE(c.certified);
  EXPECT_NEAR(c.c0, 2.0, 1e-12);
  EXPECT_EQ(c.method, CoercivityMethod::FaceEnumeration);
}

TEST(CertifyCoercivity, IndefiniteOnWholeSpace) {
  auto c = certify_coercivity(QuadraticFormRep(mat2(1, 0, 0, -1)),
                              PolyhedralCone::full_space(2));
  EXPECT_FALSE(c.certified);
  EXPECT_EQ(c.status, CertStatus::Refuted);
  ASSERT_TRUE(c.counterexample);
  EXPECT_NEAR(std::abs((*c.counterexample)(1)) / c.counterexample->norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.c0, -1.0, 1e-12);
}

TEST(CertifyCoercivity, IndefiniteRestrictedToAxis) {
  // {v2 <= 0, -v2 <= 0} is the v1 axis.
  Mat A(2, 2);
  A << 0, 1, 0, -1;
  PolyhedralCone cone(A, Mat(0, 2), 2);
  const QuadraticFormRep form(mat2(1, 0, 0, -1));
  auto c = certify_coercivity(form, cone);
  EXPECT_TRUE(c.certified);
  // Oracle: dense sampling of the unit circle intersected with the cone.
  double best = kInf;
  for (int k = 0; k < 200000; ++k) {
    const double th = 2.0 * M_PI * k / 200000.0;
    Vec v(2);
    v << std::cos(th), std::sin(th);
    if (cone.contains(v, 1e-12)) best = std::min(best, form.value(v));
  }
  EXPECT_NEAR(best, 1.0, 1e-12);
  EXPECT_NEAR(c.c0, best, 1e-9);
}

TEST(CertifyCoercivity, TrivialConeIsVacuous) {
  Mat A(2, 1);
  A << 1, -1;
  auto c = certify_coercivity(QuadraticFormRep(Mat::Constant(1, 1, -5.0)),
                              PolyhedralCone(A, Mat(0, 1), 1));
  EXPECT_TRUE(c.certified);
  EXPECT_TRUE(c.vacuous);
  EXPECT_TRUE(std::isinf(c.c0));
}

TEST(CertifyCoercivity, LargeConeUsesSubspaceBound) {
  const int d = 30;
  Mat A = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) A(i, i) = -1.0;
  auto c = certify_coercivity(QuadraticFormRep(Mat(3.0 * Mat::Identity(d, d))),
                              PolyhedralCone(A, Mat(0, d), d));
  EXPECT_TRUE(c.certified);
  EXPECT_EQ(c.method, CoercivityMethod::SubspaceBound);
  EXPECT_NEAR(c.c0, 3.0, 1e-10);

  Mat H = Mat::Identity(d, d);
  H(5, 5) = -1.0;  // negative along +e_5, which lies in the orthant cone
  H(6, 6) = -2.0;
  Mat A2 = -Mat::Identity(d, d);
  A2(6, 6) = 1.0;
  A2.row(7) = -A2.row(6);  // forces v_6 = 0
  auto r = certify_coercivity(QuadraticFormRep(H), PolyhedralCone(A2, Mat(0, d), d));
  EXPECT_EQ(r.status, CertStatus::Refuted);
  ASSERT_TRUE(r.counterexample);
  EXPECT_LT(QuadraticFormRep(H).value(*r.counterexample), 0.0);
}

// The face-enumeration value is the exact minimum; the sampling fallback can
// only approach it from above.
TEST(CertifyCoercivityProperty, ExactAndSampledAgree) {
  Rng rng(77);
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    RandomPair rp = random_pair(rng);
    auto exact = certify_coercivity(rp.form, rp.cone);
    CoercivityOptions opt;
    opt.force_sampled = true;
    opt.restarts = 64;
    opt.iterations = 2000;
    opt.seed = static_cast<std::uint64_t>(trial + 1);
    auto sampled = certify_coercivity(rp.form, rp.cone, opt);
    if (exact.vacuous) continue;
    ASSERT_EQ(exact.method, CoercivityMethod::FaceEnumeration);
    ++compared;
    EXPECT_LE(exact.c0, sampled.c0 + 1e-9) << "trial " << trial;
    EXPECT_NEAR(exact.c0, sampled.c0, 1e-4) << "trial " << trial;
  }
  EXPECT_GE(compared, 50);
}

TEST(PolyhedralCone, MembershipMatchesDefinition) {
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    Mat A = Mat::NullaryExpr(3, 4, [&] { return rng.normal(); });
    Mat B = Mat::NullaryExpr(1, 4, [&] { return rng.normal(); });
    PolyhedralCone cone(A, B, 4);
    const Mat Z = nullspace(B, 4);
    const Vec w = rng.normal_vec(3);
    const Vec member = Z * project_onto_cone(A * Z, w);
    // Three generic rows in a 3-dimensional subspace often leave only {0}.
    if (member.norm() > 1e-10 * w.norm()) EXPECT_TRUE(cone.contains(member));
    // A generated non-member: violates one inequality row.
    const Vec bad = Z * (Z.transpose() * A.row(0).transpose());
    if ((A * bad)(0) > 1e-6) EXPECT_FALSE(cone.contains(bad));
  }
}
