#include <gtest/gtest.h>

#include <cmath>

#include "subreg/mayer_analysis.hpp"
#include "subreg/control_growth.hpp"
#include "subreg/registry.hpp"

using namespace subreg;

namespace {

struct Fixture {
  ControlModel cm;
  ControlTuple s;
  Mesh mesh;
};

Fixture load(const std::string& text, int N) {
  auto def = parse_problem_file(text);
  Mesh mesh = Mesh::uniform(N, def.mayer ? def.mayer->t0 : 0.0,
                            def.mayer ? def.mayer->t1 : 1.0);
  ControlModel cm = def.ocp ? control_model(*def.ocp) : control_model(*def.mayer);
  ControlTuple s = reference_control_tuple(cm, def.solution, mesh);
  return {std::move(cm), std::move(s), mesh};
}

Fixture registry_fixture(const std::string& id, int N) {
  return load(find_registry(id).source, N);
}

// H_bar_uu = I with lambda = 0.05 on u >= 0 in both components; Omega is
// x0^2 + |u|_2^2.
const char* kConvexTwoControls =
    "class: ocp\n"
    "dims: 1, 2, 2\n"
    "dynamics: 0.05*u1 + 0.05*u2 + 0.5*u1^2 + 0.5*u2^2\n"
    "endpoint: 0.5*q1^2 + q2\n"
    "control_ineq:\n  -u1\n  -u2\n"
    "solution:\n  x0 = -1\n  u = 0, 0\n";

// H = p u with p = 1 on U = {u >= 0}, lambda = 1.
const char* kLinearHamiltonian =
    "class: ocp\n"
    "dims: 1, 1, 1\n"
    "dynamics: u1\n"
    "endpoint: q2\n"
    "control_ineq: -u1\n"
    "solution:\n  x0 = 0\n  u = 0\n";

bool is_member_sampled(const PolyhedralCone& c, const Vec& v) { return c.contains(v, 1e-9); }

Vec random_member(const PolyhedralCone& c, Rng& rng) {
  const Mat Z = nullspace_structured(c.B, c.dim);
  const Vec y = rng.normal_vec(Z.cols());
  if (Z.cols() == 0) return Vec::Zero(c.dim);
  return Z * project_onto_cone(c.A * Z, y);
}

}  // namespace

TEST(Mesh, RejectsDegenerateGrids) {
  EXPECT_THROW(Mesh::uniform(1), InputError);
  EXPECT_THROW(Mesh::uniform(4, 1.0, 1.0), InputError);
  const Mesh m = Mesh::uniform(4, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(m.h(), 0.5);
  EXPECT_DOUBLE_EQ(m.t(3), 1.5);
}

TEST(PropagateState, Examples) {
  auto def = parse_problem_file(
      "class: ocp\ndims: 1, 1, 1\ndynamics: u1\nendpoint: q2\ncontrol_ineq: u1 - 5\n");
  const Dynamics dyn(1, 1, def.ocp->dynamics);
  Mat x = propagate_state(dyn, Vec::Zero(1), Mat::Ones(10, 1), Mesh::uniform(10));
  EXPECT_DOUBLE_EQ(x(10, 0), 1.0);

  auto f = registry_fixture("example1", 50);
  for (Index i = 0; i <= 50; ++i) EXPECT_EQ(f.s.x(i, 1), 0.0);
  EXPECT_NEAR(f.s.x(50, 0), 1.0, 1e-14);

  auto g = parse_problem_file(
      "class: ocp\ndims: 1, 1, 1\ndynamics: x1\nendpoint: q2\ncontrol_ineq: u1 - 5\n");
  const Dynamics dg(1, 1, g.ocp->dynamics);
  Mat xe = propagate_state(dg, Vec::Ones(1), Mat::Zero(1000, 1), Mesh::uniform(1000));
  EXPECT_NEAR(xe(1000, 0), std::pow(1.001, 1000), 1e-12);
  EXPECT_LE(std::abs(xe(1000, 0) - std::exp(1.0)) / std::exp(1.0), 2e-3);
}

TEST(PropagateState, NonFiniteNamesNode) {
  auto g = parse_problem_file(
      "class: ocp\ndims: 1, 1, 1\ndynamics: x1^8\nendpoint: q2\ncontrol_ineq: u1 - 5\n");
  const Dynamics dg(1, 1, g.ocp->dynamics);
  try {
    propagate_state(dg, Vec::Constant(1, 1e3), Mat::Zero(20, 1), Mesh::uniform(20));
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("node"), std::string::npos);
  }
}

TEST(SolveAdjoint, Examples) {
  auto f = registry_fixture("lq_bound", 20);
  for (Index i = 0; i <= 20; ++i) EXPECT_DOUBLE_EQ(f.s.p(i, 0), 1.0);
  // F = x(0)^2/2 + x(1): transversality defect |-p_0 - x(0)| vanishes at -1.
  const RowVec grad = endpoint_lagrangian(f.cm, endpoint_pair(f.s.x), f.s.alpha, f.s.beta).gradient;
  EXPECT_EQ(solve_adjoint(f.cm.dyn, f.s.trajectory(), f.mesh, grad).defect, 0.0);
  Mat x2 = f.s.x;
  x2.col(0).array() += 0.25;
  const RowVec g2 = endpoint_lagrangian(f.cm, endpoint_pair(x2), f.s.alpha, f.s.beta).gradient;
  EXPECT_NEAR(solve_adjoint(f.cm.dyn, {x2, f.s.u}, f.mesh, g2).defect, 0.25, 1e-15);

  auto e = registry_fixture("example1", 40);
  EXPECT_LE((e.s.p.col(1).array() - 1.0).abs().maxCoeff(), 1e-15);
  EXPECT_EQ(e.s.p.col(0).cwiseAbs().maxCoeff(), 0.0);

  const AdjointPath z = solve_adjoint(f.cm.dyn, f.s.trajectory(), f.mesh, RowVec::Zero(2));
  EXPECT_EQ(z.p.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MultiplierFromStationarity, Examples) {
  auto e = registry_fixture("example1", 100);
  auto r = multiplier_from_stationarity(e.cm, e.s, e.mesh);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(r.lambda(i, 0), e.mesh.t(i), 1e-14);
  EXPECT_LE(r.max_residual, 1e-14);

  auto b = registry_fixture("lq_bound", 10);
  auto rb = multiplier_from_stationarity(b.cm, b.s, b.mesh);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(rb.lambda(i, 0), 0.0);
    EXPECT_NEAR(rb.lambda(i, 1), 1.0, 1e-14);
  }

  // Interior control with p f_u = 0 gives lambda = 0.
  auto in = load(
      "class: ocp\ndims: 1, 1, 1\ndynamics: 0.5*u1^2\nendpoint: q2\n"
      "control_ineq: u1 - 1\nsolution:\n  x0 = 0\n  u = 0\n",
      10);
  auto ri = multiplier_from_stationarity(in.cm, in.s, in.mesh);
  EXPECT_EQ(ri.lambda.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(ri.max_residual, 0.0);
}

TEST(MultiplierFromStationarity, DependentActiveGradients) {
  EXPECT_THROW(load("class: ocp\ndims: 1, 1, 2\ndynamics: u1\nendpoint: q2\n"
                    "control_ineq:\n  -u1\n  -2*u1\nsolution:\n  x0 = 0\n  u = 0\n",
                    10),
               PreconditionError);
}

TEST(OptimalityResiduals, Examples) {
  auto b = registry_fixture("lq_bound", 50);
  auto r = optimality_residuals_ocp(b.cm, b.s, b.mesh);
  EXPECT_LE(r.norm, 1e-8);

  ControlTuple shifted = b.s;
  shifted.p.array() += 1e-3;
  auto rs = optimality_residuals_ocp(b.cm, shifted, b.mesh);
  EXPECT_NEAR(norms::l2(rs.rho, b.mesh.h()), 1e-3, 1e-15);
  EXPECT_LE(rs.pi.cwiseAbs().maxCoeff(), 1e-12);  // f_x = 0, p still constant
  EXPECT_LE(rs.nu.norm(), 1e-3 * std::sqrt(2.0) + 1e-15);

  ControlTuple zero = b.s;
  zero.lambda.setZero();
  zero.u.setConstant(0.3);  // strictly inside both bounds
  auto rz = optimality_residuals_ocp(b.cm, zero, b.mesh);
  EXPECT_EQ(rz.eta.cwiseAbs().maxCoeff(), 0.0);

  ControlTuple neg = b.s;
  neg.lambda(3, 1) = -0.1;
  EXPECT_THROW(optimality_residuals_ocp(b.cm, neg, b.mesh), PreconditionError);
}

TEST(OptimalityResiduals, ExactTuplesOfRandomInstances) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Mesh mesh = Mesh::uniform(30);
    auto ro = make_random_box_ocp(seed, mesh, 2, 1 + static_cast<int>(seed % 2));
    auto cm = control_model(ro.problem);
    EXPECT_LE(optimality_residuals_ocp(cm, ro.tuple, mesh).norm, 1e-9);
    auto mr = multiplier_from_stationarity(cm, ro.tuple, mesh);
    EXPECT_LE((mr.lambda - ro.tuple.lambda).cwiseAbs().maxCoeff(), 1e-9);
    // Complementarity lambda_j,i G_j(u_i) = 0.
    for (int i = 0; i < mesh.N; ++i) {
      const Vec g = control_constraints_at(cm, row_vec(ro.tuple.u, i)).first;
      for (int j = 0; j < cm.k(); ++j) {
        EXPECT_LE(std::abs(mr.lambda(i, j) * g(j)), 1e-8);
      }
    }
  }
}

TEST(TimeSets, Examples) {
  auto e = registry_fixture("example1", 10);
  auto ts = time_sets(e.cm, e.s, e.mesh, 0.5);
  EXPECT_EQ(ts.Mplus_delta[0], (std::vector<int>{6, 7, 8, 9}));
  EXPECT_EQ(ts.m_delta, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_EQ(ts.M[0].size(), 10u);
  EXPECT_NEAR(ts.meas_m_delta, 0.5, 1e-15);

  auto b = registry_fixture("lq_bound", 10);
  auto tb = time_sets(b.cm, b.s, b.mesh, 0.1);
  EXPECT_EQ(tb.Mplus_delta[1], tb.M[1]);
  EXPECT_TRUE(tb.m_delta.empty());

  ControlTuple z = b.s;
  z.lambda.setZero();
  auto tz = time_sets(b.cm, z, b.mesh, 0.1);
  EXPECT_TRUE(tz.Mplus[0].empty() && tz.Mplus[1].empty());

  ControlTuple bad = b.s;
  bad.lambda(2, 0) = 0.5;  // upper bound inactive
  EXPECT_THROW(time_sets(b.cm, bad, b.mesh, 0.1), PreconditionError);
}

TEST(TimeSets, MeasureShrinksWithDelta) {
  auto e = registry_fixture("example1", 200);
  double prev = kInf;
  for (double d : {0.5, 0.1, 3e-2, 1e-2, 3e-3, 1e-3}) {
    const double meas = time_sets(e.cm, e.s, e.mesh, d).meas_m_delta;
    EXPECT_LE(meas, prev);
    EXPECT_LE(meas, d + 1e-12);
    prev = meas;
  }
}

TEST(DiscreteCriticalCone, Example1ControlComponent) {
  auto e = registry_fixture("example1", 100);
  auto K = discrete_critical_cone_ocp(e.cm, e.s, e.mesh, OcpConeKind::Exact);
  // lambda = t_i > 0 pins u_i for i >= 1; u_0 (lambda = 0) keeps u_0 >= 0.
  EXPECT_EQ(K.B.rows(), 99);
  EXPECT_EQ(K.A.rows(), 1);
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const Vec v = random_member(K, rng);
    EXPECT_LE(v.segment(3, 99).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(v(2), -1e-12);
  }
  Vec bump = Vec::Zero(K.dim);
  bump(2 + 50) = 1.0;
  EXPECT_FALSE(K.contains(bump));
}

TEST(DiscreteCriticalCone, FullSpaceAndPinnedControls) {
  auto in = load(
      "class: ocp\ndims: 1, 1, 1\ndynamics: 0.5*u1^2\nendpoint: q2\n"
      "control_ineq: u1 - 1\nsolution:\n  x0 = 0\n  u = 0\n",
      10);
  auto K = discrete_critical_cone_ocp(in.cm, in.s, in.mesh, OcpConeKind::Delta, 0.1);
  EXPECT_EQ(K.A.rows() + K.B.rows(), 0);

  auto b = registry_fixture("lq_bound", 20);
  auto Kb = discrete_critical_cone_ocp(b.cm, b.s, b.mesh, OcpConeKind::Delta, 0.5);
  EXPECT_EQ(Kb.B.rows(), 20);
  EXPECT_EQ(nullspace_structured(Kb.B, Kb.dim).cols(), 1);  // only x0 survives
}

TEST(FreeControlMeasure, MatchesMembershipTests) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Mesh mesh = Mesh::uniform(15);
    auto ro = make_random_box_ocp(seed, mesh, 2, 1 + static_cast<int>(seed % 2));
    auto cm = control_model(ro.problem);
    for (auto kind : {OcpConeKind::Exact, OcpConeKind::CC}) {
      auto K = discrete_critical_cone_ocp(cm, ro.tuple, mesh, kind);
      int free = 0;
      for (int i = 0; i < mesh.N; ++i) {
        for (int a = 0; a < cm.m(); ++a) {
          Vec e = Vec::Zero(K.dim);
          e(u_offset(cm.n(), cm.m(), i) + a) = 1.0;
          free += K.contains(e) || K.contains(-e);
        }
      }
      EXPECT_NEAR(free_control_measure(K, cm, mesh), free * mesh.h(), 1e-15) << seed;
    }
  }
}

TEST(QuadraticFormOcp, Examples) {
  auto b = registry_fixture("lq_bound", 10);
  auto W = quadratic_form_ocp(b.cm, b.s, b.mesh);
  Mat want = Mat::Zero(11, 11);
  want(0, 0) = 1.0;
  EXPECT_LE((W.matrix - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(W.weak_norm_gram(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(W.weak_norm_gram(5, 5), 0.1);

  // example1 over (y0, x0, u): Omega = y0^2 + x0^2 + h sum (2 y0 u_i - 2 u_i^2).
  auto e = registry_fixture("example1", 20);
  auto We = quadratic_form_ocp(e.cm, e.s, e.mesh);
  const double h = e.mesh.h();
  Mat oracle = Mat::Zero(22, 22);
  oracle(0, 0) = oracle(1, 1) = 1.0;
  for (int i = 0; i < 20; ++i) {
    oracle(2 + i, 2 + i) = -2.0 * h;
    oracle(0, 2 + i) = oracle(2 + i, 0) = h;
  }
  EXPECT_LE((We.matrix - oracle).cwiseAbs().maxCoeff(), 1e-14);

  // f = 0: only the endpoint Hessian.
  auto z = load(
      "class: ocp\ndims: 1, 1, 1\ndynamics: 0\nendpoint: q1^2 + 3*q1*q2\n"
      "control_ineq: u1 - 1\nsolution:\n  x0 = 0\n  u = 0\n",
      5);
  auto Wz = quadratic_form_ocp(z.cm, z.s, z.mesh);
  EXPECT_DOUBLE_EQ(Wz.matrix(0, 0), 2.0 + 6.0);  // q = (x0, x0)
  EXPECT_EQ(Wz.matrix.bottomRightCorner(5, 5).cwiseAbs().maxCoeff(), 0.0);
}

TEST(QuadraticFormOcp, MeshRefinementIsFirstOrder) {
  auto value = [](int N) {
    auto e = registry_fixture("example1", N);
    auto W = quadratic_form_ocp(e.cm, e.s, e.mesh);
    Vec v(W.dim());
    v(0) = 1.0;
    v(1) = 0.5;
    for (int i = 0; i < N; ++i) v(2 + i) = std::sin(M_PI * e.mesh.t(i)) + e.mesh.t(i);
    return W.value(v);
  };
  for (int N : {20, 40, 80}) {
    EXPECT_LE(std::abs(value(N) - value(2 * N)), 4.0 / N) << N;
  }
}

TEST(CertifyCoercivityOcp, Examples) {
  auto b = registry_fixture("lq_bound", 40);
  auto c = certify_coercivity_ocp(b.cm, b.s, b.mesh, 0.5);
  EXPECT_TRUE(c.cert.certified);
  EXPECT_NEAR(c.cert.c0, 1.0, 1e-12);
  EXPECT_GT(c.c_inf_norm, 0.0);
  EXPECT_LE(c.c_inf_norm, c.cert.c0);

  const double delta = 0.1;
  auto e = registry_fixture("example1", 200);
  auto ce = certify_coercivity_ocp(e.cm, e.s, e.mesh, delta);
  EXPECT_FALSE(ce.cert.certified);
  ASSERT_TRUE(ce.cert.counterexample);
  auto W = quadratic_form_ocp(e.cm, e.s, e.mesh);
  EXPECT_LT(W.value(*ce.cert.counterexample), 0.0);
  // Oracle direction supported on [0, delta]: Omega = -2 |u|_2^2.
  Vec v = Vec::Zero(W.dim());
  int support = 0;
  for (int i = 0; i < 200; ++i) {
    if (e.mesh.t(i) < delta - 0.5 * e.mesh.h()) {
      v(2 + i) = 1.0;
      ++support;
    }
  }
  auto K = discrete_critical_cone_ocp(e.cm, e.s, e.mesh, OcpConeKind::Delta, delta);
  EXPECT_TRUE(K.contains(v));
  EXPECT_NEAR(W.value(v), -2.0 * support * e.mesh.h(), 1e-12);

  auto pd = load(kConvexTwoControls, 20);
  for (double d : {1e-1, 3e-2, 1e-3}) {
    auto cp = certify_coercivity_ocp(pd.cm, pd.s, pd.mesh, d);
    EXPECT_TRUE(cp.cert.certified);
    EXPECT_NEAR(cp.cert.c0, 1.0, 1e-10);
  }
}

TEST(Legendre, Examples) {
  auto b = registry_fixture("lq_bound", 20);
  auto vac = check_legendre(b.cm, b.s, b.mesh, 0.5);
  EXPECT_TRUE(vac.holds);
  EXPECT_TRUE(vac.vacuous);
  EXPECT_TRUE(std::isinf(vac.c_L));

  auto e = registry_fixture("example1", 20);
  auto le = check_legendre(e.cm, e.s, e.mesh, 0.5);
  EXPECT_FALSE(le.holds);
  ASSERT_TRUE(le.direction);
  EXPECT_GT((*le.direction)(0), 0.0);
  EXPECT_NEAR(le.c_L, -2.0, 1e-12);

  auto pd = load(kConvexTwoControls, 20);
  auto lp = check_legendre(pd.cm, pd.s, pd.mesh, 0.1);
  EXPECT_TRUE(lp.holds);
  EXPECT_FALSE(lp.vacuous);
  EXPECT_NEAR(lp.c_L, 1.0, 1e-12);
}

TEST(HamiltonianGrowth, Examples) {
  auto lin = load(kLinearHamiltonian, 10);
  const double eps = 0.5;
  auto g = check_hamiltonian_growth(lin.cm, lin.s, lin.mesh, 2.0, eps, 64, 3);
  EXPECT_TRUE(g.holds);
  // Oracle: (H(u) - H(0)) / u^2 = 1/u, smallest at the ball boundary.
  EXPECT_GE(g.c_H, 1.0 / eps - 1e-9);
  EXPECT_LE(g.c_H, 1.0 / eps * (1.0 + 1e-6));

  auto pd = load(kConvexTwoControls, 10);
  EXPECT_TRUE(check_hamiltonian_growth(pd.cm, pd.s, pd.mesh, 0.1, 0.1, 64, 3).holds);

  auto e = registry_fixture("example1", 50);
  auto ge = check_hamiltonian_growth(e.cm, e.s, e.mesh, 0.5, 0.1, 64, 3);
  EXPECT_FALSE(ge.holds);
  EXPECT_EQ(ge.status, CertStatus::Refuted);
  ASSERT_FALSE(ge.violations.empty());
  for (const auto& v : ge.violations) EXPECT_GT(v.u(0), e.mesh.t(v.node));
}

TEST(PropositionConsistency, LegendreImpliesHamiltonianGrowth) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Mesh mesh = Mesh::uniform(30);
    auto ro = make_random_box_ocp(seed, mesh, 2, 1 + static_cast<int>(seed % 2));
    auto cm = control_model(ro.problem);
    for (double d : {1e-1, 1e-2}) {
      if (check_legendre(cm, ro.tuple, mesh, d).holds) {
        EXPECT_TRUE(check_hamiltonian_growth(cm, ro.tuple, mesh, d, 0.1, 32, seed).holds)
            << seed;
      }
    }
  }
}

TEST(ConeLaws, NestingAndRepresentations) {
  Rng rng(11);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Mesh mesh = Mesh::uniform(12);
    auto ro = make_random_box_ocp(seed, mesh, 2, 1 + static_cast<int>(seed % 2));
    auto cm = control_model(ro.problem);
    auto K = discrete_critical_cone_ocp(cm, ro.tuple, mesh, OcpConeKind::Exact);
    auto CC = discrete_critical_cone_ocp(cm, ro.tuple, mesh, OcpConeKind::CC);
    auto K1 = discrete_critical_cone_ocp(cm, ro.tuple, mesh, OcpConeKind::Delta, 0.05);
    auto K2 = discrete_critical_cone_ocp(cm, ro.tuple, mesh, OcpConeKind::Delta, 0.5);
    for (int k = 0; k < 100; ++k) {
      const Vec v = random_member(K, rng);
      EXPECT_TRUE(is_member_sampled(K1, v));
      const Vec v1 = random_member(K1, rng);
      EXPECT_TRUE(is_member_sampled(K2, v1));
      // (cc) and (ccc1) agree on members of either and on mixtures.
      const Vec c = random_member(CC, rng);
      const Vec mix = k % 2 ? Vec(v1) : Vec(v + 0.1 * rng.normal_vec(v.size()));
      for (const Vec& t : {v, c, mix}) {
        EXPECT_EQ(K.contains(t, 1e-9), CC.contains(t, 1e-9)) << "seed " << seed;
      }
    }
  }
}

TEST(DiscreteNorms, WeakIsDominatedByStrong) {
  Rng rng(4);
  const Mesh mesh = Mesh::uniform(40, 0.0, 2.0);
  const double C = std::max(1.0, std::sqrt(mesh.t1 - mesh.t0));
  for (int k = 0; k < 200; ++k) {
    const Mat x = Mat::NullaryExpr(41, 2, [&] { return rng.normal(); });
    const Mat u = Mat::NullaryExpr(40, 3, [&] { return rng.normal(); });
    EXPECT_LE(norms::weak(x, u, mesh.h()), C * norms::strong(x, u) + 1e-12);
  }
  Mat x(3, 1);
  x << 1, -1, 2;
  EXPECT_DOUBLE_EQ(norms::w11(x), 1 + 2 + 3);
}

TEST(MayerStationarity, Examples) {
  auto z = load(
      "class: mayer\ndims: 1, 1\nobjective: q2^2\ndynamics: u1\n"
      "solution:\n  x0 = 0\n  u = 0\n",
      10);
  EXPECT_EQ(mayer_stationarity(z.cm, z.s, z.mesh).norm, 0.0);

  auto t = registry_fixture("mayer_terminal_eq", 20);
  auto r0 = mayer_stationarity(t.cm, t.s, t.mesh);
  EXPECT_LE(r0.norm, 1e-12);
  ControlTuple pb = t.s;
  pb.beta(0) += 0.01;
  auto r1 = mayer_stationarity(t.cm, pb, t.mesh);
  RowVec dnu = r1.nu - r0.nu;
  EXPECT_NEAR(dnu(2), 0.01, 1e-15);  // psi_1 = q3 - 1
  dnu(2) = 0.0;
  EXPECT_EQ(dnu.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((r1.pi - r0.pi).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((r1.rho - r0.rho).cwiseAbs().maxCoeff(), 0.0);

  Vec x0(2);
  x0 << 0.5, 0.3;
  ControlTuple off = tuple_from_controls(t.cm, x0, t.s.u, t.mesh, t.s.alpha, t.s.beta);
  EXPECT_NEAR(mayer_stationarity(t.cm, off, t.mesh).mu(1), 0.3, 1e-15);

  auto ineq = load(
      "class: mayer\ndims: 1, 1\nobjective: q2\ndynamics: u1\nineq: q1 - 1\n"
      "solution:\n  x0 = 0\n  u = 0\n  alpha = 0\n",
      10);
  ControlTuple na = ineq.s;
  na.alpha(0) = -1.0;
  EXPECT_THROW(mayer_stationarity(ineq.cm, na, ineq.mesh), PreconditionError);
}

TEST(StrictMfMayer, Examples) {
  auto z = load(
      "class: mayer\ndims: 1, 1\nobjective: q2^2\ndynamics: u1\n"
      "solution:\n  x0 = 0\n  u = 0\n",
      10);
  EXPECT_TRUE(check_strict_mf_mayer(z.cm, z.s, z.mesh).holds);

  auto t = registry_fixture("mayer_terminal_eq", 20);
  EXPECT_TRUE(check_strict_mf_mayer(t.cm, t.s, t.mesh).holds);

  auto dup = load(
      "class: mayer\ndims: 2, 1\nobjective: q4 + 0.5*q1^2\n"
      "dynamics:\n  u1\n  0.5*u1^2\neq:\n  q3 - 1\n  q3 - 1\n  q2\n"
      "solution:\n  x0 = 0.5, 0\n  u = 0.5\n  beta = -0.5, 0, -1\n",
      20);
  auto r = check_strict_mf_mayer(dup.cm, dup.s, dup.mesh);
  EXPECT_FALSE(r.holds);
  ASSERT_TRUE(r.witness);
  EXPECT_NEAR((*r.witness)(0), -(*r.witness)(1), 1e-12);
  EXPECT_GT((*r.witness)(0), 0.0);
  EXPECT_NEAR((*r.witness)(2), 0.0, 1e-12);
}

TEST(MayerCriticalCone, Examples) {
  auto z = load(
      "class: mayer\ndims: 1, 1\nobjective: q2^2\ndynamics: u1\n"
      "solution:\n  x0 = 0\n  u = 0\n",
      10);
  auto K = mayer_critical_cone(z.cm, z.s, z.mesh);
  EXPECT_EQ(K.A.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(K.B.rows(), 0);

  auto e = load(
      "class: mayer\ndims: 1, 1\nobjective: q1^2\ndynamics: u1\neq: q2\n"
      "solution:\n  x0 = 0\n  u = 0\n",
      10);
  auto Ke = mayer_critical_cone(e.cm, e.s, e.mesh);
  ASSERT_EQ(Ke.B.rows(), 1);
  RowVec oracle = RowVec::Constant(11, e.mesh.h());  // x0 + h sum u = x(1)
  oracle(0) = 1.0;
  EXPECT_LE((Ke.B - oracle).cwiseAbs().maxCoeff(), 1e-15);

  auto t = registry_fixture("mayer_terminal_eq", 10);
  auto Kt = mayer_critical_cone(t.cm, t.s, t.mesh);
  EXPECT_GT(Kt.A.row(0).norm(), 0.0);  // phi_0' q <= 0 row
  auto c = certify_coercivity_mayer(t.cm, t.s, t.mesh);
  EXPECT_TRUE(c.certified);
  EXPECT_NEAR(c.c0, 1.0, 1e-10);
}

TEST(ControlGrowthProbe, LqBoundInitialStateDirections) {
  // x0-only samples give J - J_hat = d^2/2 = |dx|_inf^2 / 2.
  auto b = registry_fixture("lq_bound", 100);
  auto g = control_growth_probe(b.cm, b.s, b.mesh, 1e-2, 400, 3);
  EXPECT_TRUE(g.violations.empty());
  EXPECT_NEAR(g.fitted_c, 0.5, 1e-6);
  const auto c = certify_coercivity_ocp(b.cm, b.s, b.mesh, 0.1);
  EXPECT_GE(g.fitted_c, 0.25 * c.c_inf_norm);
}

TEST(ControlGrowthProbe, MayerSamplesStayFeasible) {
  auto t = registry_fixture("mayer_terminal_eq", 50);
  auto g = control_growth_probe(t.cm, t.s, t.mesh, 1e-2, 200, 5);
  EXPECT_TRUE(g.violations.empty());
  EXPECT_EQ(g.retraction_failures, 0);
  EXPECT_GT(g.fitted_c, 0.0);
  const double cinf =
      mayer_sup_norm_constant(t.cm, t.s, t.mesh, certify_coercivity_mayer(t.cm, t.s, t.mesh).c0);
  EXPECT_GE(g.fitted_c, 0.25 * cinf);
}

TEST(ControlGrowthProbe, DescentIsReported) {
  // J = x(0)^2/2 - x(1)^2/2 with x' = u decreases along any u with x0 = 0.
  auto f = load(
      "class: ocp\ndims: 1, 1, 1\ndynamics: u1\nendpoint: 0.5*q1^2 - 0.5*q2^2\n"
      "control_ineq: u1 - 10\nsolution:\n  x0 = 0\n  u = 0\n",
      20);
  auto g = control_growth_probe(f.cm, f.s, f.mesh, 1e-2, 100, 1);
  EXPECT_FALSE(g.violations.empty());
  EXPECT_LT(g.fitted_c, 0.0);
  EXPECT_THROW(control_growth_probe(f.cm, f.s, f.mesh, 0.0, 10, 1), InputError);
}
