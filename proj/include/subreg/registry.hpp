// Copyright (c) subreg-kit contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "subreg/nlp_analysis.hpp"
#include "subreg/ocp_analysis.hpp"
#include "subreg/problem_file.hpp"

namespace subreg {

struct RegistryEntry {
  std::string id;
  std::string summary;
  std::string source;     // problem file text
  double radius_a = 0.0;  // 0 selects the default 0.1 (1 + |x_hat|_inf)

  ProblemDefinition definition() const { return parse_problem_file(source); }
};

inline const std::vector<RegistryEntry>& registry() {
  static const std::vector<RegistryEntry> entries = {
      {"nlp_scalar_quadratic", "min x^2/2",
       "class: nlp\n"
       "dims: 1\n"
       "objective: 0.5*x1^2\n"
       "solution:\n"
       "  x = 0\n",
       0.0},
      {"nlp_eq_quadratic", "min x1^2 + x2^2 s.t. x1 + x2 = 1",
       "class: nlp\n"
       "dims: 2\n"
       "objective: x1^2 + x2^2\n"
       "eq: x1 + x2 - 1\n"
       "solution:\n"
       "  x = 0.5, 0.5\n"
       "  ystar = -1\n",
       0.0},
      {"nlp_scalar_quartic", "min x^4/4 (zero curvature at the minimizer)",
       "class: nlp\n"
       "dims: 1\n"
       "objective: 0.25*x1^4\n"
       "solution:\n"
       "  x = 0\n",
       0.5},
      {"mayer_terminal_eq",
       "min x1(0)^2/2 + x2(1), x1' = u, x2' = u^2/2, x1(1) = 1, x2(0) = 0",
       "class: mayer\n"
       "dims: 2, 1\n"
       "horizon: 0, 1\n"
       "objective: q4 + 0.5*q1^2\n"
       "dynamics:\n"
       "  u1\n"
       "  0.5*u1^2\n"
       "eq:\n"
       "  q3 - 1\n"
       "  q2\n"
       "solution:\n"
       "  x0 = 0.5, 0\n"
       "  u = 0.5\n"
       "  beta = -0.5, -1\n",
       0.0},
      {"lq_bound", "min x(0)^2/2 + x(1), x' = u, -1 <= u <= 1",
       "class: ocp\n"
       "dims: 1, 1, 2\n"
       "dynamics: u1\n"
       "endpoint: 0.5*q1^2 + q2\n"
       "control_ineq:\n"
       "  u1 - 1\n"
       "  -u1 - 1\n"
       "solution:\n"
       "  x0 = -1\n"
       "  u = -1\n",
       0.0},
      {"example1",
       "min x(1) - x(0), x' = t u - u^2, u >= 0 (clock state x1, x = x2; q1^2/2 + q2^2/2 pins the initial state)",
       "class: ocp\n"
       "dims: 2, 1, 1\n"
       "dynamics:\n"
       "  1\n"
       "  x1*u1 - u1^2\n"
       "endpoint: q4 - q2 + 0.5*q1^2 + 0.5*q2^2\n"
       "control_ineq: -u1\n"
       "solution:\n"
       "  x0 = 0, 0\n"
       "  u = 0\n",
       0.0},
  };
  return entries;
}

inline const RegistryEntry& find_registry(std::string_view id) {
  for (const auto& e : registry()) {
    if (e.id == id) return e;
  }
  std::string known;
  for (const auto& e : registry()) known += (known.empty() ? "" : ", ") + e.id;
  throw InputError("unknown registry id '" + std::string(id) + "' (known: " + known + ")");
}

/// Missing multipliers are recovered by least squares on the stationarity
/// equation over the active inequalities and all equalities.
inline NlpTuple reference_nlp_tuple(const NlpProblem& p, const AnalyticSolution& sol,
                                    const Tolerances& tol = {}) {
  if (!sol.x) throw InputError("problem has no reference solution (solution: x = ...)");
  NlpTuple s;
  s.x = *sol.x;
  require_dim(s.x.size(), p.n, "solution x");
  s.lambda = sol.lambda ? *sol.lambda : RowVec(RowVec::Zero(p.m()));
  s.ystar = sol.ystar ? *sol.ystar : RowVec(RowVec::Zero(p.neq()));
  require_dim(s.lambda.size(), p.m(), "solution lambda");
  require_dim(s.ystar.size(), p.neq(), "solution ystar");
  if (sol.lambda && sol.ystar) return s;
  auto [fv, fJ] = eval_stack(p.inequalities, s.x);
  auto [gv, gJ] = eval_stack(p.equalities, s.x);
  const double ta = activity_tolerance(fv, tol.act);
  std::vector<int> act;
  for (int i = 0; i < p.m(); ++i) {
    if (std::abs(fv(i)) <= ta) act.push_back(i);
  }
  const int a = static_cast<int>(act.size());
  Mat A(p.n, a + p.neq());
  for (int r = 0; r < a; ++r) A.col(r) = fJ.row(act[r]).transpose();
  if (p.neq()) A.rightCols(p.neq()) = gJ.transpose();
  const Vec rhs = -p.objective.eval(s.x).gradient.transpose();
  const Vec mult = A.cols() ? Vec(A.completeOrthogonalDecomposition().solve(rhs)) : Vec();
  if (!sol.lambda) {
    for (int r = 0; r < a; ++r) s.lambda(act[r]) = mult(r) + 0.0;
  }
  if (!sol.ystar && p.neq()) s.ystar = mult.tail(p.neq()).transpose();
  return s;
}

/// Propagates the constant reference control from x0, solves the adjoint
/// and recovers lambda from stationarity.
inline ControlTuple reference_control_tuple(const ControlModel& cm,
                                            const AnalyticSolution& sol,
                                            const Mesh& mesh,
                                            const Tolerances& tol = {}) {
  if (!sol.x0 || !sol.u) {
    throw InputError("problem has no reference solution (solution: x0 = ..., u = ...)");
  }
  require_dim(sol.x0->size(), cm.n(), "solution x0");
  require_dim(sol.u->size(), cm.m(), "solution u");
  const RowVec alpha = sol.alpha ? *sol.alpha : RowVec(RowVec::Zero(cm.ke()));
  const RowVec beta = sol.beta ? *sol.beta : RowVec(RowVec::Zero(cm.s()));
  require_dim(alpha.size(), cm.ke(), "solution alpha");
  require_dim(beta.size(), cm.s(), "solution beta");
  const Mat u = Mat::Ones(mesh.N, 1) * sol.u->transpose();
  ControlTuple s = tuple_from_controls(cm, *sol.x0, u, mesh, alpha, beta);
  if (cm.k()) s.lambda = multiplier_from_stationarity(cm, s, mesh, tol).lambda;
  return s;
}

struct RandomOcp {
  OcpProblem problem;
  ControlTuple tuple;
};

/// Box-constrained instance x' = A x + B u + e_last gamma |u|^2 / 2,
/// -1 <= u <= 1, with an exact discrete stationary tuple: p is drawn at the
/// final node, u_i minimizes or clamps the Hamiltonian per component, and F
/// is a quadratic model whose gradient matches the transversality data.
inline RandomOcp make_random_box_ocp(std::uint64_t seed, const Mesh& mesh,
                                     int n = 2, int m = 1) {
  Rng rng(seed);
  const int N = mesh.N;
  const double h = mesh.h();
  const Mat A = Mat::NullaryExpr(n, n, [&] { return 0.5 * rng.normal(); });
  const Mat B = Mat::NullaryExpr(n, m, [&] { return rng.normal(); });
  const double gamma = rng.uniform(-1.0, 2.0);
  const int e = n - 1;

  OcpProblem p;
  p.n = n;
  p.m = m;
  for (int k = 0; k < n; ++k) {
    Polynomial f(n + m);
    for (int j = 0; j < n; ++j) {
      if (A(k, j) != 0.0) f.add_linear(j, A(k, j));
    }
    for (int l = 0; l < m; ++l) f.add_linear(n + l, B(k, l));
    if (k == e) {
      for (int l = 0; l < m; ++l) f.add_product(n + l, n + l, 0.5 * gamma);
    }
    p.dynamics.emplace_back(std::move(f));
  }
  for (int l = 0; l < m; ++l) {
    Polynomial up(m), lo(m);
    up.add_linear(l, 1.0).add_constant(-1.0);
    lo.add_linear(l, -1.0).add_constant(-1.0);
    p.control_constraints.emplace_back(std::move(up));
    p.control_constraints.emplace_back(std::move(lo));
  }

  RandomOcp out;
  ControlTuple& s = out.tuple;
  s.p = Mat(N + 1, n);
  s.p.row(N) = rng.normal_vec(n).transpose();
  for (int i = N - 1; i >= 0; --i) {
    s.p.row(i) = s.p.row(i + 1) * (Mat::Identity(n, n) + h * A);
  }
  s.u = Mat(N, m);
  s.lambda = Mat::Zero(N, 2 * m);
  for (int i = 0; i < N; ++i) {
    const RowVec b = s.p.row(i + 1) * B;
    const double c = gamma * s.p(i + 1, e);
    for (int l = 0; l < m; ++l) {
      // H_u component: b_l + c v; upper row has G' = +1, lower row -1.
      double v;
      if (c > 0.0 && std::abs(b(l) / c) < 1.0) {
        v = -b(l) / c;
      } else if (c > 0.0) {
        v = b(l) / c < 0.0 ? 1.0 : -1.0;
      } else {
        v = b(l) + c <= 0.0 ? 1.0 : -1.0;
      }
      s.u(i, l) = v;
      const double slope = b(l) + c * v;
      if (v == 1.0) s.lambda(i, 2 * l) = -slope;
      if (v == -1.0) s.lambda(i, 2 * l + 1) = slope;
    }
  }
  const Vec x0 = rng.normal_vec(n);
  const Dynamics dyn(n, m, p.dynamics);
  s.x = propagate_state(dyn, x0, s.u, mesh);
  s.alpha = RowVec(0);
  s.beta = RowVec(0);

  const Vec q = endpoint_pair(s.x);
  RowVec g(2 * n);
  g << -s.p.row(0), s.p.row(N);
  const Mat R = Mat::NullaryExpr(2 * n, 2 * n, [&] { return rng.normal(); });
  const Mat H = 0.5 * R * R.transpose() - rng.uniform(0.0, 0.6) * Mat::Identity(2 * n, 2 * n);
  p.endpoint_cost = Polynomial::quadratic_model(q, 0.0, g, H);
  out.problem = std::move(p);
  return out;
}

}  // namespace subreg
