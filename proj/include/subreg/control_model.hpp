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

#include <vector>

#include "subreg/discrete.hpp"

namespace subreg {

/// Common view of OcpProblem and MayerProblem after Euler transcription.
/// Transversality reads (-p_0, p_N) - l_q(q) = nu_sign * nu.
struct ControlModel {
  Dynamics dyn;
  ScalarField cost;                      // over q = (x(t0), x(t1))
  std::vector<ScalarField> endpoint_eq;  // psi
  std::vector<ScalarField> endpoint_ineq;  // phi
  std::vector<ScalarField> control;      // G over u
  double nu_sign = 1.0;
  double t0 = 0.0;
  double t1 = 1.0;

  int n() const { return dyn.n(); }
  int m() const { return dyn.m(); }
  int k() const { return static_cast<int>(control.size()); }
  int s() const { return static_cast<int>(endpoint_eq.size()); }
  int ke() const { return static_cast<int>(endpoint_ineq.size()); }
};

inline ControlModel control_model(const OcpProblem& p) {
  p.validate();
  return {Dynamics(p.n, p.m, p.dynamics), p.endpoint_cost, {}, {},
          p.control_constraints, 1.0, 0.0, 1.0};
}

inline ControlModel control_model(const MayerProblem& p) {
  p.validate();
  return {Dynamics(p.n, p.m, p.dynamics), p.endpoint_cost,
          p.endpoint_equalities, p.endpoint_inequalities, {}, -1.0, p.t0, p.t1};
}

/// Discrete tuple (x, u, p, lambda) with endpoint multipliers (alpha, beta);
/// alpha_0 is normalized to 1.
struct ControlTuple {
  Mat x;       // (N+1) x n
  Mat u;       // N x m
  Mat p;       // (N+1) x n
  Mat lambda;  // N x k
  RowVec alpha;
  RowVec beta;

  DiscreteTrajectory trajectory() const { return {x, u}; }
};

inline void check_tuple(const ControlModel& cm, const ControlTuple& s,
                        const Mesh& mesh) {
  require_dim(s.x.rows(), mesh.N + 1, "tuple x rows");
  require_dim(s.x.cols(), cm.n(), "tuple x cols");
  require_dim(s.u.rows(), mesh.N, "tuple u rows");
  require_dim(s.u.cols(), cm.m(), "tuple u cols");
  require_dim(s.p.rows(), mesh.N + 1, "tuple p rows");
  require_dim(s.p.cols(), cm.n(), "tuple p cols");
  require_dim(s.lambda.rows(), cm.k() ? mesh.N : s.lambda.rows(), "tuple lambda rows");
  require_dim(s.lambda.cols(), cm.k(), "tuple lambda cols");
  require_dim(s.alpha.size(), cm.ke(), "tuple alpha");
  require_dim(s.beta.size(), cm.s(), "tuple beta");
}

inline Vec endpoint_pair(const Mat& x) {
  const Index n = x.cols();
  Vec q(2 * n);
  q << x.row(0).transpose(), x.row(x.rows() - 1).transpose();
  return q;
}

/// Value, gradient and Hessian of l(q) = cost + alpha phi + beta psi.
inline FieldEval endpoint_lagrangian(const ControlModel& cm, const Vec& q,
                                     const RowVec& alpha, const RowVec& beta,
                                     double alpha0 = 1.0) {
  FieldEval e = cm.cost.eval(q);
  e.value *= alpha0;
  e.gradient *= alpha0;
  e.hessian *= alpha0;
  auto add = [&](const std::vector<ScalarField>& fs, const RowVec& w) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const double c = w(static_cast<Index>(i));
      if (c == 0.0) continue;
      const FieldEval fi = fs[i].eval(q);
      e.value += c * fi.value;
      e.gradient += c * fi.gradient;
      e.hessian += c * fi.hessian;
    }
  };
  add(cm.endpoint_ineq, alpha);
  add(cm.endpoint_eq, beta);
  return e;
}

/// Values and Jacobian (k x m) of G at a control sample.
inline std::pair<Vec, Mat> control_constraints_at(const ControlModel& cm,
                                                  const Vec& u) {
  return eval_stack(cm.control, u);
}

/// Builds a tuple from x0 and u by propagating the state, solving the
/// adjoint from the endpoint Lagrangian, and leaving lambda zero.
inline ControlTuple tuple_from_controls(const ControlModel& cm, const Vec& x0,
                                        const Mat& u, const Mesh& mesh,
                                        const RowVec& alpha = RowVec(),
                                        const RowVec& beta = RowVec()) {
  ControlTuple s;
  s.u = u;
  s.x = propagate_state(cm.dyn, x0, u, mesh);
  s.alpha = alpha.size() ? alpha : RowVec(RowVec::Zero(cm.ke()));
  s.beta = beta.size() ? beta : RowVec(RowVec::Zero(cm.s()));
  const FieldEval l = endpoint_lagrangian(cm, endpoint_pair(s.x), s.alpha, s.beta);
  s.p = solve_adjoint(cm.dyn, s.trajectory(), mesh, l.gradient).p;
  s.lambda = Mat::Zero(mesh.N, cm.k());
  return s;
}

}  // namespace subreg
