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

#include <optional>
#include <string>
#include <vector>

#include "subreg/nlp_analysis.hpp"
#include "subreg/ocp_analysis.hpp"

namespace subreg {

/// z = (pi, rho, nu, eta, mu, xi) of the perturbed Mayer system.
struct MayerResidual {
  Mat pi;     // N x n, p' + p f_x
  Mat rho;    // N x m, p f_u
  RowVec nu;  // 2n, (p(t0), -p(t1)) + l_q
  Mat eta;    // N x n, f - x'
  Vec mu;     // psi(q)
  Vec xi;     // minimal-norm endpoint inequality residual
  double norm = 0.0;  // |pi|_1 + |rho|_2 + |nu| + |eta|_1 + |mu| + |xi|
};

inline MayerResidual mayer_stationarity(const ControlModel& cm,
                                        const ControlTuple& s, const Mesh& mesh,
                                        const Tolerances& tol = {}) {
  check_tuple(cm, s, mesh);
  if (cm.ke() && s.alpha.minCoeff() < 0.0) {
    throw PreconditionError("mayer: endpoint multiplier alpha must be >= 0");
  }
  const OcpResidual o = optimality_residuals_ocp(cm, s, mesh, tol);
  MayerResidual r;
  r.pi = o.pi;
  r.rho = o.rho;
  r.nu = o.nu;
  r.eta = o.xi;
  const Vec q = endpoint_pair(s.x);
  r.mu = eval_stack(cm.endpoint_eq, q).first;
  const Vec phi = eval_stack(cm.endpoint_ineq, q).first;
  r.xi = Vec(cm.ke());
  for (int l = 0; l < cm.ke(); ++l) {
    r.xi(l) = s.alpha(l) > tol.mul ? phi(l) : std::max(phi(l), 0.0);
  }
  const double h = mesh.h();
  r.norm = norms::l1(r.pi, h) + norms::l2(r.rho, h) + r.nu.norm() +
           norms::l1(r.eta, h) + r.mu.norm() + r.xi.norm();
  return r;
}

namespace detail {

struct EndpointActivity {
  std::vector<int> I, I0, I1;
};

inline EndpointActivity endpoint_activity(const ControlModel& cm,
                                          const ControlTuple& s,
                                          const Tolerances& tol) {
  const Vec phi = eval_stack(cm.endpoint_ineq, endpoint_pair(s.x)).first;
  EndpointActivity a;
  for (int i : active_rows(phi, tol.act)) {
    a.I.push_back(i);
    (s.alpha(i) > tol.mul ? a.I1 : a.I0).push_back(i);
  }
  return a;
}

}  // namespace detail

/// Strict MF analogue: with alpha_0 = 0 the homogeneous adjoint system,
/// p f_u = 0 and transversality (-p_0, p_N) = alpha phi' + beta psi' force
/// alpha = 0, beta = 0 (and hence p = 0), alpha_i >= 0 only on I0.
/// Witness is (alpha, beta).
inline QualificationResult check_strict_mf_mayer(const ControlModel& cm,
                                                 const ControlTuple& s,
                                                 const Mesh& mesh,
                                                 const Tolerances& tol = {}) {
  check_tuple(cm, s, mesh);
  const int n = cm.n(), m = cm.m(), N = mesh.N;
  const double sh = std::sqrt(mesh.h());
  const auto act = detail::endpoint_activity(cm, s, tol);
  const Vec q = endpoint_pair(s.x);
  // Column of the homogeneous map for one endpoint gradient row.
  auto column = [&](const RowVec& grad) {
    AdjointPath a = solve_adjoint(cm.dyn, s.trajectory(), mesh, grad);
    Vec c(static_cast<Index>(N) * m + n);
    for (int i = 0; i < N; ++i) {
      const Mat J = cm.dyn.linearize(row_vec(s.x, i), row_vec(s.u, i)).second;
      c.segment(static_cast<Index>(i) * m, m) =
          sh * (a.p.row(i + 1) * J.rightCols(m)).transpose();
    }
    c.tail(n) = (-a.p.row(0) - grad.head(n)).transpose();
    return c;
  };
  const Index rows = static_cast<Index>(N) * m + n;
  Mat F0(rows, static_cast<Index>(act.I0.size()));
  Mat Free(rows, static_cast<Index>(act.I1.size()) + cm.s());
  for (std::size_t r = 0; r < act.I0.size(); ++r) {
    F0.col(static_cast<Index>(r)) = column(cm.endpoint_ineq[act.I0[r]].eval(q).gradient);
  }
  for (std::size_t r = 0; r < act.I1.size(); ++r) {
    Free.col(static_cast<Index>(r)) = column(cm.endpoint_ineq[act.I1[r]].eval(q).gradient);
  }
  for (int j = 0; j < cm.s(); ++j) {
    Free.col(static_cast<Index>(act.I1.size()) + j) =
        column(cm.endpoint_eq[j].eval(q).gradient);
  }
  QualificationResult res;
  auto pack = [&](const Vec& l0, const Vec& fc) {
    Vec w = Vec::Zero(cm.ke() + cm.s());
    for (std::size_t r = 0; r < act.I0.size(); ++r) w(act.I0[r]) = l0(static_cast<Index>(r));
    for (std::size_t r = 0; r < act.I1.size(); ++r) w(act.I1[r]) = fc(static_cast<Index>(r));
    for (int j = 0; j < cm.s(); ++j) {
      w(cm.ke() + j) = fc(static_cast<Index>(act.I1.size()) + j);
    }
    return w;
  };
  res.rank = numerical_rank(Free, tol.rank);
  if (Free.cols() > 0 && res.rank < Free.cols()) {
    const Mat K = nullspace(Free, static_cast<int>(Free.cols()), tol.rank);
    Vec fc = K.col(0);
    // Orient so the first nonzero coefficient is positive.
    for (Index r = 0; r < fc.size(); ++r) {
      if (std::abs(fc(r)) > 1e-12) {
        if (fc(r) < 0) fc = -fc;
        break;
      }
    }
    res.witness = pack(Vec::Zero(F0.cols()), fc);
    res.message = "endpoint multipliers (alpha_I1, beta) not determined uniquely";
    return res;
  }
  Mat Proj = Mat::Identity(rows, rows);
  if (Free.cols() > 0) {
    const Mat Q = Free.householderQr().householderQ() * Mat::Identity(rows, Free.cols());
    Proj -= Q * Q.transpose();
  }
  if (auto l0 = positive_dependence(Proj * F0)) {
    Vec fc = Vec::Zero(Free.cols());
    if (Free.cols() > 0) {
      fc = Free.completeOrthogonalDecomposition().solve(-(F0 * (*l0)));
    }
    res.witness = pack(*l0, fc);
    res.message = "nonzero (alpha, beta) with alpha_I0 >= 0 solves the homogeneous system";
    return res;
  }
  res.holds = true;
  res.message = "strict MF holds; (alpha, beta, p) are unique with alpha_0 = 1";
  return res;
}

/// {(x0, u) : psi' q = 0, phi_i' q <= 0 (i in I), phi_0' q <= 0} with q the
/// linearized endpoint pair.
inline PolyhedralCone mayer_critical_cone(const ControlModel& cm,
                                          const ControlTuple& s, const Mesh& mesh,
                                          const Tolerances& tol = {}) {
  check_tuple(cm, s, mesh);
  const int n = cm.n();
  const Mat T = state_sensitivity(cm.dyn, s.trajectory(), mesh);
  Mat Pq(2 * n, T.cols());
  Pq << T.topRows(n), T.bottomRows(n);
  const Vec q = endpoint_pair(s.x);
  const auto act = detail::endpoint_activity(cm, s, tol);
  Mat A(1 + static_cast<Index>(act.I.size()), T.cols());
  A.row(0) = cm.cost.eval(q).gradient * Pq;
  for (std::size_t r = 0; r < act.I.size(); ++r) {
    A.row(1 + static_cast<Index>(r)) = cm.endpoint_ineq[act.I[r]].eval(q).gradient * Pq;
  }
  Mat B(cm.s(), T.cols());
  for (int j = 0; j < cm.s(); ++j) B.row(j) = cm.endpoint_eq[j].eval(q).gradient * Pq;
  return {A, B, static_cast<int>(T.cols())};
}

/// Omega over (x0, u) with the endpoint Lagrangian l(q, 1, alpha, beta).
inline QuadraticFormRep quadratic_form_mayer(const ControlModel& cm,
                                             const ControlTuple& s,
                                             const Mesh& mesh) {
  return quadratic_form_ocp(cm, s, mesh);
}

inline CoercivityCertificate certify_coercivity_mayer(
    const ControlModel& cm, const ControlTuple& s, const Mesh& mesh,
    const CoercivityOptions& opt = {}, const Tolerances& tol = {}) {
  return certify_coercivity(quadratic_form_mayer(cm, s, mesh),
                            mayer_critical_cone(cm, s, mesh, tol), opt);
}

}  // namespace subreg
