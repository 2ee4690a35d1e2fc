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

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "subreg/cone.hpp"
#include "subreg/control_model.hpp"
#include "subreg/linalg.hpp"
#include "subreg/report.hpp"

namespace subreg {

struct MultiplierRecovery {
  Mat lambda;  // N x k
  double max_residual = 0.0;
  double min_lambda = kInf;
};

namespace detail {

inline std::vector<int> active_rows(const Vec& g, double t_act) {
  const double ta = t_act * (1.0 + (g.size() ? g.cwiseAbs().maxCoeff() : 0.0));
  std::vector<int> I;
  for (Index j = 0; j < g.size(); ++j) {
    if (std::abs(g(j)) <= ta) I.push_back(static_cast<int>(j));
  }
  return I;
}

inline Mat select_rows(const Mat& M, const std::vector<int>& idx) {
  Mat out(static_cast<Index>(idx.size()), M.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = M.row(idx[r]);
  return out;
}

/// p_{i+1} f_u(x_i, u_i), the control gradient of H at interval i.
inline RowVec hamiltonian_u(const ControlModel& cm, const ControlTuple& s, int i) {
  const Mat J = cm.dyn.linearize(row_vec(s.x, i), row_vec(s.u, i)).second;
  return s.p.row(i + 1) * J.rightCols(cm.m());
}

}  // namespace detail

/// Solves lambda_i G'_act(u_i) = -p_{i+1} f_u on the active rows at each
/// interval; inactive rows get zero.
inline MultiplierRecovery multiplier_from_stationarity(const ControlModel& cm,
                                                       const ControlTuple& s,
                                                       const Mesh& mesh,
                                                       const Tolerances& tol = {}) {
  MultiplierRecovery r;
  r.lambda = Mat::Zero(mesh.N, cm.k());
  for (int i = 0; i < mesh.N; ++i) {
    const RowVec Hu = detail::hamiltonian_u(cm, s, i);
    RowVec res = Hu;
    if (cm.k()) {
      auto [g, Gp] = control_constraints_at(cm, row_vec(s.u, i));
      const auto I = detail::active_rows(g, tol.act);
      if (!I.empty()) {
        const Mat Ga = detail::select_rows(Gp, I);
        if (numerical_rank(Ga, tol.rank) < static_cast<Index>(I.size())) {
          throw PreconditionError(
              "regularity violated at interval " + std::to_string(i) +
              ": active control constraint gradients are not linearly "
              "independent");
        }
        const RowVec la = Ga.transpose()
                              .completeOrthogonalDecomposition()
                              .solve(-Hu.transpose())
                              .transpose();
        for (std::size_t a = 0; a < I.size(); ++a) {
          r.lambda(i, I[a]) = la(static_cast<Index>(a)) + 0.0;
        }
        res += la * Ga;
      }
      r.min_lambda = std::min(r.min_lambda, r.lambda.row(i).minCoeff());
    }
    r.max_residual = std::max(r.max_residual, res.norm());
  }
  return r;
}

/// omega = (nu, pi, rho, xi, eta) of the perturbed control system.
struct OcpResidual {
  RowVec nu;  // 2n
  Mat pi;     // N x n
  Mat rho;    // N x m
  Mat xi;     // N x n
  Mat eta;    // N x k
  double norm = 0.0;         // |nu| + |pi|_1 + |rho|_2 + |xi|_1 + |eta|_2
  double budget_norm = 0.0;  // |nu| + |pi|_1 + |rho|_inf + |xi|_1 + |eta|_inf
};

inline OcpResidual optimality_residuals_ocp(const ControlModel& cm,
                                            const ControlTuple& s,
                                            const Mesh& mesh,
                                            const Tolerances& tol = {}) {
  check_tuple(cm, s, mesh);
  if (cm.k() && s.lambda.minCoeff() < 0.0) {
    throw PreconditionError("empty normal cone: negative control multiplier");
  }
  const int n = cm.n(), m = cm.m(), N = mesh.N;
  const double h = mesh.h();
  OcpResidual r;
  const FieldEval l = endpoint_lagrangian(cm, endpoint_pair(s.x), s.alpha, s.beta);
  RowVec tv(2 * n);
  tv << -s.p.row(0), s.p.row(N);
  r.nu = (tv - l.gradient) / cm.nu_sign;
  r.pi = Mat(N, n);
  r.rho = Mat(N, m);
  r.xi = Mat(N, n);
  r.eta = Mat::Zero(N, cm.k());
  for (int i = 0; i < N; ++i) {
    auto [fv, J] = cm.dyn.linearize(row_vec(s.x, i), row_vec(s.u, i));
    r.pi.row(i) = (s.p.row(i + 1) - s.p.row(i)) / h + s.p.row(i + 1) * J.leftCols(n);
    r.rho.row(i) = s.p.row(i + 1) * J.rightCols(m);
    r.xi.row(i) = -(s.x.row(i + 1) - s.x.row(i)) / h + fv.transpose();
    if (cm.k()) {
      auto [g, Gp] = control_constraints_at(cm, row_vec(s.u, i));
      r.rho.row(i) += s.lambda.row(i) * Gp;
      for (int j = 0; j < cm.k(); ++j) {
        r.eta(i, j) = s.lambda(i, j) > tol.mul ? g(j) : std::max(g(j), 0.0);
      }
    }
  }
  const double head = r.nu.norm() + norms::l1(r.pi, h) + norms::l1(r.xi, h);
  r.norm = head + norms::l2(r.rho, h) + norms::l2(r.eta, h);
  r.budget_norm = head + norms::linf(r.rho) + norms::linf(r.eta);
  return r;
}

/// Index sets over intervals, per constraint j.
struct TimeSets {
  std::vector<std::vector<int>> M;            // G_j(u_i) = 0
  std::vector<std::vector<int>> Mplus;        // lambda_j,i > t_mul
  std::vector<std::vector<int>> Mplus_delta;  // lambda_j,i > delta
  std::vector<int> m_delta;                   // 0 < lambda_j,i <= delta, some j
  double meas_m_delta = 0.0;
};

inline TimeSets time_sets(const ControlModel& cm, const ControlTuple& s,
                          const Mesh& mesh, double delta,
                          const Tolerances& tol = {}) {
  if (!(delta > 0.0)) throw InputError("time_sets: delta must be positive");
  const int k = cm.k();
  TimeSets ts;
  ts.M.resize(k);
  ts.Mplus.resize(k);
  ts.Mplus_delta.resize(k);
  for (int i = 0; i < mesh.N; ++i) {
    if (!k) break;
    const Vec g = control_constraints_at(cm, row_vec(s.u, i)).first;
    const auto act = detail::active_rows(g, tol.act);
    bool in_m = false;
    for (int j = 0; j < k; ++j) {
      const bool active = std::find(act.begin(), act.end(), j) != act.end();
      const double lam = s.lambda(i, j);
      if (lam > tol.mul && !active) {
        throw PreconditionError("complementarity violated at interval " +
                                std::to_string(i) + ", constraint " +
                                std::to_string(j + 1));
      }
      if (active) ts.M[j].push_back(i);
      if (lam > tol.mul) ts.Mplus[j].push_back(i);
      if (lam > delta) ts.Mplus_delta[j].push_back(i);
      if (lam > tol.mul && lam <= delta) in_m = true;
    }
    if (in_m) ts.m_delta.push_back(i);
  }
  ts.meas_m_delta = mesh.h() * static_cast<double>(ts.m_delta.size());
  return ts;
}

/// Which row system defines the discrete cone over (x0, u).
enum class OcpConeKind {
  Exact,  // (ccc1): G_j' u <= 0 on M_j, = 0 on M+(lambda_j)
  Delta,  // K_delta: equality rows on M+_delta only
  CC,     // (cc): G_j' u <= 0 on M_j and H_u u = 0 at every interval
};

/// Discrete critical cone in R^{n + N m}; the linearized dynamics are
/// eliminated by the (x0, u) parametrization.
inline PolyhedralCone discrete_critical_cone_ocp(const ControlModel& cm,
                                                 const ControlTuple& s,
                                                 const Mesh& mesh,
                                                 OcpConeKind kind,
                                                 double delta = 0.0,
                                                 const Tolerances& tol = {}) {
  const int n = cm.n(), m = cm.m(), k = cm.k();
  const Index d = n + static_cast<Index>(mesh.N) * m;
  const double dlt = kind == OcpConeKind::Delta ? delta : tol.mul;
  if (kind == OcpConeKind::Delta && !(delta > 0.0)) {
    throw InputError("K_delta requires delta > 0");
  }
  std::vector<RowVec> ineq, eq;
  for (int i = 0; i < mesh.N; ++i) {
    const Index off = u_offset(n, m, i);
    if (kind == OcpConeKind::CC) {
      RowVec r = RowVec::Zero(d);
      r.segment(off, m) = detail::hamiltonian_u(cm, s, i);
      // H_u = -lambda G'; below t_mul it is treated as zero, as in (ccc1).
      if (r.norm() > tol.mul) eq.push_back(r);
    }
    if (!k) continue;
    auto [g, Gp] = control_constraints_at(cm, row_vec(s.u, i));
    for (int j : detail::active_rows(g, tol.act)) {
      RowVec r = RowVec::Zero(d);
      r.segment(off, m) = Gp.row(j);
      const bool pinned = kind != OcpConeKind::CC && s.lambda(i, j) > dlt;
      (pinned ? eq : ineq).push_back(r);
    }
  }
  Mat A(static_cast<Index>(ineq.size()), d), B(static_cast<Index>(eq.size()), d);
  for (std::size_t r = 0; r < ineq.size(); ++r) A.row(static_cast<Index>(r)) = ineq[r];
  for (std::size_t r = 0; r < eq.size(); ++r) B.row(static_cast<Index>(r)) = eq[r];
  return {A, B, static_cast<int>(d)};
}

/// h times the number of control coordinates u_i e_a with +e or -e in K;
/// zero when the cone pins every control sample.
inline double free_control_measure(const PolyhedralCone& K, const ControlModel& cm,
                                   const Mesh& mesh) {
  // Membership of +-e_c reduces to sign checks on column c, with the same
  // row-scaled tolerance as PolyhedralCone::contains.
  constexpr double tol = 1e-8;
  const Vec na = K.A.rowwise().norm() * tol, nb = K.B.rowwise().norm() * tol;
  int free = 0;
  for (int i = 0; i < mesh.N; ++i) {
    for (int a = 0; a < cm.m(); ++a) {
      const Index c = u_offset(cm.n(), cm.m(), i) + a;
      if ((K.B.col(c).cwiseAbs().array() > nb.array()).any()) continue;
      const bool plus = (K.A.col(c).array() <= na.array()).all();
      const bool minus = (-K.A.col(c).array() <= na.array()).all();
      if (plus || minus) ++free;
    }
  }
  return free * mesh.h();
}

namespace detail {

/// Omega over (x0, u): l_qq on q plus h sum <H_ww w_i, w_i> with
/// H = p_{i+1} f + lambda_i G.
inline Mat reduced_hessian(const ControlModel& cm, const ControlTuple& s,
                           const Mesh& mesh, const Mat& T) {
  const int n = cm.n(), m = cm.m(), N = mesh.N;
  const double h = mesh.h();
  const Index d = T.cols();
  const FieldEval l = endpoint_lagrangian(cm, endpoint_pair(s.x), s.alpha, s.beta);
  Mat Pq(2 * n, d);
  Pq << T.topRows(n), T.bottomRows(n);
  Mat W = Pq.transpose() * l.hessian * Pq;
  Mat HxxT = Mat::Zero(T.rows(), d);
  bool any_xx = false;
  for (int i = 0; i < N; ++i) {
    Mat Hw = cm.dyn.weighted_hessian(s.p.row(i + 1), row_vec(s.x, i), row_vec(s.u, i));
    if (cm.k()) {
      Hw.bottomRightCorner(m, m) +=
          weighted_hessian(cm.control, s.lambda.row(i), row_vec(s.u, i));
    }
    const Index off = u_offset(n, m, i);
    const auto Phi = T.middleRows(static_cast<Index>(i) * n, n);
    const Mat Hxx = Hw.topLeftCorner(n, n);
    const Mat Hxu = Hw.topRightCorner(n, m);
    if (Hxx.cwiseAbs().maxCoeff() > 0.0) {
      HxxT.middleRows(static_cast<Index>(i) * n, n) = h * Hxx * Phi;
      any_xx = true;
    }
    if (Hxu.cwiseAbs().maxCoeff() > 0.0) {
      const Mat C = h * Phi.transpose() * Hxu;  // d x m
      W.middleCols(off, m) += C;
      W.middleRows(off, m) += C.transpose();
    }
    W.block(off, off, m, m) += h * Hw.bottomRightCorner(m, m);
  }
  if (any_xx) W.noalias() += T.transpose() * HxxT;
  return 0.5 * (W + W.transpose());
}

}  // namespace detail

/// Quadratic form over (x0, u) with the Gram of |x0|^2 + |u|_2^2.
inline QuadraticFormRep quadratic_form_ocp(const ControlModel& cm,
                                           const ControlTuple& s,
                                           const Mesh& mesh) {
  check_tuple(cm, s, mesh);
  const Mat T = state_sensitivity(cm.dyn, s.trajectory(), mesh);
  return {detail::reduced_hessian(cm, s, mesh, T),
          control_gram(cm.n(), cm.m(), mesh)};
}

struct OcpCertificate {
  CoercivityCertificate cert;
  double delta = 0.0;
  /// Lower bound for the constant in Omega >= c (|x|_inf^2 + |u|_2^2),
  /// derived from c0 and the sensitivity map.
  double c_inf_norm = 0.0;
};

/// Converts c0 for |x0|^2 + |u|_2^2 into a constant for |x|_inf^2 + |u|_2^2
/// using |x|_inf^2 + |u|^2 <= (max_i |Phi_i G^{-1/2}|^2 + 1) (|x0|^2 + |u|^2).
inline double sup_norm_constant(const Mat& T, const Mat& gram, int n, double c0) {
  const Vec gi = gram.diagonal().cwiseSqrt().cwiseInverse();
  double C = 0.0;
  for (Index i = 0; i < T.rows() / n; ++i) {
    const Mat P = T.middleRows(i * n, n) * gi.asDiagonal();
    C = std::max(C, Eigen::SelfAdjointEigenSolver<Mat>(P * P.transpose())
                        .eigenvalues()
                        .maxCoeff());
  }
  return std::isfinite(c0) && c0 > 0.0 ? c0 / (C + 1.0) : c0;
}

inline OcpCertificate certify_coercivity_ocp(const ControlModel& cm,
                                             const ControlTuple& s,
                                             const Mesh& mesh, double delta,
                                             OcpConeKind kind = OcpConeKind::Delta,
                                             const CoercivityOptions& opt = {},
                                             const Tolerances& tol = {}) {
  check_tuple(cm, s, mesh);
  const int n = cm.n();
  const Mat T = state_sensitivity(cm.dyn, s.trajectory(), mesh);
  const QuadraticFormRep form(detail::reduced_hessian(cm, s, mesh, T),
                              control_gram(n, cm.m(), mesh));
  OcpCertificate out;
  out.delta = delta;
  out.cert = certify_coercivity(
      form, discrete_critical_cone_ocp(cm, s, mesh, kind, delta, tol), opt);
  out.c_inf_norm = sup_norm_constant(T, form.weak_norm_gram, n, out.cert.c0);
  return out;
}

struct LegendreResult {
  bool holds = false;
  bool vacuous = false;
  double c_L = kInf;
  int violating_node = -1;
  std::optional<Vec> direction;
};

/// H_bar_uu coercive on C_delta(t_i) for every interval in m_delta.
inline LegendreResult check_legendre(const ControlModel& cm, const ControlTuple& s,
                                     const Mesh& mesh, double delta,
                                     const Tolerances& tol = {}) {
  const TimeSets ts = time_sets(cm, s, mesh, delta, tol);
  const int m = cm.m();
  LegendreResult r;
  r.vacuous = ts.m_delta.empty();
  r.holds = true;
  for (int i : ts.m_delta) {
    auto [g, Gp] = control_constraints_at(cm, row_vec(s.u, i));
    std::vector<int> ineq, eq;
    for (int j : detail::active_rows(g, tol.act)) {
      (s.lambda(i, j) > delta ? eq : ineq).push_back(j);
    }
    Mat Huu = cm.dyn.weighted_hessian(s.p.row(i + 1), row_vec(s.x, i), row_vec(s.u, i))
                  .bottomRightCorner(m, m);
    Huu += weighted_hessian(cm.control, s.lambda.row(i), row_vec(s.u, i));
    const auto c = certify_coercivity(
        QuadraticFormRep(Huu),
        PolyhedralCone(detail::select_rows(Gp, ineq), detail::select_rows(Gp, eq), m));
    if (c.c0 < r.c_L) {
      r.c_L = c.c0;
      if (!c.certified) {
        r.holds = false;
        r.violating_node = i;
        r.direction = c.counterexample;
      }
    }
  }
  if (!r.holds) return r;
  r.holds = r.vacuous || r.c_L > tol.pd;
  return r;
}

struct HamiltonianViolation {
  int node = 0;
  Vec u;
  double ratio = 0.0;
};

struct HamiltonianGrowth {
  CertStatus status = CertStatus::Inconclusive;
  bool holds = false;
  bool vacuous = false;
  double c_H = kInf;
  int samples = 0;
  std::vector<HamiltonianViolation> violations;
};

/// Samples u in U with |u - u_i| < eps at intervals in m_delta and fits
/// H(x_i, u, p_{i+1}) - H(x_i, u_i, p_{i+1}) >= c_H |u - u_i|^2.
inline HamiltonianGrowth check_hamiltonian_growth(
    const ControlModel& cm, const ControlTuple& s, const Mesh& mesh, double delta,
    double eps, int samples, std::uint64_t seed, const Tolerances& tol = {}) {
  if (!(eps > 0.0) || samples <= 0) {
    throw InputError("hamiltonian growth: eps and samples must be positive");
  }
  const TimeSets ts = time_sets(cm, s, mesh, delta, tol);
  HamiltonianGrowth out;
  out.vacuous = ts.m_delta.empty();
  if (out.vacuous) {
    out.holds = true;
    out.status = CertStatus::Certified;
    return out;
  }
  for (int i : ts.m_delta) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(i)));
    const Vec x = row_vec(s.x, i), u0 = row_vec(s.u, i);
    const RowVec p = s.p.row(i + 1);
    const double H0 = p.dot(cm.dyn.value(x, u0).transpose());
    for (int k = 0; k < samples; ++k) {
      const Vec dir = rng.unit_sphere(cm.m());
      // Half of the samples sit on the boundary of the ball.
      const double r = (k % 2 ? rng.uniform() : 1.0) * eps * (1.0 - 1e-9);
      if (r == 0.0) continue;
      const Vec u = u0 + r * dir;
      const Vec g = control_constraints_at(cm, u).first;
      if (g.size() && g.maxCoeff() > 0.0) continue;
      const double ratio = (p.dot(cm.dyn.value(x, u).transpose()) - H0) / (r * r);
      ++out.samples;
      out.c_H = std::min(out.c_H, ratio);
      if (ratio <= 0.0) out.violations.push_back({i, u, ratio});
    }
  }
  if (out.samples == 0) return out;
  out.holds = out.c_H > 0.0;
  out.status = out.holds ? CertStatus::Certified : CertStatus::Refuted;
  return out;
}

/// Columns t, x1..xn, u1..um, p1..pn, lambda1..lambdak; u and lambda are
/// repeated at the left node, the last row carries the values of interval N-1.
inline Table trajectory_table(const ControlModel& cm, const ControlTuple& s,
                              const Mesh& mesh) {
  check_tuple(cm, s, mesh);
  Table t;
  t.header.push_back("t");
  auto names = [&](const char* base, int count) {
    for (int j = 1; j <= count; ++j) t.header.push_back(base + std::to_string(j));
  };
  names("x", cm.n());
  names("u", cm.m());
  names("p", cm.n());
  names("lambda", cm.k());
  for (int i = 0; i <= mesh.N; ++i) {
    const int c = std::min(i, mesh.N - 1);
    std::vector<std::string> row{fmt(mesh.t(i))};
    for (Index j = 0; j < s.x.cols(); ++j) row.push_back(fmt(s.x(i, j)));
    for (Index j = 0; j < s.u.cols(); ++j) row.push_back(fmt(s.u(c, j)));
    for (Index j = 0; j < s.p.cols(); ++j) row.push_back(fmt(s.p(i, j)));
    for (Index j = 0; j < cm.k(); ++j) row.push_back(fmt(s.lambda(c, j)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace subreg
