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

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cstdio>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "subreg/ocp_analysis.hpp"
#include "subreg/perturbation.hpp"

namespace subreg {

/// Active-set pattern of the control (N x k) and endpoint (ke) inequalities.
struct ControlActivity {
  std::vector<std::vector<bool>> ctrl;
  std::vector<bool> endpoint;

  int count() const {
    int c = 0;
    for (const auto& r : ctrl) for (bool b : r) c += b;
    for (bool b : endpoint) c += b;
    return c;
  }

  /// "<active count>:<fnv1a hash of the pattern>".
  std::string signature() const {
    std::uint64_t hsh = 1469598103934665603ULL;
    auto feed = [&](bool b) {
      hsh ^= b ? 0x31U : 0x30U;
      hsh *= 1099511628211ULL;
    };
    for (const auto& r : ctrl) for (bool b : r) feed(b);
    feed(false);
    for (bool b : endpoint) feed(b);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hsh));
    return std::to_string(count()) + ":" + buf;
  }

  bool operator<(const ControlActivity& o) const {
    return std::tie(ctrl, endpoint) < std::tie(o.ctrl, o.endpoint);
  }
};

struct ControlSolve {
  bool converged = false;
  ControlTuple tuple;
  ControlActivity activity;
  double residual = kInf;
  int newton_iterations = 0;
  int active_set_updates = 0;
  std::string note;
};

namespace detail {

// Unknown layout: x, u, p, lambda, alpha, beta.
struct ControlLayout {
  int n, m, k, s, ke, N;
  Index x(int i, int c) const { return static_cast<Index>(i) * n + c; }
  Index u(int i, int a) const {
    return static_cast<Index>(N + 1) * n + static_cast<Index>(i) * m + a;
  }
  Index p(int i, int c) const {
    return static_cast<Index>(N + 1) * n + static_cast<Index>(N) * m +
           static_cast<Index>(i) * n + c;
  }
  Index lam(int i, int j) const {
    return 2 * static_cast<Index>(N + 1) * n + static_cast<Index>(N) * m +
           static_cast<Index>(i) * k + j;
  }
  Index alpha(int l) const { return lam(N, 0) + l; }
  Index beta(int j) const { return alpha(ke) + j; }
  Index size() const { return beta(s); }
  Index q(int b) const { return b < n ? x(0, b) : x(N, b - n); }

  Vec pack(const ControlTuple& t) const {
    Vec v(size());
    for (int i = 0; i <= N; ++i) {
      for (int c = 0; c < n; ++c) {
        v(x(i, c)) = t.x(i, c);
        v(p(i, c)) = t.p(i, c);
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int a = 0; a < m; ++a) v(u(i, a)) = t.u(i, a);
      for (int j = 0; j < k; ++j) v(lam(i, j)) = t.lambda(i, j);
    }
    for (int l = 0; l < ke; ++l) v(alpha(l)) = t.alpha(l);
    for (int j = 0; j < s; ++j) v(beta(j)) = t.beta(j);
    return v;
  }

  ControlTuple unpack(const Vec& v) const {
    ControlTuple t{Mat(N + 1, n), Mat(N, m), Mat(N + 1, n), Mat(N, k),
                   RowVec(ke), RowVec(s)};
    for (int i = 0; i <= N; ++i) {
      for (int c = 0; c < n; ++c) {
        t.x(i, c) = v(x(i, c));
        t.p(i, c) = v(p(i, c));
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int a = 0; a < m; ++a) t.u(i, a) = v(u(i, a));
      for (int j = 0; j < k; ++j) t.lambda(i, j) = v(lam(i, j));
    }
    for (int l = 0; l < ke; ++l) t.alpha(l) = v(alpha(l));
    for (int j = 0; j < s; ++j) t.beta(j) = v(beta(j));
    return t;
  }
};

using Triplets = std::vector<Eigen::Triplet<double>>;

// Residual of the perturbed system for a fixed activity, in the same
// scaling as the optimality residuals; optionally the sparse Jacobian.
inline Vec control_system(const ControlModel& cm, const ControlLayout& L,
                          const Mesh& mesh, const PerturbationControl& w,
                          const ControlActivity& act, const ControlTuple& t,
                          Triplets* J) {
  const int n = L.n, m = L.m, k = L.k, N = L.N;
  const double h = mesh.h();
  Vec F(L.size());
  Index row = 0;
  auto put = [&](Index r, Index c, double v) {
    if (J && v != 0.0) J->emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  };
  const Index rowD = 0, rowA = static_cast<Index>(N) * n, rowS = 2 * rowA,
              rowT = rowS + static_cast<Index>(N) * m, rowC = rowT + 2 * n,
              rowE = rowC + static_cast<Index>(N) * k, rowI = rowE + L.s;
  for (int i = 0; i < N; ++i) {
    const Vec xi = row_vec(t.x, i), ui = row_vec(t.u, i);
    auto [fv, Jf] = cm.dyn.linearize(xi, ui);
    const RowVec pn = t.p.row(i + 1);
    const Mat Hw = J ? cm.dyn.weighted_hessian(pn, xi, ui) : Mat();
    for (int c = 0; c < n; ++c) {
      // -(x_{i+1} - x_i)/h + f - dyn
      row = rowD + static_cast<Index>(i) * n + c;
      F(row) = -(t.x(i + 1, c) - t.x(i, c)) / h + fv(c) - w.dyn(i, c);
      put(row, L.x(i + 1, c), -1.0 / h);
      put(row, L.x(i, c), 1.0 / h);
      for (int b = 0; b < n; ++b) put(row, L.x(i, b), Jf(c, b));
      for (int a = 0; a < m; ++a) put(row, L.u(i, a), Jf(c, n + a));
      // (p_{i+1} - p_i)/h + p_{i+1} f_x - pi
      row = rowA + static_cast<Index>(i) * n + c;
      F(row) = (t.p(i + 1, c) - t.p(i, c)) / h + pn.dot(Jf.col(c)) - w.pi(i, c);
      put(row, L.p(i + 1, c), 1.0 / h);
      put(row, L.p(i, c), -1.0 / h);
      if (J) {
        for (int l = 0; l < n; ++l) put(row, L.p(i + 1, l), Jf(l, c));
        for (int b = 0; b < n; ++b) put(row, L.x(i, b), Hw(c, b));
        for (int a = 0; a < m; ++a) put(row, L.u(i, a), Hw(c, n + a));
      }
    }
    Vec g;
    Mat Gp;
    if (k) std::tie(g, Gp) = control_constraints_at(cm, ui);
    const Mat Hg = (J && k) ? weighted_hessian(cm.control, t.lambda.row(i), ui) : Mat();
    for (int a = 0; a < m; ++a) {
      // p_{i+1} f_u + lambda G' - rho
      row = rowS + static_cast<Index>(i) * m + a;
      F(row) = pn.dot(Jf.col(n + a)) - w.rho(i, a);
      if (k) F(row) += t.lambda.row(i).dot(Gp.col(a));
      if (J) {
        for (int l = 0; l < n; ++l) put(row, L.p(i + 1, l), Jf(l, n + a));
        for (int b = 0; b < n; ++b) put(row, L.x(i, b), Hw(n + a, b));
        for (int b = 0; b < m; ++b) {
          put(row, L.u(i, b), Hw(n + a, n + b) + (k ? Hg(a, b) : 0.0));
        }
        for (int j = 0; j < k; ++j) put(row, L.lam(i, j), Gp(j, a));
      }
    }
    for (int j = 0; j < k; ++j) {
      row = rowC + static_cast<Index>(i) * k + j;
      if (act.ctrl[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
        F(row) = g(j) - w.ctrl(i, j);
        for (int a = 0; a < m; ++a) put(row, L.u(i, a), Gp(j, a));
      } else {
        F(row) = t.lambda(i, j);
        put(row, L.lam(i, j), 1.0);
      }
    }
  }
  const Vec q = endpoint_pair(t.x);
  const FieldEval l = endpoint_lagrangian(cm, q, t.alpha, t.beta);
  auto [phi, dphi] = eval_stack(cm.endpoint_ineq, q);
  auto [psi, dpsi] = eval_stack(cm.endpoint_eq, q);
  for (int c = 0; c < 2 * n; ++c) {
    row = rowT + c;
    const bool head = c < n;
    const double pv = head ? -t.p(0, c) : t.p(N, c - n);
    F(row) = pv - l.gradient(c) - cm.nu_sign * w.nu(c);
    put(row, head ? L.p(0, c) : L.p(N, c - n), head ? -1.0 : 1.0);
    if (J) {
      for (int b = 0; b < 2 * n; ++b) put(row, L.q(b), -l.hessian(c, b));
      for (int e = 0; e < L.ke; ++e) put(row, L.alpha(e), -dphi(e, c));
      for (int e = 0; e < L.s; ++e) put(row, L.beta(e), -dpsi(e, c));
    }
  }
  for (int e = 0; e < L.s; ++e) {
    row = rowE + e;
    F(row) = psi(e) - w.mu(e);
    for (int b = 0; b < 2 * n; ++b) put(row, L.q(b), dpsi(e, b));
  }
  for (int e = 0; e < L.ke; ++e) {
    row = rowI + e;
    if (act.endpoint[static_cast<std::size_t>(e)]) {
      F(row) = phi(e) - w.endpoint(e);
      for (int b = 0; b < 2 * n; ++b) put(row, L.q(b), dphi(e, b));
    } else {
      F(row) = t.alpha(e);
      put(row, L.alpha(e), 1.0);
    }
  }
  return F;
}

}  // namespace detail

/// Sup deviation of t from solving w in the perturbed optimality system,
/// inequality blocks read as inclusions.
inline double perturbed_control_deviation(const ControlModel& cm, const ControlTuple& t,
                                          const PerturbationControl& w,
                                          const Mesh& mesh) {
  const detail::ControlLayout L{cm.n(), cm.m(), cm.k(), cm.s(), cm.ke(), mesh.N};
  ControlActivity act;
  act.ctrl.assign(static_cast<std::size_t>(mesh.N),
                  std::vector<bool>(static_cast<std::size_t>(cm.k()), true));
  act.endpoint.assign(static_cast<std::size_t>(cm.ke()), true);
  Vec F = detail::control_system(cm, L, mesh, w, act, t, nullptr);
  // Replace the complementarity rows by the inclusion defect.
  const Index rowC = 2 * static_cast<Index>(mesh.N) * cm.n() +
                     static_cast<Index>(mesh.N) * cm.m() + 2 * cm.n();
  for (int i = 0; i < mesh.N; ++i) {
    for (int j = 0; j < cm.k(); ++j) {
      const double c = F(rowC + static_cast<Index>(i) * cm.k() + j);
      const double lam = t.lambda(i, j);
      F(rowC + static_cast<Index>(i) * cm.k() + j) =
          std::max({-lam, c, std::min(lam, std::abs(c))});
    }
  }
  const Index rowI = rowC + static_cast<Index>(mesh.N) * cm.k() + cm.s();
  for (int e = 0; e < cm.ke(); ++e) {
    const double c = F(rowI + e), a = t.alpha(e);
    F(rowI + e) = std::max({-a, c, std::min(a, std::abs(c))});
  }
  return F.size() ? F.cwiseAbs().maxCoeff() : 0.0;
}

/// Reference activity: control rows in M_j, endpoint rows in I.
inline ControlActivity reference_activity(const ControlModel& cm, const ControlTuple& s,
                                          const Mesh& mesh, const Tolerances& tol = {}) {
  ControlActivity act;
  act.ctrl.assign(static_cast<std::size_t>(mesh.N),
                  std::vector<bool>(static_cast<std::size_t>(cm.k()), false));
  for (int i = 0; i < mesh.N && cm.k(); ++i) {
    const Vec g = control_constraints_at(cm, row_vec(s.u, i)).first;
    for (int j : detail::active_rows(g, tol.act)) {
      act.ctrl[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
    }
  }
  act.endpoint.assign(static_cast<std::size_t>(cm.ke()), false);
  if (cm.ke()) {
    const Vec phi = eval_stack(cm.endpoint_ineq, endpoint_pair(s.x)).first;
    for (int e : detail::active_rows(phi, tol.act)) {
      act.endpoint[static_cast<std::size_t>(e)] = true;
    }
  }
  return act;
}

/// Solves the perturbed discrete optimality system near `ref` by sparse
/// Newton inside a primal-dual active-set loop started from the reference
/// activity. w = 0 returns `ref` up to round-off.
inline ControlSolve solve_perturbed_ocp(const ControlModel& cm, const ControlTuple& ref,
                                            const PerturbationControl& w, const Mesh& mesh,
                                            double radius_a,
                                            const Tolerances& tol = {},
                                            int max_updates = 40) {
  if (!(radius_a > 0.0)) throw InputError("solve_perturbed_ocp: radius must be positive");
  check_tuple(cm, ref, mesh);
  const detail::ControlLayout L{cm.n(), cm.m(), cm.k(), cm.s(), cm.ke(), mesh.N};
  ControlSolve out;
  out.activity = reference_activity(cm, ref, mesh, tol);
  Vec v = L.pack(ref);
  std::set<ControlActivity> seen;
  const double newton_tol = 1e-11;
  for (int upd = 0; upd <= max_updates; ++upd) {
    if (!seen.insert(out.activity).second) {
      out.note = "active-set cycle";
      return out;
    }
    // Newton for the current activity.
    bool ok = false;
    for (int it = 0; it < 50; ++it) {
      detail::Triplets trips;
      const Vec F = detail::control_system(cm, L, mesh, w, out.activity, L.unpack(v), &trips);
      const double r0 = F.cwiseAbs().maxCoeff();
      if (!std::isfinite(r0)) break;
      if (r0 <= newton_tol) {
        ok = true;
        break;
      }
      Eigen::SparseMatrix<double> J(L.size(), L.size());
      J.setFromTriplets(trips.begin(), trips.end());
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(J);
      if (lu.info() != Eigen::Success) {
        out.note = "singular Jacobian";
        return out;
      }
      const Vec d = lu.solve(-F);
      if (!d.allFinite()) break;
      ++out.newton_iterations;
      const double f0 = F.squaredNorm();
      double tau = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 30; ++ls, tau *= 0.5) {
        const Vec cand = v + tau * d;
        const double f1 =
            detail::control_system(cm, L, mesh, w, out.activity, L.unpack(cand), nullptr)
                .squaredNorm();
        if (std::isfinite(f1) && f1 < (1.0 - 1e-4 * tau) * f0) {
          v = cand;
          moved = true;
          break;
        }
      }
      if (!moved) {
        ok = r0 <= 1e-10;
        break;
      }
    }
    if (!ok) {
      out.note = "newton did not converge";
      return out;
    }
    // Primal-dual active-set update.
    ControlTuple t = L.unpack(v);
    ControlActivity next = out.activity;
    bool changed = false;
    const double flip = 1e-12;
    for (int i = 0; i < mesh.N && cm.k(); ++i) {
      const Vec g = control_constraints_at(cm, row_vec(t.u, i)).first;
      for (int j = 0; j < cm.k(); ++j) {
        auto bit = next.ctrl[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        const bool a = bit;
        if (a && t.lambda(i, j) < -flip) {
          bit = false;
          changed = true;
        } else if (!a && g(j) - w.ctrl(i, j) > flip) {
          bit = true;
          changed = true;
        }
      }
    }
    if (cm.ke()) {
      const Vec phi = eval_stack(cm.endpoint_ineq, endpoint_pair(t.x)).first;
      for (int e = 0; e < cm.ke(); ++e) {
        auto bit = next.endpoint[static_cast<std::size_t>(e)];
        const bool a = bit;
        if (a && t.alpha(e) < -flip) {
          bit = false;
          changed = true;
        } else if (!a && phi(e) - w.endpoint(e) > flip) {
          bit = true;
          changed = true;
        }
      }
    }
    if (!changed) {
      for (Index i = 0; i < t.lambda.size(); ++i) {
        if (t.lambda.data()[i] < 0.0) t.lambda.data()[i] = 0.0;
      }
      for (Index e = 0; e < t.alpha.size(); ++e) t.alpha(e) = std::max(t.alpha(e), 0.0);
      out.tuple = t;
      out.residual = perturbed_control_deviation(cm, t, w, mesh);
      out.converged = out.residual <= 1e-10;
      if (!out.converged) out.note = "residual check failed";
      const double reach = std::max(norms::linf(t.x - ref.x), norms::linf(t.u - ref.u));
      if (out.converged && reach > radius_a) {
        out.converged = false;
        out.note = "solution outside radius";
      }
      return out;
    }
    out.activity = next;
    ++out.active_set_updates;
  }
  out.note = "active-set update limit";
  return out;
}

/// Block distances between control tuples.
struct ControlDistance {
  double x_w11 = 0.0;
  double u_l2 = 0.0;
  double p_w11 = 0.0;
  double lambda_l2 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double primal_weak = 0.0;    // |dx|_inf + |du|_2
  double primal_strong = 0.0;  // |dx|_{1,1} + |du|_inf
  double total() const { return x_w11 + u_l2 + p_w11 + lambda_l2 + alpha + beta; }
};

inline ControlDistance control_distance(const ControlTuple& a, const ControlTuple& b,
                                        const Mesh& mesh) {
  const double h = mesh.h();
  const Mat dx = a.x - b.x, du = a.u - b.u;
  ControlDistance d;
  d.x_w11 = norms::w11(dx);
  d.u_l2 = norms::l2(du, h);
  d.p_w11 = norms::w11(a.p - b.p);
  d.lambda_l2 = norms::l2(a.lambda - b.lambda, h);
  d.alpha = (a.alpha - b.alpha).norm();
  d.beta = (a.beta - b.beta).norm();
  d.primal_weak = norms::weak(dx, du, h);
  d.primal_strong = norms::strong(dx, du);
  return d;
}

}  // namespace subreg
