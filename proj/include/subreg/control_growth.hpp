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
#include <vector>

#include "subreg/mayer_analysis.hpp"

namespace subreg {

/// Sup-norm growth constant for a Mayer coercivity certificate.
inline double mayer_sup_norm_constant(const ControlModel& cm, const ControlTuple& s,
                                      const Mesh& mesh, double c0) {
  const Mat T = state_sensitivity(cm.dyn, s.trajectory(), mesh);
  return sup_norm_constant(T, control_gram(cm.n(), cm.m(), mesh), cm.n(), c0);
}

namespace detail {

// Min-norm (gram metric) Newton projection of (x0, u) onto psi(q) = 0.
inline std::optional<std::pair<Vec, Mat>> retract_endpoint(const ControlModel& cm,
                                                           Vec x0, Mat u,
                                                           const Mesh& mesh) {
  const int n = cm.n(), m = cm.m(), N = mesh.N;
  if (cm.s() == 0) return std::make_pair(x0, u);
  const Vec ginv = control_gram(n, m, mesh).diagonal().cwiseInverse();
  for (int it = 0; it < 30; ++it) {
    const Mat x = propagate_state(cm.dyn, x0, u, mesh);
    auto [psi, dpsi] = eval_stack(cm.endpoint_eq, endpoint_pair(x));
    if (psi.cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + x.cwiseAbs().maxCoeff())) {
      return std::make_pair(x0, u);
    }
    const Mat T = state_sensitivity(cm.dyn, {x, u}, mesh);
    Mat dq(2 * n, T.cols());
    dq << T.topRows(n), T.bottomRows(n);
    const Mat J = dpsi * dq;
    const Mat JG = J * ginv.asDiagonal();
    const Vec y = (JG * J.transpose()).completeOrthogonalDecomposition().solve(psi);
    const Vec dz = -(JG.transpose() * y);
    if (!dz.allFinite()) return std::nullopt;
    x0 += dz.head(n);
    for (int i = 0; i < N; ++i) {
      u.row(i) += dz.segment(u_offset(n, m, i), m).transpose();
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Samples admissible (x0, u) with sqrt(|dx0|^2 + |du|_2^2) <= radius,
/// propagates, and fits J(w) - J(w_hat) >= c (|x - x_hat|_inf^2 + |u - u_hat|_2^2).
/// Control samples leaving U at a node are reflected through u_hat there,
/// or reset to u_hat when both fail. Endpoint equalities are restored by
/// a min-norm Newton retraction; endpoint inequalities must hold.
inline GrowthProbe control_growth_probe(const ControlModel& cm, const ControlTuple& s,
                                        const Mesh& mesh, double radius, int samples,
                                        std::uint64_t seed) {
  if (!(radius > 0.0) || samples <= 0) {
    throw InputError("control_growth_probe: radius and samples must be positive");
  }
  check_tuple(cm, s, mesh);
  const int n = cm.n(), m = cm.m(), N = mesh.N;
  const double h = mesh.h();
  const double J_hat = cm.cost.value(endpoint_pair(s.x));
  const double gap_tol = 1e-13 * (1.0 + std::abs(J_hat));
  const Index dim = n + static_cast<Index>(N) * m;
  const Vec gs = control_gram(n, m, mesh).diagonal().cwiseSqrt();
  auto admissible = [&](const Vec& u) {
    if (!cm.k()) return true;
    return control_constraints_at(cm, u).first.maxCoeff() <= 0.0;
  };
  Rng rng(seed);
  GrowthProbe out;
  std::vector<GrowthSample> all;
  for (int k = 0; k < samples; ++k) {
    // Weak-norm ball of (x0, u); the control part is weighted 0, 1/3,
    // 2/3, 1 in turn so initial-state directions are covered.
    Vec dz = radius * (rng.unit_ball(dim).array() / gs.array()).matrix();
    dz.tail(dim - n) *= (k % 4) / 3.0;
    Vec x0 = row_vec(s.x, 0) + dz.head(n);
    Mat u = s.u;
    for (int i = 0; i < N; ++i) {
      const Vec d = dz.segment(u_offset(n, m, i), m);
      const Vec ui = row_vec(s.u, i);
      if (admissible(ui + d)) u.row(i) += d.transpose();
      else if (admissible(ui - d)) u.row(i) -= d.transpose();
    }
    auto r = detail::retract_endpoint(cm, x0, u, mesh);
    if (!r) {
      ++out.retraction_failures;
      continue;
    }
    std::tie(x0, u) = *r;
    bool ok = true;
    for (int i = 0; i < N && ok; ++i) ok = admissible(row_vec(u, i));
    const Mat x = propagate_state(cm.dyn, x0, u, mesh);
    const Vec q = endpoint_pair(x);
    if (cm.ke() && eval_stack(cm.endpoint_ineq, q).first.maxCoeff() > 1e-14) ok = false;
    if (!ok) continue;
    const double dx = norms::linf(x - s.x), du = norms::l2(u - s.u, h);
    GrowthSample g;
    g.point = Vec(dim);
    g.point.head(n) = x0;
    for (int i = 0; i < N; ++i) g.point.segment(u_offset(n, m, i), m) = row_vec(u, i);
    g.gap = cm.cost.value(q) - J_hat;
    g.dist_sq = dx * dx + du * du;
    if (g.dist_sq <= 0.0) continue;
    g.ratio = g.gap / g.dist_sq;
    ++out.accepted;
    out.fitted_c = std::min(out.fitted_c, g.ratio);
    if (g.gap < -gap_tol) out.violations.push_back(g);
    all.push_back(std::move(g));
  }
  if (out.retraction_failures * 2 > samples) {
    throw EvaluationError("control_growth_probe: retraction failed for more than half of the samples");
  }
  if (out.accepted == 0) throw EvaluationError("control_growth_probe: no admissible samples");
  out.superquadratic = detail::detect_superquadratic(all, radius);
  out.note = out.superquadratic ? "superquadratic" : "quadratic";
  return out;
}

}  // namespace subreg
