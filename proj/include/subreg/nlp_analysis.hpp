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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "subreg/cone.hpp"
#include "subreg/problems.hpp"

namespace subreg {

struct ActiveSets {
  std::vector<int> I;   // f_i(x) = 0
  std::vector<int> I0;  // active with zero multiplier
  std::vector<int> I1;  // active with positive multiplier
};

/// Scale-aware activity tolerance: t_act * (1 + |f(x)|_inf).
inline double activity_tolerance(const Vec& fvals, double t_act) {
  const double s = fvals.size() ? fvals.cwiseAbs().maxCoeff() : 0.0;
  return t_act * (1.0 + s);
}

inline ActiveSets active_sets(const NlpProblem& p, const NlpTuple& s,
                              const Tolerances& tol = {}) {
  require_dim(s.x.size(), p.n, "tuple x");
  require_dim(s.lambda.size(), p.m(), "tuple lambda");
  auto [fv, fJ] = eval_stack(p.inequalities, s.x);
  auto [gv, gJ] = eval_stack(p.equalities, s.x);
  const double ta = activity_tolerance(fv, tol.act);
  for (int j = 0; j < p.neq(); ++j) {
    if (std::abs(gv(j)) > ta) {
      throw PreconditionError("infeasible point: equality g" +
                              std::to_string(j + 1) + " = " +
                              std::to_string(gv(j)));
    }
  }
  ActiveSets a;
  for (int i = 0; i < p.m(); ++i) {
    if (fv(i) > ta) {
      throw PreconditionError("infeasible point: inequality f" +
                              std::to_string(i + 1) + " = " +
                              std::to_string(fv(i)) + " > 0");
    }
    if (std::abs(fv(i)) <= ta) {
      a.I.push_back(i);
      (s.lambda(i) > tol.mul ? a.I1 : a.I0).push_back(i);
    }
  }
  return a;
}

/// Residual z = (xi, eta, zeta) of the KKT inclusion z in F(x, lambda, y*).
struct KktResidualNlp {
  Vec xi;
  Vec eta;
  RowVec zeta;
  double norm_Z = 0.0;
};

/// Dual weak norm |zeta|'' = sqrt(zeta G^{-1} zeta^T).
inline double dual_weak_norm(const RowVec& zeta, const Mat& gram) {
  if (zeta.size() == 0) return 0.0;
  const Vec sol = gram.ldlt().solve(zeta.transpose());
  return std::sqrt(std::max(0.0, zeta.dot(sol.transpose())));
}

inline KktResidualNlp kkt_residual(const NlpProblem& p, const NlpTuple& s,
                                   const Mat& gram = Mat()) {
  require_dim(s.x.size(), p.n, "tuple x");
  require_dim(s.lambda.size(), p.m(), "tuple lambda");
  require_dim(s.ystar.size(), p.neq(), "tuple ystar");
  for (int i = 0; i < p.m(); ++i) {
    if (s.lambda(i) < 0.0) {
      throw PreconditionError("empty normal cone: lambda_" +
                              std::to_string(i + 1) + " < 0");
    }
  }
  const Mat G = gram.size() ? gram : Mat(Mat::Identity(p.n, p.n));
  KktResidualNlp r;
  auto [fv, fJ] = eval_stack(p.inequalities, s.x);
  auto [gv, gJ] = eval_stack(p.equalities, s.x);
  r.xi = Vec(p.m());
  for (int i = 0; i < p.m(); ++i) {
    r.xi(i) = s.lambda(i) > 0.0 ? fv(i) : std::max(fv(i), 0.0);
  }
  r.eta = gv;
  r.zeta = p.objective.eval(s.x).gradient;
  if (p.m()) r.zeta += s.lambda * fJ;
  if (p.neq()) r.zeta += s.ystar * gJ;
  r.norm_Z = r.xi.norm() + r.eta.norm() + dual_weak_norm(r.zeta, G);
  return r;
}

struct QualificationResult {
  bool holds = false;
  std::optional<Vec> witness;  // violating multiplier combination
  Index rank = 0;              // rank of the equality Jacobian
  bool footnote_direction = false;
  std::string message;
};

namespace detail {

inline Mat active_gradients(const NlpProblem& p, const Vec& x,
                            const std::vector<int>& idx) {
  Mat G(static_cast<Index>(idx.size()), p.n);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    G.row(static_cast<Index>(r)) = p.inequalities[idx[r]].eval(x).gradient;
  }
  return G;
}

}  // namespace detail

/// Mangasarian-Fromovitz: g'(x) onto, and the active f_i' positively
/// independent on ker g'(x).
inline QualificationResult check_mfcq(const NlpProblem& p, const Vec& x,
                                      const Tolerances& tol = {}) {
  require_dim(x.size(), p.n, "check_mfcq");
  QualificationResult res;
  auto [fv, fJ] = eval_stack(p.inequalities, x);
  auto [gv, gJ] = eval_stack(p.equalities, x);
  const double ta = activity_tolerance(fv, tol.act);
  for (int j = 0; j < p.neq(); ++j) {
    if (std::abs(gv(j)) > ta) throw PreconditionError("check_mfcq: x infeasible");
  }
  std::vector<int> I;
  for (int i = 0; i < p.m(); ++i) {
    if (fv(i) > ta) throw PreconditionError("check_mfcq: x infeasible");
    if (std::abs(fv(i)) <= ta) I.push_back(i);
  }
  res.rank = numerical_rank(gJ, tol.rank);
  if (res.rank < p.neq()) {
    res.message = "equality Jacobian rank " + std::to_string(res.rank) +
                  " < " + std::to_string(p.neq()) + " (not surjective)";
    return res;
  }
  const Mat Nk = nullspace(gJ, p.n, tol.rank);
  // Projected active gradients as columns.
  const Mat P = (detail::active_gradients(p, x, I) * Nk).transpose();
  if (auto w = positive_dependence(P)) {
    Vec full = Vec::Zero(p.m());
    for (std::size_t r = 0; r < I.size(); ++r) full(I[r]) = (*w)(static_cast<Index>(r));
    res.witness = full;
    res.message = "active gradients positively dependent on ker g'";
    return res;
  }
  res.holds = true;
  // Footnote form: -(min-norm point of conv{p_i}) is a strict descent
  // direction for all active constraints inside ker g'.
  if (P.cols() == 0) {
    res.footnote_direction = true;
  } else {
    const double w = 1e3 * std::max(1.0, P.cwiseAbs().maxCoeff());
    Mat A(P.rows() + 1, P.cols());
    A.topRows(P.rows()) = P;
    A.row(P.rows()).setConstant(w);
    Vec b = Vec::Zero(P.rows() + 1);
    b(P.rows()) = w;
    const Vec lam = nnls(A, b).x;
    const Vec c = P * (lam / std::max(lam.sum(), 1e-300));
    const Vec xi = -(Nk * c);
    const Mat FI = detail::active_gradients(p, x, I);
    res.footnote_direction = xi.norm() > 0.0 && (FI * xi).maxCoeff() < 0.0;
  }
  res.message = "MFCQ holds";
  return res;
}

/// Strict MFCQ: lambda_i >= 0 on I0 and sum_{I} lambda_i f_i' + y* g' = 0
/// force lambda = 0, y* = 0. Witness is (lambda over I, y*).
inline QualificationResult check_strict_mfcq(const NlpProblem& p,
                                             const NlpTuple& s,
                                             const Tolerances& tol = {}) {
  const ActiveSets a = active_sets(p, s, tol);
  QualificationResult res;
  auto [gv, gJ] = eval_stack(p.equalities, s.x);
  res.rank = numerical_rank(gJ, tol.rank);
  const Mat F0 = detail::active_gradients(p, s.x, a.I0);
  const Mat F1 = detail::active_gradients(p, s.x, a.I1);
  // Sign-free columns: I1 gradients and equality gradients.
  Mat Free(p.n, F1.rows() + gJ.rows());
  Free << F1.transpose(), gJ.transpose();
  auto pack = [&](const Vec& l0, const Vec& free_coef) {
    Vec w = Vec::Zero(p.m() + p.neq());
    for (std::size_t r = 0; r < a.I0.size(); ++r) w(a.I0[r]) = l0(static_cast<Index>(r));
    for (std::size_t r = 0; r < a.I1.size(); ++r) {
      w(a.I1[r]) = free_coef(static_cast<Index>(r));
    }
    for (Index j = 0; j < gJ.rows(); ++j) {
      w(p.m() + j) = free_coef(static_cast<Index>(a.I1.size()) + j);
    }
    return w;
  };
  if (Free.cols() > 0 && numerical_rank(Free, tol.rank) < Free.cols()) {
    const Mat K = nullspace(Free, static_cast<int>(Free.cols()), tol.rank);
    res.witness = pack(Vec::Zero(static_cast<Index>(a.I0.size())), K.col(0));
    res.message = "sign-free gradients (I1 and equalities) linearly dependent";
    return res;
  }
  // Project I0 gradients onto the orthogonal complement of range(Free).
  Mat Proj = Mat::Identity(p.n, p.n);
  if (Free.cols() > 0) {
    const Mat Q = Free.householderQr().householderQ() *
                  Mat::Identity(p.n, Free.cols());
    Proj -= Q * Q.transpose();
  }
  const Mat P = Proj * F0.transpose();
  if (auto l0 = positive_dependence(P)) {
    Vec free_coef = Vec::Zero(Free.cols());
    if (Free.cols() > 0) {
      free_coef = Free.completeOrthogonalDecomposition().solve(
          -(F0.transpose() * (*l0)));
    }
    res.witness = pack(*l0, free_coef);
    res.message = "nonzero multiplier combination with lambda_I0 >= 0";
    return res;
  }
  res.holds = true;
  res.message =
      "strict MFCQ holds; the multipliers are the unique KKT multipliers for x";
  return res;
}

/// K = {v : phi'(x) v <= 0, f_i'(x) v <= 0 (i in I), g'(x) v = 0}.
inline PolyhedralCone critical_cone_nlp(const NlpProblem& p, const NlpTuple& s,
                                        const ActiveSets& a) {
  Mat A(1 + static_cast<Index>(a.I.size()), p.n);
  A.row(0) = p.objective.eval(s.x).gradient;
  A.bottomRows(static_cast<Index>(a.I.size())) =
      detail::active_gradients(p, s.x, a.I);
  auto [gv, gJ] = eval_stack(p.equalities, s.x);
  return {A, gJ, p.n};
}

/// Omega = Hess phi + sum lambda_i Hess f_i + sum y*_j Hess g_j.
inline QuadraticFormRep quadratic_form_nlp(const NlpProblem& p,
                                           const NlpTuple& s,
                                           const Mat& gram = Mat()) {
  Mat H = p.objective.eval(s.x).hessian;
  if (p.m()) H += weighted_hessian(p.inequalities, s.lambda, s.x);
  if (p.neq()) H += weighted_hessian(p.equalities, s.ystar, s.x);
  return {H, gram.size() ? gram : Mat(Mat::Identity(p.n, p.n))};
}

struct GrowthSample {
  Vec point;
  double gap = 0.0;       // phi(x) - phi(x_hat)
  double dist_sq = 0.0;   // (|x - x_hat|')^2
  double ratio = 0.0;
};

struct GrowthProbe {
  double fitted_c = kInf;
  std::vector<GrowthSample> violations;
  int accepted = 0;
  int retraction_failures = 0;
  bool superquadratic = false;
  std::string note;
};

namespace detail {

// Min-norm Newton projection onto {g = 0}.
inline std::optional<Vec> retract_equalities(const std::vector<ScalarField>& g,
                                             Vec x, int max_iter = 30) {
  if (g.empty()) return x;
  for (int it = 0; it < max_iter; ++it) {
    auto [gv, gJ] = eval_stack(g, x);
    if (gv.norm() <= 1e-12 * (1.0 + x.norm())) return x;
    const Vec step = gJ.completeOrthogonalDecomposition().solve(gv);
    if (!step.allFinite()) return std::nullopt;
    x -= step;
  }
  auto [gv, gJ] = eval_stack(g, x);
  if (gv.norm() <= 1e-10 * (1.0 + x.norm())) return x;
  return std::nullopt;
}

// Splits samples at half the radius; growth whose ratio keeps increasing
// towards the reference point is faster than quadratic.
inline bool detect_superquadratic(const std::vector<GrowthSample>& s,
                                  double radius) {
  double inner = kInf, outer = kInf;
  int ni = 0, no = 0;
  for (const auto& g : s) {
    if (std::sqrt(g.dist_sq) < 0.5 * radius) {
      inner = std::min(inner, g.ratio);
      ++ni;
    } else {
      outer = std::min(outer, g.ratio);
      ++no;
    }
  }
  return ni > 0 && no > 0 && outer > 0.0 && inner >= 1.5 * outer;
}

}  // namespace detail

/// Samples admissible points within `radius` of x_hat and fits the growth
/// constant c in phi(x) - phi(x_hat) >= c (|x - x_hat|')^2.
inline GrowthProbe quadratic_growth_probe(const NlpProblem& p,
                                          const NlpTuple& s, double radius,
                                          int samples, std::uint64_t seed,
                                          const Mat& gram = Mat()) {
  if (!(radius > 0.0) || samples <= 0) {
    throw InputError("quadratic_growth_probe: radius and samples must be positive");
  }
  const Mat G = gram.size() ? gram : Mat(Mat::Identity(p.n, p.n));
  const double phi_hat = p.objective.value(s.x);
  const double gap_tol = 1e-13 * (1.0 + std::abs(phi_hat));
  Rng rng(seed);
  GrowthProbe out;
  std::vector<GrowthSample> all;
  for (int k = 0; k < samples; ++k) {
    Vec x = s.x + radius * rng.unit_ball(p.n);
    auto r = detail::retract_equalities(p.equalities, x);
    if (!r || (*r - s.x).norm() > radius) {
      ++out.retraction_failures;
      continue;
    }
    x = *r;
    bool feasible = true;
    for (const auto& f : p.inequalities) {
      if (f.value(x) > 1e-14) feasible = false;
    }
    if (!feasible) continue;
    const Vec d = x - s.x;
    GrowthSample g{x, p.objective.value(x) - phi_hat, d.dot(G * d), 0.0};
    if (g.dist_sq <= 0.0) continue;
    g.ratio = g.gap / g.dist_sq;
    ++out.accepted;
    out.fitted_c = std::min(out.fitted_c, g.ratio);
    if (g.gap < -gap_tol) out.violations.push_back(g);
    all.push_back(std::move(g));
  }
  if (out.retraction_failures * 2 > samples) {
    throw EvaluationError(
        "quadratic_growth_probe: retraction failed for more than half of the "
        "samples; use a smaller radius");
  }
  if (out.accepted == 0) {
    throw EvaluationError("quadratic_growth_probe: no admissible samples");
  }
  out.superquadratic = detail::detect_superquadratic(all, radius);
  out.note = out.superquadratic ? "superquadratic" : "quadratic";
  return out;
}

}  // namespace subreg
