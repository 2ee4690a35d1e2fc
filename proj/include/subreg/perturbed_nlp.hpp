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

#include <set>
#include <string>
#include <vector>

#include "subreg/perturbation.hpp"

namespace subreg {

struct NlpBranch {
  NlpTuple tuple;
  std::string signature;  // 'A' active, '-' inactive, per inequality
  double residual = 0.0;  // sup deviation from z
};

struct PerturbedNlpResult {
  std::vector<NlpBranch> branches;
  int attempts = 0;
};

/// Sup-norm deviation of s from solving z in F(s): stationarity and
/// equality blocks exactly, the inequality block as the inclusion
/// lambda >= 0, f - xi <= 0, lambda (f - xi) = 0.
inline double perturbed_kkt_deviation(const NlpProblem& p, const NlpTuple& s,
                                      const PerturbationNlp& z) {
  auto [fv, fJ] = eval_stack(p.inequalities, s.x);
  auto [gv, gJ] = eval_stack(p.equalities, s.x);
  RowVec grad = p.objective.eval(s.x).gradient;
  if (p.m()) grad += s.lambda * fJ;
  if (p.neq()) grad += s.ystar * gJ;
  double dev = (grad - z.zeta).cwiseAbs().maxCoeff();
  if (p.neq()) dev = std::max(dev, (gv - z.eta).cwiseAbs().maxCoeff());
  for (int i = 0; i < p.m(); ++i) {
    const double c = fv(i) - z.xi(i);
    dev = std::max({dev, -s.lambda(i), c, std::min(s.lambda(i), std::abs(c))});
  }
  return dev;
}

namespace detail {

// Damped Newton on the equations of one active-set guess, with a
// Levenberg-Marquardt step when the Jacobian is singular.
inline std::optional<NlpTuple> newton_active_set(const NlpProblem& p,
                                                 const std::vector<bool>& act,
                                                 const PerturbationNlp& z,
                                                 NlpTuple s, double tol) {
  const int n = p.n, m = p.m(), e = p.neq();
  std::vector<int> S;
  for (int i = 0; i < m; ++i) {
    if (act[static_cast<std::size_t>(i)]) S.push_back(i);
    else s.lambda(i) = 0.0;
  }
  const int a = static_cast<int>(S.size());
  const int dim = n + a + e;
  auto residual = [&](const NlpTuple& t, Mat* J) {
    auto [fv, fJ] = eval_stack(p.inequalities, t.x);
    auto [gv, gJ] = eval_stack(p.equalities, t.x);
    RowVec grad = p.objective.eval(t.x).gradient;
    if (m) grad += t.lambda * fJ;
    if (e) grad += t.ystar * gJ;
    Vec F(dim);
    F.head(n) = (grad - z.zeta).transpose();
    for (int r = 0; r < a; ++r) F(n + r) = fv(S[r]) - z.xi(S[r]);
    if (e) F.tail(e) = gv - z.eta;
    if (J) {
      J->setZero(dim, dim);
      Mat H = p.objective.eval(t.x).hessian;
      if (m) H += weighted_hessian(p.inequalities, t.lambda, t.x);
      if (e) H += weighted_hessian(p.equalities, t.ystar, t.x);
      J->topLeftCorner(n, n) = H;
      for (int r = 0; r < a; ++r) {
        J->block(0, n + r, n, 1) = fJ.row(S[r]).transpose();
        J->block(n + r, 0, 1, n) = fJ.row(S[r]);
      }
      if (e) {
        J->block(0, n + a, n, e) = gJ.transpose();
        J->block(n + a, 0, e, n) = gJ;
      }
    }
    return F;
  };
  auto step = [&](NlpTuple t, const Vec& d, double tau) {
    t.x += tau * d.head(n);
    for (int r = 0; r < a; ++r) t.lambda(S[r]) += tau * d(n + r);
    if (e) t.ystar += tau * d.tail(e).transpose();
    return t;
  };
  Mat J;
  for (int it = 0; it < 60; ++it) {
    const Vec F = residual(s, &J);
    const double f0 = F.squaredNorm();
    if (!std::isfinite(f0)) return std::nullopt;
    Eigen::ColPivHouseholderQR<Mat> qr(J);
    if (F.cwiseAbs().maxCoeff() <= tol) {
      // One polishing step when the Jacobian is regular.
      if (qr.rank() == dim) {
        const NlpTuple cand = step(s, qr.solve(-F), 1.0);
        if (residual(cand, nullptr).squaredNorm() <= f0) return cand;
      }
      return s;
    }
    Vec d;
    if (qr.rank() == dim) {
      d = qr.solve(-F);
    } else {
      const double mu = 1e-8 * (1.0 + J.squaredNorm());
      d = (J.transpose() * J + mu * Mat::Identity(dim, dim)).ldlt().solve(-J.transpose() * F);
    }
    if (!d.allFinite() || d.norm() == 0.0) return std::nullopt;
    double tau = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, tau *= 0.5) {
      const NlpTuple cand = step(s, d, tau);
      const double f1 = residual(cand, nullptr).squaredNorm();
      if (std::isfinite(f1) && f1 < (1.0 - 1e-4 * tau) * f0) {
        s = cand;
        moved = true;
        break;
      }
    }
    if (!moved) {
      const Vec F1 = residual(s, nullptr);
      return F1.cwiseAbs().maxCoeff() <= tol ? std::optional<NlpTuple>(s) : std::nullopt;
    }
  }
  const Vec F = residual(s, nullptr);
  return F.cwiseAbs().maxCoeff() <= tol ? std::optional<NlpTuple>(s) : std::nullopt;
}

inline std::string signature(const std::vector<bool>& act) {
  std::string sig;
  for (bool b : act) sig.push_back(b ? 'A' : '-');
  return sig;
}

}  // namespace detail

/// All solutions of z in F(s) with |x - x_hat| <= radius found by Newton
/// over the reference active set and its single flips, started from x_hat
/// and from 2n axis offsets of size radius / 2.
inline PerturbedNlpResult solve_perturbed_kkt(const NlpProblem& p,
                                              const NlpTuple& ref,
                                              const PerturbationNlp& z,
                                              double radius,
                                              const Tolerances& tol = {}) {
  require_dim(z.xi.size(), p.m(), "perturbation xi");
  require_dim(z.eta.size(), p.neq(), "perturbation eta");
  require_dim(z.zeta.size(), p.n, "perturbation zeta");
  if (!(radius > 0.0)) throw InputError("solve_perturbed_kkt: radius must be positive");
  const ActiveSets as = active_sets(p, ref, tol);
  std::vector<bool> base(static_cast<std::size_t>(p.m()), false);
  for (int i : as.I) base[static_cast<std::size_t>(i)] = true;
  std::vector<std::vector<bool>> guesses{base};
  for (int i = 0; i < p.m(); ++i) {
    auto g = base;
    g[static_cast<std::size_t>(i)] = !g[static_cast<std::size_t>(i)];
    guesses.push_back(g);
  }
  std::vector<Vec> starts{ref.x};
  for (int k = 0; k < p.n; ++k) {
    for (double sgn : {1.0, -1.0}) {
      Vec x = ref.x;
      x(k) += sgn * 0.5 * radius;
      starts.push_back(x);
    }
  }
  const double newton_tol = 1e-12 * (1.0 + ref.x.cwiseAbs().maxCoeff());
  PerturbedNlpResult out;
  for (const auto& g : guesses) {
    for (const Vec& x0 : starts) {
      ++out.attempts;
      NlpTuple t{x0, ref.lambda, ref.ystar};
      auto sol = detail::newton_active_set(p, g, z, t, newton_tol);
      if (!sol) continue;
      for (int i = 0; i < p.m(); ++i) {
        if (sol->lambda(i) < 0.0 && sol->lambda(i) > -1e-12) sol->lambda(i) = 0.0;
      }
      if ((sol->x - ref.x).norm() > radius) continue;
      const double dev = perturbed_kkt_deviation(p, *sol, z);
      if (dev > 1e-10) continue;
      bool dup = false;
      for (const auto& b : out.branches) {
        const double d = (b.tuple.x - sol->x).norm() +
                         (b.tuple.lambda - sol->lambda).norm() +
                         (b.tuple.ystar - sol->ystar).norm();
        if (d <= 1e-8 * (1.0 + sol->x.norm())) dup = true;
      }
      if (!dup) out.branches.push_back({*sol, detail::signature(g), dev});
    }
  }
  return out;
}

/// Weak distance |dx|' + |dlambda| + |dy*| between tuples.
inline double tuple_distance(const NlpTuple& a, const NlpTuple& b, const Mat& gram) {
  const Vec dx = a.x - b.x;
  return std::sqrt(std::max(0.0, dx.dot(gram * dx))) + (a.lambda - b.lambda).norm() +
         (a.ystar - b.ystar).norm();
}

}  // namespace subreg
