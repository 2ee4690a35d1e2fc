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

#include "subreg/control_model.hpp"
#include "subreg/nlp_analysis.hpp"

namespace subreg {

/// z = (xi, eta, zeta) for the NLP system.
struct PerturbationNlp {
  Vec xi;      // m
  Vec eta;     // neq
  RowVec zeta;  // n
};

/// |xi| + |eta| + |zeta|'' with the dual weak norm from `gram`.
inline double perturbation_norm(const PerturbationNlp& z, const Mat& gram) {
  return z.xi.norm() + z.eta.norm() + dual_weak_norm(z.zeta, gram);
}

/// Which blocks of z are perturbed, and the weak-norm Gram.
struct NlpPerturbationSpec {
  int n = 0;
  int m = 0;
  int neq = 0;
  bool xi = true;
  bool eta = true;
  bool zeta = true;
  Mat gram;  // empty selects identity

  static NlpPerturbationSpec of(const NlpProblem& p) {
    NlpPerturbationSpec s;
    s.n = p.n;
    s.m = p.m();
    s.neq = p.neq();
    return s;
  }
  Mat weak_gram() const { return gram.size() ? gram : Mat(Mat::Identity(n, n)); }
};

/// Control-system perturbation; unused blocks are empty. For the
/// control-constrained system this is (nu, pi, rho, xi = dyn, eta = ctrl),
/// for the Mayer system (pi, rho, nu, eta = dyn, mu, xi = endpoint).
struct PerturbationControl {
  RowVec nu;     // 2n
  Mat pi;        // N x n
  Mat rho;       // N x m
  Mat dyn;       // N x n
  Mat ctrl;      // N x k
  Vec mu;        // s
  Vec endpoint;  // ke

  static PerturbationControl zero(const ControlModel& cm, const Mesh& mesh) {
    const int N = mesh.N;
    return {RowVec::Zero(2 * cm.n()), Mat::Zero(N, cm.n()), Mat::Zero(N, cm.m()),
            Mat::Zero(N, cm.n()),     Mat::Zero(N, cm.k()), Vec::Zero(cm.s()),
            Vec::Zero(cm.ke())};
  }
};

using PerturbationOcp = PerturbationControl;

/// |nu| + |pi|_1 + |rho|_2 + |dyn|_1 + |ctrl|_2 + |mu| + |endpoint|.
inline double perturbation_norm(const PerturbationControl& w, const Mesh& mesh) {
  const double h = mesh.h();
  return w.nu.norm() + norms::l1(w.pi, h) + norms::l2(w.rho, h) +
         norms::l1(w.dyn, h) + norms::l2(w.ctrl, h) + w.mu.norm() +
         w.endpoint.norm();
}

/// Budget form with sup norms on rho and ctrl.
inline double perturbation_budget(const PerturbationControl& w, const Mesh& mesh) {
  const double h = mesh.h();
  return w.nu.norm() + norms::l1(w.pi, h) + norms::linf(w.rho) +
         norms::l1(w.dyn, h) + norms::linf(w.ctrl) + w.mu.norm() +
         w.endpoint.norm();
}

namespace detail {

inline Vec ball_sample(Rng& rng, Index n) {
  return n ? rng.unit_ball(n) : Vec();
}

inline Mat box_sample(Rng& rng, Index r, Index c) {
  return Mat::NullaryExpr(r, c, [&] { return rng.uniform(-1.0, 1.0); });
}

}  // namespace detail

/// Block directions from the unit ball of each block norm (xi: max-norm),
/// random block weights, then scaled so the composite norm equals
/// `magnitude`. The same seed gives the same direction at every magnitude.
inline PerturbationNlp sample_perturbation(const NlpPerturbationSpec& spec,
                                           double magnitude, std::uint64_t seed) {
  if (magnitude < 0.0) throw InputError("sample_perturbation: magnitude must be >= 0");
  Rng rng(seed);
  PerturbationNlp z{Vec::Zero(spec.m), Vec::Zero(spec.neq), RowVec::Zero(spec.n)};
  const Vec wts = Vec::NullaryExpr(3, [&] { return rng.uniform(0.2, 1.0); });
  if (spec.xi && spec.m) z.xi = wts(0) * detail::box_sample(rng, spec.m, 1);
  if (spec.eta && spec.neq) z.eta = wts(1) * detail::ball_sample(rng, spec.neq);
  if (spec.zeta && spec.n) z.zeta = wts(2) * detail::ball_sample(rng, spec.n).transpose();
  const double nz = perturbation_norm(z, spec.weak_gram());
  if (magnitude == 0.0 || nz == 0.0) {
    return {Vec::Zero(spec.m), Vec::Zero(spec.neq), RowVec::Zero(spec.n)};
  }
  const double s = magnitude / nz;
  z.xi *= s;
  z.eta *= s;
  z.zeta *= s;
  return z;
}

/// Which control blocks are perturbed.
struct ControlPerturbationSpec {
  bool nu = true;
  bool pi = true;
  bool rho = true;
  bool dyn = true;
  bool ctrl = true;
  bool mu = true;
  bool endpoint = true;
};

/// pi and dyn directions are L1-normalized, rho and ctrl drawn from the sup
/// ball, nu, mu and endpoint from Euclidean balls; scaled so the composite
/// norm equals `magnitude`.
inline PerturbationControl sample_perturbation(const ControlModel& cm,
                                               const Mesh& mesh,
                                               const ControlPerturbationSpec& spec,
                                               double magnitude, std::uint64_t seed) {
  if (magnitude < 0.0) throw InputError("sample_perturbation: magnitude must be >= 0");
  PerturbationControl w = PerturbationControl::zero(cm, mesh);
  if (magnitude == 0.0) return w;
  Rng rng(seed);
  const int N = mesh.N, n = cm.n();
  const double h = mesh.h();
  const Vec wts = Vec::NullaryExpr(7, [&] { return rng.uniform(0.2, 1.0); });
  auto l1_dir = [&](Index cols) {
    Mat d = Mat::NullaryExpr(N, cols, [&] { return rng.normal(); });
    const double s = norms::l1(d, h);
    return s > 0.0 ? Mat(d / s) : d;
  };
  if (spec.nu) w.nu = wts(0) * detail::ball_sample(rng, 2 * n).transpose();
  if (spec.pi) w.pi = wts(1) * l1_dir(n);
  if (spec.rho) w.rho = wts(2) * detail::box_sample(rng, N, cm.m());
  if (spec.dyn) w.dyn = wts(3) * l1_dir(n);
  if (spec.ctrl && cm.k()) w.ctrl = wts(4) * detail::box_sample(rng, N, cm.k());
  if (spec.mu && cm.s()) w.mu = wts(5) * detail::ball_sample(rng, cm.s());
  if (spec.endpoint && cm.ke()) w.endpoint = wts(6) * detail::ball_sample(rng, cm.ke());
  const double nz = perturbation_norm(w, mesh);
  if (nz == 0.0) return PerturbationControl::zero(cm, mesh);
  const double s = magnitude / nz;
  w.nu *= s;
  w.pi *= s;
  w.rho *= s;
  w.dyn *= s;
  w.ctrl *= s;
  w.mu *= s;
  w.endpoint *= s;
  return w;
}

}  // namespace subreg
