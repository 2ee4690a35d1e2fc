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
#include <vector>

#include "subreg/problems.hpp"

namespace subreg {

/// Uniform grid t_i = t0 + i h, i = 0..N.
struct Mesh {
  int N = 0;
  double t0 = 0.0;
  double t1 = 1.0;

  static Mesh uniform(int N, double t0 = 0.0, double t1 = 1.0) {
    if (N < 2) throw InputError("mesh: N must be at least 2");
    if (!(t1 > t0)) throw InputError("mesh: t1 must exceed t0");
    return {N, t0, t1};
  }

  double h() const { return (t1 - t0) / N; }
  double t(int i) const { return t0 + (t1 - t0) * i / N; }
};

/// State samples x (N+1 rows) and piecewise constant controls u (N rows).
struct DiscreteTrajectory {
  Mat x;
  Mat u;
};

/// Adjoint samples p (N+1 rows); `defect` is |-p_0 - F'_{x0}(q)|.
struct AdjointPath {
  Mat p;
  double defect = 0.0;
};

/// Dynamics f(x, u) with node-wise derivative helpers.
class Dynamics {
 public:
  Dynamics(int n, int m, std::vector<ScalarField> f)
      : n_(n), m_(m), f_(std::move(f)) {
    require_dim(static_cast<Index>(f_.size()), n, "dynamics count");
    for (const auto& fi : f_) require_dim(fi.dim(), n + m, "dynamics field");
  }

  int n() const { return n_; }
  int m() const { return m_; }
  const std::vector<ScalarField>& fields() const { return f_; }

  Vec join(const Vec& x, const Vec& u) const {
    Vec w(n_ + m_);
    w << x, u;
    return w;
  }

  Vec value(const Vec& x, const Vec& u) const {
    const Vec w = join(x, u);
    Vec v(n_);
    for (int k = 0; k < n_; ++k) v(k) = f_[k].value(w);
    return v;
  }

  /// (value, n x (n+m) Jacobian).
  std::pair<Vec, Mat> linearize(const Vec& x, const Vec& u) const {
    return eval_stack(f_, join(x, u));
  }

  /// Hessian of p f(x, u) over w = (x, u).
  Mat weighted_hessian(const RowVec& p, const Vec& x, const Vec& u) const {
    return subreg::weighted_hessian(f_, p, join(x, u));
  }

 private:
  int n_;
  int m_;
  std::vector<ScalarField> f_;
};

inline Vec row_vec(const Mat& M, Index i) { return M.row(i).transpose(); }

/// Explicit Euler: x_{i+1} = x_i + h f(x_i, u_i).
inline Mat propagate_state(const Dynamics& dyn, const Vec& x0, const Mat& u,
                           const Mesh& mesh) {
  require_dim(x0.size(), dyn.n(), "initial state");
  require_dim(u.rows(), mesh.N, "control samples");
  require_dim(u.cols(), dyn.m(), "control dimension");
  const double h = mesh.h();
  Mat x(mesh.N + 1, dyn.n());
  x.row(0) = x0.transpose();
  for (int i = 0; i < mesh.N; ++i) {
    x.row(i + 1) =
        x.row(i) + h * dyn.value(row_vec(x, i), row_vec(u, i)).transpose();
    if (!x.row(i + 1).allFinite()) {
      throw EvaluationError("propagate_state: non-finite state at node " +
                            std::to_string(i + 1));
    }
  }
  return x;
}

/// Discrete adjoint of the Euler scheme: p_N = F'_{x1},
/// p_i = p_{i+1} + h p_{i+1} f_x(x_i, u_i).
inline AdjointPath solve_adjoint(const Dynamics& dyn, const DiscreteTrajectory& w,
                                 const Mesh& mesh, const RowVec& endpoint_grad) {
  const int n = dyn.n();
  require_dim(endpoint_grad.size(), 2 * n, "endpoint gradient");
  require_dim(w.x.rows(), mesh.N + 1, "state samples");
  const double h = mesh.h();
  AdjointPath a;
  a.p = Mat(mesh.N + 1, n);
  a.p.row(mesh.N) = endpoint_grad.tail(n);
  for (int i = mesh.N - 1; i >= 0; --i) {
    const Mat J = dyn.linearize(row_vec(w.x, i), row_vec(w.u, i)).second;
    a.p.row(i) = a.p.row(i + 1) + h * a.p.row(i + 1) * J.leftCols(n);
  }
  a.defect = (-a.p.row(0) - endpoint_grad.head(n)).norm();
  return a;
}

/// Discrete function norms on node/interval samples (rows are time samples,
/// pointwise magnitude is Euclidean).
namespace norms {

inline double l1(const Mat& v, double h) {
  return v.size() ? h * v.rowwise().norm().sum() : 0.0;
}
inline double l2(const Mat& v, double h) {
  return v.size() ? std::sqrt(h * v.rowwise().squaredNorm().sum()) : 0.0;
}
inline double linf(const Mat& v) {
  return v.size() ? v.rowwise().norm().maxCoeff() : 0.0;
}
/// |x_0| + sum |x_{i+1} - x_i|.
inline double w11(const Mat& x) {
  if (x.rows() == 0) return 0.0;
  double s = x.row(0).norm();
  for (Index i = 0; i + 1 < x.rows(); ++i) s += (x.row(i + 1) - x.row(i)).norm();
  return s;
}
/// |x|_{1,1} + |u|_inf.
inline double strong(const Mat& x, const Mat& u) { return w11(x) + linf(u); }
/// |x|_inf + |u|_2.
inline double weak(const Mat& x, const Mat& u, double h) {
  return linf(x) + l2(u, h);
}

}  // namespace norms

/// Linearized dynamics eliminated: rows i*n..i*n+n-1 hold Phi_i with
/// dx_i = Phi_i (dx_0, du_0, ..., du_{N-1}).
inline Mat state_sensitivity(const Dynamics& dyn, const DiscreteTrajectory& w,
                             const Mesh& mesh) {
  const int n = dyn.n(), m = dyn.m(), N = mesh.N;
  const double h = mesh.h();
  const Index d = n + static_cast<Index>(N) * m;
  Mat T = Mat::Zero(static_cast<Index>(N + 1) * n, d);
  T.block(0, 0, n, n).setIdentity();
  for (int i = 0; i < N; ++i) {
    const Mat J = dyn.linearize(row_vec(w.x, i), row_vec(w.u, i)).second;
    const Mat A = Mat::Identity(n, n) + h * J.leftCols(n);
    // Only the first n + i m columns of Phi_i can be nonzero.
    const Index live = n + static_cast<Index>(i) * m;
    T.block(static_cast<Index>(i + 1) * n, 0, n, live) =
        A * T.block(static_cast<Index>(i) * n, 0, n, live);
    T.block(static_cast<Index>(i + 1) * n, live, n, m) = h * J.rightCols(m);
  }
  return T;
}

/// Column offset of u_i in the (x0, u) parametrization.
inline Index u_offset(int n, int m, int i) {
  return n + static_cast<Index>(i) * m;
}

/// Gram of |x0|^2 + |u|_2^2 on (x0, u).
inline Mat control_gram(int n, int m, const Mesh& mesh) {
  Vec d = Vec::Constant(n + static_cast<Index>(mesh.N) * m, mesh.h());
  d.head(n).setOnes();
  return d.asDiagonal();
}

}  // namespace subreg
