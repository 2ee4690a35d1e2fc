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
#include <vector>

#include "subreg/core.hpp"

namespace subreg {

/// Orthonormal basis (columns) of ker(B); B may have zero rows.
inline Mat nullspace(const Mat& B, int dim, double rel_tol = 1e-9) {
  if (B.rows() == 0) return Mat::Identity(dim, dim);
  Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * std::max(smax, 1.0)) ++rank;
  }
  return svd.matrixV().rightCols(dim - rank);
}

inline Index numerical_rank(const Mat& A, double rel_tol = 1e-9) {
  if (A.rows() == 0 || A.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(A);
  const Vec& sv = svd.singularValues();
  const double smax = sv(0);
  if (smax == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * smax) ++r;
  }
  return r;
}

/// Nullspace of B exploiting single-entry rows, which pin one coordinate to
/// zero; the remaining rows go through a dense SVD on the reduced space.
/// The returned basis is orthonormal.
inline Mat nullspace_structured(const Mat& B, int dim, double rel_tol = 1e-9) {
  std::vector<bool> pinned(dim, false);
  std::vector<Index> dense_rows;
  for (Index r = 0; r < B.rows(); ++r) {
    Index nnz = 0, where = -1;
    const double rmax = B.row(r).cwiseAbs().maxCoeff();
    for (Index c = 0; c < dim; ++c) {
      if (std::abs(B(r, c)) > rel_tol * rmax) {
        ++nnz;
        where = c;
      }
    }
    if (nnz == 1) {
      pinned[where] = true;
    } else if (nnz > 1) {
      dense_rows.push_back(r);
    }
  }
  std::vector<Index> free_cols;
  for (int c = 0; c < dim; ++c) {
    if (!pinned[c]) free_cols.push_back(c);
  }
  const Index nf = static_cast<Index>(free_cols.size());
  Mat E = Mat::Zero(dim, nf);
  for (Index j = 0; j < nf; ++j) E(free_cols[j], j) = 1.0;
  if (dense_rows.empty()) return E;
  Mat Br(static_cast<Index>(dense_rows.size()), nf);
  for (std::size_t i = 0; i < dense_rows.size(); ++i) {
    Br.row(static_cast<Index>(i)) = B.row(dense_rows[i]) * E;
  }
  return E * nullspace(Br, static_cast<int>(nf), rel_tol);
}

struct NnlsResult {
  Vec x;
  double residual = 0.0;
  int iterations = 0;
};

/// Lawson-Hanson active-set solver for min |A x - b| subject to x >= 0.
inline NnlsResult nnls(const Mat& A, const Vec& b, int max_iter = 0,
                       double tol = 0.0) {
  const Index n = A.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 30);
  if (tol <= 0.0) {
    tol = 10.0 * std::numeric_limits<double>::epsilon() *
          std::max<double>(1.0, A.cwiseAbs().maxCoeff()) *
          static_cast<double>(std::max(A.rows(), n));
  }
  Vec x = Vec::Zero(n);
  std::vector<bool> passive(n, false);
  Vec w = A.transpose() * (b - A * x);
  int it = 0;

  auto solve_passive = [&](Vec& z) {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j) {
      if (passive[j]) idx.push_back(j);
    }
    z = Vec::Zero(n);
    if (idx.empty()) return;
    Mat Ap(A.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Ap.col(static_cast<Index>(k)) = A.col(idx[k]);
    }
    Vec zp = Ap.completeOrthogonalDecomposition().solve(b);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Index>(k));
  };

  while (it < max_iter) {
    Index jmax = -1;
    double wmax = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > wmax) {
        wmax = w(j);
        jmax = j;
      }
    }
    if (jmax < 0) break;
    passive[jmax] = true;
    Vec z;
    while (true) {
      ++it;
      solve_passive(z);
      bool feasible = true;
      for (Index j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= 0.0) feasible = false;
      }
      if (feasible) break;
      double alpha = 1.0;
      for (Index j = 0; j < n; ++j) {
        if (passive[j] && z(j) <= 0.0) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      x += alpha * (z - x);
      for (Index j = 0; j < n; ++j) {
        if (passive[j] && std::abs(x(j)) <= tol) {
          passive[j] = false;
          x(j) = 0.0;
        }
      }
      if (it >= max_iter) break;
    }
    x = z;
    for (Index j = 0; j < n; ++j) {
      if (!passive[j]) x(j) = 0.0;
    }
    w = A.transpose() * (b - A * x);
  }
  return {x, (A * x - b).norm(), it};
}

/// Euclidean projection onto {v : A v <= 0} via Moreau decomposition:
/// v - A^T mu with mu = argmin_{mu >= 0} |A^T mu - v|.
inline Vec project_onto_cone(const Mat& A, const Vec& v) {
  if (A.rows() == 0) return v;
  NnlsResult r = nnls(A.transpose(), v);
  return v - A.transpose() * r.x;
}

/// Looks for lambda >= 0, sum lambda = 1 with P lambda = 0 (columns of P are
/// the vectors tested). Returns the witness when the vectors are positively
/// dependent.
inline std::optional<Vec> positive_dependence(const Mat& P, double tol = 1e-8) {
  const Index k = P.cols();
  if (k == 0) return std::nullopt;
  Vec scale(k);
  for (Index j = 0; j < k; ++j) {
    const double c = P.col(j).norm();
    scale(j) = c > 0.0 ? 1.0 / c : 1.0;
    if (c <= tol) {
      // A zero vector is positively dependent on its own.
      Vec w = Vec::Zero(k);
      w(j) = 1.0;
      return w;
    }
  }
  Mat A(P.rows() + 1, k);
  A.topRows(P.rows()) = P * scale.asDiagonal();
  A.row(P.rows()).setOnes();
  Vec b = Vec::Zero(P.rows() + 1);
  b(P.rows()) = 1.0;
  NnlsResult r = nnls(A, b);
  if (r.residual > tol) return std::nullopt;
  Vec lam = scale.asDiagonal() * r.x;
  return lam / lam.sum();
}

/// Smallest generalized eigenpair of (H, G) with G positive definite.
struct EigenPair {
  double value = kInf;
  Vec vector;
  Mat eigenspace;  // all vectors within tolerance of the smallest value
};

inline EigenPair smallest_generalized_eigen(const Mat& H, const Mat& G,
                                            double cluster_tol = 1e-9) {
  EigenPair out;
  if (H.rows() == 0) return out;
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(H, G);
  if (es.info() != Eigen::Success) {
    throw EvaluationError("generalized eigen solve failed (Gram not PD?)");
  }
  const Vec& ev = es.eigenvalues();
  out.value = ev(0);
  out.vector = es.eigenvectors().col(0);
  const double spread = cluster_tol * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Index cnt = 1;
  while (cnt < ev.size() && ev(cnt) - ev(0) <= spread) ++cnt;
  out.eigenspace = es.eigenvectors().leftCols(cnt);
  return out;
}

}  // namespace subreg
