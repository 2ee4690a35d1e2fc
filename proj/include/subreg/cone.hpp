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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "subreg/linalg.hpp"

namespace subreg {

/// {v : A v <= 0, B v = 0} in R^dim.
struct PolyhedralCone {
  Mat A;
  Mat B;
  int dim = 0;

  PolyhedralCone() = default;
  PolyhedralCone(Mat a, Mat b, int d) : A(std::move(a)), B(std::move(b)), dim(d) {
    if (A.rows() == 0) A.resize(0, dim);
    if (B.rows() == 0) B.resize(0, dim);
    require_dim(A.cols(), dim, "cone inequality matrix");
    require_dim(B.cols(), dim, "cone equality matrix");
  }

  static PolyhedralCone full_space(int d) { return {Mat(0, d), Mat(0, d), d}; }

  /// Row-scaled membership test: a.v <= tol |a| |v| and |b.v| <= tol |b| |v|.
  bool contains(const Vec& v, double tol = 1e-8) const {
    require_dim(v.size(), dim, "cone membership");
    const double vn = v.norm();
    if (vn == 0.0) return true;
    for (Index r = 0; r < A.rows(); ++r) {
      if (A.row(r).dot(v) > tol * A.row(r).norm() * vn) return false;
    }
    for (Index r = 0; r < B.rows(); ++r) {
      if (std::abs(B.row(r).dot(v)) > tol * B.row(r).norm() * vn) return false;
    }
    return true;
  }
};

/// Symmetric form v^T M v together with the Gram matrix of the weak norm,
/// (|v|')^2 = v^T G v.
struct QuadraticFormRep {
  Mat matrix;
  Mat weak_norm_gram;

  QuadraticFormRep() = default;
  explicit QuadraticFormRep(Mat m)
      : matrix(std::move(m)),
        weak_norm_gram(Mat::Identity(matrix.rows(), matrix.rows())) {}
  QuadraticFormRep(Mat m, Mat g) : matrix(std::move(m)), weak_norm_gram(std::move(g)) {}

  int dim() const { return static_cast<int>(matrix.rows()); }
  double value(const Vec& v) const { return v.dot(matrix * v); }
  double weak_sq(const Vec& v) const { return v.dot(weak_norm_gram * v); }
};

enum class CoercivityMethod { Vacuous, FaceEnumeration, SubspaceBound, Sampled };

inline const char* to_string(CoercivityMethod m) {
  switch (m) {
    case CoercivityMethod::Vacuous:
      return "vacuous";
    case CoercivityMethod::FaceEnumeration:
      return "face_enumeration";
    case CoercivityMethod::SubspaceBound:
      return "subspace_bound";
    case CoercivityMethod::Sampled:
      return "sampled";
  }
  return "?";
}

enum class CertStatus { Certified, Refuted, Inconclusive };

inline const char* to_string(CertStatus s) {
  switch (s) {
    case CertStatus::Certified:
      return "certified";
    case CertStatus::Refuted:
      return "refuted";
    case CertStatus::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

struct CoercivityCertificate {
  CertStatus status = CertStatus::Inconclusive;
  bool certified = false;
  bool vacuous = false;  // cone = {0}
  double c0 = kInf;
  std::optional<Vec> counterexample;
  CoercivityMethod method = CoercivityMethod::Sampled;
  long faces_examined = 0;
  std::string note;
};

struct CoercivityOptions {
  int max_dim = 12;
  int max_rows = 20;
  double tol_pd = 1e-8;
  double member_tol = 1e-8;
  int restarts = 32;
  int iterations = 400;
  std::uint64_t seed = 1;
  bool force_sampled = false;
};

namespace detail {

inline bool member_rows(const Mat& A, const Vec& y, double tol) {
  const double yn = y.norm();
  if (yn == 0.0) return false;
  for (Index r = 0; r < A.rows(); ++r) {
    if (A.row(r).dot(y) > tol * A.row(r).norm() * yn) return false;
  }
  return true;
}

// Cone {y : A y <= 0} in reduced coordinates with form (H, G).
struct ReducedProblem {
  Mat Z;  // lifts reduced coordinates to the ambient space
  Mat A;
  Mat H;
  Mat G;
};

inline ReducedProblem reduce(const QuadraticFormRep& form,
                             const PolyhedralCone& cone) {
  ReducedProblem r;
  r.Z = nullspace_structured(cone.B, cone.dim);
  const Mat AZ = cone.A * r.Z;
  std::vector<Index> keep;
  for (Index i = 0; i < AZ.rows(); ++i) {
    const double scale = std::max(cone.A.row(i).norm(), 1e-300);
    if (AZ.row(i).norm() > 1e-12 * scale) keep.push_back(i);
  }
  r.A.resize(static_cast<Index>(keep.size()), r.Z.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    r.A.row(static_cast<Index>(i)) = AZ.row(keep[i]);
  }
  r.H = r.Z.transpose() * form.matrix * r.Z;
  r.H = 0.5 * (r.H + r.H.transpose()).eval();
  r.G = r.Z.transpose() * form.weak_norm_gram * r.Z;
  r.G = 0.5 * (r.G + r.G.transpose()).eval();
  return r;
}

inline double rayleigh(const Mat& H, const Mat& G, const Vec& y) {
  return y.dot(H * y) / y.dot(G * y);
}

// Projected-gradient search for min y^T H y over {A y <= 0, y^T G y = 1}.
// Returns the best member found (empty when none).
inline std::optional<Vec> sampled_minimum(const ReducedProblem& rp,
                                          const CoercivityOptions& opt,
                                          double* best_value) {
  const Index d = rp.H.rows();
  Rng rng(opt.seed);
  const double hnorm = std::max(rp.H.norm(), 1e-12);
  const double gmin = std::max(
      Eigen::SelfAdjointEigenSolver<Mat>(rp.G, Eigen::EigenvaluesOnly)
          .eigenvalues()(0),
      1e-12);
  const double step = 0.5 * gmin / hnorm;
  std::optional<Vec> best;
  double bestv = kInf;
  for (int r = 0; r < opt.restarts; ++r) {
    Vec y = project_onto_cone(rp.A, rng.normal_vec(d));
    double gn = std::sqrt(y.dot(rp.G * y));
    if (!(gn > 1e-12)) continue;
    y /= gn;
    for (int it = 0; it < opt.iterations; ++it) {
      const double rho = y.dot(rp.H * y);
      const Vec grad = 2.0 * (rp.H * y - rho * (rp.G * y));
      Vec next = project_onto_cone(rp.A, y - step * grad);
      const double nn = std::sqrt(next.dot(rp.G * next));
      if (!(nn > 1e-12)) break;
      next /= nn;
      const double moved = (next - y).norm();
      y = next;
      if (moved < 1e-12) break;
    }
    if (!member_rows(rp.A, y, opt.member_tol)) continue;
    const double v = rayleigh(rp.H, rp.G, y);
    if (v < bestv) {
      bestv = v;
      best = y;
    }
  }
  *best_value = bestv;
  return best;
}

}  // namespace detail

/// Certifies Omega(v) >= c0 (|v|')^2 on the cone.
///
/// Up to `max_dim` reduced dimensions and `max_rows` inequality rows the
/// minimum is computed exactly by enumerating faces: on every face subspace
/// the smallest generalized eigenpair is formed and kept when a minimizer
/// lies in the cone. Larger cones fall back to a subspace lower bound,
/// cheap counterexample candidates and projected-gradient sampling; only the
/// first two can certify.
inline CoercivityCertificate certify_coercivity(const QuadraticFormRep& form,
                                                const PolyhedralCone& cone,
                                                const CoercivityOptions& opt = {}) {
  require_dim(form.dim(), cone.dim, "certify_coercivity");
  CoercivityCertificate cert;
  const detail::ReducedProblem rp = detail::reduce(form, cone);
  const Index d = rp.H.rows();
  const Index rows = rp.A.rows();

  auto finish = [&](double value, const std::optional<Vec>& y_best) {
    cert.c0 = value;
    if (value > opt.tol_pd) {
      cert.status = CertStatus::Certified;
      cert.certified = true;
    } else {
      cert.status = CertStatus::Refuted;
      if (y_best) cert.counterexample = rp.Z * (*y_best);
    }
  };

  if (d == 0) {
    cert.status = CertStatus::Certified;
    cert.certified = true;
    cert.vacuous = true;
    cert.method = CoercivityMethod::Vacuous;
    cert.note = "cone is {0}; coercivity holds vacuously";
    return cert;
  }

  const bool exact = !opt.force_sampled && d <= opt.max_dim && rows <= opt.max_rows;
  if (exact) {
    cert.method = CoercivityMethod::FaceEnumeration;
    double best = kInf;
    std::optional<Vec> best_y;
    // Depth-first over subsets of tight rows, pruning once the face
    // subspace collapses to {0}.
    std::vector<Index> tight;
    std::function<void(Index)> visit = [&](Index start) {
      Mat At(static_cast<Index>(tight.size()), d);
      for (std::size_t i = 0; i < tight.size(); ++i) {
        At.row(static_cast<Index>(i)) = rp.A.row(tight[i]);
      }
      const Mat Y = nullspace(At, static_cast<int>(d));
      if (Y.cols() == 0) return;
      ++cert.faces_examined;
      const Mat Hs = Y.transpose() * rp.H * Y;
      const Mat Gs = Y.transpose() * rp.G * Y;
      const EigenPair ep = smallest_generalized_eigen(
          0.5 * (Hs + Hs.transpose()), 0.5 * (Gs + Gs.transpose()));
      if (ep.value < best) {
        // Minimizers live in the eigenspace; look for one inside the cone.
        const Mat E = Y * ep.eigenspace;
        const Mat AE = rp.A * E;
        for (Index c = 0; c < E.cols(); ++c) {
          for (double sgn : {1.0, -1.0}) {
            Vec coeff = Vec::Zero(E.cols());
            coeff(c) = sgn;
            if (E.cols() > 1) coeff = project_onto_cone(AE, coeff);
            const Vec y = E * coeff;
            if (detail::member_rows(rp.A, y, opt.member_tol)) {
              const double val = detail::rayleigh(rp.H, rp.G, y);
              if (val < best) {
                best = val;
                best_y = y;
              }
            }
          }
        }
      }
      for (Index r = start; r < rows; ++r) {
        tight.push_back(r);
        visit(r + 1);
        tight.pop_back();
      }
    };
    visit(0);
    if (!best_y) {
      cert.status = CertStatus::Certified;
      cert.certified = true;
      cert.vacuous = true;
      cert.c0 = kInf;
      cert.note = "no nonzero cone member on any face; cone is {0}";
      return cert;
    }
    finish(best, best_y);
    return cert;
  }

  if (!opt.force_sampled) {
    // Relaxation: the cone sits inside the subspace ker B.
    const EigenPair ep = smallest_generalized_eigen(rp.H, rp.G);
    if (ep.value > opt.tol_pd) {
      cert.method = CoercivityMethod::SubspaceBound;
      cert.note = "lower bound from the linear hull of the cone";
      finish(ep.value, std::nullopt);
      return cert;
    }
    // Cheap refutation candidates.
    std::optional<Vec> cand;
    double cand_val = kInf;
    auto consider = [&](const Vec& y) {
      if (!detail::member_rows(rp.A, y, opt.member_tol)) return;
      const double v = detail::rayleigh(rp.H, rp.G, y);
      if (v < cand_val) {
        cand_val = v;
        cand = y;
      }
    };
    consider(ep.vector);
    consider(-ep.vector);
    if (cand && cand_val <= ep.value + 1e-12 * std::max(1.0, std::abs(ep.value))) {
      cert.method = CoercivityMethod::SubspaceBound;
      cert.note = "subspace minimizer lies in the cone";
      finish(cand_val, cand);
      return cert;
    }
    for (Index j = 0; j < d; ++j) {
      Vec e = Vec::Zero(d);
      e(j) = 1.0;
      consider(e);
      consider(-e);
    }
    if (rows > 0) {
      consider(project_onto_cone(rp.A, ep.vector));
      consider(project_onto_cone(rp.A, -ep.vector));
    }
    if (cand && cand_val <= opt.tol_pd) {
      cert.method = CoercivityMethod::Sampled;
      cert.note = "refuted by an explicit cone member";
      finish(cand_val, cand);
      return cert;
    }
  }

  cert.method = CoercivityMethod::Sampled;
  double val = kInf;
  std::optional<Vec> y = detail::sampled_minimum(rp, opt, &val);
  if (!y) {
    cert.status = CertStatus::Inconclusive;
    cert.note = "sampling found no nonzero cone member";
    return cert;
  }
  cert.c0 = val;
  if (val <= opt.tol_pd) {
    cert.status = CertStatus::Refuted;
    cert.counterexample = rp.Z * (*y);
    cert.note = "refuted by a sampled cone member";
  } else {
    cert.status = CertStatus::Inconclusive;
    cert.note = "sampled minimum only; not a certificate";
  }
  return cert;
}

}  // namespace subreg
