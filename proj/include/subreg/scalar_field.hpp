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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subreg/core.hpp"

namespace subreg {

/// Value, gradient (row vector) and Hessian of a scalar function at a point.
struct FieldEval {
  double value = 0.0;
  RowVec gradient;
  Mat hessian;
};

/// Sparse multivariate polynomial: a sum of coefficient * monomial terms.
class Polynomial {
 public:
  struct Term {
    double coef = 0.0;
    std::vector<int> exponents;  // one per variable
  };

  Polynomial() = default;
  explicit Polynomial(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }

  /// Adds coef * prod x_k^exponents[k]; like monomials are merged.
  Polynomial& add_term(double coef, std::vector<int> exponents) {
    if (static_cast<int>(exponents.size()) != dim_) {
      throw InputError("monomial exponent count does not match dimension");
    }
    for (int e : exponents) {
      if (e < 0) throw InputError("negative exponent in monomial");
    }
    for (auto& t : terms_) {
      if (t.exponents == exponents) {
        t.coef += coef;
        return *this;
      }
    }
    terms_.push_back({coef, std::move(exponents)});
    return *this;
  }

  Polynomial& add_constant(double c) {
    return add_term(c, std::vector<int>(dim_, 0));
  }

  Polynomial& add_linear(int var, double c) {
    std::vector<int> e(dim_, 0);
    e[var] = 1;
    return add_term(c, std::move(e));
  }

  Polynomial& add_product(int a, int b, double c) {
    std::vector<int> e(dim_, 0);
    e[a] += 1;
    e[b] += 1;
    return add_term(c, std::move(e));
  }

  /// c + g (x - x0) + 1/2 (x - x0)^T H (x - x0), expanded into monomials.
  static Polynomial quadratic_model(const Vec& x0, double c, const RowVec& g,
                                    const Mat& H) {
    const int n = static_cast<int>(x0.size());
    Polynomial p(n);
    const Mat Hs = 0.5 * (H + H.transpose());
    double constant = c - g.dot(x0) + 0.5 * x0.dot(Hs * x0);
    p.add_constant(constant);
    const Vec lin = g.transpose() - Hs * x0;
    for (int i = 0; i < n; ++i) {
      if (lin(i) != 0.0) p.add_linear(i, lin(i));
    }
    for (int i = 0; i < n; ++i) {
      if (Hs(i, i) != 0.0) p.add_product(i, i, 0.5 * Hs(i, i));
      for (int j = i + 1; j < n; ++j) {
        if (Hs(i, j) != 0.0) p.add_product(i, j, Hs(i, j));
      }
    }
    return p;
  }

  int degree() const {
    int d = 0;
    for (const auto& t : terms_) {
      int s = 0;
      for (int e : t.exponents) s += e;
      if (t.coef != 0.0) d = std::max(d, s);
    }
    return d;
  }

  FieldEval eval(const Vec& x) const {
    require_dim(x.size(), dim_, "polynomial evaluation");
    FieldEval out;
    out.gradient = RowVec::Zero(dim_);
    out.hessian = Mat::Zero(dim_, dim_);
    std::vector<int> vars;
    for (const auto& t : terms_) {
      vars.clear();
      for (int k = 0; k < dim_; ++k) {
        if (t.exponents[k] > 0) vars.push_back(k);
      }
      // Product of all factors except the listed ones (up to two skipped).
      auto partial = [&](int skip_a, int da, int skip_b, int db) {
        double v = t.coef;
        for (int k : vars) {
          int e = t.exponents[k];
          double c = 1.0;
          if (k == skip_a) {
            for (int r = 0; r < da; ++r) c *= static_cast<double>(e - r);
            e -= da;
          }
          if (k == skip_b) {
            for (int r = 0; r < db; ++r) c *= static_cast<double>(e - r);
            e -= db;
          }
          if (e < 0) return 0.0;
          v *= c * ipow(x(k), e);
        }
        return v;
      };
      out.value += partial(-1, 0, -1, 0);
      for (int a : vars) {
        out.gradient(a) += partial(a, 1, -1, 0);
        for (int b : vars) {
          if (b < a) continue;
          const double h = (a == b) ? partial(a, 2, -1, 0) : partial(a, 1, b, 1);
          out.hessian(a, b) += h;
          if (a != b) out.hessian(b, a) += h;
        }
      }
    }
    return out;
  }

 private:
  static double ipow(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
  }

  int dim_ = 0;
  std::vector<Term> terms_;
};

/// A twice-differentiable scalar map R^d -> R with exact derivative oracle.
///
/// Either backed by a Polynomial (serializable) or by arbitrary code.
/// Immutable after construction and safe to evaluate concurrently.
class ScalarField {
 public:
  using Oracle = std::function<FieldEval(const Vec&)>;

  ScalarField() = default;

  ScalarField(int dim, Oracle oracle)
      : dim_(dim), oracle_(std::make_shared<Oracle>(std::move(oracle))) {}

  ScalarField(Polynomial poly)  // NOLINT(google-explicit-constructor)
      : dim_(poly.dim()),
        poly_(std::make_shared<Polynomial>(std::move(poly))) {}

  int dim() const { return dim_; }
  const Polynomial* polynomial() const { return poly_.get(); }

  FieldEval eval(const Vec& x) const {
    require_dim(x.size(), dim_, "field evaluation");
    FieldEval out = poly_ ? poly_->eval(x) : (*oracle_)(x);
    require_dim(out.gradient.size(), dim_, "oracle gradient");
    require_dim(out.hessian.rows(), dim_, "oracle hessian");
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    return out;
  }

  double value(const Vec& x) const { return eval(x).value; }

 private:
  int dim_ = 0;
  std::shared_ptr<const Oracle> oracle_;
  std::shared_ptr<const Polynomial> poly_;
};

/// Exact value, gradient and (symmetrized) Hessian of `field` at `point`.
inline FieldEval evaluate_with_derivatives(const ScalarField& field,
                                           const Vec& point) {
  return field.eval(point);
}

/// Stacked values and Jacobian of a list of fields sharing one dimension.
inline std::pair<Vec, Mat> eval_stack(const std::vector<ScalarField>& fields,
                                      const Vec& x) {
  Vec v(static_cast<Index>(fields.size()));
  Mat J(static_cast<Index>(fields.size()), x.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    FieldEval e = fields[i].eval(x);
    v(static_cast<Index>(i)) = e.value;
    J.row(static_cast<Index>(i)) = e.gradient;
  }
  return {v, J};
}

/// Sum_i weights(i) * Hessian(fields[i]) at x.
inline Mat weighted_hessian(const std::vector<ScalarField>& fields,
                            const RowVec& weights, const Vec& x) {
  Mat H = Mat::Zero(x.size(), x.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const double w = weights(static_cast<Index>(i));
    if (w != 0.0) H += w * fields[i].eval(x).hessian;
  }
  return H;
}

}  // namespace subreg
