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

#include <cmath>
#include <string>
#include <vector>

#include "subreg/scalar_field.hpp"

namespace subreg {

struct FdRow {
  double step = 0.0;
  double remainder = 0.0;  // max over +-h e_k of the second-order Taylor error
  double order = std::nan("");  // log-log slope against the previous row
};

struct FdReport {
  std::vector<FdRow> rows;
  bool passed = false;
  double min_order = kInf;
  std::string message;
};

/// Second-order Taylor remainder table of `field` around `point`.
///
/// Passes when the remainder at the smallest step is below `tol` (relative
/// to 1 + |f|) and, between consecutive steps above round-off, decays faster
/// than h^2 (order >= 2.5). A wrong gradient shows order ~1, a wrong Hessian
/// order ~2.
inline FdReport finite_difference_check(const ScalarField& field,
                                        const Vec& point,
                                        const std::vector<double>& steps,
                                        double tol = 1e-6) {
  require_dim(point.size(), field.dim(), "finite_difference_check");
  if (steps.empty()) throw InputError("finite_difference_check: no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0) || (i > 0 && !(steps[i] < steps[i - 1]))) {
      throw InputError("finite_difference_check: steps must be positive and "
                       "strictly decreasing");
    }
  }
  const FieldEval base = field.eval(point);
  const double scale = 1.0 + std::abs(base.value);
  const double floor = 1e-12 * scale;

  FdReport rep;
  for (double h : steps) {
    double worst = 0.0;
    for (Index k = 0; k < point.size(); ++k) {
      for (double sgn : {1.0, -1.0}) {
        Vec d = Vec::Zero(point.size());
        d(k) = sgn * h;
        const double model = base.value + base.gradient.dot(d) +
                             0.5 * d.dot(base.hessian * d);
        worst = std::max(worst, std::abs(field.value(point + d) - model));
      }
    }
    FdRow row{h, worst, std::nan("")};
    if (!rep.rows.empty()) {
      const FdRow& prev = rep.rows.back();
      if (prev.remainder > floor && worst > floor) {
        row.order = std::log(prev.remainder / worst) / std::log(prev.step / h);
        rep.min_order = std::min(rep.min_order, row.order);
      }
    }
    rep.rows.push_back(row);
  }
  const bool small = rep.rows.back().remainder <= tol * scale;
  const bool decays = !(rep.min_order < 2.5);
  rep.passed = small && decays;
  if (!small) {
    rep.message = "remainder above tolerance at the smallest step";
  } else if (!decays) {
    rep.message = "remainder decays with order " +
                  std::to_string(rep.min_order) + " (< 2.5)";
  } else {
    rep.message = "ok";
  }
  return rep;
}

}  // namespace subreg
