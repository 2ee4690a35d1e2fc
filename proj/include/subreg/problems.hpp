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
#include <string>
#include <vector>

#include "subreg/scalar_field.hpp"

namespace subreg {

/// min phi(x)  s.t.  f(x) <= 0,  g(x) = 0.
struct NlpProblem {
  int n = 0;
  ScalarField objective;
  std::vector<ScalarField> inequalities;
  std::vector<ScalarField> equalities;

  int m() const { return static_cast<int>(inequalities.size()); }
  int neq() const { return static_cast<int>(equalities.size()); }

  void validate() const {
    require_dim(objective.dim(), n, "objective");
    for (const auto& f : inequalities) require_dim(f.dim(), n, "inequality");
    for (const auto& g : equalities) require_dim(g.dim(), n, "equality");
  }
};

/// Candidate KKT point (x, lambda, y*).
struct NlpTuple {
  Vec x;
  RowVec lambda;
  RowVec ystar;
};

/// Mayer problem on [t0, t1]: minimize phi0(q) with x' = f(x, u),
/// psi(q) = 0, phi(q) <= 0, q = (x(t0), x(t1)).
struct MayerProblem {
  int n = 0;
  int m = 0;
  std::vector<ScalarField> dynamics;  // n fields over (x, u)
  ScalarField endpoint_cost;          // over q in R^{2n}
  std::vector<ScalarField> endpoint_equalities;
  std::vector<ScalarField> endpoint_inequalities;
  double t0 = 0.0;
  double t1 = 1.0;

  int s() const { return static_cast<int>(endpoint_equalities.size()); }
  int k() const { return static_cast<int>(endpoint_inequalities.size()); }

  void validate() const {
    if (n <= 0 || m <= 0) throw InputError("mayer: n and m must be positive");
    require_dim(static_cast<Index>(dynamics.size()), n, "mayer dynamics count");
    for (const auto& f : dynamics) require_dim(f.dim(), n + m, "dynamics");
    require_dim(endpoint_cost.dim(), 2 * n, "endpoint cost");
    for (const auto& f : endpoint_equalities) require_dim(f.dim(), 2 * n, "eq");
    for (const auto& f : endpoint_inequalities) {
      require_dim(f.dim(), 2 * n, "ineq");
    }
    if (!(t1 > t0)) throw InputError("mayer: horizon must satisfy t1 > t0");
  }
};

/// Control-constrained problem on [0, 1]: minimize F(x(0), x(1)) with
/// x' = f(x, u) and G(u) <= 0.
struct OcpProblem {
  int n = 0;
  int m = 0;
  std::vector<ScalarField> dynamics;
  ScalarField endpoint_cost;
  std::vector<ScalarField> control_constraints;  // k fields over u

  int k() const { return static_cast<int>(control_constraints.size()); }

  void validate() const {
    if (n <= 0 || m <= 0) throw InputError("ocp: n and m must be positive");
    require_dim(static_cast<Index>(dynamics.size()), n, "ocp dynamics count");
    for (const auto& f : dynamics) require_dim(f.dim(), n + m, "dynamics");
    require_dim(endpoint_cost.dim(), 2 * n, "endpoint cost");
    for (const auto& g : control_constraints) {
      require_dim(g.dim(), m, "control constraint");
    }
  }
};

/// Reference values shipped with a problem (file `solution:` block).
struct AnalyticSolution {
  std::optional<Vec> x;       // nlp primal
  std::optional<RowVec> lambda;
  std::optional<RowVec> ystar;
  std::optional<Vec> x0;      // control problems: initial state
  std::optional<Vec> u;       // control problems: constant control
  std::optional<RowVec> alpha;
  std::optional<RowVec> beta;
};

enum class ProblemClass { Nlp, Mayer, Ocp };

inline const char* to_string(ProblemClass c) {
  switch (c) {
    case ProblemClass::Nlp:
      return "nlp";
    case ProblemClass::Mayer:
      return "mayer";
    case ProblemClass::Ocp:
      return "ocp";
  }
  return "?";
}

/// Result of parsing a problem file: exactly one of the problems is set.
struct ProblemDefinition {
  ProblemClass cls = ProblemClass::Nlp;
  std::optional<NlpProblem> nlp;
  std::optional<MayerProblem> mayer;
  std::optional<OcpProblem> ocp;
  AnalyticSolution solution;
};

}  // namespace subreg
