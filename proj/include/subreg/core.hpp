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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace subreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr const char* kVersion = "1.0.0";

/// Malformed user input: files, dimensions, flags.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an analysis routine does not hold.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical evaluation produced non-finite values or failed to converge.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default tolerances shared by the NLP and control analyses.
struct Tolerances {
  double act = 1e-7;   // activity threshold, scaled by 1 + |f(x)|_inf
  double mul = 1e-8;   // multiplier positivity threshold
  double rank = 1e-9;  // relative to the largest singular value
  double pd = 1e-8;    // coercivity constant must exceed this
};

inline void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw InputError(std::string("dimension mismatch in ") + what + ": got " +
                     std::to_string(got) + ", expected " +
                     std::to_string(want));
  }
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) {
  return m.allFinite();
}

/// Deterministic generator whose output does not depend on the standard
/// library's distribution implementations (reports must be byte-identical
/// across platforms for a fixed seed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ULL) {}

  std::uint64_t next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  Vec normal_vec(Index n) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  /// Uniform on the Euclidean unit sphere.
  Vec unit_sphere(Index n) {
    Vec v = normal_vec(n);
    double nrm = v.norm();
    while (nrm == 0.0) {
      v = normal_vec(n);
      nrm = v.norm();
    }
    return v / nrm;
  }

  /// Uniform in the Euclidean unit ball.
  Vec unit_ball(Index n) {
    return unit_sphere(n) * std::pow(uniform(), 1.0 / static_cast<double>(n));
  }

  /// Derives an independent stream, e.g. one per sample index.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed * 0x2545F4914F6CDD1DULL + stream);
    return r.next();
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace subreg
