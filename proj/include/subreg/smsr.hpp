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
#include <utility>
#include <vector>

#include "subreg/perturbed_control.hpp"
#include "subreg/perturbed_nlp.hpp"
#include "subreg/registry.hpp"

namespace subreg {

/// 1e-2 halving, `levels` entries.
inline std::vector<double> default_magnitudes(int levels = 6) {
  std::vector<double> m;
  double v = 1e-2;
  for (int i = 0; i < levels; ++i, v *= 0.5) m.push_back(v);
  return m;
}

inline double default_radius(const Vec& x_hat) {
  return 0.1 * (1.0 + (x_hat.size() ? x_hat.cwiseAbs().maxCoeff() : 0.0));
}

struct KappaOptions {
  std::vector<double> magnitudes = default_magnitudes();
  int samples = 32;
  std::uint64_t seed = 1;
  double radius_a = 0.0;  // 0 selects default_radius
};

struct KappaSample {
  int level = 0;
  int index = 0;
  double magnitude = 0.0;
  double norm_z = 0.0;
  double distance = 0.0;
  double ratio = 0.0;
  bool converged = false;
  std::string signature;
  std::vector<std::pair<std::string, double>> blocks;
};

struct KappaEstimate {
  std::vector<KappaSample> samples;
  double kappa_hat = 0.0;
  bool plateau_flag = false;
  double ratio_largest = 0.0;   // max ratio at the largest magnitude
  double ratio_smallest = 0.0;  // max ratio at the smallest magnitude
  double radius_a = 0.0;
  double bound_b = 0.0;
  double converged_fraction = 0.0;
  bool inconclusive = false;
};

namespace detail {

inline void check_kappa_options(const KappaOptions& o) {
  if (o.magnitudes.empty()) throw InputError("estimate_kappa: no magnitudes");
  for (std::size_t i = 0; i < o.magnitudes.size(); ++i) {
    if (!(o.magnitudes[i] > 0.0)) throw InputError("estimate_kappa: magnitudes must be positive");
    if (i && !(o.magnitudes[i] < o.magnitudes[i - 1])) {
      throw InputError("estimate_kappa: magnitudes must be decreasing");
    }
  }
  if (o.samples <= 0) throw InputError("estimate_kappa: samples must be positive");
}

inline void summarize(KappaEstimate& k, int levels, int solves) {
  int ok = 0;
  std::vector<bool> hit(static_cast<std::size_t>(levels * solves), false);
  std::vector<double> level_max(static_cast<std::size_t>(levels), -1.0);
  for (const auto& s : k.samples) {
    if (!s.converged) continue;
    const auto slot = static_cast<std::size_t>(s.level * solves + s.index);
    if (!hit[slot]) ++ok;
    hit[slot] = true;
    if (s.norm_z > 0.0) {
      k.kappa_hat = std::max(k.kappa_hat, s.ratio);
      auto& lm = level_max[static_cast<std::size_t>(s.level)];
      lm = std::max(lm, s.ratio);
    }
  }
  k.converged_fraction = static_cast<double>(ok) / (levels * solves);
  k.inconclusive = 2 * ok < levels * solves;
  k.ratio_largest = std::max(level_max.front(), 0.0);
  k.ratio_smallest = std::max(level_max.back(), 0.0);
  k.plateau_flag = !k.inconclusive && level_max.front() > 0.0 &&
                   level_max.back() >= 0.0 &&
                   k.ratio_smallest <= 1.25 * k.ratio_largest;
}

}  // namespace detail

/// Perturbs the KKT system, solves near `ref`, and records every branch.
/// Sample j uses the same direction at every magnitude.
inline KappaEstimate estimate_kappa(const NlpProblem& p, const NlpTuple& ref,
                                    const KappaOptions& opt,
                                    NlpPerturbationSpec spec = {},
                                    const Tolerances& tol = {}) {
  detail::check_kappa_options(opt);
  if (spec.n == 0) {
    const auto blocks = spec;
    spec = NlpPerturbationSpec::of(p);
    spec.xi = blocks.xi;
    spec.eta = blocks.eta;
    spec.zeta = blocks.zeta;
    spec.gram = blocks.gram;
  }
  const Mat G = spec.weak_gram();
  KappaEstimate k;
  k.radius_a = opt.radius_a > 0.0 ? opt.radius_a : default_radius(ref.x);
  k.bound_b = opt.magnitudes.front();
  const int levels = static_cast<int>(opt.magnitudes.size());
  for (int l = 0; l < levels; ++l) {
    for (int j = 0; j < opt.samples; ++j) {
      const double mag = opt.magnitudes[static_cast<std::size_t>(l)];
      const auto z = sample_perturbation(spec, mag, Rng::mix(opt.seed, static_cast<std::uint64_t>(j)));
      const double nz = perturbation_norm(z, G);
      const auto res = solve_perturbed_kkt(p, ref, z, k.radius_a, tol);
      if (res.branches.empty()) {
        k.samples.push_back({l, j, mag, nz, 0.0, 0.0, false, "", {}});
        continue;
      }
      for (const auto& b : res.branches) {
        const Vec dx = b.tuple.x - ref.x;
        KappaSample s{l, j, mag, nz, tuple_distance(b.tuple, ref, G), 0.0, true, b.signature, {}};
        s.ratio = nz > 0.0 ? s.distance / nz : 0.0;
        s.blocks = {{"dx", std::sqrt(std::max(0.0, dx.dot(G * dx)))},
                    {"dlambda", (b.tuple.lambda - ref.lambda).norm()},
                    {"dystar", (b.tuple.ystar - ref.ystar).norm()}};
        k.samples.push_back(std::move(s));
      }
    }
  }
  detail::summarize(k, levels, opt.samples);
  return k;
}

/// Control-system version; the distance is
/// |dx|_{1,1} + |du|_2 + |dp|_{1,1} + |dlambda|_2 + |dalpha| + |dbeta|.
inline KappaEstimate estimate_kappa(const ControlModel& cm, const ControlTuple& ref,
                                    const Mesh& mesh, const KappaOptions& opt,
                                    const ControlPerturbationSpec& spec = {},
                                    const Tolerances& tol = {}) {
  detail::check_kappa_options(opt);
  KappaEstimate k;
  const double xs = std::max(ref.x.size() ? ref.x.cwiseAbs().maxCoeff() : 0.0,
                             ref.u.size() ? ref.u.cwiseAbs().maxCoeff() : 0.0);
  k.radius_a = opt.radius_a > 0.0 ? opt.radius_a : 0.1 * (1.0 + xs);
  k.bound_b = opt.magnitudes.front();
  const int levels = static_cast<int>(opt.magnitudes.size());
  for (int l = 0; l < levels; ++l) {
    for (int j = 0; j < opt.samples; ++j) {
      const double mag = opt.magnitudes[static_cast<std::size_t>(l)];
      const auto w = sample_perturbation(cm, mesh, spec, mag,
                                         Rng::mix(opt.seed, static_cast<std::uint64_t>(j)));
      const double nz = perturbation_norm(w, mesh);
      const auto res = solve_perturbed_ocp(cm, ref, w, mesh, k.radius_a, tol);
      if (!res.converged) {
        k.samples.push_back({l, j, mag, nz, 0.0, 0.0, false, res.note, {}});
        continue;
      }
      const ControlDistance d = control_distance(res.tuple, ref, mesh);
      KappaSample s{l, j, mag, nz, d.total(), 0.0, true, res.activity.signature(), {}};
      s.ratio = nz > 0.0 ? s.distance / nz : 0.0;
      s.blocks = {{"dx_w11", d.x_w11},         {"du_l2", d.u_l2},
                  {"dp_w11", d.p_w11},         {"dlambda_l2", d.lambda_l2},
                  {"dalpha", d.alpha},         {"dbeta", d.beta},
                  {"primal_weak", d.primal_weak}, {"primal_strong", d.primal_strong}};
      k.samples.push_back(std::move(s));
    }
  }
  detail::summarize(k, levels, opt.samples);
  return k;
}

struct SmsrReport {
  std::string problem_id;
  std::vector<std::string> certificates;  // assumptions verified
  KappaEstimate estimate;
  std::vector<KappaSample> violations;    // at kappa_hat
};

/// Converged samples with distance > kappa |z|. A relative slack of 1e-12
/// absorbs the rounding in ratio = distance / |z|.
inline std::vector<KappaSample> verify_bound(const KappaEstimate& k, double kappa) {
  std::vector<KappaSample> out;
  for (const auto& s : k.samples) {
    if (s.converged && s.distance > kappa * s.norm_z * (1.0 + 1e-12)) out.push_back(s);
  }
  return out;
}

inline std::vector<KappaSample> verify_bound(const SmsrReport& r, double kappa) {
  return verify_bound(r.estimate, kappa);
}

struct CounterexampleRow {
  int s = 0;
  double J = 0.0;
  double formula = 0.0;  // -1/(2 s^3)
  double rel_error = 0.0;
  double sup_distance = 0.0;  // |u_s - u_hat|_inf
};

struct CounterexampleTable {
  std::vector<CounterexampleRow> rows;
  int mesh_n = 0;
  double free_control_measure = 0.0;  // h * #controls not pinned by the critical cone
  bool cone_trivial_in_limit = false;  // free measure <= h
};

/// u_s = 1/s on [0, 1/s], 0 afterwards, on the registry example1 model.
inline CounterexampleTable example1_counterexample(const std::vector<int>& s_values,
                                                   const Mesh& mesh) {
  const auto def = find_registry("example1").definition();
  const ControlModel cm = control_model(*def.ocp);
  CounterexampleTable tab;
  tab.mesh_n = mesh.N;
  for (int s : s_values) {
    if (s <= 0) throw InputError("example1_counterexample: s must be positive");
    if (mesh.N % s != 0) {
      throw InputError("example1_counterexample: mesh N = " + std::to_string(mesh.N) +
                       " is not divisible by s = " + std::to_string(s));
    }
  }
  const Vec x0 = *def.solution.x0;
  const Mat u_hat = Mat::Zero(mesh.N, 1);
  const double J_hat = cm.cost.value(endpoint_pair(propagate_state(cm.dyn, x0, u_hat, mesh)));
  for (int s : s_values) {
    Mat u = Mat::Zero(mesh.N, 1);
    u.topRows(mesh.N / s).setConstant(1.0 / s);
    const Mat x = propagate_state(cm.dyn, x0, u, mesh);
    CounterexampleRow r;
    r.s = s;
    r.J = cm.cost.value(endpoint_pair(x)) - J_hat;
    r.formula = -0.5 / (static_cast<double>(s) * s * s);
    r.rel_error = std::abs(r.J - r.formula) / std::abs(r.formula);
    r.sup_distance = norms::linf(u - u_hat);
    tab.rows.push_back(r);
  }
  const ControlTuple ref = reference_control_tuple(cm, def.solution, mesh);
  const PolyhedralCone K = discrete_critical_cone_ocp(cm, ref, mesh, OcpConeKind::Exact);
  tab.free_control_measure = free_control_measure(K, cm, mesh);
  tab.cone_trivial_in_limit = tab.free_control_measure <= mesh.h() * (1.0 + 1e-12);
  return tab;
}

}  // namespace subreg
