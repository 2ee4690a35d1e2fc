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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subreg/control_growth.hpp"
#include "subreg/report.hpp"
#include "subreg/smsr.hpp"

namespace subreg {

enum ExitCode { kExitOk = 0, kExitRefuted = 1, kExitInput = 2, kExitInconclusive = 3 };

struct RunConfig {
  std::string command;
  std::string problem_path;
  std::string registry_id;
  std::optional<int> mesh_n;  // 200, or 1000 for counterexample
  std::vector<double> delta_sweep{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  Tolerances tol;
  std::uint64_t seed = 1;
  std::vector<double> magnitudes = default_magnitudes();
  int samples = 32;
  std::vector<int> s_values{1, 2, 4};
  std::string out_dir;  // empty: $SUBREG_OUT, then "."
  std::string format = "text";

  int mesh() const { return mesh_n.value_or(command == "counterexample" ? 1000 : 200); }

  std::filesystem::path output_dir() const {
    if (!out_dir.empty()) return out_dir;
    if (const char* env = std::getenv("SUBREG_OUT"); env && *env) return env;
    return ".";
  }

  void validate() const {
    if (command != "analyze" && command != "certify" && command != "perturb" &&
        command != "counterexample") {
      throw InputError("unknown command '" + command + "'");
    }
    if (command != "counterexample" && problem_path.empty() == registry_id.empty()) {
      throw InputError("give exactly one of --problem and --registry");
    }
    if (mesh() < 2) throw InputError("--mesh-n must be at least 2");
    if (!(tol.act > 0.0) || !(tol.mul > 0.0)) throw InputError("tolerances must be positive");
    if (delta_sweep.empty()) throw InputError("--delta-sweep is empty");
    for (double d : delta_sweep) {
      if (!(d > 0.0)) throw InputError("--delta-sweep values must be positive");
    }
    if (samples <= 0) throw InputError("--samples must be positive");
    if (format != "text" && format != "csv") throw InputError("--format must be text or csv");
  }
};

namespace cli_detail {

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Loaded {
  std::string id;
  ProblemDefinition def;
  double radius_a = 0.0;
};

inline Loaded load(const RunConfig& cfg) {
  if (!cfg.registry_id.empty()) {
    const auto& e = find_registry(cfg.registry_id);
    return {e.id, e.definition(), e.radius_a};
  }
  std::ifstream f(cfg.problem_path, std::ios::binary);
  if (!f) throw InputError("cannot read problem file '" + cfg.problem_path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return {std::filesystem::path(cfg.problem_path).stem().string(),
          parse_problem_file(ss.str()), 0.0};
}

inline void echo(Report& r, const RunConfig& cfg, const std::string& id) {
  r.section("CONFIG");
  r.kv("tool", "subreg-kit");
  r.kv("version", kVersion);
  r.kv("command", cfg.command);
  r.kv("problem", id);
  r.kv("source", cfg.problem_path.empty() ? "registry" : "file");
  r.kv("mesh_n", std::to_string(cfg.mesh()));
  r.kv("delta_sweep", join(cfg.delta_sweep));
  r.kv("tol_act", cfg.tol.act);
  r.kv("tol_mul", cfg.tol.mul);
  r.kv("seed", std::to_string(cfg.seed));
  r.kv("magnitudes", join(cfg.magnitudes));
  r.kv("samples", std::to_string(cfg.samples));
  if (cfg.command == "counterexample") r.kv("s_values", join(cfg.s_values));
  r.kv("format", cfg.format);
}

struct ControlCase {
  ControlModel cm;
  Mesh mesh;
  ControlTuple ref;
  bool mayer = false;
};

inline ControlCase control_case(const Loaded& l, const RunConfig& cfg) {
  ControlModel cm = l.def.ocp ? control_model(*l.def.ocp) : control_model(*l.def.mayer);
  const Mesh mesh = Mesh::uniform(cfg.mesh(), cm.t0, cm.t1);
  ControlTuple ref = reference_control_tuple(cm, l.def.solution, mesh, cfg.tol);
  return {std::move(cm), mesh, std::move(ref), l.def.cls == ProblemClass::Mayer};
}

inline const char* pf(bool ok) { return ok ? "pass" : "fail"; }

inline void qualification(Report& r, const std::string& name, const QualificationResult& q) {
  r.section(name);
  r.check("holds", pf(q.holds), fmt(q.holds));
  if (!q.message.empty()) r.kv("message", q.message);
  if (q.witness) r.kv("witness", fmt(*q.witness));
}

inline void coercivity(Report& r, const CoercivityCertificate& c) {
  r.check("status", to_string(c.status), to_string(c.status));
  r.check("c0", c.certified ? "pass" : (c.status == CertStatus::Refuted ? "fail" : "warn"), c.c0);
  r.kv("method", to_string(c.method));
  r.kv("vacuous", fmt(c.vacuous));
  if (!c.note.empty()) r.kv("note", c.note);
  if (c.status == CertStatus::Inconclusive && c.method == CoercivityMethod::Sampled) {
    r.warn("sampled-only evidence");
  }
}

inline void growth(Report& r, const GrowthProbe& g, double c_cert) {
  r.section("GROWTH");
  r.check("violations", pf(g.violations.empty()), std::to_string(g.violations.size()));
  r.check("fitted_c", std::isfinite(c_cert) && c_cert > 0.0
                          ? pf(g.fitted_c >= 0.25 * c_cert)
                          : "info",
          g.fitted_c);
  r.kv("certified_c", c_cert);
  r.kv("accepted", std::to_string(g.accepted));
  r.kv("retraction_failures", std::to_string(g.retraction_failures));
  r.kv("note", g.note);
}

inline void growth_failed(Report& r, const std::string& what) {
  r.section("GROWTH");
  r.check("probe", "inconclusive", what);
}

// ---- analyze ----

inline int analyze_nlp(Report& r, const Loaded& l, const RunConfig& cfg) {
  const NlpProblem& p = *l.def.nlp;
  const NlpTuple s = reference_nlp_tuple(p, l.def.solution, cfg.tol);
  const ActiveSets as = active_sets(p, s, cfg.tol);
  r.section("ACTIVE_SETS");
  r.kv("I", fmt(as.I));
  r.kv("I0", fmt(as.I0));
  r.kv("I1", fmt(as.I1));
  const KktResidualNlp k = kkt_residual(p, s);
  r.section("KKT");
  r.kv("x", fmt(Vec(s.x)));
  r.kv("lambda", fmt(Vec(s.lambda.transpose())));
  r.kv("ystar", fmt(Vec(s.ystar.transpose())));
  const bool ok = k.norm_Z <= 1e-8;
  r.check("norm_Z", pf(ok), k.norm_Z);
  r.kv("xi", k.xi.norm());
  r.kv("eta", k.eta.norm());
  r.kv("zeta", k.zeta.norm());
  qualification(r, "MFCQ", check_mfcq(p, s.x, cfg.tol));
  qualification(r, "STRICT_MFCQ", check_strict_mfcq(p, s, cfg.tol));
  return ok ? kExitOk : kExitRefuted;
}

inline std::optional<double> first_certified_delta(const ControlCase& c, const RunConfig& cfg) {
  for (double d : cfg.delta_sweep) {
    if (certify_coercivity_ocp(c.cm, c.ref, c.mesh, d, OcpConeKind::Delta, {}, cfg.tol)
            .cert.certified) {
      return d;
    }
  }
  return std::nullopt;
}

inline int analyze_control(Report& r, const Loaded& l, const RunConfig& cfg,
                           std::vector<std::pair<std::string, std::string>>& extra) {
  const ControlCase c = control_case(l, cfg);
  extra.emplace_back("trajectory.csv", trajectory_table(c.cm, c.ref, c.mesh).csv());
  const double h = c.mesh.h();
  bool ok = false;
  if (c.mayer) {
    const MayerResidual m = mayer_stationarity(c.cm, c.ref, c.mesh, cfg.tol);
    r.section("RESIDUALS");
    ok = m.norm <= 1e-8;
    r.check("norm", pf(ok), m.norm);
    r.kv("pi_l1", norms::l1(m.pi, h));
    r.kv("rho_l2", norms::l2(m.rho, h));
    r.kv("nu", m.nu.norm());
    r.kv("eta_l1", norms::l1(m.eta, h));
    r.kv("mu", m.mu.norm());
    r.kv("xi", m.xi.norm());
    qualification(r, "STRICT_MF", check_strict_mf_mayer(c.cm, c.ref, c.mesh, cfg.tol));
    return ok ? kExitOk : kExitRefuted;
  }
  r.section("REGULARITY");
  if (c.cm.k()) {
    const MultiplierRecovery mr = multiplier_from_stationarity(c.cm, c.ref, c.mesh, cfg.tol);
    r.check("multiplier_recovery", "pass", mr.max_residual);
    r.kv("min_lambda", mr.min_lambda);
  } else {
    r.kv("multiplier_recovery", "no control constraints");
  }
  const OcpResidual o = optimality_residuals_ocp(c.cm, c.ref, c.mesh, cfg.tol);
  r.section("RESIDUALS");
  ok = o.norm <= 1e-8;
  r.check("norm", pf(ok), o.norm);
  r.kv("budget_norm", o.budget_norm);
  r.kv("nu", o.nu.norm());
  r.kv("pi_l1", norms::l1(o.pi, h));
  r.kv("rho_l2", norms::l2(o.rho, h));
  r.kv("xi_l1", norms::l1(o.xi, h));
  r.kv("eta_l2", norms::l2(o.eta, h));
  r.section("TIME_SETS");
  for (double d : cfg.delta_sweep) {
    r.kv("meas_m_delta[" + fmt(d) + "]", time_sets(c.cm, c.ref, c.mesh, d, cfg.tol).meas_m_delta);
  }
  const PolyhedralCone K = discrete_critical_cone_ocp(c.cm, c.ref, c.mesh, OcpConeKind::Exact,
                                                      1.0, cfg.tol);
  const double free = free_control_measure(K, c.cm, c.mesh);
  r.section("CRITICAL_CONE");
  r.kv("free_control_measure", free);
  r.kv("control_component_trivial", fmt(free <= h * (1.0 + 1e-12)));
  if (free <= h * (1.0 + 1e-12) && !first_certified_delta(c, cfg)) {
    r.warn("K = {0} insufficient - see counterexample");
  }
  return ok ? kExitOk : kExitRefuted;
}

// ---- certify ----

inline int status_exit(CertStatus s) {
  switch (s) {
    case CertStatus::Certified:
      return kExitOk;
    case CertStatus::Refuted:
      return kExitRefuted;
    case CertStatus::Inconclusive:
      return kExitInconclusive;
  }
  return kExitInconclusive;
}

inline int certify_nlp(Report& r, const Loaded& l, const RunConfig& cfg) {
  const NlpProblem& p = *l.def.nlp;
  const NlpTuple s = reference_nlp_tuple(p, l.def.solution, cfg.tol);
  CoercivityOptions opt;
  opt.seed = cfg.seed;
  const auto c = certify_coercivity(quadratic_form_nlp(p, s), critical_cone_nlp(p, s, active_sets(p, s, cfg.tol)), opt);
  r.section("COERCIVITY");
  coercivity(r, c);
  if (c.counterexample) r.kv("counterexample", fmt(*c.counterexample));
  try {
    growth(r, quadratic_growth_probe(p, s, 1e-2, 1000, cfg.seed), c.c0);
  } catch (const EvaluationError& e) {
    growth_failed(r, e.what());
  }
  return status_exit(c.status);
}

inline int certify_control(Report& r, const Loaded& l, const RunConfig& cfg,
                           std::vector<std::pair<std::string, std::string>>& extra) {
  const ControlCase c = control_case(l, cfg);
  CoercivityOptions opt;
  opt.seed = cfg.seed;
  std::optional<Vec> direction;
  auto attach = [&](const std::optional<Vec>& v) {
    if (!v || direction) return;
    direction = v;
    Table t{{"component", "value"}, {}};
    for (Index i = 0; i < v->size(); ++i) t.rows.push_back({std::to_string(i), fmt((*v)(i))});
    extra.emplace_back("certify-direction.csv", t.csv());
  };
  if (c.mayer) {
    const auto cert = certify_coercivity_mayer(c.cm, c.ref, c.mesh, opt, cfg.tol);
    r.section("COERCIVITY");
    coercivity(r, cert);
    attach(cert.counterexample);
    qualification(r, "STRICT_MF", check_strict_mf_mayer(c.cm, c.ref, c.mesh, cfg.tol));
    try {
      growth(r, control_growth_probe(c.cm, c.ref, c.mesh, 1e-2, 1000, cfg.seed),
             mayer_sup_norm_constant(c.cm, c.ref, c.mesh, cert.c0));
    } catch (const EvaluationError& e) {
      growth_failed(r, e.what());
    }
    return status_exit(cert.status);
  }
  const auto exact = certify_coercivity_ocp(c.cm, c.ref, c.mesh, 1.0, OcpConeKind::Exact, opt, cfg.tol);
  r.section("COERCIVITY_EXACT");
  coercivity(r, exact.cert);
  bool any_inconclusive = exact.cert.status == CertStatus::Inconclusive;
  std::optional<OcpCertificate> best;
  bool legendre_any = false, hamiltonian_any = false;
  for (double d : cfg.delta_sweep) {
    const auto cd = certify_coercivity_ocp(c.cm, c.ref, c.mesh, d, OcpConeKind::Delta, opt, cfg.tol);
    const auto lg = check_legendre(c.cm, c.ref, c.mesh, d, cfg.tol);
    const auto hg = check_hamiltonian_growth(c.cm, c.ref, c.mesh, d, 0.1, 64, cfg.seed, cfg.tol);
    r.section("DELTA " + fmt(d));
    r.check("coercivity", to_string(cd.cert.status), cd.cert.c0);
    r.kv("method", to_string(cd.cert.method));
    r.check("legendre", pf(lg.holds), lg.c_L);
    r.check("hamiltonian_growth", pf(hg.holds), hg.c_H);
    any_inconclusive |= cd.cert.status == CertStatus::Inconclusive;
    legendre_any |= lg.holds;
    hamiltonian_any |= hg.holds;
    if (cd.cert.certified && !best) best = cd;
    if (!cd.cert.certified) attach(cd.cert.counterexample);
  }
  attach(exact.cert.counterexample);
  std::string which;
  if (best) which = "coercivity_on_K_delta";
  else if (exact.cert.certified && legendre_any) which = "coercivity_on_K+legendre";
  else if (exact.cert.certified && hamiltonian_any) which = "coercivity_on_K+hamiltonian_growth";
  r.section("CERTIFICATE");
  r.check("sufficient_condition", which.empty() ? "fail" : "pass", which.empty() ? "none" : which);
  if (best) {
    r.kv("delta", best->delta);
    r.kv("c_delta", best->cert.c0);
    r.kv("c_inf_norm", best->c_inf_norm);
  }
  if (which.empty() && direction) {
    std::vector<int> support;
    const double mx = direction->cwiseAbs().maxCoeff();
    for (int i = 0; i < c.mesh.N; ++i) {
      for (int a = 0; a < c.cm.m(); ++a) {
        if (std::abs((*direction)(u_offset(c.cm.n(), c.cm.m(), i) + a)) > 1e-6 * mx) {
          support.push_back(i);
          break;
        }
      }
    }
    r.kv("counterexample_control_intervals", fmt(support, 0));
    r.kv("counterexample_file", "certify-direction.csv");
  }
  try {
    const double cc = best ? best->c_inf_norm : exact.c_inf_norm;
    growth(r, control_growth_probe(c.cm, c.ref, c.mesh, 1e-2, 1000, cfg.seed),
           which.empty() ? kInf : cc);
  } catch (const EvaluationError& e) {
    growth_failed(r, e.what());
  }
  if (!which.empty()) return kExitOk;
  return any_inconclusive ? kExitInconclusive : kExitRefuted;
}

// ---- perturb ----

inline Table samples_table(const KappaEstimate& k) {
  Table t;
  t.header = {"level", "index", "magnitude", "norm_z", "dist_weak"};
  std::vector<std::string> names;
  for (const auto& s : k.samples) {
    if (s.converged) {
      for (const auto& b : s.blocks) names.push_back(b.first);
      break;
    }
  }
  t.header.insert(t.header.end(), names.begin(), names.end());
  t.header.insert(t.header.end(), {"ratio", "converged", "active_set_signature"});
  for (const auto& s : k.samples) {
    std::vector<std::string> row{std::to_string(s.level), std::to_string(s.index),
                                 fmt(s.magnitude), fmt(s.norm_z), fmt(s.distance)};
    for (std::size_t b = 0; b < names.size(); ++b) {
      row.push_back(b < s.blocks.size() ? fmt(s.blocks[b].second) : "");
    }
    row.insert(row.end(), {fmt(s.ratio), fmt(s.converged), s.signature});
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline int perturb(Report& r, const Loaded& l, const RunConfig& cfg,
                   std::vector<std::pair<std::string, std::string>>& extra) {
  KappaOptions opt;
  opt.magnitudes = cfg.magnitudes;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  opt.radius_a = l.radius_a;
  KappaEstimate k;
  if (l.def.nlp) {
    const NlpTuple s = reference_nlp_tuple(*l.def.nlp, l.def.solution, cfg.tol);
    k = estimate_kappa(*l.def.nlp, s, opt, {}, cfg.tol);
  } else {
    const ControlCase c = control_case(l, cfg);
    k = estimate_kappa(c.cm, c.ref, c.mesh, opt, {}, cfg.tol);
  }
  const auto violations = verify_bound(k, k.kappa_hat);
  r.section("KAPPA");
  r.check("kappa_hat", "info", k.kappa_hat);
  r.check("plateau", pf(k.plateau_flag), fmt(k.plateau_flag));
  r.kv("ratio_largest_magnitude", k.ratio_largest);
  r.kv("ratio_smallest_magnitude", k.ratio_smallest);
  r.kv("spread", k.ratio_largest > 0.0 ? k.ratio_smallest / k.ratio_largest : kInf);
  r.check("converged_fraction", k.inconclusive ? "inconclusive" : "pass", k.converged_fraction);
  r.check("violations_at_kappa_hat", pf(violations.empty()), std::to_string(violations.size()));
  r.kv("radius_a", k.radius_a);
  r.kv("bound_b", k.bound_b);
  double eps = 0.0;
  for (const auto& s : k.samples) {
    if (s.converged) eps = std::max(eps, s.magnitude);
  }
  r.kv("largest_converged_magnitude", eps);
  r.section("BLOCKS");
  std::vector<std::pair<std::string, double>> worst;
  for (const auto& s : k.samples) {
    if (!s.converged || s.norm_z <= 0.0) continue;
    for (std::size_t b = 0; b < s.blocks.size(); ++b) {
      if (worst.size() <= b) worst.push_back({s.blocks[b].first, 0.0});
      worst[b].second = std::max(worst[b].second, s.blocks[b].second / s.norm_z);
    }
  }
  for (const auto& [name, v] : worst) r.kv("max " + name + " / norm_z", v);
  extra.emplace_back("perturb-samples.csv", samples_table(k).csv());
  if (k.inconclusive) return kExitInconclusive;
  return k.plateau_flag && violations.empty() ? kExitOk : kExitRefuted;
}

// ---- counterexample ----

inline int counterexample(Report& r, const RunConfig& cfg,
                          std::vector<std::pair<std::string, std::string>>& extra) {
  const auto tab = example1_counterexample(cfg.s_values, Mesh::uniform(cfg.mesh()));
  r.section("COUNTEREXAMPLE");
  Table t{{"s", "J", "formula", "rel_error", "sup_distance"}, {}};
  for (const auto& row : tab.rows) {
    const std::string s = std::to_string(row.s);
    r.check("J[s=" + s + "]", row.rel_error <= 0.02 ? "pass" : "fail", row.J);
    r.kv("formula[s=" + s + "]", row.formula);
    r.kv("rel_error[s=" + s + "]", row.rel_error);
    r.kv("sup_distance[s=" + s + "]", row.sup_distance);
    t.rows.push_back({s, fmt(row.J), fmt(row.formula), fmt(row.rel_error), fmt(row.sup_distance)});
  }
  r.section("CRITICAL_CONE");
  r.kv("free_control_measure", tab.free_control_measure);
  r.check("control_component_trivial", pf(tab.cone_trivial_in_limit), fmt(tab.cone_trivial_in_limit));
  extra.emplace_back("counterexample-table.csv", t.csv());
  return kExitOk;
}

}  // namespace cli_detail

/// Runs one command: prints the text report to `out`, writes the report
/// (and any tables) into the output directory, and returns the exit code.
inline int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  try {
    cfg.validate();
    Loaded l;
    if (cfg.command == "counterexample") {
      if (!cfg.problem_path.empty() || (!cfg.registry_id.empty() && cfg.registry_id != "example1")) {
        throw InputError("counterexample is defined for the registry problem example1 only");
      }
      l.id = "example1";
    } else {
      l = load(cfg);
    }
    Report r;
    echo(r, cfg, l.id);
    std::vector<std::pair<std::string, std::string>> extra;
    int code = kExitOk;
    if (cfg.command == "counterexample") {
      code = counterexample(r, cfg, extra);
    } else if (cfg.command == "analyze") {
      code = l.def.nlp ? analyze_nlp(r, l, cfg) : analyze_control(r, l, cfg, extra);
    } else if (cfg.command == "certify") {
      code = l.def.nlp ? certify_nlp(r, l, cfg) : certify_control(r, l, cfg, extra);
    } else {
      code = perturb(r, l, cfg, extra);
    }
    r.section("RESULT");
    r.check("exit_code", code == kExitOk ? "pass" : (code == kExitInconclusive ? "inconclusive" : "fail"),
            std::to_string(code));
    const std::string text = "subreg-kit " + std::string(kVersion) + "\n\n" + r.text();
    out << text;
    const auto dir = cfg.output_dir();
    const std::string stem = l.id + "-" + cfg.command;
    if (cfg.format == "csv") write_atomic(dir / (stem + ".csv"), r.csv());
    else write_atomic(dir / (stem + ".txt"), text);
    for (const auto& [name, content] : extra) write_atomic(dir / (l.id + "-" + name), content);
    return code;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const PreconditionError& e) {
    err << "refuted: " << e.what() << "\n";
    return kExitRefuted;
  } catch (const EvaluationError& e) {
    err << "inconclusive: " << e.what() << "\n";
    return kExitInconclusive;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace subreg
