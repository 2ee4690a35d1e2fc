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

#include <iostream>

#include "CLI11.hpp"
#include "subreg/cli.hpp"

int main(int argc, char** argv) {
  subreg::RunConfig cfg;
  CLI::App app{"Strong metric subregularity toolkit"};
  app.set_version_flag("--version", std::string("subreg-kit ") + subreg::kVersion);
  app.require_subcommand(1, 1);

  int mesh_n = 0;
  auto common = [&](CLI::App* sub, bool needs_problem) {
    if (needs_problem) {
      auto* f = sub->add_option("--problem", cfg.problem_path, "problem file");
      auto* r = sub->add_option("--registry", cfg.registry_id, "registry problem id");
      f->excludes(r);
    } else {
      sub->add_option("--registry", cfg.registry_id, "registry problem id (example1)");
    }
    sub->add_option("--mesh-n", mesh_n, "mesh intervals");
    sub->add_option("--delta-sweep", cfg.delta_sweep, "delta values")->delimiter(',');
    sub->add_option("--tol-act", cfg.tol.act, "activity tolerance");
    sub->add_option("--tol-mul", cfg.tol.mul, "multiplier tolerance");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out_dir, "output directory (default $SUBREG_OUT or .)");
    sub->add_option("--format", cfg.format, "report file format")
        ->check(CLI::IsMember({"text", "csv"}));
  };
  auto* analyze = app.add_subcommand("analyze", "residuals, active sets and constraint qualifications");
  auto* certify = app.add_subcommand("certify", "second-order coercivity and growth");
  auto* perturb = app.add_subcommand("perturb", "sampled subregularity constant");
  auto* counter = app.add_subcommand("counterexample", "sequence table for example1");
  common(analyze, true);
  common(certify, true);
  common(perturb, true);
  common(counter, false);
  perturb->add_option("--magnitudes", cfg.magnitudes, "perturbation magnitudes")->delimiter(',');
  perturb->add_option("--samples", cfg.samples, "directions per magnitude");
  counter->add_option("--s-values", cfg.s_values, "sequence indices")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : subreg::kExitInput;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (mesh_n) cfg.mesh_n = mesh_n;
  return subreg::run_command(cfg, std::cout, std::cerr);
}
