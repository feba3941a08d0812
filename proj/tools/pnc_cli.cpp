// Copyright 2026 The pnc-risk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end with four subcommands (see main).
//
// Exit code 0 means every invariant passed and 2 means invalid input.
// A failed invariant check exits 3; I/O and internal errors exit 1.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pnc/harness/experiment.hpp"
#include "pnc/harness/report.hpp"
#include "pnc/harness/scenario.hpp"
#include "pnc/pnc.hpp"

namespace {

using namespace pnc;
using namespace pnc::harness;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitViolation = 3;

struct Overrides {
  std::string scenario;
  std::optional<int> resolution;
  std::optional<std::string> mode;
  std::optional<double> epsilon;
  std::optional<double> iota;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::string export_grid;
  bool no_refine = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o, bool scenario_required) {
  auto* s = cmd->add_option("--scenario", o.scenario, "Scenario JSON file");
  if (scenario_required) s->required();
  cmd->add_option("--resolution", o.resolution, "Grid resolution (overrides the file)")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", o.mode, "Mechanism mode")->check(CLI::IsMember({"exact", "perturbed"}));
  cmd->add_option("--epsilon", o.epsilon, "Perturbation size");
  cmd->add_option("--iota", o.iota, "Perturbation width, in (0, 1)");
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"structured", "tabular", "both"}));
  cmd->add_flag("--quiet", o.quiet, "Only print failing checks");
}

ScenarioConfig configure(const Overrides& o, const ScenarioConfig& base) {
  ScenarioConfig c = base;
  if (o.resolution) c.grid.resolution = *o.resolution;
  if (o.mode) c.mode = *o.mode == "exact" ? PncMode::kExactSpne : PncMode::kPerturbed;
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.iota) c.iota = *o.iota;
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.format) c.format = *o.format;
  // Re-validate with the overrides applied.
  return parse_scenario(scenario_to_json(c));
}

ScenarioConfig load(const Overrides& o) { return configure(o, load_scenario(o.scenario)); }

void print_summary(const RunReport& r, bool quiet) {
  Index failed = 0;
  for (const auto& c : r.invariants) {
    if (!c.passed) ++failed;
    if (c.passed && quiet) continue;
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << "  [" << c.detail << "]";
    std::cout << '\n';
  }
  for (const auto& w : r.warnings) std::cout << "warning: " << w << '\n';
  std::cout.precision(10);
  std::cout << "grid points " << r.grid.points << ", W_max " << r.grid.welfare_max << ", chosen "
            << r.transcript.chosen << " (" << to_string(r.transcript.mode) << ")\n";
  for (const auto& a : r.agents) {
    std::cout << "agent " << a.agent << ": avg " << a.underbar_avg << ", payoff " << a.mechanism_payoff;
    if (a.final_payoff) std::cout << ", after auction " << *a.final_payoff;
    std::cout << '\n';
  }
  std::cout << (r.invariants.size() - std::size_t(failed)) << '/' << r.invariants.size()
            << " invariant checks passed\n";
}

int execute(const ScenarioConfig& config, const Overrides& o, bool audit_only) {
  RunFlags flags;
  flags.audit_only = audit_only;
  flags.refine = !o.no_refine;
  const RunReport report = run_experiment(config, flags);
  for (const auto& path : emit_report(report, config.format, config.out_dir))
    if (!o.quiet) std::cout << "wrote " << path.string() << '\n';
  if (!o.export_grid.empty()) {
    const auto space = build_space(config);
    const auto x = aggregate_risk(build_endowments(config), space);
    const auto grid = enumerate_grid(space, x, config.agents(), config.grid);
    std::ofstream out(o.export_grid);
    if (!out) throw Error("cannot write " + o.export_grid);
    export_grid_csv(grid, out, config.states);
  }
  print_summary(report, o.quiet);
  return report.all_passed() ? kExitOk : kExitViolation;
}

int bench(const Overrides& o) {
  ScenarioConfig base = o.scenario.empty() ? hurricane_scenario() : load_scenario(o.scenario);
  const ScenarioConfig config = configure(o, base);
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };
  const auto t0 = clock::now();
  const auto space = build_space(config);
  const auto x = aggregate_risk(build_endowments(config), space);
  const auto profile = build_profile(config);
  const auto grid = enumerate_grid(space, x, config.agents(), config.grid);
  const auto t1 = clock::now();
  const auto table = evaluate_on_grid(profile, grid);
  RefineOptions refine;
  refine.enabled = !o.no_refine;
  const auto best = maximize_welfare(profile, grid, table, 0, refine);
  const auto t2 = clock::now();
  RunFlags flags;
  flags.refine = !o.no_refine;
  const RunReport report = run_experiment(config, flags);
  const auto t3 = clock::now();

  std::cout.precision(6);
  std::cout << "scenario " << config.name << ": " << grid.size() << " grid points\n"
            << "grid build      " << seconds(t0, t1) << " s\n"
            << "welfare search  " << seconds(t1, t2) << " s\n"
            << "full experiment " << seconds(t2, t3) << " s\n";
  std::cout.precision(10);
  std::cout << "welfare " << best.value << " shares";
  const Index s = [&] {
    for (Index k = 0; k < x.size(); ++k)
      if (x(k) != 0) return k;
    return Index(0);
  }();
  for (Index i = 0; i < config.agents(); ++i)
    std::cout << ' ' << (x(s) != 0 ? best.allocation(i, s) / x(s) : 0.0);
  std::cout << '\n';
  if (report.closed_form) {
    std::cout << "closed form " << report.closed_form->value << " shares";
    for (double w : report.closed_form->weights) std::cout << ' ' << w;
    std::cout << '\n';
  }
  print_summary(report, true);
  return report.all_passed() ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Price-and-choose risk sharing simulator"};
  app.require_subcommand(1);
  Overrides o;

  auto* run = app.add_subcommand("run", "Run the full pipeline and write a report");
  add_common(run, o, true);
  run->add_option("--export-grid", o.export_grid, "Also write the menu grid as CSV");
  run->add_flag("--no-refine", o.no_refine, "Skip local welfare refinement");
  auto* validate = app.add_subcommand("validate", "Validate a scenario file without running it");
  add_common(validate, o, true);
  auto* audit = app.add_subcommand("audit", "Run without the auction stage");
  add_common(audit, o, true);
  audit->add_flag("--no-refine", o.no_refine, "Skip local welfare refinement");
  auto* bench_cmd = app.add_subcommand("bench", "Time the pipeline (built-in three-farmer scenario by default)");
  add_common(bench_cmd, o, false);
  bench_cmd->add_flag("--no-refine", o.no_refine, "Skip local welfare refinement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*validate) {
      const ScenarioConfig config = load(o);
      const auto space = build_space(config);
      build_endowments(config);
      build_profile(config);
      std::cout << "scenario '" << config.name << "' is valid: " << config.agents() << " agents, "
                << space.size() << " states, " << composition_count(config.grid.resolution, config.agents())
                << " share points per class\n";
      return kExitOk;
    }
    if (*run) return execute(load(o), o, false);
    if (*audit) return execute(load(o), o, true);
    if (*bench_cmd) return bench(o);
  } catch (const ValidationError& e) {
    std::cerr << "validation failed:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kExitInvalid;
  } catch (const StructuralError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const BudgetError& e) {
    std::cerr << "grid budget: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const DomainError& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kExitViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}
