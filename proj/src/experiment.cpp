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

#include "pnc/harness/experiment.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "pnc/pnc.hpp"

namespace pnc::harness {

namespace {

constexpr double kIdentityTol = 1e-9;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Runs one pipeline stage, prefixing any library error with the stage name.
template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  const std::string prefix = std::string(name) + ": ";
  try {
    return body();
  } catch (const ValidationError& e) {
    std::vector<std::string> problems;
    for (const auto& p : e.problems()) problems.push_back(prefix + p);
    throw ValidationError(problems);
  } catch (const StructuralError& e) {
    throw StructuralError(prefix + e.what());
  } catch (const BudgetError& e) {
    throw BudgetError(prefix + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(prefix + e.what());
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(prefix + e.what());
  } catch (const UnsupportedProfileError& e) {
    throw UnsupportedProfileError(prefix + e.what());
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  }
}

class Checks {
 public:
  void add(std::string name, bool passed, std::string detail) {
    list_.push_back({std::move(name), passed, std::move(detail)});
  }
  // Passes when `residual` <= `tol`.
  void bound(std::string name, double residual, double tol) {
    add(std::move(name), residual <= tol, "residual " + fmt(residual) + " (tol " + fmt(tol) + ")");
  }
  std::vector<InvariantCheck> take() { return std::move(list_); }

 private:
  std::vector<InvariantCheck> list_;
};

double spread(const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); }

void check_transcript(Checks& checks, const std::string& tag, const Mechanism<double>& mech,
                      const Transcript<double>& t) {
  const Index n = mech.agents();
  // Payoff identity, recomputed independently of settle_payoffs.
  double worst = 0;
  for (Index k = 0; k < n; ++k) {
    const double up = k < n - 1 ? t.schedules[k].values(t.chosen) : 0.0;
    const double down = k > 0 ? t.schedules[k - 1].values(t.chosen) : 0.0;
    const double g = mech.table()(t.chosen, t.order[k]) + up - down;
    worst = std::max(worst, std::abs(g - t.payoffs(t.order[k])));
  }
  checks.bound(tag + ".payoff_identity", worst, kIdentityTol);
  checks.bound(tag + ".budget_balance", std::abs(t.payoffs.sum() - t.utilities.sum()), kIdentityTol);
  for (std::size_t k = 0; k < t.schedules.size(); ++k) {
    const auto c = check_schedule(mech, t.schedules[k]);
    const std::string s = tag + ".schedule[" + std::to_string(k) + "]";
    checks.bound(s + ".zero_mean", std::abs(c.mean), kIdentityTol);
    checks.add(s + ".lipschitz_cap", c.within_cap, "ratio " + fmt(c.lip) + " cap " + fmt(c.lip_cap));
    checks.add(s + ".sup_norm", c.within_sup_bound, "sup " + fmt(c.sup) + " bound " + fmt(c.sup_bound));
  }
  const double w_max = mech.welfare_argmax().second;
  checks.bound(tag + ".efficiency", w_max - mech.table().row(t.chosen).sum(), kIdentityTol);
}

}  // namespace

RunReport run_experiment(const ScenarioConfig& config, const RunFlags& flags) {
  RunReport report;
  report.scenario = scenario_to_json(config);
  Checks checks;

  const auto space = stage("core-space", [&] { return build_space(config); });
  const auto endow = stage("core-space", [&] { return build_endowments(config); });
  const Eigen::VectorXd x = aggregate_risk(endow, space);
  const auto profile = stage("utility", [&] { return build_profile(config); });
  const Index n = profile.agents();
  const auto grid = stage("menu", [&] { return enumerate_grid(space, x, n, config.grid); });

  MechanismOptions mopt;
  mopt.lipschitz = config.lipschitz;
  mopt.headroom = config.headroom;
  mopt.sampling.seed = derive_seed(config.seed, "pairs");
  const Mechanism<double> mech = stage("mechanism", [&] { return Mechanism<double>(profile, grid, mopt); });
  for (const auto& w : mech.warnings()) report.warnings.push_back(w);

  // Grid and metric.
  {
    bool feasible = true;
    std::string first_bad;
    for (Index k = 0; k < grid.size() && feasible; ++k) {
      const auto r = validate_feasible(grid.points[k], x);
      if (!r.ok()) {
        feasible = false;
        first_bad = "point " + std::to_string(k) + " violates " + to_string(r.violations.front().rule);
      }
    }
    checks.add("menu.grid_feasible", feasible, feasible ? std::to_string(grid.size()) + " points" : first_bad);
    checks.add("menu.weights_positive", (grid.weights.array() > 0).all(), "");
    long double mass = 0;  // extended precision keeps the sum's own rounding out of the check
    for (Index k = 0; k < grid.size(); ++k) mass += grid.weights(k);
    checks.bound("menu.weights_normalized", double(std::abs(mass - 1.0L)), 1e-12);
    double norm_err = 0;
    for (Index m = 0; m < grid.metric.size(); ++m) norm_err = std::max(norm_err, std::abs(grid.metric.test_norm(m) - 1.0));
    checks.bound("menu.metric_unit_norms", norm_err, 1e-12);
  }

  // Utility regularity.
  {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, x.size());
    double norm0 = 0, cash = 0;
    const auto [argmax, w_max] = mech.welfare_argmax();
    for (Index i = 0; i < n; ++i) {
      norm0 = std::max(norm0, std::abs(evaluate(profile, zero, i)));
      for (Index k : {Index(0), argmax, grid.size() - 1})
        for (double c : {-10.0, -1.0, 0.0, 1.0, 10.0})
          cash = std::max(cash, check_cash_invariance(profile, grid.points[k], i, c));
    }
    checks.bound("utility.normalization", norm0, 1e-12);
    checks.bound("utility.cash_invariance", cash, kIdentityTol);
    const Eigen::MatrixXd ref = evaluate_reference_on_grid(profile, grid);
    checks.bound("utility.maxmin_below_reference", std::max(0.0, (mech.table() - ref).maxCoeff()), 1e-12);

    report.grid.points = grid.size();
    report.grid.resolution = grid.resolution;
    report.grid.classing = report.scenario["grid"]["classing"].get<std::string>();
    report.grid.metric_size = grid.metric.size();
    report.grid.lipschitz = mech.lipschitz();
    report.grid.cap = mech.cap();
    report.grid.diameter = mech.diameter().value;
    report.grid.diameter_exact = mech.diameter().exact;
    report.grid.agent_lipschitz.assign(mech.agent_lipschitz().data(),
                                       mech.agent_lipschitz().data() + n);
    report.grid.pairs = Index(mech.pairs().pairs.size());
    report.grid.pairs_exhaustive = mech.pairs().exhaustive;
    report.grid.welfare_max = w_max;
    report.grid.welfare_argmax = argmax;
    if (!mech.diameter().exact)
      report.warnings.push_back("grid diameter is a lower bound; the sup-norm check is conservative");
    if (!mech.pairs().exhaustive)
      report.warnings.push_back("Lipschitz ratios use sampled point pairs");
  }

  // Welfare.
  report.welfare = stage("welfare", [&] { return maximize_welfare(profile, grid, mech.table()); });
  checks.bound("welfare.value_sum", std::abs(report.welfare.value - report.welfare.per_agent.sum()), kIdentityTol);
  if (flags.refine) {
    RefineOptions ropt;
    ropt.enabled = true;
    report.refined = stage("welfare", [&] { return maximize_welfare(profile, grid, mech.table(), 0, ropt); });
    checks.add("welfare.refined_feasible", validate_feasible(report.refined->allocation, x).ok(), "");
    checks.bound("welfare.refined_not_worse", std::max(0.0, report.welfare.value - report.refined->value), 1e-12);
  }
  try {
    const auto cf = closed_form_entropic(profile, x);
    ClosedFormSummary s;
    s.weights.assign(cf.weights.data(), cf.weights.data() + n);
    s.lambda = cf.lambda;
    s.tilt.assign(cf.tilt.data(), cf.tilt.data() + cf.tilt.size());
    s.value = cf.result.value;
    s.tilt_residual = cf.tilt_residual;
    checks.bound("welfare.closed_form_tilt", cf.tilt_residual, 1e-12);
    checks.bound("welfare.closed_form_dominates_grid", std::max(0.0, report.welfare.value - cf.result.value), 1e-9);
    report.closed_form = std::move(s);
  } catch (const UnsupportedProfileError&) {
    // Only single-prior entropic profiles have a closed form.
  }

  // Mechanism.
  PncOptions popt;
  popt.mode = config.mode;
  popt.epsilon = config.epsilon;
  popt.iota = config.iota;
  report.transcript = stage("mechanism", [&] { return run_pnc(mech, popt); });
  const Transcript<double> exact = config.mode == PncMode::kExactSpne
                                       ? report.transcript
                                       : stage("mechanism", [&] { return run_pnc(mech, PncOptions{}); });
  const Eigen::VectorXd avg = mech.averages();
  const double w_max = report.grid.welfare_max;
  {
    check_transcript(checks, "mechanism.exact", mech, exact);
    double indiff = 0;
    for (std::size_t k = 0; k < exact.schedules.size(); ++k)
      indiff = std::max(indiff, spread(mech.tail_welfare(Index(k) + 1, exact.order) - exact.schedules[k].values));
    checks.bound("mechanism.indifference", indiff, kIdentityTol);
    double ident = 0, tail_avg = 0;
    for (Index k = 1; k < n; ++k) {
      const Index a = exact.order[k];
      ident = std::max(ident, std::abs(exact.payoffs(a) - avg(a)));
      tail_avg += avg(a);
    }
    ident = std::max(ident, std::abs(exact.payoffs(exact.order[0]) - (w_max - tail_avg)));
    checks.bound("mechanism.spne_payoffs", ident, kIdentityTol);

    if (config.mode == PncMode::kPerturbed) {
      const auto& t = report.transcript;
      const auto& p = *t.perturbation;
      check_transcript(checks, "mechanism.perturbed", mech, t);
      checks.add("mechanism.perturbed_selection", t.chosen == p.target && t.terminal_ties == 1,
                 "chosen " + std::to_string(t.chosen) + " target " + std::to_string(p.target) + " ties " +
                     std::to_string(t.terminal_ties));
      const double bump = p.epsilon * (1.0 - p.beta);
      double pert = std::abs(t.payoffs(t.order[0]) - (w_max - tail_avg - bump));
      pert = std::max(pert, std::abs(t.payoffs(t.order[n - 1]) - (avg(t.order[n - 1]) + bump)));
      for (Index k = 1; k + 1 < n; ++k) pert = std::max(pert, std::abs(t.payoffs(t.order[k]) - avg(t.order[k])));
      checks.bound("mechanism.perturbed_payoffs", pert, kIdentityTol);
    }
  }

  // First-mover deviation audit.
  {
    const auto audit = stage("mechanism", [&] {
      return audit_first_mover_bound(mech, exact, config.deviations, derive_seed(config.seed, "deviations"));
    });
    report.audits.push_back({"first_mover_deviation", audit.samples, audit.max_gain});
    if (audit.rejected > 0)
      report.warnings.push_back(std::to_string(audit.rejected) + " sampled deviations were inadmissible and skipped");
    checks.add("mechanism.first_mover_bound", !audit.max_gain || *audit.max_gain <= kIdentityTol,
               audit.max_gain ? "max gain " + fmt(*audit.max_gain) : "no admissible deviation sampled");
  }

  // Auction.
  if (!flags.audit_only) {
    const auto run = stage("auction", [&] { return run_auction_then_pnc(mech, derive_seed(config.seed, "auction")); });
    AuctionSection a;
    a.outcome = run.auction;
    a.surplus = run.surplus;
    a.averages = run.averages;
    a.final_payoffs = run.final_payoffs;
    a.expected = run.expected;
    a.by_winner = run.by_winner;
    a.transcript = run.transcript;

    check_transcript(checks, "auction.mechanism", mech, run.transcript);
    checks.bound("auction.transfers_sum", std::abs(run.auction.transfers.sum()), 1e-12);
    checks.add("auction.winner_is_top_bid", run.auction.bids(run.auction.winner) == run.auction.bids.maxCoeff(), "");
    const double b = run.auction.bids(run.auction.winner);
    checks.bound("auction.bid_indifference", std::abs(std::max(run.surplus, 0.0) - b - b / double(n - 1)), 1e-12);
    checks.bound("auction.final_payoffs", (run.final_payoffs - run.expected).cwiseAbs().maxCoeff(), kIdentityTol);
    double across = 0;
    for (Index w = 0; w < n; ++w)
      across = std::max(across, (run.by_winner.row(w) - run.by_winner.row(0)).cwiseAbs().maxCoeff());
    checks.bound("auction.winner_invariance", across, kIdentityTol);
    checks.bound("auction.equal_split", spread(run.final_payoffs - run.averages), kIdentityTol);
    checks.bound("auction.total_welfare", std::abs(run.final_payoffs.sum() - w_max), kIdentityTol);

    const auto bids = default_bid_grid(run.surplus, n, config.bid_points);
    const auto audit = stage("auction", [&] { return audit_bid_deviation(mech, bids); });
    report.audits.push_back({"bid_deviation", audit.evaluated, audit.max_gain});
    checks.add("auction.bid_deviation", !audit.max_gain || *audit.max_gain <= kIdentityTol,
               audit.max_gain ? "max gain " + fmt(*audit.max_gain) : "no bids evaluated");
    report.auction = std::move(a);
  }

  const Eigen::MatrixXd ref = evaluate_reference_on_grid(profile, grid);
  for (Index i = 0; i < n; ++i) {
    AgentRow row;
    row.agent = i;
    row.avg = integrate(grid, ref.col(i));
    row.underbar_avg = avg(i);
    row.mechanism_payoff = report.transcript.payoffs(i);
    if (report.auction) row.final_payoff = report.auction->final_payoffs(i);
    report.agents.push_back(row);
  }
  report.invariants = checks.take();
  return report;
}

}  // namespace pnc::harness
