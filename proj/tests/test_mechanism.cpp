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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "pnc/mechanism.hpp"
#include "random_scenario.hpp"
#include "support.hpp"

using namespace pnc;
using pnc::test::vec;

namespace {

// Two agents sharing X = (0, -2) under P = (1/2, 1/2) on the 3-point grid:
// agent 0 entropic (gamma 1), agent 1 risk neutral, so U_1 = (-1, -0.5, 0).
struct Hand {
  StateSpace<double> space{vec({0.5, 0.5})};
  Eigen::VectorXd x = vec({0, -2});
  UtilityProfile<double> profile{vec({0.5, 0.5}), {EntropicUtility<double>(1.0), NeutralUtility<double>{}}};
  MenuGrid<double> grid = enumerate_grid(space, x, 2, GridOptions{2});
  Mechanism<double> mech{profile, grid};
};

std::unique_ptr<Hand> hand() { return std::make_unique<Hand>(); }

double w_max_minus_tail(const Mechanism<double>& m, const std::vector<Index>& order) {
  double tail = 0;
  const Eigen::VectorXd avg = m.averages();
  for (std::size_t k = 1; k < order.size(); ++k) tail += avg(order[k]);
  return m.welfare_argmax().second - tail;
}

}  // namespace

TEST_CASE("equalizing schedule on the 3-point grid") {
  auto h = hand();
  const auto& m = h->mech;
  REQUIRE(m.grid().size() == 3);
  CHECK(m.table()(0, 1) == -1.0);
  CHECK(m.table()(1, 1) == -0.5);
  CHECK(m.table()(2, 1) == 0.0);
  const auto p = equalizing_price(m, 0);
  CHECK(p.values(0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(std::abs(p.values(1)) <= 1e-15);
  CHECK(p.values(2) == doctest::Approx(0.5).epsilon(1e-15));
  const Eigen::VectorXd net = m.table().col(1) - p.values;
  for (Index k = 0; k < 3; ++k) CHECK(net(k) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(check_schedule(m, p).ok());

  PairSet<double> pairs = m.pairs();
  const auto zero = equalizing_price(m.grid(), pairs, Eigen::VectorXd(Eigen::VectorXd::Constant(3, 2.0)));
  CHECK(zero.values.isZero());
  CHECK_THROWS_AS(equalizing_price(m, 1), ParameterError);
}

TEST_CASE("exact run on the hand example") {
  auto h = hand();
  const auto t = run_pnc(h->mech, PncOptions{});
  CHECK(t.selection == SelectionRule::kSpne);
  CHECK(t.terminal_ties == 3);  // full indifference under p*
  CHECK(t.chosen == 0);         // welfare vertex: the neutral agent takes the loss
  CHECK(h->mech.welfare_argmax().first == 0);
  CHECK(std::abs(t.payoffs(1) - (-0.5)) <= 1e-12);
  CHECK(std::abs(t.payoffs(0) - (h->mech.welfare_argmax().second + 0.5)) <= 1e-12);
  CHECK(std::abs(t.payoffs.sum() - t.utilities.sum()) <= 1e-12);
}

TEST_CASE("follower best response and ties") {
  auto h = hand();
  const auto& m = h->mech;
  PriceSchedule<double> none{Eigen::VectorXd::Zero(3), 0};
  const Eigen::VectorXd u = m.table().col(1);
  CHECK(follower_best_response(u, none).index == 2);
  const auto exact = equalizing_price(m, 0);
  const auto br = follower_best_response(u, exact);
  CHECK(br.ties == 3);
  CHECK(br.index == 0);
  // Adding a constant to the schedule leaves the argmax alone.
  PriceSchedule<double> shifted{(exact.values.array() + 3.25).matrix(), exact.declared_lip};
  CHECK(follower_best_response(u, shifted).index == br.index);
  CHECK_THROWS_AS(follower_best_response(Eigen::VectorXd(Eigen::VectorXd::Zero(2)), none), StructuralError);
}

TEST_CASE("perturbation") {
  auto h = hand();
  const auto& m = h->mech;
  const auto base = equalizing_price(m, 0);
  const double iota = 0.1;
  const double eps_max = iota * (m.cap() - base.declared_lip);
  const Index target = 2;
  const auto out = perturbed_price(m, base, target, 0.5 * eps_max, iota);
  CHECK(out.psi(target) == 1.0);
  for (Index k = 0; k < 3; ++k)
    if (k != target) CHECK(out.psi(k) < 1.0);
  CHECK(out.beta == doctest::Approx(out.psi.mean()));
  CHECK(check_schedule(m, out.schedule).ok());
  const auto br = follower_best_response(Eigen::VectorXd(m.table().col(1)), out.schedule);
  CHECK(br.index == target);
  CHECK(br.ties == 1);

  // Small epsilon: output approaches the base pointwise.
  const auto tiny = perturbed_price(m, base, target, 1e-12, iota);
  CHECK((tiny.schedule.values - base.values).cwiseAbs().maxCoeff() <= 1e-11);

  CHECK_THROWS_AS(perturbed_price(m, base, target, 0.0, iota), ParameterError);
  CHECK_THROWS_AS(perturbed_price(m, base, target, 2 * eps_max, iota), ParameterError);
  CHECK_THROWS_AS(perturbed_price(m, base, target, 0.5 * eps_max, 1.0), ParameterError);
  CHECK_THROWS_AS(perturbed_price(m, base, Index(3), 0.5 * eps_max, iota), ParameterError);
}

TEST_CASE("constant utilities: zero schedules") {
  const StateSpace<double> s(vec({0.5, 0.5}));
  const UtilityProfile<double> profile(s.probs(), {NeutralUtility<double>{}, EntropicUtility<double>(2.0)});
  const auto grid = enumerate_grid(s, vec({0, 0}), 2, GridOptions{4});
  const Mechanism<double> m(profile, grid);
  const auto t = run_pnc(m, PncOptions{});
  CHECK(t.schedules[0].values.isZero());
  CHECK(t.payoffs.isZero());
}

TEST_CASE("L too small raises a configuration error") {
  auto h = hand();
  MechanismOptions o;
  o.lipschitz = 1e-3;
  const Mechanism<double> tight(h->profile, h->grid, o);
  CHECK_THROWS_AS(equalizing_price(tight, 0), ConfigurationError);
  CHECK_FALSE(tight.warnings().empty());
}

TEST_CASE("deviation audit") {
  auto h = hand();
  const auto& m = h->mech;
  const auto t = run_pnc(m, PncOptions{});
  const auto none = audit_first_mover_bound(m, t, 0, 1);
  CHECK_FALSE(none.max_gain.has_value());
  const auto audit = audit_first_mover_bound(m, t, 100, 1);
  REQUIRE(audit.max_gain.has_value());
  CHECK(*audit.max_gain <= 1e-9);
  CHECK(audit.samples + audit.rejected == 100);

  PncOptions pert;
  pert.mode = PncMode::kPerturbed;
  CHECK_THROWS_AS(audit_first_mover_bound(m, run_pnc(m, pert), 10, 1), ParameterError);
}

TEST_CASE("perturbed family as first-mover deviations") {
  // n = 2: posting p^eps yields W_max - Avg_2 - eps (1 - beta), below the
  // equilibrium payoff for every eps > 0.
  const StateSpace<double> s(vec({0.3, 0.7}));
  const UtilityProfile<double> profile(s.probs(), {EntropicUtility<double>(0.5), EntropicUtility<double>(2.0)});
  const auto grid = enumerate_grid(s, vec({1, -2}), 2, GridOptions{8});
  const Mechanism<double> m(profile, grid);
  const auto order = m.identity_order();
  const auto t = run_pnc(m, PncOptions{});
  const double eq = t.payoffs(0);
  CHECK(std::abs(eq - w_max_minus_tail(m, order)) <= 1e-12);
  const auto base = t.schedules[0];
  const Index target = m.welfare_argmax().first;
  const double iota = 0.1;
  for (double frac : {0.05, 0.2, 0.5, 1.0}) {
    const double eps = frac * iota * (m.cap() - base.declared_lip);
    const auto pe = perturbed_price(m, base, target, eps, iota);
    const auto [payoff, chosen] = first_mover_payoff(m, pe.schedule.values, order);
    CHECK(chosen == target);
    CHECK(std::abs(payoff - (eq - eps * (1 - pe.beta))) <= 1e-12);
    CHECK(payoff < eq);
  }
}

TEST_CASE("mechanism properties on random scenarios") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto inst = test::random_instance(seed, 3000);
    CAPTURE(inst->label);
    const Mechanism<double> m(inst->profile, inst->grid);
    const Index n = m.agents();
    const auto [argmax, w_max] = m.welfare_argmax();

    // Any order of agents, exact mode.
    std::vector<Index> order = m.identity_order();
    std::reverse(order.begin(), order.end());
    for (const auto& ord : {m.identity_order(), order}) {
      const auto t = run_pnc(m, PncOptions{}, ord);
      CHECK(std::abs(t.payoffs.sum() - t.utilities.sum()) <= 1e-9);
      CHECK(m.table().row(t.chosen).sum() >= w_max - 1e-12);
      const Eigen::VectorXd avg = m.averages();
      for (Index k = 1; k < n; ++k) CHECK(std::abs(t.payoffs(ord[k]) - avg(ord[k])) <= 1e-9);
      CHECK(std::abs(t.payoffs(ord[0]) - w_max_minus_tail(m, ord)) <= 1e-9);
      for (Index k = 0; k + 1 < n; ++k) {
        const Eigen::VectorXd net = m.tail_welfare(k + 1, ord) - t.schedules[k].values;
        CHECK(net.maxCoeff() - net.minCoeff() <= 1e-9);
        CHECK(check_schedule(m, t.schedules[k]).ok());
        // Uniqueness: any schedule flattening the continuation, once
        // normalized, is the equalizing one.
        Eigen::VectorXd other = m.tail_welfare(k + 1, ord).array() + 1.7;
        other.array() -= integrate(m.grid(), other);
        CHECK((other - t.schedules[k].values).cwiseAbs().maxCoeff() <= 1e-9);
      }
    }

    PncOptions pert;
    pert.mode = PncMode::kPerturbed;
    const auto tp = run_pnc(m, pert);
    CHECK(tp.chosen == argmax);
    CHECK(tp.terminal_ties == 1);
    for (const auto& p : tp.schedules) CHECK(check_schedule(m, p).ok());
    const double bump = tp.perturbation->epsilon * (1 - tp.perturbation->beta);
    CHECK(std::abs(tp.payoffs(0) - (w_max_minus_tail(m, m.identity_order()) - bump)) <= 1e-9);
  }
}
