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
#include <map>
#include <memory>

#include "pnc/auction.hpp"
#include "random_scenario.hpp"
#include "support.hpp"

using namespace pnc;
using pnc::test::vec;

namespace {

struct Setup {
  StateSpace<double> space;
  Eigen::VectorXd x;
  UtilityProfile<double> profile;
  MenuGrid<double> grid;
  Mechanism<double> mech;
  Setup(StateSpace<double> s, Eigen::VectorXd xx, UtilityProfile<double> p, int resolution)
      : space(std::move(s)),
        x(std::move(xx)),
        profile(std::move(p)),
        grid(enumerate_grid(space, x, profile.agents(), GridOptions{resolution})),
        mech(profile, grid) {}
};

std::unique_ptr<Setup> hand() {
  const Eigen::VectorXd p = vec({0.5, 0.5});
  return std::make_unique<Setup>(StateSpace<double>(p), vec({0, -2}),
                                 UtilityProfile<double>(p, {EntropicUtility<double>(1.0), NeutralUtility<double>{}}),
                                 2);
}

}  // namespace

TEST_CASE("equilibrium bid") {
  CHECK(equilibrium_bid(0.0, 4) == 0.0);
  const double b = equilibrium_bid(0.6, 3);
  CHECK(b == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(std::abs((0.6 - b) - b / 2) <= 1e-12);
  CHECK(equilibrium_bid(1.0, 2) == 0.5);
  CHECK(equilibrium_bid(-1e-13, 2) == 0.0);
  CHECK_THROWS_AS(equilibrium_bid(-1e-6, 2), DomainError);
  CHECK_THROWS_AS(equilibrium_bid(1.0, 1), ParameterError);
}

TEST_CASE("surplus on the hand example") {
  auto s = hand();
  // Independent arithmetic: U_0 = -log(0.5 (1 + e^{2 q})) for q = 0, 1/2, 1.
  const double u0[3] = {0.0, -std::log(0.5 * (1 + std::exp(1.0))), -std::log(0.5 * (1 + std::exp(2.0)))};
  const double avg0 = (u0[0] + u0[1] + u0[2]) / 3;
  const double avg1 = -0.5;
  const double w_max = std::max({u0[0] - 1.0, u0[1] - 0.5, u0[2]});
  CHECK(std::abs(efficient_surplus(s->mech) - (w_max - avg0 - avg1)) <= 1e-12);
  CHECK(efficient_surplus(s->mech) > 0);
}

TEST_CASE("constant utilities: zero surplus") {
  const Eigen::VectorXd p = vec({0.5, 0.5});
  Setup s(StateSpace<double>(p), vec({0, 0}),
          UtilityProfile<double>(p, {EntropicUtility<double>(1.0), EntropicUtility<double>(3.0)}), 3);
  CHECK(efficient_surplus(s.mech) == 0.0);
  const auto run = run_auction_then_pnc(s.mech, 1);
  CHECK((run.final_payoffs - run.averages).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("enlarging a credal set lowers the max-min average") {
  const Eigen::VectorXd p = vec({0.4, 0.6});
  const auto small = UtilityProfile<double>(
      p, {MaxMinUtility<double>(1.0, CredalSet<double>({p}, p)), EntropicUtility<double>(1.0)});
  const auto large = UtilityProfile<double>(
      p, {MaxMinUtility<double>(1.0, CredalSet<double>({p, vec({0.2, 0.8}), vec({0.7, 0.3})}, p)),
          EntropicUtility<double>(1.0)});
  Setup a(StateSpace<double>(p), vec({1, -1}), small, 6);
  Setup b(StateSpace<double>(p), vec({1, -1}), large, 6);
  CHECK(b.mech.averages()(0) <= a.mech.averages()(0));
}

TEST_CASE("transfers and winner draw") {
  const Eigen::VectorXd bids = vec({0.3, 0.9, 0.9});
  const auto t = auction_transfers(bids, 1);
  CHECK(t(1) == -0.9);
  CHECK(t(0) == 0.45);
  CHECK(std::abs(t.sum()) <= 1e-12);
  CHECK(highest_bidders(bids) == std::vector<Index>{1, 2});
  CHECK(draw_winner({1, 2}, 5) == draw_winner({1, 2}, 5));
  std::map<Index, int> freq;
  for (std::uint64_t seed = 0; seed < 3000; ++seed) ++freq[draw_winner({0, 1, 2}, seed)];
  for (const auto& [w, c] : freq) CHECK(std::abs(c - 1000) < 150);
  CHECK(order_with_first(4, 2) == std::vector<Index>{2, 0, 1, 3});
}

TEST_CASE("combined run: equal split and winner invariance") {
  auto s = hand();
  const auto run = run_auction_then_pnc(s->mech, 42);
  const double eta = run.surplus;
  for (Index i = 0; i < 2; ++i) CHECK(std::abs(run.final_payoffs(i) - (run.averages(i) + eta / 2)) <= 1e-9);
  CHECK((run.by_winner.row(0) - run.by_winner.row(1)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(run.final_payoffs.sum() - s->mech.welfare_argmax().second) <= 1e-9);
  CHECK(std::abs(run.auction.transfers.sum()) <= 1e-12);
  CHECK(run.transcript.order[0] == run.auction.winner);
  CHECK(s->mech.table().row(run.transcript.chosen).sum() >= s->mech.welfare_argmax().second - 1e-12);
}

TEST_CASE("bid deviations") {
  auto s = hand();
  const auto& m = s->mech;
  const double eta = efficient_surplus(m);
  const double b = equilibrium_bid(eta, 2);
  const double delta = 1e-3;
  const auto audit = audit_bid_deviation(m, std::vector<double>{b});
  CHECK(std::abs(*audit.max_gain) <= 1e-12);

  const Eigen::VectorXd avg = m.averages();
  const auto over = audit_bid_deviation(m, std::vector<double>{b + delta});
  // Overbidding wins surely and pays more.
  const Eigen::VectorXd mech0 = run_pnc(m, PncOptions{}, order_with_first(2, 0)).payoffs;
  CHECK(std::abs(mech0(0) - (avg(0) + eta)) <= 1e-12);
  CHECK(std::abs((mech0(0) - (b + delta)) - (avg(0) + eta - b - delta)) <= 1e-12);
  CHECK(*over.max_gain < 0);
  // Underbidding loses surely and collects b*/(n-1): exactly the equilibrium payoff.
  const auto under = audit_bid_deviation(m, std::vector<double>{b - delta});
  CHECK(*under.max_gain <= 1e-12);
  const auto full = audit_bid_deviation(m, default_bid_grid(eta, 2));
  CHECK(full.evaluated == 2 * 104);
  CHECK(*full.max_gain <= 1e-9);
}

TEST_CASE("three-agent entropic benchmark: equal surplus shares") {
  std::vector<std::string> names;
  Eigen::VectorXd p(8), x(8);
  for (int mask = 0; mask < 8; ++mask) {
    double prob = 1, total = 0;
    for (int i = 0; i < 3; ++i) {
      const bool hit = (mask >> i) & 1;
      prob *= hit ? 0.1 : 0.9;
      total -= hit ? 1.0 : 0.0;
    }
    names.push_back(std::to_string(mask));
    p(mask) = prob;
    x(mask) = total;
  }
  p /= p.sum();
  const StateSpace<double> space(names, p);
  GridOptions o{20};
  o.classing = ShareClassing::kUniform;
  const auto grid = enumerate_grid(space, x, 3, o);
  const UtilityProfile<double> profile(
      p, {EntropicUtility<double>(1.0), EntropicUtility<double>(2.0), EntropicUtility<double>(4.0)});
  const Mechanism<double> m(profile, grid);
  const auto run = run_auction_then_pnc(m, 3);
  const Eigen::VectorXd share = run.final_payoffs - run.averages;
  CHECK(share.maxCoeff() - share.minCoeff() <= 1e-9);
  CHECK(std::abs(share(0) - run.surplus / 3) <= 1e-9);
}

TEST_CASE("auction properties on random scenarios") {
  for (std::uint64_t seed = 200; seed < 215; ++seed) {
    const auto inst = test::random_instance(seed, 2000);
    CAPTURE(inst->label);
    const Mechanism<double> m(inst->profile, inst->grid);
    const Index n = m.agents();
    const auto run = run_auction_then_pnc(m, seed);
    CHECK(run.surplus >= -1e-9);
    CHECK((run.final_payoffs - run.expected).cwiseAbs().maxCoeff() <= 1e-9);
    for (Index w = 1; w < n; ++w)
      CHECK((run.by_winner.row(w) - run.by_winner.row(0)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(run.final_payoffs.sum() - m.welfare_argmax().second) <= 1e-9);
    const auto audit = audit_bid_deviation(m, default_bid_grid(run.surplus, n));
    CHECK(*audit.max_gain <= 1e-9);
  }
}
