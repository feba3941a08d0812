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
#include <random>

#include "pnc/welfare.hpp"
#include "support.hpp"

using namespace pnc;
using pnc::test::mat;
using pnc::test::vec;

namespace {

struct Farmers {
  StateSpace<double> space;
  Eigen::VectorXd x;
};

Farmers three_farmers(double hit, double loss) {
  std::vector<std::string> names;
  Eigen::VectorXd p(8), x(8);
  for (int mask = 0; mask < 8; ++mask) {
    double prob = 1, total = 0;
    for (int i = 0; i < 3; ++i) {
      const bool struck = (mask >> i) & 1;
      prob *= struck ? hit : 1 - hit;
      total -= struck ? loss : 0;
    }
    names.push_back(std::to_string(mask));
    p(mask) = prob;
    x(mask) = total;
  }
  return {StateSpace<double>(names, p), x};
}

// Three-agent weights w_i = gamma_j gamma_k / (g1 g2 + g2 g3 + g3 g1).
Eigen::Vector3d pairwise_weights(double g1, double g2, double g3) {
  const double d = g1 * g2 + g2 * g3 + g3 * g1;
  return {g2 * g3 / d, g3 * g1 / d, g1 * g2 / d};
}

// Optimal total entropic welfare: -(1/lambda) log E[exp(-lambda X)].
double optimal_entropic_total(double lambda, const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
  long double s = 0;
  for (Index k = 0; k < x.size(); ++k) s += (long double)p(k) * std::exp(-(long double)lambda * x(k));
  return double(-std::log(s) / lambda);
}

UtilityProfile<double> entropic_profile(const Eigen::VectorXd& p, std::initializer_list<double> gammas) {
  std::vector<Utility<double>> u;
  for (double g : gammas) u.emplace_back(EntropicUtility<double>(g));
  return UtilityProfile<double>(p, std::move(u));
}

}  // namespace

TEST_CASE("tail welfare") {
  const Eigen::VectorXd p = vec({0.5, 0.5});
  const auto profile = entropic_profile(p, {1, 2, 4});
  const Eigen::MatrixXd xi = mat(3, 2, {0.1, -1, 0.2, 0, -0.3, 0.5});
  CHECK(welfare(profile, xi, 2) == evaluate(profile, xi, 2));
  CHECK(welfare(profile, xi, 0) ==
        doctest::Approx(evaluate(profile, xi, 0) + evaluate(profile, xi, 1) + evaluate(profile, xi, 2)));
  CHECK(welfare(profile, Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 2)), 1) == 0.0);
  CHECK_THROWS_AS(welfare(profile, xi, 3), ParameterError);
}

TEST_CASE("closed form for gamma = (1, 2, 4)") {
  const auto [space, x] = three_farmers(0.1, 1.0);
  const auto cf = closed_form_entropic(vec({1, 2, 4}), x, space.probs());
  const Eigen::Vector3d w = pairwise_weights(1, 2, 4);
  CHECK(std::abs(w(0) - 4.0 / 7) <= 1e-15);
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(cf.weights(i) - w(i)) <= 1e-15);
  CHECK(std::abs(cf.lambda - 4.0 / 7) <= 1e-15);
  CHECK(cf.tilt_residual <= 1e-12);
  CHECK(space.probs().dot(cf.tilt) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(cf.result.value - optimal_entropic_total(4.0 / 7, x, space.probs())) <= 1e-12);
  CHECK(validate_feasible(cf.result.allocation, x).ok());

  const auto equal = closed_form_entropic(vec({3, 3, 3, 3}), x, space.probs());
  for (Index i = 0; i < 4; ++i) CHECK(equal.weights(i) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("closed form matches the optimum for random risk aversions") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> g(0.2, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const double g1 = g(rng), g2 = g(rng), g3 = g(rng);
    const auto [space, x] = three_farmers(0.05 + 0.01 * (trial % 10), 1.0 + trial % 3);
    const auto cf = closed_form_entropic(vec({g1, g2, g3}), x, space.probs());
    const Eigen::Vector3d w = pairwise_weights(g1, g2, g3);
    CHECK((cf.weights - Eigen::VectorXd(w)).cwiseAbs().maxCoeff() <= 1e-14);
    const double lambda = 1 / (1 / g1 + 1 / g2 + 1 / g3);
    CHECK(std::abs(cf.result.value - optimal_entropic_total(lambda, x, space.probs())) <= 1e-11);
  }
}

TEST_CASE("closed form rejects unsupported profiles") {
  const Eigen::VectorXd p = vec({0.5, 0.5});
  const UtilityProfile<double> neutral(p, {EntropicUtility<double>(1.0), NeutralUtility<double>{}});
  CHECK_THROWS_AS(closed_form_entropic(neutral, vec({1, -1})), UnsupportedProfileError);
  const UtilityProfile<double> ambiguous(
      p, {EntropicUtility<double>(1.0),
          MaxMinUtility<double>(1.0, CredalSet<double>({p, vec({0.3, 0.7})}, p))});
  CHECK_THROWS_AS(closed_form_entropic(ambiguous, vec({1, -1})), UnsupportedProfileError);
  const UtilityProfile<double> single(
      p, {EntropicUtility<double>(1.0), MaxMinUtility<double>(2.0, CredalSet<double>({p}, p))});
  CHECK(closed_form_entropic(single, vec({1, -1})).weights(0) == doctest::Approx(2.0 / 3));
}

TEST_CASE("grid maximization approaches the closed form on the constant-share grid") {
  const auto [space, x] = three_farmers(0.1, 1.0);
  const auto profile = entropic_profile(space.probs(), {1, 2, 4});
  GridOptions o{70};
  o.classing = ShareClassing::kUniform;
  const auto grid = enumerate_grid(space, x, 3, o);
  const auto best = maximize_welfare(profile, grid);
  const Index s = 1;  // a state where X != 0
  const Eigen::VectorXd shares = best.allocation.col(s) / x(s);
  CHECK((shares - Eigen::VectorXd(pairwise_weights(1, 2, 4))).cwiseAbs().maxCoeff() <= 1e-2);
  const auto cf = closed_form_entropic(profile, x);
  CHECK(std::abs(best.value - cf.result.value) <= 1e-3);
  CHECK(best.value <= cf.result.value + 1e-12);
  CHECK(std::abs(best.value - best.per_agent.sum()) <= 1e-9);
}

TEST_CASE("refinement never loses welfare and stays feasible") {
  const auto [space, x] = three_farmers(0.2, 1.0);
  const auto profile = entropic_profile(space.probs(), {1, 3, 0.5});
  GridOptions o{4};
  o.classing = ShareClassing::kUniform;
  const auto grid = enumerate_grid(space, x, 3, o);
  const auto coarse = maximize_welfare(profile, grid);
  RefineOptions r;
  r.enabled = true;
  const auto fine = maximize_welfare(profile, grid, Index(0), r);
  CHECK(fine.method == WelfareMethod::kRefined);
  CHECK(fine.grid_index == coarse.grid_index);
  CHECK(fine.value >= coarse.value);
  CHECK(validate_feasible(fine.allocation, x).ok());
  const auto cf = closed_form_entropic(profile, x);
  CHECK(fine.value <= cf.result.value + 1e-12);
  CHECK(cf.result.value - fine.value <= 1e-6);
}

TEST_CASE("single-point grid") {
  const StateSpace<double> s(vec({0.5, 0.5}));
  const auto grid = enumerate_grid(s, vec({0, 0}), 2, GridOptions{3});
  const auto profile = entropic_profile(s.probs(), {1, 2});
  const auto best = maximize_welfare(profile, grid);
  CHECK(best.grid_index == 0);
  CHECK(best.value == 0.0);
  CHECK(pareto_check(profile, grid, best.allocation).optimal);
}

TEST_CASE("pareto check") {
  const StateSpace<double> s(vec({0.5, 0.5}));
  const Eigen::VectorXd x = vec({1, -1});
  const auto profile = entropic_profile(s.probs(), {1, 3});
  const auto grid = enumerate_grid(s, x, 2, GridOptions{10});
  const auto best = maximize_welfare(profile, grid);
  const auto at_max = pareto_check(profile, grid, best.allocation);
  CHECK(at_max.optimal);
  CHECK(at_max.attains_max);

  // Vertex: agent 0 carries everything.
  const Eigen::MatrixXd vertex = mat(2, 2, {1, -1, 0, 0});
  const auto r = pareto_check(profile, grid, vertex);
  CHECK(r.welfare < r.grid_max);
  CHECK_FALSE(r.optimal);
  REQUIRE(r.dominated_by);
  // The witness really dominates.
  const auto table = evaluate_on_grid(profile, grid);
  CHECK(table(*r.dominated_by, 0) >= evaluate(profile, vertex, 0) - 1e-12);
  CHECK(table(*r.dominated_by, 1) >= evaluate(profile, vertex, 1) - 1e-12);
  CHECK(table.row(*r.dominated_by).sum() > r.welfare);
}

TEST_CASE("grid welfare maximizers are never dominated (property)") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> g(0.2, 4), v(-2, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const StateSpace<double> s(vec({0.3, 0.7}));
    const Eigen::VectorXd x = vec({v(rng), v(rng)});
    const auto profile = entropic_profile(s.probs(), {g(rng), g(rng)});
    const auto grid = enumerate_grid(s, x, 2, GridOptions{8});
    const auto table = evaluate_on_grid(profile, grid);
    const auto best = maximize_welfare(profile, grid, table);
    CHECK(pareto_check(profile, table, Eigen::VectorXd(table.row(best.grid_index).transpose())).optimal);
  }
}

TEST_CASE("simplex projection") {
  const Eigen::VectorXd q = project_to_simplex<double>(vec({0.5, 0.9, -0.2}));
  CHECK(q.minCoeff() >= 0);
  CHECK(q.sum() == doctest::Approx(1.0));
  CHECK(q(0) == doctest::Approx(0.3));
  CHECK(q(1) == doctest::Approx(0.7));
  const Eigen::VectorXd inside = vec({0.2, 0.3, 0.5});
  CHECK((project_to_simplex<double>(inside) - inside).norm() <= 1e-15);

  // No random simplex point is closer than the projection.
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> e;
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(4, [&] { return z(rng); });
    const Eigen::VectorXd proj = project_to_simplex<double>(y);
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(4, [&] { return e(rng); });
      c /= c.sum();
      CHECK((proj - y).norm() <= (c - y).norm() + 1e-12);
    }
  }
}
