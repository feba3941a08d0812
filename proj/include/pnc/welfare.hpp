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

#ifndef PNC_WELFARE_HPP
#define PNC_WELFARE_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pnc/errors.hpp"
#include "pnc/menu.hpp"
#include "pnc/types.hpp"
#include "pnc/utility.hpp"

namespace pnc {

enum class WelfareMethod { kGrid, kClosedForm, kRefined };

inline const char* to_string(WelfareMethod m) {
  switch (m) {
    case WelfareMethod::kGrid: return "grid";
    case WelfareMethod::kClosedForm: return "closed_form";
    case WelfareMethod::kRefined: return "refined";
  }
  return "unknown";
}

template <typename Scalar>
struct WelfareResult {
  Index grid_index = -1;  // grid argmax (start point when refined); -1 for closed form
  Allocation<Scalar> allocation;
  Scalar value = 0;          // sum of per_agent over agents >= from_agent
  Vector<Scalar> per_agent;  // U_i at the optimum, every agent
  Index from_agent = 0;
  WelfareMethod method = WelfareMethod::kGrid;
};

/// Tail welfare: sum of U_j(xi) for j >= from_agent.
template <typename Scalar>
Scalar welfare(const UtilityProfile<Scalar>& profile, const Allocation<Scalar>& xi, Index from_agent) {
  if (from_agent < 0 || from_agent >= profile.agents())
    throw ParameterError("from_agent out of range");
  Scalar total = 0;
  for (Index j = from_agent; j < profile.agents(); ++j) total += evaluate(profile, xi, j);
  return total;
}

/// Euclidean projection onto the probability simplex (sort-based).
template <typename Scalar>
Vector<Scalar> project_to_simplex(const Vector<Scalar>& v) {
  std::vector<Scalar> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cumulative = 0, theta = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const Scalar t = (cumulative - Scalar(1)) / Scalar(k + 1);
    if (u[k] - t > Scalar(0)) theta = t;
  }
  Vector<Scalar> out = (v.array() - theta).cwiseMax(Scalar(0)).matrix();
  const Scalar s = out.sum();
  if (s > Scalar(0)) out /= s;
  return out;
}

struct RefineOptions {
  bool enabled = false;
  double min_improvement = 1e-10;
  int max_sweeps = 20000;
};

namespace detail {

template <typename Scalar>
Vector<Scalar> per_agent_values(const UtilityProfile<Scalar>& profile, const Allocation<Scalar>& xi) {
  Vector<Scalar> v(profile.agents());
  for (Index i = 0; i < profile.agents(); ++i) v(i) = evaluate(profile, xi, i);
  return v;
}

template <typename Scalar>
WelfareResult<Scalar> make_result(const UtilityProfile<Scalar>& profile, Index grid_index,
                                  Allocation<Scalar> xi, Index from, WelfareMethod method) {
  WelfareResult<Scalar> r;
  r.grid_index = grid_index;
  r.per_agent = per_agent_values(profile, xi);
  r.allocation = std::move(xi);
  r.from_agent = from;
  r.value = r.per_agent.tail(profile.agents() - from).sum();
  r.method = method;
  return r;
}

// Projected-gradient ascent on one state's share vector at a time. Steps are
// only accepted when the tail welfare strictly increases, so the result never
// loses welfare and every iterate stays a simplex point times X.
template <typename Scalar>
Allocation<Scalar> refine_shares(const UtilityProfile<Scalar>& profile,
                                 const RandomVariable<Scalar>& x, Allocation<Scalar> xi,
                                 Index from, const RefineOptions& opt) {
  const Index n = profile.agents();
  std::vector<Index> active;
  for (Index s = 0; s < x.size(); ++s)
    if (x(s) != Scalar(0)) active.push_back(s);
  if (active.empty()) return xi;

  Scalar current = welfare(profile, xi, from);
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    const Scalar sweep_start = current;
    for (Index s : active) {
      Vector<Scalar> grad = Vector<Scalar>::Zero(n);
      for (Index i = from; i < n; ++i)
        grad(i) = x(s) * utility_gradient(profile[i], xi.row(i), profile.probs())(s);
      const Scalar spread = grad.maxCoeff() - grad.minCoeff();
      if (!(spread > Scalar(0))) continue;
      const Vector<Scalar> q = xi.col(s) / x(s);
      Scalar step = Scalar(1) / spread;
      for (int attempt = 0; attempt < 60; ++attempt, step /= Scalar(2)) {
        const Vector<Scalar> q_new = project_to_simplex<Scalar>(q + step * grad);
        if ((q_new - q).cwiseAbs().maxCoeff() == Scalar(0)) break;
        Allocation<Scalar> trial = xi;
        trial.col(s) = q_new * x(s);
        const Scalar value = welfare(profile, trial, from);
        if (value > current) {
          xi = std::move(trial);
          current = value;
          break;
        }
      }
    }
    if (current - sweep_start < Scalar(opt.min_improvement)) break;
  }
  return xi;
}

}  // namespace detail

/// Exhaustive grid argmax of the tail welfare (ties: lowest index), optionally
/// followed by share-wise local refinement from the winner.
template <typename Scalar>
WelfareResult<Scalar> maximize_welfare(const UtilityProfile<Scalar>& profile,
                                       const MenuGrid<Scalar>& grid, const Matrix<Scalar>& table,
                                       Index from_agent = 0, const RefineOptions& refine = {}) {
  if (grid.size() == 0) throw ParameterError("cannot maximize over an empty grid");
  if (from_agent < 0 || from_agent >= profile.agents())
    throw ParameterError("from_agent out of range");
  const Index n = profile.agents();
  Index best = 0;
  Scalar best_value = table.row(0).tail(n - from_agent).sum();
  for (Index k = 1; k < grid.size(); ++k) {
    const Scalar v = table.row(k).tail(n - from_agent).sum();
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  if (!refine.enabled)
    return detail::make_result(profile, best, grid.points[best], from_agent, WelfareMethod::kGrid);
  Allocation<Scalar> refined =
      detail::refine_shares(profile, grid.aggregate, grid.points[best], from_agent, refine);
  return detail::make_result(profile, best, std::move(refined), from_agent, WelfareMethod::kRefined);
}

template <typename Scalar>
WelfareResult<Scalar> maximize_welfare(const UtilityProfile<Scalar>& profile,
                                       const MenuGrid<Scalar>& grid, Index from_agent = 0,
                                       const RefineOptions& refine = {}) {
  return maximize_welfare(profile, grid, evaluate_on_grid(profile, grid), from_agent, refine);
}

template <typename Scalar>
struct ClosedFormResult {
  WelfareResult<Scalar> result;
  Vector<Scalar> weights;  // proportional shares w_i
  Scalar lambda = 0;       // common tilt parameter
  Vector<Scalar> tilt;     // dQ*/dP per state
  Scalar tilt_residual = 0;  // max_i |gamma_i w_i - lambda|
};

/// Entropic optimum: xi_i = w_i X with w_i proportional to 1/gamma_i, and the
/// shared exponential tilt exp(-lambda X)/E[exp(-lambda X)].
template <typename Scalar>
ClosedFormResult<Scalar> closed_form_entropic(const Vector<Scalar>& gammas,
                                              const RandomVariable<Scalar>& x,
                                              const Vector<Scalar>& probs) {
  if (x.size() != probs.size()) throw StructuralError("aggregate risk and probabilities differ in length");
  if (gammas.size() < 2) throw ParameterError("closed form needs at least two agents");
  if (!((gammas.array() > Scalar(0)).all())) throw ParameterError("risk aversions must be positive");
  ClosedFormResult<Scalar> out;
  const Vector<Scalar> tolerance = gammas.cwiseInverse();
  const Scalar total = tolerance.sum();
  out.weights = tolerance / total;
  out.lambda = Scalar(1) / total;
  out.tilt_residual = (gammas.cwiseProduct(out.weights).array() - out.lambda).abs().maxCoeff();
  const Vector<Scalar> a = (-out.lambda) * x;
  const Vector<Scalar> e = (a.array() - a.maxCoeff()).exp().matrix();
  out.tilt = e / probs.dot(e);

  std::vector<Utility<Scalar>> utils;
  for (Index i = 0; i < gammas.size(); ++i) utils.emplace_back(EntropicUtility<Scalar>(gammas(i)));
  const UtilityProfile<Scalar> profile(probs, std::move(utils));
  Allocation<Scalar> xi = out.weights * x.transpose();
  out.result = detail::make_result(profile, Index(-1), std::move(xi), Index(0), WelfareMethod::kClosedForm);
  return out;
}

/// Same, reading the risk aversions off a single-prior profile.
template <typename Scalar>
ClosedFormResult<Scalar> closed_form_entropic(const UtilityProfile<Scalar>& profile,
                                              const RandomVariable<Scalar>& x) {
  Vector<Scalar> gammas(profile.agents());
  for (Index i = 0; i < profile.agents(); ++i) {
    const auto& u = profile[i];
    if (const auto* e = std::get_if<EntropicUtility<Scalar>>(&u)) {
      gammas(i) = e->gamma;
    } else if (const auto* mm = std::get_if<MaxMinUtility<Scalar>>(&u); mm && mm->credal.size() == 1) {
      gammas(i) = mm->gamma;
    } else {
      throw UnsupportedProfileError("closed form needs single-prior entropic utilities for every agent");
    }
  }
  return closed_form_entropic(gammas, x, profile.probs());
}

template <typename Scalar>
struct ParetoReport {
  bool optimal = true;                  // no grid point dominates
  std::optional<Index> dominated_by;    // lowest-index dominating grid point
  Scalar welfare = 0;                   // sum of U_i at the candidate
  Scalar grid_max = 0;                  // grid W_max
  bool attains_max = false;             // welfare within tolerance of grid_max
};

/// Pareto dominance slack: weak improvements may lose at most this much,
/// strict ones must gain more than it.
template <typename Scalar>
constexpr Scalar kParetoSlack = Scalar(1e-12);

/// Brute-force scan for a grid point that weakly improves every agent and
/// strictly improves one, plus the welfare-equality side of the test.
template <typename Scalar>
ParetoReport<Scalar> pareto_check(const UtilityProfile<Scalar>& profile, const Matrix<Scalar>& table,
                                  const Vector<Scalar>& candidate, Scalar welfare_tol = Scalar(1e-9)) {
  ParetoReport<Scalar> out;
  out.welfare = candidate.sum();
  out.grid_max = table.rowwise().sum().maxCoeff();
  out.attains_max = out.welfare >= out.grid_max - welfare_tol;
  const Scalar slack = kParetoSlack<Scalar>;
  for (Index k = 0; k < table.rows(); ++k) {
    bool weak = true, strict = false;
    for (Index i = 0; i < profile.agents(); ++i) {
      const Scalar diff = table(k, i) - candidate(i);
      if (diff < -slack) {
        weak = false;
        break;
      }
      if (diff > slack) strict = true;
    }
    if (weak && strict) {
      out.optimal = false;
      out.dominated_by = k;
      break;
    }
  }
  return out;
}

template <typename Scalar>
ParetoReport<Scalar> pareto_check(const UtilityProfile<Scalar>& profile, const MenuGrid<Scalar>& grid,
                                  const Allocation<Scalar>& xi) {
  return pareto_check(profile, evaluate_on_grid(profile, grid), detail::per_agent_values(profile, xi));
}

}  // namespace pnc

#endif  // PNC_WELFARE_HPP
