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

#ifndef PNC_UTILITY_HPP
#define PNC_UTILITY_HPP

// Monetary utilities: entropic certainty equivalents, the risk-neutral
// expectation, and max-min entropic utilities over finite credal sets.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pnc/errors.hpp"
#include "pnc/menu.hpp"
#include "pnc/types.hpp"

namespace pnc {

template <typename Scalar>
struct EntropicUtility {
  Scalar gamma;

  explicit EntropicUtility(Scalar g) : gamma(g) {
    if (!(gamma > Scalar(0)) || !std::isfinite(double(gamma)))
      throw ValidationError("entropic risk aversion must be positive and finite");
  }
};

// E_P[xi_i]; the gamma -> 0 limit of the entropic utility.
template <typename Scalar>
struct NeutralUtility {};

/// Finite list of priors equivalent to the reference probability. The
/// reference itself must be a member.
template <typename Scalar>
class CredalSet {
 public:
  CredalSet(std::vector<Vector<Scalar>> priors, const Vector<Scalar>& reference,
            Scalar lip_bound = Scalar(0))
      : priors_(std::move(priors)), lip_bound_(lip_bound) {
    std::vector<std::string> problems;
    if (priors_.empty()) problems.push_back("credal set is empty");
    bool has_reference = false;
    for (std::size_t k = 0; k < priors_.size(); ++k) {
      const auto& p = priors_[k];
      const std::string name = "prior " + std::to_string(k);
      if (p.size() != reference.size()) {
        problems.push_back(name + " has " + std::to_string(p.size()) + " entries, expected " +
                           std::to_string(reference.size()));
        continue;
      }
      if (!((p.array() > Scalar(0)).all()) || !p.allFinite())
        problems.push_back(name + " must be strictly positive on every state");
      if (std::abs(p.sum() - Scalar(1)) > kExactTol<Scalar>) {
        std::ostringstream os;
        os.precision(17);
        os << name << " sums to " << p.sum() << ", not 1";
        problems.push_back(os.str());
      }
      if ((p - reference).cwiseAbs().maxCoeff() <= kExactTol<Scalar>) has_reference = true;
    }
    if (!priors_.empty() && problems.empty() && !has_reference)
      problems.push_back("credal set must contain the reference probability");
    if (lip_bound_ < Scalar(0)) problems.push_back("declared Lipschitz bound must be >= 0");
    if (!problems.empty()) throw ValidationError(problems);
  }

  const std::vector<Vector<Scalar>>& priors() const { return priors_; }
  Index size() const { return static_cast<Index>(priors_.size()); }
  // 0 when undeclared.
  Scalar lip_bound() const { return lip_bound_; }

 private:
  std::vector<Vector<Scalar>> priors_;
  Scalar lip_bound_;
};

template <typename Scalar>
struct MaxMinUtility {
  Scalar gamma;
  CredalSet<Scalar> credal;

  MaxMinUtility(Scalar g, CredalSet<Scalar> c) : gamma(g), credal(std::move(c)) {
    if (!(gamma > Scalar(0)) || !std::isfinite(double(gamma)))
      throw ValidationError("max-min risk aversion must be positive and finite");
  }
};

template <typename Scalar>
using Utility = std::variant<EntropicUtility<Scalar>, NeutralUtility<Scalar>, MaxMinUtility<Scalar>>;

template <typename Scalar>
class UtilityProfile {
 public:
  UtilityProfile(Vector<Scalar> probs, std::vector<Utility<Scalar>> utilities)
      : probs_(std::move(probs)), utilities_(std::move(utilities)) {
    if (utilities_.size() < 2) throw StructuralError("utility profile needs at least two agents");
    for (const auto& u : utilities_)
      if (const auto* mm = std::get_if<MaxMinUtility<Scalar>>(&u))
        for (const auto& p : mm->credal.priors())
          if (p.size() != probs_.size())
            throw StructuralError("prior length differs from the state count");
  }

  Index agents() const { return static_cast<Index>(utilities_.size()); }
  const Vector<Scalar>& probs() const { return probs_; }
  const Utility<Scalar>& operator[](Index i) const { return utilities_[i]; }
  const std::vector<Utility<Scalar>>& utilities() const { return utilities_; }

  /// Same utilities, reordered so that agent order[k] plays position k.
  UtilityProfile permuted(const std::vector<Index>& order) const {
    std::vector<Utility<Scalar>> out;
    for (Index i : order) out.push_back(utilities_.at(i));
    return UtilityProfile(probs_, std::move(out));
  }

 private:
  Vector<Scalar> probs_;
  std::vector<Utility<Scalar>> utilities_;
};

namespace detail {

template <typename Derived>
void reject_nan(const Eigen::MatrixBase<Derived>& row) {
  if (row.hasNaN()) throw DomainError("utility evaluated at a NaN payoff");
}

template <typename Derived>
bool is_constant(const Eigen::MatrixBase<Derived>& row) {
  return row.size() == 0 || (row.array() == row(0)).all();
}

}  // namespace detail

/// -(1/gamma) log E_prior[exp(-gamma xi)], evaluated with the largest exponent
/// factored out. Constant payoffs return the constant exactly.
template <typename Scalar, typename Derived>
Scalar entropic_value(Scalar gamma, const Eigen::MatrixBase<Derived>& row,
                      const Vector<Scalar>& prior) {
  detail::reject_nan(row);
  if (detail::is_constant(row)) return row.size() ? Scalar(row(0)) : Scalar(0);
  const Vector<Scalar> a = (-gamma) * row.derived().transpose().template cast<Scalar>();
  const Scalar m = a.maxCoeff();
  const Scalar s = (prior.array() * (a.array() - m).exp()).sum();
  return -(std::log(s) + m) / gamma;
}

template <typename Scalar, typename Derived>
Scalar expectation_value(const Eigen::MatrixBase<Derived>& row, const Vector<Scalar>& prior) {
  detail::reject_nan(row);
  if (detail::is_constant(row)) return row.size() ? Scalar(row(0)) : Scalar(0);
  return (row.derived().transpose().template cast<Scalar>().array() * prior.array()).sum();
}

/// Index of the prior attaining the max-min value; ties go to the lowest index.
template <typename Scalar, typename Derived>
Index worst_case_prior(const MaxMinUtility<Scalar>& u, const Eigen::MatrixBase<Derived>& row) {
  Index best = 0;
  Scalar value = entropic_value(u.gamma, row, u.credal.priors()[0]);
  for (Index k = 1; k < u.credal.size(); ++k) {
    const Scalar v = entropic_value(u.gamma, row, u.credal.priors()[k]);
    if (v < value) {
      value = v;
      best = k;
    }
  }
  return best;
}

/// Agent utility of one payoff row.
template <typename Scalar, typename Derived>
Scalar evaluate_row(const Utility<Scalar>& u, const Eigen::MatrixBase<Derived>& row,
                    const Vector<Scalar>& probs) {
  if (row.size() != probs.size()) throw StructuralError("payoff row length differs from state count");
  return std::visit(
      [&](const auto& util) -> Scalar {
        using T = std::decay_t<decltype(util)>;
        if constexpr (std::is_same_v<T, EntropicUtility<Scalar>>) {
          return entropic_value(util.gamma, row, probs);
        } else if constexpr (std::is_same_v<T, NeutralUtility<Scalar>>) {
          return expectation_value(row, probs);
        } else {
          Scalar value = entropic_value(util.gamma, row, util.credal.priors()[0]);
          for (Index k = 1; k < util.credal.size(); ++k)
            value = std::min(value, entropic_value(util.gamma, row, util.credal.priors()[k]));
          return value;
        }
      },
      u);
}

/// Value under the reference probability alone (a max-min agent's
/// single-prior counterpart).
template <typename Scalar, typename Derived>
Scalar reference_value(const Utility<Scalar>& u, const Eigen::MatrixBase<Derived>& row,
                       const Vector<Scalar>& probs) {
  if (const auto* mm = std::get_if<MaxMinUtility<Scalar>>(&u))
    return entropic_value(mm->gamma, row, probs);
  return evaluate_row(u, row, probs);
}

template <typename Scalar>
Scalar evaluate(const UtilityProfile<Scalar>& profile, const Allocation<Scalar>& xi, Index agent) {
  if (xi.rows() != profile.agents()) throw StructuralError("allocation has the wrong agent count");
  return evaluate_row(profile[agent], xi.row(agent), profile.probs());
}

/// |U(xi + c) - U(xi) - c| for agent's row.
template <typename Scalar>
Scalar check_cash_invariance(const UtilityProfile<Scalar>& profile, const Allocation<Scalar>& xi,
                             Index agent, Scalar c) {
  const RowVector<Scalar> row = xi.row(agent);
  const RowVector<Scalar> shifted = (row.array() + c).matrix();
  const Scalar base = evaluate_row(profile[agent], row, profile.probs());
  const Scalar moved = evaluate_row(profile[agent], shifted, profile.probs());
  return std::abs(moved - base - c);
}

/// dU/dxi(w) for one payoff row: the tilted probability under the active
/// (worst-case) prior.
template <typename Scalar, typename Derived>
Vector<Scalar> utility_gradient(const Utility<Scalar>& u, const Eigen::MatrixBase<Derived>& row,
                                const Vector<Scalar>& probs) {
  auto tilt = [&](Scalar gamma, const Vector<Scalar>& prior) {
    const Vector<Scalar> a = (-gamma) * row.derived().transpose().template cast<Scalar>();
    const Vector<Scalar> e = (prior.array() * (a.array() - a.maxCoeff()).exp()).matrix();
    return Vector<Scalar>(e / e.sum());
  };
  return std::visit(
      [&](const auto& util) -> Vector<Scalar> {
        using T = std::decay_t<decltype(util)>;
        if constexpr (std::is_same_v<T, EntropicUtility<Scalar>>) {
          return tilt(util.gamma, probs);
        } else if constexpr (std::is_same_v<T, NeutralUtility<Scalar>>) {
          return probs;
        } else {
          return tilt(util.gamma, util.credal.priors()[worst_case_prior(util, row)]);
        }
      },
      u);
}

/// points x agents table of utility values on a grid.
template <typename Scalar>
Matrix<Scalar> evaluate_on_grid(const UtilityProfile<Scalar>& profile, const MenuGrid<Scalar>& grid) {
  if (grid.agents() != profile.agents()) throw StructuralError("grid and profile disagree on agents");
  Matrix<Scalar> table(grid.size(), profile.agents());
  for (Index k = 0; k < grid.size(); ++k)
    for (Index i = 0; i < profile.agents(); ++i)
      table(k, i) = evaluate_row(profile[i], grid.points[k].row(i), profile.probs());
  return table;
}

/// Same table under the reference probability only.
template <typename Scalar>
Matrix<Scalar> evaluate_reference_on_grid(const UtilityProfile<Scalar>& profile,
                                          const MenuGrid<Scalar>& grid) {
  Matrix<Scalar> table(grid.size(), profile.agents());
  for (Index k = 0; k < grid.size(); ++k)
    for (Index i = 0; i < profile.agents(); ++i)
      table(k, i) = reference_value(profile[i], grid.points[k].row(i), profile.probs());
  return table;
}

/// Empirical Lipschitz constant of agent's utility w.r.t. the grid metric.
template <typename Scalar>
Scalar estimate_lipschitz(const UtilityProfile<Scalar>& profile, const MenuGrid<Scalar>& grid,
                          Index agent, const PairSet<Scalar>& pairs) {
  Vector<Scalar> values(grid.size());
  for (Index k = 0; k < grid.size(); ++k)
    values(k) = evaluate_row(profile[agent], grid.points[k].row(agent), profile.probs());
  return lipschitz_ratio(values, pairs);
}

/// mu-average of agent's own utility over the grid (the under-bar average for
/// max-min agents).
template <typename Scalar>
Scalar avg_utility(const UtilityProfile<Scalar>& profile, const MenuGrid<Scalar>& grid, Index agent) {
  Vector<Scalar> values(grid.size());
  for (Index k = 0; k < grid.size(); ++k)
    values(k) = evaluate_row(profile[agent], grid.points[k].row(agent), profile.probs());
  return integrate(grid, values);
}

}  // namespace pnc

#endif  // PNC_UTILITY_HPP
