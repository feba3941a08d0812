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

#ifndef PNC_MENU_HPP
#define PNC_MENU_HPP

// The feasible menu of sign-matched allocations of the aggregate risk.
// Allocations are parameterized by per-state simplex shares; the grid over
// them carries a full-support weighting and the weak*-style metric that
// bounds price schedules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pnc/errors.hpp"
#include "pnc/space.hpp"
#include "pnc/types.hpp"

namespace pnc {

/// Per-state point of the (n-1)-simplex. Columns for states with X = 0 are
/// ignored: those states carry no decision.
template <typename Scalar>
struct ShareProfile {
  Matrix<Scalar> shares;  // agents x states
};

template <typename Scalar, typename Derived>
bool on_simplex(const Eigen::MatrixBase<Derived>& q, Scalar tol = kExactTol<Scalar>) {
  return (q.array() >= Scalar(0)).all() && std::abs(q.sum() - Scalar(1)) <= tol;
}

/// xi_i(w) = q_i(w) X(w) on nonzero states, 0 elsewhere.
template <typename Scalar>
Allocation<Scalar> shares_to_allocation(const ShareProfile<Scalar>& q,
                                        const RandomVariable<Scalar>& x) {
  if (q.shares.cols() != x.size())
    throw StructuralError("share profile and aggregate risk disagree on state count");
  Allocation<Scalar> xi = Allocation<Scalar>::Zero(q.shares.rows(), x.size());
  std::vector<std::string> problems;
  for (Index s = 0; s < x.size(); ++s) {
    if (x(s) == Scalar(0)) continue;
    if (!on_simplex<Scalar>(q.shares.col(s))) {
      problems.push_back("shares of state " + std::to_string(s) + " are not on the simplex");
      continue;
    }
    xi.col(s) = q.shares.col(s) * x(s);
  }
  if (!problems.empty()) throw ValidationError(problems);
  return xi;
}

enum class FeasibilityRule { kSum, kSign, kAnchoredZero, kBound };

inline const char* to_string(FeasibilityRule rule) {
  switch (rule) {
    case FeasibilityRule::kSum: return "sum";
    case FeasibilityRule::kSign: return "sign";
    case FeasibilityRule::kAnchoredZero: return "anchored_zero";
    case FeasibilityRule::kBound: return "bound";
  }
  return "unknown";
}

struct Violation {
  FeasibilityRule rule;
  Index agent;  // -1 for column-level (sum) violations
  Index state;
};

struct FeasibilityReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool passes(FeasibilityRule rule) const {
    return std::none_of(violations.begin(), violations.end(),
                        [rule](const Violation& v) { return v.rule == rule; });
  }
};

/// Checks every defining condition of the menu and reports all offenders.
///
/// Column sums are compared with tolerance 1e-12 * max(1, |X(w)|) since the
/// products q_i X carry one rounding each; sign and anchoring are exact.
template <typename Scalar>
FeasibilityReport validate_feasible(const Allocation<Scalar>& xi, const RandomVariable<Scalar>& x) {
  if (xi.cols() != x.size())
    throw StructuralError("allocation and aggregate risk disagree on state count");
  FeasibilityReport report;
  for (Index s = 0; s < x.size(); ++s) {
    const Scalar scale = std::max(Scalar(1), std::abs(x(s)));
    if (!(std::abs(xi.col(s).sum() - x(s)) <= kExactTol<Scalar> * scale))
      report.violations.push_back({FeasibilityRule::kSum, -1, s});
    for (Index i = 0; i < xi.rows(); ++i) {
      const Scalar v = xi(i, s);
      if (!(v * x(s) >= Scalar(0))) report.violations.push_back({FeasibilityRule::kSign, i, s});
      if (x(s) == Scalar(0) && v != Scalar(0))
        report.violations.push_back({FeasibilityRule::kAnchoredZero, i, s});
      if (!(std::abs(v) <= std::abs(x(s)) + kExactTol<Scalar> * scale))
        report.violations.push_back({FeasibilityRule::kBound, i, s});
    }
  }
  return report;
}

/// Sharing rule xi_i = f_i(X) tabulated on the realized values of X.
template <typename Scalar>
struct ComonotoneTable {
  Vector<Scalar> values;  // distinct realized values of X, ascending
  Matrix<Scalar> rule;    // agents x values; rule(i, k) = f_i(values(k))
};

template <typename Scalar>
bool is_anchored_comonotone(const ComonotoneTable<Scalar>& table) {
  const Index m = table.values.size();
  if (table.rule.cols() != m) throw StructuralError("comonotone table is ragged");
  for (Index k = 1; k < m; ++k)
    if (!(table.values(k) > table.values(k - 1)))
      throw StructuralError("comonotone table keys must be strictly ascending");
  const Scalar tol = kExactTol<Scalar>;
  for (Index k = 0; k < m; ++k) {
    const Scalar x = table.values(k);
    if (std::abs(table.rule.col(k).sum() - x) > tol * std::max(Scalar(1), std::abs(x)))
      return false;
    if (x == Scalar(0) && (table.rule.col(k).array() != Scalar(0)).any()) return false;
    if (k > 0 && (table.rule.col(k).array() < table.rule.col(k - 1).array() - tol).any())
      return false;
  }
  return true;
}

template <typename Scalar>
Allocation<Scalar> comonotone_allocation(const ComonotoneTable<Scalar>& table,
                                         const RandomVariable<Scalar>& x) {
  Allocation<Scalar> xi(table.rule.rows(), x.size());
  for (Index s = 0; s < x.size(); ++s) {
    const Scalar* begin = table.values.data();
    const Scalar* end = begin + table.values.size();
    const Scalar* it = std::find(begin, end, x(s));
    if (it == end)
      throw StructuralError("value of X at state " + std::to_string(s) + " is not tabulated");
    xi.col(s) = table.rule.col(it - begin);
  }
  return xi;
}

/// Truncated weak*-style metric d(a, b) = sum_m weight_m |<a - b, h_m>|, where
/// <xi, h> = sum_i E_P[xi_i h_i] and every h_m has unit L1(P) norm.
///
/// Members 0..n-1 are e_i (x) 1 (agent i's mean), so
/// |E_P[a_i - b_i]| <= agent_constant(i) * d(a, b). The rest are per-agent,
/// per-state indicators scaled by 1/P(w), which pick out single coordinates
/// and separate distinct allocations.
template <typename Scalar>
class WeakStarMetric {
 public:
  WeakStarMetric() = default;

  /// family_size = 0 keeps every coordinate indicator; otherwise the family is
  /// truncated after that many members (never below the n agent means).
  WeakStarMetric(const Vector<Scalar>& probs, Index agents, Index family_size = 0)
      : probs_(probs), agents_(agents) {
    const Index states = probs.size();
    const Index full = agents + agents * states;
    Index size = family_size == 0 ? full : std::clamp(family_size, agents, full);
    Scalar w = Scalar(1);
    for (Index m = 0; m < size; ++m) {
      w /= Scalar(2);
      Matrix<Scalar> h = Matrix<Scalar>::Zero(agents, states);
      if (m < agents) {
        h.row(m).setOnes();
      } else {
        const Index c = m - agents;
        const Index state = c / agents;
        const Index agent = c % agents;
        h(agent, state) = Scalar(1) / probs(state);
      }
      tests_.push_back(std::move(h));
      weights_.push_back(w);
    }
  }

  Index agents() const { return agents_; }
  Index size() const { return static_cast<Index>(tests_.size()); }
  const Matrix<Scalar>& test_function(Index m) const { return tests_[m]; }
  Scalar weight(Index m) const { return weights_[m]; }
  const Vector<Scalar>& probs() const { return probs_; }

  /// c_i with |E_P[a_i - b_i]| <= c_i d(a, b).
  Scalar agent_constant(Index agent) const { return Scalar(1) / weights_[agent]; }

  Scalar pairing(const Allocation<Scalar>& xi, Index m) const {
    return ((xi.array() * tests_[m].array()).matrix() * probs_).sum();
  }

  /// Weighted L1(P) norm of each test function; all equal 1.
  Scalar test_norm(Index m) const {
    return (tests_[m].array().abs().matrix() * probs_).sum();
  }

  /// <xi, h_m> for every member, in family order.
  Vector<Scalar> features(const Allocation<Scalar>& xi) const {
    Vector<Scalar> f(size());
    const Matrix<Scalar> weighted = xi * probs_.asDiagonal();
    for (Index m = 0; m < size(); ++m) f(m) = (weighted.array() * tests_[m].array()).sum();
    return f;
  }

  Scalar distance_from_features(const Vector<Scalar>& fa, const Vector<Scalar>& fb) const {
    Scalar d = 0;
    for (Index m = 0; m < size(); ++m) d += weights_[m] * std::abs(fa(m) - fb(m));
    return d;
  }

 private:
  Vector<Scalar> probs_;
  Index agents_ = 0;
  std::vector<Matrix<Scalar>> tests_;
  std::vector<Scalar> weights_;
};

template <typename Scalar>
Scalar metric_distance(const WeakStarMetric<Scalar>& metric, const Allocation<Scalar>& a,
                       const Allocation<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw StructuralError("metric_distance: allocation shapes differ");
  return metric.distance_from_features(metric.features(a), metric.features(b));
}

/// How nonzero states share decision variables when enumerating the grid.
enum class ShareClassing {
  kPerState,  // each nonzero state has its own simplex point
  kByValue,   // states with equal X share one point (comonotone rules)
  kUniform,   // one point for every nonzero state (constant shares)
};

enum class GridWeighting { kUniform, kGeometric };

struct GridOptions {
  int resolution = 10;
  ShareClassing classing = ShareClassing::kPerState;
  std::int64_t budget = 200000;
  GridWeighting weighting = GridWeighting::kUniform;
  Index metric_size = 0;
};

/// Finite discretization of the menu with a full-support probability on it.
template <typename Scalar>
struct MenuGrid {
  std::vector<Allocation<Scalar>> points;
  Vector<Scalar> weights;
  WeakStarMetric<Scalar> metric;
  int resolution = 0;
  ShareClassing classing = ShareClassing::kPerState;
  RandomVariable<Scalar> aggregate;
  Matrix<Scalar> features;  // points x metric members

  Index size() const { return static_cast<Index>(points.size()); }
  Index agents() const { return metric.agents(); }
  Index states() const { return aggregate.size(); }

  Scalar distance(Index a, Index b) const {
    Scalar d = 0;
    for (Index m = 0; m < features.cols(); ++m)
      d += metric.weight(m) * std::abs(features(a, m) - features(b, m));
    return d;
  }
};

/// All compositions of `total` into `parts` nonnegative integers, in
/// ascending lexicographic order.
inline std::vector<std::vector<int>> compositions(int total, Index parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> current(parts, 0);
  std::function<void(Index, int)> fill = [&](Index pos, int remaining) {
    if (pos == parts - 1) {
      current[pos] = remaining;
      out.push_back(current);
      return;
    }
    for (int a = 0; a <= remaining; ++a) {
      current[pos] = a;
      fill(pos + 1, remaining - a);
    }
  };
  if (parts > 0) fill(0, total);
  return out;
}

inline double composition_count(int total, Index parts) {
  // C(total + parts - 1, parts - 1)
  double c = 1;
  for (Index k = 1; k < parts; ++k) c = c * double(total + k) / double(k);
  return std::round(c);
}

template <typename Scalar>
MenuGrid<Scalar> enumerate_grid(const StateSpace<Scalar>& space, const RandomVariable<Scalar>& x,
                                Index agents, const GridOptions& options = {}) {
  if (options.resolution < 1) throw ParameterError("grid resolution must be at least 1");
  if (agents < 2) throw ParameterError("grid needs at least two agents");
  if (x.size() != space.size())
    throw StructuralError("aggregate risk and state space disagree on state count");

  // Map each nonzero state to its share class.
  std::vector<Index> class_of(x.size(), -1);
  Index classes = 0;
  std::map<Scalar, Index> by_value;
  for (Index s = 0; s < x.size(); ++s) {
    if (x(s) == Scalar(0)) continue;
    switch (options.classing) {
      case ShareClassing::kPerState: class_of[s] = classes++; break;
      case ShareClassing::kUniform: class_of[s] = 0; classes = 1; break;
      case ShareClassing::kByValue: {
        auto [it, inserted] = by_value.emplace(x(s), classes);
        if (inserted) ++classes;
        class_of[s] = it->second;
        break;
      }
    }
  }

  const double per_class = composition_count(options.resolution, agents);
  const double total = std::pow(per_class, double(classes));
  if (total > double(options.budget)) {
    std::ostringstream os;
    os << "grid would have " << total << " points, over the budget of " << options.budget
       << "; lower the resolution";
    throw BudgetError(os.str());
  }

  MenuGrid<Scalar> grid;
  grid.metric = WeakStarMetric<Scalar>(space.probs(), agents, options.metric_size);
  grid.resolution = options.resolution;
  grid.classing = options.classing;
  grid.aggregate = x;

  const auto comps = compositions(options.resolution, agents);
  const Index ncomp = static_cast<Index>(comps.size());
  const Index npoints = static_cast<Index>(total);
  grid.points.reserve(npoints);
  std::vector<Index> digit(classes, 0);
  for (Index k = 0; k < npoints; ++k) {
    Allocation<Scalar> xi = Allocation<Scalar>::Zero(agents, x.size());
    for (Index s = 0; s < x.size(); ++s) {
      if (class_of[s] < 0) continue;
      const auto& a = comps[digit[class_of[s]]];
      for (Index i = 0; i < agents; ++i)
        xi(i, s) = Scalar(a[i]) / Scalar(options.resolution) * x(s);
    }
    grid.points.push_back(std::move(xi));
    // Odometer with the first class most significant.
    for (Index c = classes - 1; c >= 0; --c) {
      if (++digit[c] < ncomp) break;
      digit[c] = 0;
    }
  }

  if (options.weighting == GridWeighting::kUniform) {
    grid.weights = Vector<Scalar>::Constant(npoints, Scalar(1) / Scalar(npoints));
  } else {
    if (npoints > 1000)
      throw ParameterError("geometric grid weights underflow beyond 1000 points");
    grid.weights.resize(npoints);
    Scalar w = Scalar(1);
    for (Index k = 0; k < npoints; ++k) {
      if (k + 1 < npoints) w /= Scalar(2);
      grid.weights(k) = w;
    }
  }

  grid.features.resize(npoints, grid.metric.size());
  for (Index k = 0; k < npoints; ++k) grid.features.row(k) = grid.metric.features(grid.points[k]).transpose();
  return grid;
}

/// Integral against the grid measure, summed in enumeration order.
template <typename Scalar, typename Derived>
Scalar integrate(const MenuGrid<Scalar>& grid, const Eigen::MatrixBase<Derived>& f) {
  if (f.size() != grid.size()) throw StructuralError("integrand length differs from grid size");
  Scalar total = 0;
  for (Index k = 0; k < grid.size(); ++k) total += grid.weights(k) * f(k);
  return total;
}

/// Point pairs used for empirical Lipschitz ratios. Every estimator on one
/// grid shares the same pair list, so ratios of sums are bounded by sums of
/// ratios on the sample exactly as in the continuum.
template <typename Scalar>
struct PairSet {
  std::vector<std::pair<Index, Index>> pairs;
  Vector<Scalar> distances;
  bool exhaustive = false;
};

struct PairSampling {
  Index max_exhaustive = 1500;
  Index random_pairs = 200000;
  std::uint64_t seed = 0;
};

/// Exhaustive below `max_exhaustive` points; otherwise all consecutive
/// enumeration neighbours plus uniformly drawn pairs. Zero-distance pairs are
/// skipped.
template <typename Scalar>
PairSet<Scalar> sample_pairs(const MenuGrid<Scalar>& grid, const PairSampling& sampling = {}) {
  PairSet<Scalar> out;
  std::vector<Scalar> dist;
  const Index n = grid.size();
  auto add = [&](Index a, Index b) {
    const Scalar d = grid.distance(a, b);
    if (d > Scalar(0)) {
      out.pairs.emplace_back(a, b);
      dist.push_back(d);
    }
  };
  if (n <= sampling.max_exhaustive) {
    out.exhaustive = true;
    for (Index a = 0; a < n; ++a)
      for (Index b = a + 1; b < n; ++b) add(a, b);
  } else {
    for (Index a = 0; a + 1 < n; ++a) add(a, a + 1);
    std::mt19937_64 rng(sampling.seed);
    for (Index k = 0; k < sampling.random_pairs; ++k) {
      const Index a = static_cast<Index>(rng() % std::uint64_t(n));
      const Index b = static_cast<Index>(rng() % std::uint64_t(n));
      if (a != b) add(a, b);
    }
  }
  out.distances = Eigen::Map<Vector<Scalar>>(dist.data(), Index(dist.size()));
  return out;
}

/// max |f(a) - f(b)| / d(a, b) over the pair list; 0 when there are no pairs.
template <typename Scalar, typename Derived>
Scalar lipschitz_ratio(const Eigen::MatrixBase<Derived>& values, const PairSet<Scalar>& pairs) {
  Scalar best = 0;
  for (std::size_t k = 0; k < pairs.pairs.size(); ++k) {
    const auto [a, b] = pairs.pairs[k];
    best = std::max(best, std::abs(values(a) - values(b)) / pairs.distances(Index(k)));
  }
  return best;
}

template <typename Scalar>
struct Diameter {
  Scalar value = 0;
  bool exact = false;  // false: a lower bound from farthest-point sweeps
};

template <typename Scalar>
Diameter<Scalar> grid_diameter(const MenuGrid<Scalar>& grid, Index max_exhaustive = 2048) {
  Diameter<Scalar> out;
  const Index n = grid.size();
  if (n <= max_exhaustive) {
    out.exact = true;
    for (Index a = 0; a < n; ++a)
      for (Index b = a + 1; b < n; ++b) out.value = std::max(out.value, grid.distance(a, b));
    return out;
  }
  // Double sweeps from a few deterministic starts; every value is a real
  // distance, so the result never overstates the diameter.
  for (Index start : {Index(0), n / 3, (2 * n) / 3, n - 1}) {
    Index from = start;
    for (int sweep = 0; sweep < 3; ++sweep) {
      Index far = from;
      Scalar best = -1;
      for (Index b = 0; b < n; ++b) {
        const Scalar d = grid.distance(from, b);
        if (d > best) {
          best = d;
          far = b;
        }
      }
      out.value = std::max(out.value, best);
      from = far;
    }
  }
  return out;
}

/// One row per (point, state, agent): index,state,agent,payoff,weight.
template <typename Scalar>
void export_grid_csv(const MenuGrid<Scalar>& grid, std::ostream& os,
                     const std::vector<std::string>& state_names = {}) {
  os.precision(17);
  os << "point,state,agent,payoff,weight\n";
  for (Index k = 0; k < grid.size(); ++k) {
    const auto& xi = grid.points[k];
    for (Index s = 0; s < xi.cols(); ++s) {
      for (Index i = 0; i < xi.rows(); ++i) {
        os << k << ',';
        if (s < Index(state_names.size()))
          os << state_names[s];
        else
          os << s;
        // + 0 turns -0 into 0.
        os << ',' << i << ',' << xi(i, s) + Scalar(0) << ',' << grid.weights(k) << '\n';
      }
    }
  }
}

}  // namespace pnc

#endif  // PNC_MENU_HPP
