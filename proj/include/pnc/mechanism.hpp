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

#ifndef PNC_MECHANISM_HPP
#define PNC_MECHANISM_HPP

// Sequential price-and-choose. Agents in positions 0..n-2 each post a price
// schedule on the grid; the agent in position n-1 picks a grid point. Posted
// schedules settle as transfers between consecutive positions.
//
// Position k receives posted[k](xi) from position k+1 and pays
// posted[k-1](xi) to position k-1, so
//   g_k = U_k(xi) + posted[k](xi) - posted[k-1](xi)
// with posted[-1] = posted[n-1] = 0.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "pnc/errors.hpp"
#include "pnc/menu.hpp"
#include "pnc/types.hpp"
#include "pnc/utility.hpp"
#include "pnc/welfare.hpp"

namespace pnc {

template <typename Scalar>
struct PriceSchedule {
  Vector<Scalar> values;  // one price per grid point
  Scalar declared_lip = 0;
};

struct MechanismOptions {
  std::optional<double> lipschitz;  // L; default headroom * max agent estimate
  double headroom = 1.5;
  PairSampling sampling;
};

/// Shared state of every stage: the grid utility table, the Lipschitz pair
/// sample and the cap L. Holds references to the profile and grid, which
/// must outlive it.
template <typename Scalar>
class Mechanism {
 public:
  Mechanism(const UtilityProfile<Scalar>& profile, const MenuGrid<Scalar>& grid,
            const MechanismOptions& options = {})
      : profile_(&profile), grid_(&grid) {
    if (profile.agents() != grid.agents()) throw StructuralError("profile and grid disagree on agents");
    table_ = evaluate_on_grid(profile, grid);
    pairs_ = sample_pairs(grid, options.sampling);
    diameter_ = grid_diameter(grid);
    agent_lip_.resize(profile.agents());
    for (Index i = 0; i < profile.agents(); ++i) agent_lip_(i) = lipschitz_ratio(table_.col(i), pairs_);
    lipschitz_ = options.lipschitz ? Scalar(*options.lipschitz)
                                   : Scalar(options.headroom) * agent_lip_.maxCoeff();
    if (!(lipschitz_ >= Scalar(0))) throw ParameterError("Lipschitz constant must be nonnegative");
    for (Index i = 0; i < profile.agents(); ++i) {
      std::ostringstream os;
      if (!(agent_lip_(i) < lipschitz_) && agent_lip_(i) > Scalar(0)) {
        os << "agent " << i << ": estimated Lipschitz constant " << agent_lip_(i)
           << " is not below L = " << lipschitz_;
        warnings_.push_back(os.str());
      }
      if (const auto* mm = std::get_if<MaxMinUtility<Scalar>>(&profile[i])) {
        const Scalar declared = mm->credal.lip_bound();
        if (declared > Scalar(0) && agent_lip_(i) > declared) {
          std::ostringstream w;
          w << "agent " << i << ": estimated Lipschitz constant " << agent_lip_(i)
            << " exceeds the declared bound " << declared;
          warnings_.push_back(w.str());
        }
        if (declared > Scalar(0) && declared < grid.metric.agent_constant(i)) {
          std::ostringstream w;
          w << "agent " << i << ": declared bound " << declared
            << " is below the agent-mean constant " << grid.metric.agent_constant(i);
          warnings_.push_back(w.str());
        }
      }
    }
  }

  const UtilityProfile<Scalar>& profile() const { return *profile_; }
  const MenuGrid<Scalar>& grid() const { return *grid_; }
  Index agents() const { return profile_->agents(); }
  const Matrix<Scalar>& table() const { return table_; }
  const PairSet<Scalar>& pairs() const { return pairs_; }
  const Diameter<Scalar>& diameter() const { return diameter_; }
  const Vector<Scalar>& agent_lipschitz() const { return agent_lip_; }
  Scalar lipschitz() const { return lipschitz_; }
  // Lipschitz cap on every posted schedule: (n-1) L.
  Scalar cap() const { return Scalar(agents() - 1) * lipschitz_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::vector<Index> identity_order() const {
    std::vector<Index> order(agents());
    std::iota(order.begin(), order.end(), Index(0));
    return order;
  }

  /// Sum of utilities of the agents in positions >= k.
  Vector<Scalar> tail_welfare(Index k, const std::vector<Index>& order) const {
    Vector<Scalar> w = Vector<Scalar>::Zero(grid_->size());
    for (Index j = k; j < agents(); ++j) w += table_.col(order[j]);
    return w;
  }

  /// mu-average of each agent's own utility.
  Vector<Scalar> averages() const {
    Vector<Scalar> avg(agents());
    for (Index i = 0; i < agents(); ++i) avg(i) = integrate(*grid_, table_.col(i));
    return avg;
  }

  /// Grid maximum of total welfare and its lowest-index attainer.
  std::pair<Index, Scalar> welfare_argmax() const {
    const Vector<Scalar> w = table_.rowwise().sum();
    Index best = 0;
    for (Index k = 1; k < w.size(); ++k)
      if (w(k) > w(best)) best = k;
    return {best, w(best)};
  }

 private:
  const UtilityProfile<Scalar>* profile_;
  const MenuGrid<Scalar>* grid_;
  Matrix<Scalar> table_;
  PairSet<Scalar> pairs_;
  Diameter<Scalar> diameter_;
  Vector<Scalar> agent_lip_;
  Scalar lipschitz_ = 0;
  std::vector<std::string> warnings_;
};

template <typename Scalar>
struct ScheduleCheck {
  Scalar mean = 0;
  Scalar lip = 0;
  Scalar lip_cap = 0;
  Scalar sup = 0;
  Scalar sup_bound = 0;
  bool zero_mean = false;
  bool within_cap = false;
  bool within_sup_bound = false;
  bool ok() const { return zero_mean && within_cap && within_sup_bound; }
};

/// Admissibility of a posted schedule: zero mean and the Lipschitz cap, plus
/// the sup-norm bound cap * diam that those two imply. When the grid
/// diameter is only a lower bound the sup-norm test is the stricter one.
template <typename Scalar>
ScheduleCheck<Scalar> check_schedule(const Mechanism<Scalar>& mech, const PriceSchedule<Scalar>& p,
                                     Scalar tol = Scalar(1e-9)) {
  ScheduleCheck<Scalar> c;
  c.mean = integrate(mech.grid(), p.values);
  c.lip = lipschitz_ratio(p.values, mech.pairs());
  c.lip_cap = mech.cap();
  c.sup = p.values.cwiseAbs().maxCoeff();
  c.sup_bound = mech.cap() * mech.diameter().value;
  c.zero_mean = std::abs(c.mean) <= tol;
  c.within_cap = c.lip <= c.lip_cap + tol;
  c.within_sup_bound = c.sup <= c.sup_bound + tol;
  return c;
}

/// continuation - its grid average: makes the continuation indifferent.
template <typename Scalar>
PriceSchedule<Scalar> equalizing_price(const MenuGrid<Scalar>& grid, const PairSet<Scalar>& pairs,
                                       const Vector<Scalar>& continuation) {
  PriceSchedule<Scalar> p;
  p.values = (continuation.array() - integrate(grid, continuation)).matrix();
  p.declared_lip = lipschitz_ratio(p.values, pairs);
  return p;
}

/// Equilibrium schedule posted by position `stage` (0..n-2): the tail welfare
/// of positions > stage, centred.
template <typename Scalar>
PriceSchedule<Scalar> equalizing_price(const Mechanism<Scalar>& mech, Index stage,
                                       const std::vector<Index>& order) {
  if (stage < 0 || stage > mech.agents() - 2) throw ParameterError("stage out of range");
  PriceSchedule<Scalar> p = equalizing_price(mech.grid(), mech.pairs(), mech.tail_welfare(stage + 1, order));
  if (p.declared_lip > mech.cap() + Scalar(1e-9)) {
    std::ostringstream os;
    os << "equalizing schedule at stage " << stage << " has Lipschitz ratio " << p.declared_lip
       << " above the cap " << mech.cap() << "; L is too small for these utilities";
    throw ConfigurationError(os.str());
  }
  return p;
}

template <typename Scalar>
PriceSchedule<Scalar> equalizing_price(const Mechanism<Scalar>& mech, Index stage) {
  return equalizing_price(mech, stage, mech.identity_order());
}

template <typename Scalar>
struct PerturbedSchedule {
  PriceSchedule<Scalar> schedule;
  Vector<Scalar> psi;  // iota / (iota + d(., target))
  Scalar beta = 0;     // integral of psi
};

/// base - eps psi + eps beta: a bump that makes `target` the unique best
/// response of the continuation while keeping zero mean and the cap.
template <typename Scalar>
PerturbedSchedule<Scalar> perturbed_price(const Mechanism<Scalar>& mech, const PriceSchedule<Scalar>& base,
                                          Index target, Scalar epsilon, Scalar iota) {
  const auto& grid = mech.grid();
  if (target < 0 || target >= grid.size()) throw ParameterError("perturbation target out of range");
  if (!(iota > Scalar(0) && iota < Scalar(1))) throw ParameterError("iota must lie in (0, 1)");
  const Scalar max_eps = iota * (mech.cap() - base.declared_lip);
  if (!(epsilon > Scalar(0)) || epsilon > max_eps) {
    std::ostringstream os;
    os << "epsilon " << epsilon << " outside (0, " << max_eps << "]";
    throw ParameterError(os.str());
  }
  PerturbedSchedule<Scalar> out;
  out.psi.resize(grid.size());
  for (Index k = 0; k < grid.size(); ++k)
    out.psi(k) = k == target ? Scalar(1) : iota / (iota + grid.distance(k, target));
  out.beta = integrate(grid, out.psi);
  out.schedule.values = (base.values.array() - epsilon * out.psi.array() + epsilon * out.beta).matrix();
  out.schedule.declared_lip = lipschitz_ratio(out.schedule.values, mech.pairs());
  return out;
}

/// Ties: values within 1e-12 * max(1, max|v|) of the maximum.
template <typename Scalar>
Scalar tie_tolerance(const Vector<Scalar>& v) {
  return Scalar(1e-12) * std::max(Scalar(1), v.cwiseAbs().maxCoeff());
}

template <typename Scalar>
std::vector<Index> argmax_set(const Vector<Scalar>& v, const std::vector<Index>& among) {
  Scalar best = v(among.front());
  for (Index k : among) best = std::max(best, v(k));
  const Scalar tol = tie_tolerance(v);
  std::vector<Index> out;
  for (Index k : among)
    if (v(k) >= best - tol) out.push_back(k);
  return out;
}

template <typename Scalar>
std::vector<Index> argmax_set(const Vector<Scalar>& v) {
  std::vector<Index> all(v.size());
  std::iota(all.begin(), all.end(), Index(0));
  return argmax_set(v, all);
}

struct BestResponse {
  Index index = 0;
  Index ties = 0;  // size of the argmax set
};

/// argmax of continuation - price over the grid, lowest index among ties.
template <typename Scalar>
BestResponse follower_best_response(const Vector<Scalar>& continuation, const PriceSchedule<Scalar>& p) {
  if (continuation.size() != p.values.size()) throw StructuralError("schedule and continuation differ in length");
  const Vector<Scalar> net = continuation - p.values;
  const auto set = argmax_set(net);
  return {set.front(), Index(set.size())};
}

enum class SelectionRule {
  kLowestIndex,  // remaining ties go to the lowest index
  kSpne,         // remaining ties go to the welfare maximizer
};

inline const char* to_string(SelectionRule r) {
  return r == SelectionRule::kSpne ? "spne_welfare" : "lowest_index";
}

enum class PncMode { kExactSpne, kPerturbed };

inline const char* to_string(PncMode m) { return m == PncMode::kExactSpne ? "exact" : "perturbed"; }

template <typename Scalar>
struct Perturbation {
  Scalar epsilon = 0;
  Scalar iota = 0;
  Scalar beta = 0;
  Index target = 0;
};

template <typename Scalar>
struct Transcript {
  PncMode mode = PncMode::kExactSpne;
  std::vector<Index> order;                     // order[k] = agent in position k
  std::vector<PriceSchedule<Scalar>> schedules;  // schedules[k] posted by position k
  Index chosen = 0;
  Index terminal_ties = 0;  // size of the last mover's own argmax set
  SelectionRule selection = SelectionRule::kLowestIndex;
  Vector<Scalar> utilities;  // U_i(chosen), by agent
  Vector<Scalar> payoffs;    // g_i, by agent
  Scalar lipschitz = 0;
  std::optional<Perturbation<Scalar>> perturbation;
};

/// Terminal choice consistent with backward induction: the last mover's
/// argmax, narrowed stage by stage to the argmax of each earlier follower's
/// objective (tail welfare minus the schedule it faces), then the rule.
template <typename Scalar>
BestResponse select_terminal(const Mechanism<Scalar>& mech, const std::vector<PriceSchedule<Scalar>>& posted,
                             const std::vector<Index>& order, SelectionRule rule) {
  const Index n = mech.agents();
  std::vector<Index> set(mech.grid().size());
  std::iota(set.begin(), set.end(), Index(0));
  Index terminal_ties = 0;
  for (Index k = n - 1; k >= 1; --k) {
    const Vector<Scalar> net = mech.tail_welfare(k, order) - posted[k - 1].values;
    set = argmax_set(net, set);
    if (k == n - 1) terminal_ties = Index(set.size());
  }
  if (rule == SelectionRule::kSpne) set = argmax_set(Vector<Scalar>(mech.tail_welfare(0, order)), set);
  return {set.front(), terminal_ties};
}

template <typename Scalar>
Vector<Scalar> settle_payoffs(const Mechanism<Scalar>& mech, const std::vector<PriceSchedule<Scalar>>& posted,
                              const std::vector<Index>& order, Index chosen) {
  const Index n = mech.agents();
  Vector<Scalar> g(n);
  for (Index k = 0; k < n; ++k) {
    Scalar v = mech.table()(chosen, order[k]);
    if (k < n - 1) v += posted[k].values(chosen);
    if (k > 0) v -= posted[k - 1].values(chosen);
    g(order[k]) = v;
  }
  return g;
}

struct PncOptions {
  PncMode mode = PncMode::kExactSpne;
  std::optional<double> epsilon;  // default 0.5 iota min_k (cap - Lip(p*_k))
  double iota = 0.1;
};

/// Runs the mechanism along the equilibrium path. Exact mode posts the
/// equalizing schedules and resolves the resulting indifference by the SPNE
/// welfare selection; perturbed mode bumps every posted schedule toward the
/// grid welfare maximizer with one common epsilon so each follower's argmax
/// is that single point.
template <typename Scalar>
Transcript<Scalar> run_pnc(const Mechanism<Scalar>& mech, const PncOptions& options,
                           std::vector<Index> order = {}) {
  const Index n = mech.agents();
  if (n < 2) throw ParameterError("mechanism needs at least two agents");
  if (order.empty()) order = mech.identity_order();
  if (Index(order.size()) != n) throw StructuralError("order must list every agent once");

  Transcript<Scalar> t;
  t.mode = options.mode;
  t.order = order;
  t.lipschitz = mech.lipschitz();
  for (Index k = 0; k + 1 < n; ++k) t.schedules.push_back(equalizing_price(mech, k, order));

  if (options.mode == PncMode::kExactSpne) {
    t.selection = SelectionRule::kSpne;
  } else {
    t.selection = SelectionRule::kLowestIndex;
    Perturbation<Scalar> pert;
    pert.iota = Scalar(options.iota);
    pert.target = mech.welfare_argmax().first;
    if (options.epsilon) {
      pert.epsilon = Scalar(*options.epsilon);
    } else {
      Scalar slack = mech.cap() - t.schedules[0].declared_lip;
      for (const auto& p : t.schedules) slack = std::min(slack, mech.cap() - p.declared_lip);
      pert.epsilon = Scalar(0.5) * pert.iota * slack;
    }
    for (auto& p : t.schedules) {
      auto bumped = perturbed_price(mech, p, pert.target, pert.epsilon, pert.iota);
      pert.beta = bumped.beta;
      p = std::move(bumped.schedule);
    }
    t.perturbation = pert;
  }

  const BestResponse br = select_terminal(mech, t.schedules, order, t.selection);
  t.chosen = br.index;
  t.terminal_ties = br.ties;
  t.utilities = mech.table().row(t.chosen).transpose();
  t.payoffs = settle_payoffs(mech, t.schedules, order, t.chosen);
  return t;
}

/// First mover's payoff when it posts `deviation` and every later position
/// plays its equalizing schedule: the continuation picks the lowest-index
/// argmax of (tail welfare of positions >= 1) - deviation.
template <typename Scalar>
std::pair<Scalar, Index> first_mover_payoff(const Mechanism<Scalar>& mech, const Vector<Scalar>& deviation,
                                            const std::vector<Index>& order) {
  PriceSchedule<Scalar> p;
  p.values = deviation;
  const BestResponse br = follower_best_response(Vector<Scalar>(mech.tail_welfare(1, order)), p);
  return {mech.table()(br.index, order[0]) + deviation(br.index), br.index};
}

template <typename Scalar>
struct DeviationAudit {
  Index samples = 0;
  Index rejected = 0;              // draws that failed the admissibility check
  std::optional<Scalar> max_gain;  // empty when no deviation was evaluated
  Scalar equilibrium_payoff = 0;
};

/// Samples admissible first-mover schedules around the equilibrium one and
/// reports the largest payoff gain over the equilibrium payoff.
///
/// Each draw adds a random 1-Lipschitz shape scaled into the remaining slack
/// under the cap, then re-centres to zero mean. Shapes are linear in the
/// metric features or radial in the distance to a random centre.
template <typename Scalar>
DeviationAudit<Scalar> audit_first_mover_bound(const Mechanism<Scalar>& mech, const Transcript<Scalar>& t,
                                               Index num_deviations, std::uint64_t seed) {
  if (t.mode != PncMode::kExactSpne) throw ParameterError("deviation audit needs an exact-mode transcript");
  const auto& grid = mech.grid();
  const Index N = grid.size();
  DeviationAudit<Scalar> audit;
  audit.equilibrium_payoff = t.payoffs(t.order[0]);
  const Vector<Scalar>& base = t.schedules[0].values;
  const Scalar slack = std::max(Scalar(0), mech.cap() - t.schedules[0].declared_lip);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index draw = 0; draw < num_deviations; ++draw) {
    Vector<Scalar> shape(N);
    const int family = int(rng() % 3);
    if (family == 0) {
      Vector<Scalar> r(grid.features.cols());
      for (Index m = 0; m < r.size(); ++m) r(m) = Scalar(2 * unit(rng) - 1) * grid.metric.weight(m);
      shape = grid.features * r;
    } else {
      const Index center = Index(rng() % std::uint64_t(N));
      const Scalar width = Scalar(0.01 + 0.99 * unit(rng));
      for (Index k = 0; k < N; ++k) {
        const Scalar d = grid.distance(k, center);
        shape(k) = family == 1 ? width * width / (width + d) : d;
      }
    }
    const Scalar sign = (rng() & 1) ? Scalar(1) : Scalar(-1);
    const Scalar amplitude = sign * slack * Scalar(unit(rng));
    Vector<Scalar> dev = base + amplitude * shape;
    dev.array() -= integrate(grid, dev);

    PriceSchedule<Scalar> candidate{dev, lipschitz_ratio(dev, mech.pairs())};
    if (!check_schedule(mech, candidate).ok()) {
      ++audit.rejected;
      continue;
    }
    const Scalar gain = first_mover_payoff(mech, dev, t.order).first - audit.equilibrium_payoff;
    audit.max_gain = audit.max_gain ? std::max(*audit.max_gain, gain) : gain;
    ++audit.samples;
  }
  return audit;
}

}  // namespace pnc

#endif  // PNC_MECHANISM_HPP
