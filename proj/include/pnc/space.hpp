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

#ifndef PNC_SPACE_HPP
#define PNC_SPACE_HPP

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pnc/errors.hpp"
#include "pnc/types.hpp"

namespace pnc {

/// Finite probability space with a full-support reference probability.
///
/// Zero-probability states are rejected: everything downstream works
/// almost surely, and on a full-support space that is the same as pointwise.
template <typename Scalar>
class StateSpace {
 public:
  StateSpace(std::vector<std::string> states, Vector<Scalar> probs)
      : states_(std::move(states)), probs_(std::move(probs)) {
    std::vector<std::string> problems;
    if (states_.empty()) problems.push_back("state space is empty");
    if (static_cast<Index>(states_.size()) != probs_.size()) {
      std::ostringstream os;
      os << "state list has " << states_.size() << " entries but "
         << probs_.size() << " probabilities were given";
      problems.push_back(os.str());
    }
    for (Index s = 0; s < probs_.size(); ++s) {
      if (!(probs_[s] > Scalar(0)) || !std::isfinite(double(probs_[s]))) {
        std::ostringstream os;
        os << "probability of state " << s << " must be strictly positive";
        problems.push_back(os.str());
      }
    }
    if (probs_.size() > 0 && std::abs(probs_.sum() - Scalar(1)) > kExactTol<Scalar>) {
      std::ostringstream os;
      os.precision(17);
      os << "probabilities sum to " << probs_.sum() << ", not 1";
      problems.push_back(os.str());
    }
    if (!problems.empty()) throw ValidationError(problems);
  }

  /// States named "0".."k-1".
  explicit StateSpace(Vector<Scalar> probs) : StateSpace(default_names(probs.size()), probs) {}

  Index size() const { return probs_.size(); }
  const std::vector<std::string>& states() const { return states_; }
  const Vector<Scalar>& probs() const { return probs_; }

 private:
  static std::vector<std::string> default_names(Index k) {
    std::vector<std::string> names;
    for (Index s = 0; s < k; ++s) names.push_back(std::to_string(s));
    return names;
  }

  std::vector<std::string> states_;
  Vector<Scalar> probs_;
};

/// Initial risk positions: row i is agent i's endowed payoff X_i.
template <typename Scalar>
class EndowmentProfile {
 public:
  EndowmentProfile(Index num_states, Matrix<Scalar> endowments)
      : endowments_(std::move(endowments)) {
    if (endowments_.rows() < 2)
      throw StructuralError("endowment profile needs at least two agents");
    if (endowments_.cols() != num_states) {
      std::ostringstream os;
      os << "endowment rows have " << endowments_.cols() << " states, expected "
         << num_states;
      throw StructuralError(os.str());
    }
    if (!endowments_.allFinite()) throw ValidationError("endowments must be finite");
  }

  Index agents() const { return endowments_.rows(); }
  Index states() const { return endowments_.cols(); }
  const Matrix<Scalar>& endowments() const { return endowments_; }

 private:
  Matrix<Scalar> endowments_;
};

/// Total risk X: statewise sum of all endowments.
template <typename Scalar>
RandomVariable<Scalar> aggregate_risk(const EndowmentProfile<Scalar>& profile) {
  return profile.endowments().colwise().sum().transpose();
}

template <typename Scalar>
RandomVariable<Scalar> aggregate_risk(const EndowmentProfile<Scalar>& profile,
                                      const StateSpace<Scalar>& space) {
  if (profile.states() != space.size())
    throw StructuralError("endowment profile and state space disagree on state count");
  return aggregate_risk(profile);
}

struct SignPartition {
  std::vector<Index> positive;
  std::vector<Index> negative;
  std::vector<Index> zero;
};

// Exact comparisons: X is built from inputs, not from iterative computation.
template <typename Derived>
SignPartition sign_partition(const Eigen::MatrixBase<Derived>& x) {
  SignPartition out;
  for (Index s = 0; s < x.size(); ++s) {
    if (x(s) > 0)
      out.positive.push_back(s);
    else if (x(s) < 0)
      out.negative.push_back(s);
    else
      out.zero.push_back(s);
  }
  return out;
}

}  // namespace pnc

#endif  // PNC_SPACE_HPP
