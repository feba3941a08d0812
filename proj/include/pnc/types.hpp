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

#ifndef PNC_TYPES_HPP
#define PNC_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>

namespace pnc {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Per-state values of a random variable on the finite state space.
template <typename Scalar>
using RandomVariable = Vector<Scalar>;

// agents x states payoff matrix; row i is agent i's payoff.
template <typename Scalar>
using Allocation = Matrix<Scalar>;

// Absolute tolerance used for identities that hold exactly in real arithmetic.
template <typename Scalar>
constexpr Scalar kExactTol = Scalar(1e-12);

}  // namespace pnc

#endif  // PNC_TYPES_HPP
