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

// Small helpers shared by the test binaries.

#ifndef PNC_TESTS_SUPPORT_HPP
#define PNC_TESTS_SUPPORT_HPP

#include <initializer_list>

#include <Eigen/Dense>

namespace pnc::test {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

inline Eigen::MatrixXd mat(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> v) {
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index k = 0;
  for (double x : v) {
    out(k / cols, k % cols) = x;
    ++k;
  }
  return out;
}

}  // namespace pnc::test

#endif  // PNC_TESTS_SUPPORT_HPP
