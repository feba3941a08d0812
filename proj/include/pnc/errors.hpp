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

#ifndef PNC_ERRORS_HPP
#define PNC_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pnc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between inputs.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// One or more declared invariants of an input object do not hold. Carries
// every problem found, not only the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  explicit ValidationError(const std::string& problem)
      : ValidationError(std::vector<std::string>{problem}) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

// Grid enumeration would exceed the configured point budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// The declared Lipschitz constant cannot accommodate the utilities.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class UnsupportedProfileError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace pnc

#endif  // PNC_ERRORS_HPP
