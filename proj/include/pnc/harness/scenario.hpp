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

#ifndef PNC_HARNESS_SCENARIO_HPP
#define PNC_HARNESS_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pnc/mechanism.hpp"
#include "pnc/menu.hpp"
#include "pnc/space.hpp"
#include "pnc/utility.hpp"

namespace pnc::harness {

inline constexpr const char* kScenarioSchema = "pnc-scenario/1";

struct UtilitySpec {
  std::string kind;  // entropic | maxmin | neutral
  double gamma = 0;
  std::vector<std::vector<double>> priors;
  double lip_bound = 0;
};

struct ScenarioConfig {
  std::string name;
  std::vector<std::string> states;
  std::vector<double> probabilities;
  std::vector<std::vector<double>> endowments;  // per agent
  std::vector<UtilitySpec> utilities;
  GridOptions grid;
  std::optional<double> lipschitz;
  double headroom = 1.5;
  PncMode mode = PncMode::kExactSpne;
  std::optional<double> epsilon;
  double iota = 0.1;
  Index deviations = 100;
  Index bid_points = 101;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string format = "both";

  Index agents() const { return Index(endowments.size()); }
};

/// Parses and validates; throws ValidationError listing every problem found.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::string& path);

/// Canonical JSON form of a config (what reports echo).
nlohmann::json scenario_to_json(const ScenarioConfig& config);

StateSpace<double> build_space(const ScenarioConfig& config);
EndowmentProfile<double> build_endowments(const ScenarioConfig& config);
UtilityProfile<double> build_profile(const ScenarioConfig& config);

/// Three farmers, each hit independently with probability `hit` and losing
/// `loss` when hit; entropic utilities with the given risk aversions.
ScenarioConfig hurricane_scenario(const std::vector<double>& gammas = {1.0, 2.0, 4.0},
                                  double hit = 0.1, double loss = 1.0, int resolution = 70);

/// Seed for a named component, derived from the scenario seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& label);

}  // namespace pnc::harness

#endif  // PNC_HARNESS_SCENARIO_HPP
