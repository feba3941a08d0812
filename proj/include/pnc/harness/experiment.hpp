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

#ifndef PNC_HARNESS_EXPERIMENT_HPP
#define PNC_HARNESS_EXPERIMENT_HPP

#include "pnc/harness/report.hpp"
#include "pnc/harness/scenario.hpp"

namespace pnc::harness {

struct RunFlags {
  bool audit_only = false;  // skip the auction stage
  bool refine = true;
};

/// Runs every stage in order and re-checks the invariants on the outputs.
/// Identical config and flags give an identical report.
RunReport run_experiment(const ScenarioConfig& config, const RunFlags& flags = {});

}  // namespace pnc::harness

#endif  // PNC_HARNESS_EXPERIMENT_HPP
