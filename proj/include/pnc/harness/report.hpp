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

#ifndef PNC_HARNESS_REPORT_HPP
#define PNC_HARNESS_REPORT_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pnc/auction.hpp"
#include "pnc/mechanism.hpp"
#include "pnc/welfare.hpp"

namespace pnc::harness {

inline constexpr const char* kReportSchema = "pnc-report/1";

struct InvariantCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AuditRecord {
  std::string name;
  Index samples = 0;
  std::optional<double> max_gain;  // none when nothing was sampled
};

struct GridSummary {
  Index points = 0;
  int resolution = 0;
  std::string classing;
  Index metric_size = 0;
  double lipschitz = 0;
  double cap = 0;
  double diameter = 0;
  bool diameter_exact = false;
  std::vector<double> agent_lipschitz;
  Index pairs = 0;
  bool pairs_exhaustive = false;
  double welfare_max = 0;
  Index welfare_argmax = 0;
};

struct ClosedFormSummary {
  std::vector<double> weights;
  double lambda = 0;
  std::vector<double> tilt;
  double value = 0;
  double tilt_residual = 0;
};

struct AuctionSection {
  AuctionOutcome<double> outcome;
  double surplus = 0;
  Eigen::VectorXd averages;
  Eigen::VectorXd final_payoffs;
  Eigen::VectorXd expected;
  Eigen::MatrixXd by_winner;
  Transcript<double> transcript;
};

struct AgentRow {
  Index agent = 0;
  double avg = 0;           // grid average under the reference probability
  double underbar_avg = 0;  // grid average of the agent's own utility
  double mechanism_payoff = 0;
  std::optional<double> final_payoff;  // with auction transfers
};

struct RunReport {
  std::string schema = kReportSchema;
  nlohmann::json scenario;
  GridSummary grid;
  WelfareResult<double> welfare;
  std::optional<WelfareResult<double>> refined;
  std::optional<ClosedFormSummary> closed_form;
  Transcript<double> transcript;
  std::optional<AuctionSection> auction;
  std::vector<AuditRecord> audits;
  std::vector<InvariantCheck> invariants;
  std::vector<std::string> warnings;
  std::vector<AgentRow> agents;

  bool all_passed() const;
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

/// Pretty-printed JSON with a trailing newline. Throws if any number is
/// not finite.
std::string render_structured(const RunReport& report);
/// CSV: agent,avg,underbar_avg,mechanism_payoff,final_payoff
std::string render_tabular(const RunReport& report);

/// Writes report.json and/or summary.csv into `dir` (created if missing).
std::vector<std::filesystem::path> emit_report(const RunReport& report, const std::string& format,
                                               const std::filesystem::path& dir);
RunReport read_report(const std::filesystem::path& path);

}  // namespace pnc::harness

#endif  // PNC_HARNESS_REPORT_HPP
