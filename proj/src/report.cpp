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

#include "pnc/harness/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pnc/errors.hpp"

namespace pnc::harness {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Index(v.size()));
}

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd to_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(Index(rows.size()), rows.empty() ? 0 : Index(rows[0].size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r].at(c);
  return m;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(); }
std::optional<double> to_opt(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

json welfare_json(const WelfareResult<double>& w) {
  return {{"grid_index", w.grid_index},     {"allocation", mat(w.allocation)},
          {"value", w.value},               {"per_agent", vec(w.per_agent)},
          {"from_agent", w.from_agent},     {"method", to_string(w.method)}};
}

WelfareResult<double> welfare_from(const json& j) {
  WelfareResult<double> w;
  w.grid_index = j.at("grid_index").get<Index>();
  w.allocation = to_mat(j.at("allocation"));
  w.value = j.at("value").get<double>();
  w.per_agent = to_vec(j.at("per_agent"));
  w.from_agent = j.at("from_agent").get<Index>();
  const auto m = j.at("method").get<std::string>();
  w.method = m == "grid" ? WelfareMethod::kGrid : m == "refined" ? WelfareMethod::kRefined : WelfareMethod::kClosedForm;
  return w;
}

json transcript_json(const Transcript<double>& t) {
  json schedules = json::array();
  for (const auto& p : t.schedules)
    schedules.push_back({{"values", vec(p.values)}, {"declared_lip", p.declared_lip}});
  json j{{"mode", to_string(t.mode)},
         {"order", t.order},
         {"schedules", schedules},
         {"chosen", t.chosen},
         {"terminal_ties", t.terminal_ties},
         {"selection", to_string(t.selection)},
         {"utilities", vec(t.utilities)},
         {"payoffs", vec(t.payoffs)},
         {"lipschitz", t.lipschitz}};
  if (t.perturbation)
    j["perturbation"] = {{"epsilon", t.perturbation->epsilon},
                         {"iota", t.perturbation->iota},
                         {"beta", t.perturbation->beta},
                         {"target", t.perturbation->target}};
  else
    j["perturbation"] = nullptr;
  return j;
}

Transcript<double> transcript_from(const json& j) {
  Transcript<double> t;
  t.mode = j.at("mode").get<std::string>() == "exact" ? PncMode::kExactSpne : PncMode::kPerturbed;
  t.order = j.at("order").get<std::vector<Index>>();
  for (const auto& s : j.at("schedules"))
    t.schedules.push_back({to_vec(s.at("values")), s.at("declared_lip").get<double>()});
  t.chosen = j.at("chosen").get<Index>();
  t.terminal_ties = j.at("terminal_ties").get<Index>();
  t.selection = j.at("selection").get<std::string>() == "spne_welfare" ? SelectionRule::kSpne
                                                                         : SelectionRule::kLowestIndex;
  t.utilities = to_vec(j.at("utilities"));
  t.payoffs = to_vec(j.at("payoffs"));
  t.lipschitz = j.at("lipschitz").get<double>();
  if (!j.at("perturbation").is_null()) {
    const auto& p = j.at("perturbation");
    t.perturbation = Perturbation<double>{p.at("epsilon").get<double>(), p.at("iota").get<double>(),
                                          p.at("beta").get<double>(), p.at("target").get<Index>()};
  }
  return t;
}

void require_finite(const json& j, const std::string& path) {
  if (j.is_number_float() && !std::isfinite(j.get<double>()))
    throw Error("report field " + path + " is not finite");
  if (j.is_object())
    for (auto it = j.begin(); it != j.end(); ++it) require_finite(it.value(), path + "." + it.key());
  if (j.is_array())
    for (std::size_t k = 0; k < j.size(); ++k) require_finite(j[k], path + "[" + std::to_string(k) + "]");
}

}  // namespace

bool RunReport::all_passed() const {
  for (const auto& c : invariants)
    if (!c.passed) return false;
  return true;
}

json report_to_json(const RunReport& r) {
  json doc;
  doc["schema"] = r.schema;
  doc["scenario"] = r.scenario;
  doc["grid"] = {{"points", r.grid.points},
                 {"resolution", r.grid.resolution},
                 {"classing", r.grid.classing},
                 {"metric_size", r.grid.metric_size},
                 {"lipschitz", r.grid.lipschitz},
                 {"cap", r.grid.cap},
                 {"diameter", r.grid.diameter},
                 {"diameter_exact", r.grid.diameter_exact},
                 {"agent_lipschitz", r.grid.agent_lipschitz},
                 {"pairs", r.grid.pairs},
                 {"pairs_exhaustive", r.grid.pairs_exhaustive},
                 {"welfare_max", r.grid.welfare_max},
                 {"welfare_argmax", r.grid.welfare_argmax}};
  doc["welfare"] = welfare_json(r.welfare);
  doc["refined_welfare"] = r.refined ? welfare_json(*r.refined) : json();
  if (r.closed_form)
    doc["closed_form"] = {{"weights", r.closed_form->weights},
                          {"lambda", r.closed_form->lambda},
                          {"tilt", r.closed_form->tilt},
                          {"value", r.closed_form->value},
                          {"tilt_residual", r.closed_form->tilt_residual}};
  else
    doc["closed_form"] = nullptr;
  doc["transcript"] = transcript_json(r.transcript);
  if (r.auction) {
    const auto& a = *r.auction;
    doc["auction"] = {{"bids", vec(a.outcome.bids)},
                      {"winner", a.outcome.winner},
                      {"transfers", vec(a.outcome.transfers)},
                      {"seed", a.outcome.seed},
                      {"surplus", a.surplus},
                      {"averages", vec(a.averages)},
                      {"final_payoffs", vec(a.final_payoffs)},
                      {"expected", vec(a.expected)},
                      {"by_winner", mat(a.by_winner)},
                      {"transcript", transcript_json(a.transcript)}};
  }
  json audits = json::array();
  for (const auto& a : r.audits)
    audits.push_back({{"name", a.name}, {"samples", a.samples}, {"max_gain", opt(a.max_gain)}});
  doc["audits"] = audits;
  json inv = json::array();
  for (const auto& c : r.invariants) inv.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  doc["invariants"] = inv;
  doc["warnings"] = r.warnings;
  json agents = json::array();
  for (const auto& a : r.agents)
    agents.push_back({{"agent", a.agent},
                      {"avg", a.avg},
                      {"underbar_avg", a.underbar_avg},
                      {"mechanism_payoff", a.mechanism_payoff},
                      {"final_payoff", opt(a.final_payoff)}});
  doc["agents"] = agents;
  return doc;
}

RunReport report_from_json(const json& doc) {
  RunReport r;
  r.schema = doc.at("schema").get<std::string>();
  if (r.schema != kReportSchema) throw ValidationError("unsupported report schema '" + r.schema + "'");
  r.scenario = doc.at("scenario");
  const auto& g = doc.at("grid");
  r.grid.points = g.at("points").get<Index>();
  r.grid.resolution = g.at("resolution").get<int>();
  r.grid.classing = g.at("classing").get<std::string>();
  r.grid.metric_size = g.at("metric_size").get<Index>();
  r.grid.lipschitz = g.at("lipschitz").get<double>();
  r.grid.cap = g.at("cap").get<double>();
  r.grid.diameter = g.at("diameter").get<double>();
  r.grid.diameter_exact = g.at("diameter_exact").get<bool>();
  r.grid.agent_lipschitz = g.at("agent_lipschitz").get<std::vector<double>>();
  r.grid.pairs = g.at("pairs").get<Index>();
  r.grid.pairs_exhaustive = g.at("pairs_exhaustive").get<bool>();
  r.grid.welfare_max = g.at("welfare_max").get<double>();
  r.grid.welfare_argmax = g.at("welfare_argmax").get<Index>();
  r.welfare = welfare_from(doc.at("welfare"));
  if (!doc.at("refined_welfare").is_null()) r.refined = welfare_from(doc.at("refined_welfare"));
  if (!doc.at("closed_form").is_null()) {
    const auto& c = doc.at("closed_form");
    r.closed_form = ClosedFormSummary{c.at("weights").get<std::vector<double>>(), c.at("lambda").get<double>(),
                                      c.at("tilt").get<std::vector<double>>(), c.at("value").get<double>(),
                                      c.at("tilt_residual").get<double>()};
  }
  r.transcript = transcript_from(doc.at("transcript"));
  if (doc.contains("auction")) {
    const auto& a = doc.at("auction");
    AuctionSection s;
    s.outcome.bids = to_vec(a.at("bids"));
    s.outcome.winner = a.at("winner").get<Index>();
    s.outcome.transfers = to_vec(a.at("transfers"));
    s.outcome.seed = a.at("seed").get<std::uint64_t>();
    s.surplus = a.at("surplus").get<double>();
    s.averages = to_vec(a.at("averages"));
    s.final_payoffs = to_vec(a.at("final_payoffs"));
    s.expected = to_vec(a.at("expected"));
    s.by_winner = to_mat(a.at("by_winner"));
    s.transcript = transcript_from(a.at("transcript"));
    r.auction = std::move(s);
  }
  for (const auto& a : doc.at("audits"))
    r.audits.push_back({a.at("name").get<std::string>(), a.at("samples").get<Index>(), to_opt(a.at("max_gain"))});
  for (const auto& c : doc.at("invariants"))
    r.invariants.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(),
                            c.at("detail").get<std::string>()});
  r.warnings = doc.at("warnings").get<std::vector<std::string>>();
  for (const auto& a : doc.at("agents"))
    r.agents.push_back({a.at("agent").get<Index>(), a.at("avg").get<double>(), a.at("underbar_avg").get<double>(),
                        a.at("mechanism_payoff").get<double>(), to_opt(a.at("final_payoff"))});
  return r;
}

std::string render_structured(const RunReport& report) {
  const json doc = report_to_json(report);
  require_finite(doc, "report");
  return doc.dump(2) + "\n";
}

std::string render_tabular(const RunReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "agent,avg,underbar_avg,mechanism_payoff,final_payoff\n";
  for (const auto& a : report.agents) {
    os << a.agent << ',' << a.avg << ',' << a.underbar_avg << ',' << a.mechanism_payoff << ',';
    if (a.final_payoff) os << *a.final_payoff;
    os << '\n';
  }
  return os.str();
}

std::vector<std::filesystem::path> emit_report(const RunReport& report, const std::string& format,
                                               const std::filesystem::path& dir) {
  if (format != "structured" && format != "tabular" && format != "both")
    throw ParameterError("format must be structured, tabular or both");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
    written.push_back(path);
  };
  if (format != "tabular") write(dir / "report.json", render_structured(report));
  if (format != "structured") write(dir / "summary.csv", render_tabular(report));
  return written;
}

RunReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open report " + path.string());
  json doc;
  in >> doc;
  return report_from_json(doc);
}

}  // namespace pnc::harness
