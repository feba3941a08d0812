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

#include "pnc/harness/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pnc/errors.hpp"

namespace pnc::harness {

using nlohmann::json;

namespace {

const char* classing_name(ShareClassing c) {
  switch (c) {
    case ShareClassing::kPerState: return "per_state";
    case ShareClassing::kByValue: return "by_value";
    case ShareClassing::kUniform: return "uniform";
  }
  return "per_state";
}

// Collects problems while reading fields, so one pass reports all of them.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  template <typename T>
  std::optional<T> get(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.push_back(where + "." + key + " has the wrong type");
      return std::nullopt;
    }
  }

  template <typename T>
  T require(const json& obj, const std::string& key, const std::string& where, T fallback) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems_.push_back("missing " + where + "." + key);
      return fallback;
    }
    return get<T>(obj, key, where).value_or(fallback);
  }

 private:
  std::vector<std::string>& problems_;
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ScenarioConfig parse_scenario(const json& doc) {
  std::vector<std::string> problems;
  Reader r(problems);
  ScenarioConfig c;
  if (!doc.is_object()) throw ValidationError("scenario must be a JSON object");

  if (auto schema = r.get<std::string>(doc, "schema", "scenario"); schema && *schema != kScenarioSchema)
    problems.push_back("unsupported scenario schema '" + *schema + "'");
  c.name = r.get<std::string>(doc, "name", "scenario").value_or("scenario");
  c.probabilities = r.require<std::vector<double>>(doc, "probabilities", "scenario", {});
  c.endowments = r.require<std::vector<std::vector<double>>>(doc, "endowments", "scenario", {});
  if (auto states = r.get<std::vector<std::string>>(doc, "states", "scenario")) {
    c.states = *states;
  } else {
    for (std::size_t s = 0; s < c.probabilities.size(); ++s) c.states.push_back(std::to_string(s));
  }

  const std::size_t S = c.probabilities.size();
  if (c.states.size() != S)
    problems.push_back("states lists " + std::to_string(c.states.size()) + " names but " +
                       std::to_string(S) + " probabilities are given");
  double total = 0;
  for (std::size_t s = 0; s < S; ++s) {
    total += c.probabilities[s];
    if (!(c.probabilities[s] > 0))
      problems.push_back("probability of state " + std::to_string(s) + " must be strictly positive");
  }
  if (S > 0 && std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "probabilities sum to " << total << ", not 1";
    problems.push_back(os.str());
  }

  if (c.endowments.size() < 2) problems.push_back("at least two endowment rows are required");
  for (std::size_t i = 0; i < c.endowments.size(); ++i) {
    if (c.endowments[i].size() != S)
      problems.push_back("endowment row " + std::to_string(i) + " has " +
                         std::to_string(c.endowments[i].size()) + " entries, expected " + std::to_string(S));
    for (double v : c.endowments[i])
      if (!std::isfinite(v)) problems.push_back("endowment row " + std::to_string(i) + " is not finite");
  }

  const json utilities = doc.contains("utilities") ? doc.at("utilities") : json();
  if (!utilities.is_array()) {
    problems.push_back("missing scenario.utilities");
  } else {
    for (std::size_t i = 0; i < utilities.size(); ++i) {
      const std::string where = "utilities[" + std::to_string(i) + "]";
      const json& u = utilities[i];
      UtilitySpec spec;
      spec.kind = r.require<std::string>(u, "kind", where, "");
      if (spec.kind == "entropic" || spec.kind == "maxmin") {
        spec.gamma = r.require<double>(u, "gamma", where, 0.0);
        if (!(spec.gamma > 0) || !std::isfinite(spec.gamma))
          problems.push_back(where + ".gamma must be positive");
      } else if (spec.kind != "neutral") {
        problems.push_back(where + ".kind must be entropic, maxmin or neutral");
      }
      if (spec.kind == "maxmin") {
        spec.priors = r.require<std::vector<std::vector<double>>>(u, "priors", where, {});
        spec.lip_bound = r.get<double>(u, "lipschitz", where).value_or(0.0);
        if (spec.priors.empty()) problems.push_back(where + ".priors must list at least one prior");
        bool has_reference = false;
        for (std::size_t k = 0; k < spec.priors.size(); ++k) {
          const auto& p = spec.priors[k];
          const std::string pname = where + ".priors[" + std::to_string(k) + "]";
          if (p.size() != S) {
            problems.push_back(pname + " has " + std::to_string(p.size()) + " entries, expected " +
                               std::to_string(S));
            continue;
          }
          double sum = 0, gap = 0;
          bool positive = true;
          for (std::size_t s = 0; s < S; ++s) {
            sum += p[s];
            positive = positive && p[s] > 0;
            gap = std::max(gap, std::abs(p[s] - c.probabilities[s]));
          }
          if (!positive) problems.push_back(pname + " must be strictly positive on every state");
          if (std::abs(sum - 1.0) > 1e-12) {
            std::ostringstream os;
            os.precision(17);
            os << pname << " sums to " << sum << ", not 1";
            problems.push_back(os.str());
          }
          if (gap <= 1e-12) has_reference = true;
        }
        if (!spec.priors.empty() && !has_reference)
          problems.push_back(where + ".priors must include the reference probabilities");
      }
      c.utilities.push_back(std::move(spec));
    }
    if (c.utilities.size() != c.endowments.size())
      problems.push_back("scenario lists " + std::to_string(c.utilities.size()) + " utilities for " +
                         std::to_string(c.endowments.size()) + " agents");
  }

  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    c.grid.resolution = r.get<int>(g, "resolution", "grid").value_or(c.grid.resolution);
    c.grid.budget = r.get<std::int64_t>(g, "budget", "grid").value_or(c.grid.budget);
    c.grid.metric_size = r.get<Index>(g, "metric_size", "grid").value_or(0);
    const auto classing = r.get<std::string>(g, "classing", "grid").value_or("per_state");
    if (classing == "per_state") c.grid.classing = ShareClassing::kPerState;
    else if (classing == "by_value") c.grid.classing = ShareClassing::kByValue;
    else if (classing == "uniform") c.grid.classing = ShareClassing::kUniform;
    else problems.push_back("grid.classing must be per_state, by_value or uniform");
    const auto weights = r.get<std::string>(g, "weights", "grid").value_or("uniform");
    if (weights == "uniform") c.grid.weighting = GridWeighting::kUniform;
    else if (weights == "geometric") c.grid.weighting = GridWeighting::kGeometric;
    else problems.push_back("grid.weights must be uniform or geometric");
  }
  if (c.grid.resolution < 1) problems.push_back("grid.resolution must be at least 1");

  if (doc.contains("mechanism")) {
    const json& m = doc.at("mechanism");
    c.lipschitz = r.get<double>(m, "lipschitz", "mechanism");
    c.headroom = r.get<double>(m, "headroom", "mechanism").value_or(c.headroom);
    c.epsilon = r.get<double>(m, "epsilon", "mechanism");
    c.iota = r.get<double>(m, "iota", "mechanism").value_or(c.iota);
    const auto mode = r.get<std::string>(m, "mode", "mechanism").value_or("exact");
    if (mode == "exact") c.mode = PncMode::kExactSpne;
    else if (mode == "perturbed") c.mode = PncMode::kPerturbed;
    else problems.push_back("mechanism.mode must be exact or perturbed");
  }
  if (!(c.iota > 0 && c.iota < 1)) problems.push_back("mechanism.iota must lie in (0, 1)");
  if (c.lipschitz && !(*c.lipschitz >= 0)) problems.push_back("mechanism.lipschitz must be nonnegative");
  if (!(c.headroom > 1)) problems.push_back("mechanism.headroom must exceed 1");

  if (doc.contains("audit")) {
    const json& a = doc.at("audit");
    c.deviations = r.get<Index>(a, "deviations", "audit").value_or(c.deviations);
    c.bid_points = r.get<Index>(a, "bid_points", "audit").value_or(c.bid_points);
  }
  c.seed = r.get<std::uint64_t>(doc, "seed", "scenario").value_or(0);
  if (doc.contains("output")) {
    const json& o = doc.at("output");
    c.out_dir = r.get<std::string>(o, "dir", "output").value_or(c.out_dir);
    c.format = r.get<std::string>(o, "format", "output").value_or(c.format);
  }
  if (c.format != "structured" && c.format != "tabular" && c.format != "both")
    problems.push_back("output.format must be structured, tabular or both");

  if (!problems.empty()) throw ValidationError(problems);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario parse error: ") + e.what());
  }
  return parse_scenario(doc);
}

json scenario_to_json(const ScenarioConfig& c) {
  json doc;
  doc["schema"] = kScenarioSchema;
  doc["name"] = c.name;
  doc["states"] = c.states;
  doc["probabilities"] = c.probabilities;
  doc["endowments"] = c.endowments;
  json utils = json::array();
  for (const auto& u : c.utilities) {
    json j{{"kind", u.kind}};
    if (u.kind != "neutral") j["gamma"] = u.gamma;
    if (u.kind == "maxmin") {
      j["priors"] = u.priors;
      if (u.lip_bound > 0) j["lipschitz"] = u.lip_bound;
    }
    utils.push_back(j);
  }
  doc["utilities"] = utils;
  doc["grid"] = {{"resolution", c.grid.resolution},
                 {"classing", classing_name(c.grid.classing)},
                 {"budget", c.grid.budget},
                 {"weights", c.grid.weighting == GridWeighting::kUniform ? "uniform" : "geometric"},
                 {"metric_size", c.grid.metric_size}};
  json mech{{"mode", to_string(c.mode)}, {"headroom", c.headroom}, {"iota", c.iota}};
  mech["lipschitz"] = c.lipschitz ? json(*c.lipschitz) : json();
  mech["epsilon"] = c.epsilon ? json(*c.epsilon) : json();
  doc["mechanism"] = mech;
  doc["audit"] = {{"deviations", c.deviations}, {"bid_points", c.bid_points}};
  doc["seed"] = c.seed;
  doc["output"] = {{"dir", c.out_dir}, {"format", c.format}};
  return doc;
}

StateSpace<double> build_space(const ScenarioConfig& c) {
  return StateSpace<double>(c.states, Eigen::Map<const Eigen::VectorXd>(c.probabilities.data(),
                                                                         Index(c.probabilities.size())));
}

EndowmentProfile<double> build_endowments(const ScenarioConfig& c) {
  const Index S = Index(c.probabilities.size());
  Eigen::MatrixXd e(Index(c.endowments.size()), S);
  for (Index i = 0; i < e.rows(); ++i) {
    if (Index(c.endowments[i].size()) != S) throw StructuralError("endowment row has the wrong length");
    for (Index s = 0; s < S; ++s) e(i, s) = c.endowments[i][s];
  }
  return EndowmentProfile<double>(S, e);
}

UtilityProfile<double> build_profile(const ScenarioConfig& c) {
  const Eigen::VectorXd probs =
      Eigen::Map<const Eigen::VectorXd>(c.probabilities.data(), Index(c.probabilities.size()));
  std::vector<Utility<double>> utils;
  for (const auto& u : c.utilities) {
    if (u.kind == "entropic") {
      utils.emplace_back(EntropicUtility<double>(u.gamma));
    } else if (u.kind == "neutral") {
      utils.emplace_back(NeutralUtility<double>{});
    } else {
      std::vector<Eigen::VectorXd> priors;
      for (const auto& p : u.priors)
        priors.push_back(Eigen::Map<const Eigen::VectorXd>(p.data(), Index(p.size())));
      utils.emplace_back(MaxMinUtility<double>(u.gamma, CredalSet<double>(priors, probs, u.lip_bound)));
    }
  }
  return UtilityProfile<double>(probs, std::move(utils));
}

ScenarioConfig hurricane_scenario(const std::vector<double>& gammas, double hit, double loss, int resolution) {
  ScenarioConfig c;
  c.name = "hurricane-three-farmers";
  const int n = int(gammas.size());
  c.endowments.assign(n, {});
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::string label;
    double p = 1;
    for (int i = 0; i < n; ++i) {
      const bool struck = (mask >> i) & 1;
      label += struck ? '1' : '0';
      p *= struck ? hit : 1 - hit;
      c.endowments[i].push_back(struck ? -loss : 0.0);
    }
    c.states.push_back(label);
    c.probabilities.push_back(p);
  }
  for (double g : gammas) c.utilities.push_back({"entropic", g, {}, 0});
  c.grid.resolution = resolution;
  c.grid.classing = ShareClassing::kUniform;
  return c;
}

}  // namespace pnc::harness
