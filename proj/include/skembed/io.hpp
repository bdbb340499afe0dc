/*
 * Copyright 2026 The skembed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/// @file io.hpp
/// @brief JSON encodings of inputs and reports. Every artifact carries
/// "skembed_schema": 1.

#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "skembed/dual_solver.hpp"
#include "skembed/experiments.hpp"
#include "skembed/lattice.hpp"
#include "skembed/measures.hpp"
#include "skembed/metrics.hpp"
#include "skembed/monotonicity.hpp"
#include "skembed/primal_lp.hpp"

namespace skembed::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Schema problems in input documents.
class SchemaError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& field, const std::string& what) {
  throw SchemaError(where + ": field '" + field + "' " + what);
}

/// `shown` names the field in messages when it differs from the key, as
/// for nested fields like power.p.
inline const Json& require(const Json& j, const std::string& where, const std::string& field,
                           const std::string& shown = "") {
  const std::string& name = shown.empty() ? field : shown;
  if (!j.is_object()) fail(where, name, "expected inside an object");
  auto it = j.find(field);
  if (it == j.end()) fail(where, name, "is missing");
  return *it;
}

inline double number(const Json& j, const std::string& where, const std::string& field) {
  if (!j.is_number()) fail(where, field, "must be a number");
  return j.get<double>();
}

inline std::vector<double> numbers(const Json& j, const std::string& where, const std::string& field) {
  if (!j.is_array()) fail(where, field, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], where, field + "[" + std::to_string(i) + "]"));
  return out;
}

inline void check_schema(const Json& j, const std::string& where) {
  auto it = j.find("skembed_schema");
  if (it == j.end()) return;
  if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
    fail(where, "skembed_schema", "must be " + std::to_string(kSchemaVersion));
}

/// Non-finite values are written as null.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline Json stamp(Json j) {
  j["skembed_schema"] = kSchemaVersion;
  return j;
}

// ---- inputs ---------------------------------------------------------------

inline Json to_json(const DiscreteMeasure& mu) {
  Json atoms = Json::array();
  for (const auto& a : mu.atoms()) atoms.push_back({a.position, a.mass});
  return stamp({{"atoms", atoms}});
}

inline DiscreteMeasure measure_from_json(const Json& j, const std::string& where = "measure") {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  detail::check_schema(j, where);
  const auto& atoms = detail::require(j, where, "atoms");
  if (!atoms.is_array()) detail::fail(where, "atoms", "must be an array of [position, mass] pairs");
  std::vector<Atom> out;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const std::string f = "atoms[" + std::to_string(i) + "]";
    const auto& a = atoms[i];
    if (!a.is_array() || a.size() != 2) detail::fail(where, f, "must be a [position, mass] pair");
    out.push_back({detail::number(a[0], where, f + "[0]"), detail::number(a[1], where, f + "[1]")});
  }
  try {
    return DiscreteMeasure(std::move(out));
  } catch (const InvalidInput& e) {
    throw SchemaError(where + ": field 'atoms' " + e.what());
  }
}

/// A list of marginals: {"marginals": [measure, ...]} or a single measure.
inline std::vector<DiscreteMeasure> marginals_from_json(const Json& j, const std::string& where = "marginals") {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  detail::check_schema(j, where);
  if (j.contains("atoms")) return {measure_from_json(j, where)};
  const auto& list = detail::require(j, where, "marginals");
  if (!list.is_array() || list.empty()) detail::fail(where, "marginals", "must be a nonempty array");
  std::vector<DiscreteMeasure> out;
  for (std::size_t i = 0; i < list.size(); ++i)
    out.push_back(measure_from_json(list[i], where + ".marginals[" + std::to_string(i) + "]"));
  return out;
}

inline Json to_json(const std::vector<DiscreteMeasure>& mus) {
  Json list = Json::array();
  for (const auto& mu : mus) {
    auto m = to_json(mu);
    m.erase("skembed_schema");
    list.push_back(std::move(m));
  }
  return stamp({{"marginals", list}});
}

inline Json to_json(const MarketData& mk) {
  Json j{{"strikes", mk.strikes}, {"calls", mk.calls.to_rows()}};
  if (mk.power) j["power"] = {{"p", mk.power->p}, {"V", mk.power->V}};
  return stamp(j);
}

inline MarketData market_from_json(const Json& j, const std::string& where = "market") {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  detail::check_schema(j, where);
  MarketData mk;
  mk.strikes = detail::numbers(detail::require(j, where, "strikes"), where, "strikes");
  const auto& calls = detail::require(j, where, "calls");
  if (!calls.is_array() || calls.empty()) detail::fail(where, "calls", "must be a nonempty array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const std::string f = "calls[" + std::to_string(i) + "]";
    rows.push_back(detail::numbers(calls[i], where, f));
    if (rows.back().size() != mk.strikes.size())
      detail::fail(where, f, "must have one price per strike");
  }
  mk.calls = Matrix::from_rows(rows);
  if (j.contains("power") && !j["power"].is_null()) {
    const auto& p = j["power"];
    mk.power = PowerConstraint{detail::number(detail::require(p, where, "p", "power.p"), where, "power.p"),
                               detail::number(detail::require(p, where, "V", "power.V"), where, "power.V")};
  }
  try {
    mk.validate();
  } catch (const InvalidInput& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return mk;
}

inline Json to_json(const PayoffSpec& p) { return {{"kind", std::string(to_string(p.kind))}, {"cap", p.cap}}; }

inline PayoffSpec payoff_from_json(const Json& j, const std::string& where = "payoff") {
  PayoffSpec p;
  const auto& kind = detail::require(j, where, "kind");
  if (!kind.is_string()) detail::fail(where, "kind", "must be a string");
  try {
    p.kind = payoff_kind_from_string(kind.get<std::string>());
  } catch (const InvalidInput& e) {
    detail::fail(where, "kind", std::string("is invalid: ") + e.what());
  }
  p.cap = detail::number(detail::require(j, where, "cap"), where, "cap");
  if (!(p.cap >= 0.0)) detail::fail(where, "cap", "must be >= 0");
  return p;
}

inline Json to_json(const LatticeSpec& l) {
  return {{"steps", l.steps}, {"dt", l.dt()}, {"dx", l.dx}, {"stages", l.stages}};
}

inline Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path + ": malformed JSON: " + e.what());
  }
}

// ---- reports --------------------------------------------------------------

inline Json to_json(const ArbitrageVerdict& v) {
  Json list = Json::array();
  for (const auto& w : v.violations)
    list.push_back({{"tag", w.tag}, {"indices", w.indices}, {"slack", detail::num(w.slack)},
                    {"boundary", w.boundary}});
  return {{"ok", v.ok}, {"centered", v.centered}, {"violations", list}};
}

inline Json stopping_measure_json(const PrimalReport& r) {
  Json list = Json::array();
  if (!r.graph) return list;
  for (auto v : r.support_nodes) {
    const auto& nd = (*r.graph)[static_cast<std::size_t>(v)];
    list.push_back({{"stage", nd.stage},
                    {"t", nd.t},
                    {"position", nd.x},
                    {"state", {nd.a, nd.b}},
                    {"mass", r.stop_mass[static_cast<std::size_t>(v)]}});
  }
  return list;
}

inline Json to_json(const PrimalReport& r) {
  Json j{{"status", to_string(r.status)}, {"rows", r.rows}, {"cols", r.cols}, {"pivots", r.pivots}};
  j["boundary_slack"] = detail::num(r.boundary_slack);
  if (r.status != LPStatus::OPTIMAL) return j;
  j["value"] = r.value;
  j["primal_residual"] = r.primal_residual;
  j["complementary_slackness"] = r.complementary_slackness;
  Json marg = Json::array();
  for (const auto& mu : r.marginals) {
    auto m = to_json(mu);
    m.erase("skembed_schema");
    marg.push_back(std::move(m));
  }
  j["marginals"] = marg;
  j["stopping_measure"] = stopping_measure_json(r);
  if (r.call_duals.rows() > 0) j["call_duals"] = r.call_duals.to_rows();
  return j;
}

inline Json to_json(const DualReport& r, bool trace) {
  Json j{{"value", r.value},
         {"status", to_string(r.status)},
         {"iterations", r.iterations},
         {"best_iteration", r.best_iteration},
         {"alpha", r.optimizer.alpha.to_rows()},
         {"beta", r.optimizer.beta}};
  j["certificate_residual"] = detail::num(r.certificate_residual);
  if (trace) {
    j["history"] = r.history;
    j["subgradient_norms"] = r.subgradient_norms;
  }
  return j;
}

inline Json to_json(const CertificateReport& c) {
  return {{"min_residual", c.min_residual},
          {"min_node_residual", c.min_node_residual},
          {"min_path_residual", c.min_path_residual},
          {"paths_checked", c.paths_checked},
          {"paths_enumerated", c.paths_enumerated},
          {"S0", c.S0},
          {"static_value", c.static_value},
          {"upper_value", c.upper_value},
          {"value_mismatch", c.value_mismatch}};
}

inline Json to_json(const MetricReport& m) {
  return stamp({{"rho", m.rho}, {"w1", m.w1}, {"calls_sup_gap", m.calls_sup_gap}, {"R", m.R}});
}

inline Json to_json(const BoundCertificate& c) {
  return {{"epsilon", c.epsilon}, {"rho_bound", c.rho_bound}, {"w_bound", c.w_bound},
          {"rho", c.rho},         {"w1", c.w1},               {"holds", c.holds}};
}

inline Json to_json(const StoppedPath& p) {
  return {{"increments", p.increments}, {"stop_times", p.stop_times}};
}

inline Json to_json(const StopGoReport& r) {
  Json list = Json::array();
  for (const auto& v : r.violations)
    list.push_back({{"prefix", to_json(v.prefix)}, {"stopped", to_json(v.stopped)}, {"margin", v.margin}});
  return {{"pairs_checked", r.pairs_checked}, {"prefixes", r.prefixes}, {"violations", list}};
}

inline Json to_json(const RateTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"n", r.n},
                    {"bound_K", r.bound_K},
                    {"mesh_K", r.mesh_K},
                    {"value", r.value},
                    {"gap", r.gap},
                    {"theory_bound", r.theory_bound},
                    {"plain_value", r.plain_value}});
  Json j{{"rows", rows}, {"reference", t.reference}, {"stages", t.stages}};
  j["slope"] = detail::num(t.slope);
  j["power_p"] = t.p ? Json(*t.p) : Json(nullptr);
  return j;
}

inline Json to_json(const RateAudit& a) {
  Json j{{"label", a.label}, {"pass", a.pass}, {"covered", a.covered},
         {"positive_rows", a.positive_rows}};
  j["fitted_constant"] = detail::num(a.fitted_constant);
  j["dominating_constant"] = detail::num(a.dominating_constant);
  j["slope"] = detail::num(a.slope);
  return j;
}

inline Json to_json(const std::vector<RecoveryRow>& rows) {
  Json list = Json::array();
  for (const auto& r : rows)
    list.push_back({{"n", r.n}, {"bound_K", r.bound_K}, {"mesh_K", r.mesh_K}, {"rho", r.rho}, {"w1", r.w1}});
  return list;
}

/// Value table at a solved inner problem, one entry per graph node.
inline Json value_table_json(const StateGraph& g, const ValueTable& t) {
  Json list = Json::array();
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto& nd = g[v];
    list.push_back({{"stage", nd.stage},
                    {"t", nd.t},
                    {"k", nd.k},
                    {"state", {nd.a, nd.b}},
                    {"value", t.value[v]},
                    {"stop", t.stop[v]},
                    {"cont", detail::num(t.cont[v])}});
  }
  return list;
}

/// Fixed formatting: two-space indent, keys sorted, trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace skembed::io
