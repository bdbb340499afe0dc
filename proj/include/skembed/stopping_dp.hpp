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

/// @file stopping_dp.hpp
/// @brief Multiple optimal stopping on the lattice with static call and
/// power penalties: backward induction over the state graph, forward mass
/// propagation, and the superhedging certificate read off the value table.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/lattice.hpp"
#include "skembed/matrix.hpp"
#include "skembed/measures.hpp"
#include "skembed/state_graph.hpp"

namespace skembed {

enum class Action : std::uint8_t { CONTINUE = 0, STOP = 1 };

struct StoppingPolicy {
  std::vector<Action> action;  // per graph node
  const char* tie_rule = "STOP_ON_TIE";
};

/// Per node: value = max(stop, continuation); continuation is -inf where
/// the horizon forces a stop.
struct ValueTable {
  std::vector<double> value;
  std::vector<double> stop;
  std::vector<double> cont;
};

struct InnerStats {
  Matrix call_expectations;  // E[(B_{T_i} - K_j)^+]
  double power_moment = 0.0;  // E|B_{T_m}|^p, 0 without a power constraint
  double payoff_expectation = 0.0;
};

struct InnerResult {
  double value = 0.0;
  ValueTable table;
  StoppingPolicy policy;
  InnerStats stats;
};

/// Masses of a (possibly randomized) stopping rule on the state graph.
struct ForwardSupport {
  std::vector<double> inflow;     // mass arriving at each node
  std::vector<double> stop_mass;  // mass stopped at each node
  std::vector<DiscreteMeasure> marginals;
};

/// Inner problem at fixed multipliers. The graph and the per-node penalty
/// data are built once and reused across calls with different (alpha, beta).
class InnerSolver {
 public:
  InnerSolver(const LatticeSpec& lattice, const PayoffSpec& payoff, const MarketData& market,
              std::size_t max_nodes = StateGraph::kDefaultMaxNodes)
      : graph_(std::make_shared<StateGraph>(lattice, payoff, max_nodes)), market_(market) {
    market_.validate();
    if (market_.maturities() != static_cast<std::size_t>(lattice.stages))
      throw InvalidInput("inner problem: market maturities must equal lattice stages");
    const std::size_t n = market_.strike_count();
    calls_.resize(graph_->size() * n);
    power_.assign(graph_->size(), 0.0);
    for (std::size_t v = 0; v < graph_->size(); ++v) {
      const double x = (*graph_)[v].x;
      for (std::size_t j = 0; j < n; ++j) calls_[v * n + j] = std::max(x - market_.strikes[j], 0.0);
      if (market_.power) power_[v] = std::pow(std::abs(x), market_.power->p);
    }
  }

  const StateGraph& graph() const { return *graph_; }
  std::shared_ptr<const StateGraph> graph_ptr() const { return graph_; }
  const MarketData& market() const { return market_; }
  double call_payoff(std::size_t node, std::size_t j) const {
    return calls_[node * market_.strike_count() + j];
  }
  double power_payoff(std::size_t node) const { return power_[node]; }

  /// Immediate stop value at a node excluding the continuation value of the
  /// stop child.
  double stop_reward(std::size_t v, const Matrix& alpha, double beta) const {
    const auto& nd = (*graph_)[v];
    const std::size_t n = market_.strike_count();
    double s = nd.reward;
    const auto arow = alpha.row(static_cast<std::size_t>(nd.stage));
    const double* cp = calls_.data() + v * n;
    for (std::size_t j = 0; j < n; ++j) s -= arow[j] * cp[j];
    if (graph_->is_last_stage(nd)) s -= beta * power_[v];
    return s;
  }

  /// Backward induction. STOP wins ties.
  InnerResult solve(const Matrix& alpha, double beta = 0.0) const {
    check_alpha(alpha);
    const auto& g = *graph_;
    const std::size_t S = g.size();
    InnerResult r;
    r.table.value.assign(S, 0.0);
    r.table.stop.assign(S, 0.0);
    r.table.cont.assign(S, -std::numeric_limits<double>::infinity());
    r.policy.action.assign(S, Action::STOP);
    for (std::size_t i = S; i-- > 0;) {
      const auto& nd = g[i];
      double sv = stop_reward(i, alpha, beta);
      if (nd.stop_child >= 0) sv += r.table.value[static_cast<std::size_t>(nd.stop_child)];
      r.table.stop[i] = sv;
      double best = sv;
      if (nd.up >= 0) {
        const double cv = 0.5 * (r.table.value[static_cast<std::size_t>(nd.up)] +
                                 r.table.value[static_cast<std::size_t>(nd.down)]);
        r.table.cont[i] = cv;
        if (cv > sv) {
          best = cv;
          r.policy.action[i] = Action::CONTINUE;
        }
      }
      r.table.value[i] = best;
    }
    r.value = r.table.value[0];
    r.stats = statistics(r.policy);
    return r;
  }

  /// Deterministic policy as stop probabilities in {0, 1}.
  static std::vector<double> stop_probabilities(const StoppingPolicy& policy) {
    std::vector<double> p(policy.action.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = policy.action[i] == Action::STOP ? 1.0 : 0.0;
    return p;
  }

  /// Expectations of the call and power statistics and of Phi under a
  /// deterministic policy.
  InnerStats statistics(const StoppingPolicy& policy) const {
    const auto fs = forward_masses(*graph_, stop_probabilities(policy));
    return statistics_from_masses(fs.stop_mass);
  }

  InnerStats statistics_from_masses(const std::vector<double>& stop_mass) const {
    const auto& g = *graph_;
    const std::size_t n = market_.strike_count();
    InnerStats st;
    st.call_expectations = Matrix(market_.maturities(), n, 0.0);
    for (std::size_t v = 0; v < g.size(); ++v) {
      const double w = stop_mass[v];
      if (w == 0.0) continue;
      const auto& nd = g[v];
      auto row = st.call_expectations.row(static_cast<std::size_t>(nd.stage));
      for (std::size_t j = 0; j < n; ++j) row[j] += w * calls_[v * n + j];
      if (g.is_last_stage(nd)) st.power_moment += w * power_[v];
      st.payoff_expectation += w * nd.reward;
    }
    return st;
  }

  /// Propagates unit mass from the root. `stop_prob[v]` is the fraction of
  /// the mass arriving at v that stops there; horizon nodes always stop.
  static ForwardSupport forward_masses(const StateGraph& g, const std::vector<double>& stop_prob) {
    ForwardSupport fs;
    const std::size_t S = g.size();
    fs.inflow.assign(S, 0.0);
    fs.stop_mass.assign(S, 0.0);
    fs.inflow[0] = 1.0;
    for (std::size_t v = 0; v < S; ++v) {
      const double m = fs.inflow[v];
      if (m == 0.0) continue;
      const auto& nd = g[v];
      const double p = nd.up < 0 ? 1.0 : std::clamp(stop_prob[v], 0.0, 1.0);
      const double s = m * p;
      fs.stop_mass[v] = s;
      if (s > 0.0 && nd.stop_child >= 0) fs.inflow[static_cast<std::size_t>(nd.stop_child)] += s;
      if (m - s > 0.0 && nd.up >= 0) {
        fs.inflow[static_cast<std::size_t>(nd.up)] += 0.5 * (m - s);
        fs.inflow[static_cast<std::size_t>(nd.down)] += 0.5 * (m - s);
      }
    }
    fs.marginals = stage_marginals(g, fs.stop_mass);
    return fs;
  }

  /// Law of the stopped level at each stage.
  static std::vector<DiscreteMeasure> stage_marginals(const StateGraph& g,
                                                      const std::vector<double>& stop_mass) {
    const int m = g.lattice().stages;
    std::vector<std::map<int, double>> by_level(static_cast<std::size_t>(m));
    for (std::size_t v = 0; v < g.size(); ++v)
      if (stop_mass[v] > 0.0) by_level[static_cast<std::size_t>(g[v].stage)][g[v].k] += stop_mass[v];
    std::vector<DiscreteMeasure> out;
    for (const auto& lv : by_level) {
      std::vector<Atom> atoms;
      for (const auto& [k, w] : lv) atoms.push_back({k * g.lattice().dx, w});
      out.push_back(DiscreteMeasure::from_weights(std::move(atoms), 1e-15));
    }
    return out;
  }

 private:
  void check_alpha(const Matrix& alpha) const {
    if (alpha.rows() != market_.maturities() || alpha.cols() != market_.strike_count())
      throw InvalidInput("inner problem: alpha must be maturities x strikes");
  }

  std::shared_ptr<StateGraph> graph_;
  MarketData market_;
  std::vector<double> calls_;
  std::vector<double> power_;
};

inline ForwardSupport forward_support(const StoppingPolicy& policy, const StateGraph& graph) {
  return InnerSolver::forward_masses(graph, InnerSolver::stop_probabilities(policy));
}

struct InnerProblem {
  LatticeSpec lattice;
  PayoffSpec payoff;
  MarketData market;
  Matrix alpha;
  double beta = 0.0;
};

inline InnerResult solve_inner(const InnerProblem& problem) {
  return InnerSolver(problem.lattice, problem.payoff, problem.market)
      .solve(problem.alpha, problem.beta);
}

/// Stopped paths charged by a stopping rule, with their probabilities.
/// Increments run to the last stop time only. Intended for small horizons.
inline std::vector<WeightedPath> support_paths(const StateGraph& g,
                                               const std::vector<double>& stop_prob,
                                               double min_mass = 1e-14,
                                               std::size_t budget = 2'000'000) {
  std::vector<WeightedPath> out;
  StoppedPath cur;
  auto visit = [&](auto&& self, std::int32_t v, double mass) -> void {
    const auto& nd = g[static_cast<std::size_t>(v)];
    const double p = nd.up < 0 ? 1.0 : std::clamp(stop_prob[static_cast<std::size_t>(v)], 0.0, 1.0);
    const double s = mass * p;
    if (s > min_mass) {
      cur.stop_times.push_back(nd.t);
      if (nd.stop_child >= 0) {
        self(self, nd.stop_child, s);
      } else {
        if (out.size() >= budget) throw BudgetExceeded("support_paths: too many stopped paths");
        out.push_back({cur, s});
      }
      cur.stop_times.pop_back();
    }
    const double c = mass - s;
    if (c > min_mass && nd.up >= 0) {
      cur.increments.push_back(1);
      self(self, nd.up, 0.5 * c);
      cur.increments.back() = -1;
      self(self, nd.down, 0.5 * c);
      cur.increments.pop_back();
    }
  };
  visit(visit, g.root(), 1.0);
  return out;
}

/// Superhedge read off a value table: S is the martingale part of the value
/// process started at S0, and on every stopped path
///   S_{theta_m} + sum_i alpha_i . (omega_{theta_i} - K)^+ + beta |omega_{theta_m}|^p >= Phi.
struct DualCertificate {
  double S0 = 0.0;
  double static_value = 0.0;     // alpha . C + beta V
  double upper_value = 0.0;      // S0 + static_value
  double min_node_residual = 0.0;
  double min_path_residual = std::numeric_limits<double>::infinity();
  std::size_t paths_checked = 0;
  bool paths_enumerated = false;

  double min_residual() const {
    return paths_enumerated ? std::min(min_node_residual, min_path_residual) : min_node_residual;
  }
};

/// Checks the value table at (alpha, beta): supermartingale and stop
/// inequalities at every node and, for N <= `enumerate_limit`, pathwise
/// domination against Phi evaluated directly on each enumerated path.
inline DualCertificate extract_certificate(const InnerSolver& inner, const Matrix& alpha,
                                           double beta, const ValueTable& table,
                                           int enumerate_limit = 12) {
  const auto& g = inner.graph();
  const auto& market = inner.market();
  DualCertificate c;
  c.S0 = table.value.at(0);
  c.static_value = dot(alpha, market.calls) + (market.power ? beta * market.power->V : 0.0);
  c.upper_value = c.S0 + c.static_value;

  double node_res = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto& nd = g[v];
    double sv = inner.stop_reward(v, alpha, beta);
    if (nd.stop_child >= 0) sv += table.value[static_cast<std::size_t>(nd.stop_child)];
    node_res = std::min(node_res, table.value[v] - sv);
    if (nd.up >= 0) {
      const double cv = 0.5 * (table.value[static_cast<std::size_t>(nd.up)] +
                               table.value[static_cast<std::size_t>(nd.down)]);
      node_res = std::min(node_res, table.value[v] - cv);
    }
  }
  c.min_node_residual = node_res;

  const auto& lat = g.lattice();
  if (lat.steps > enumerate_limit) return c;
  c.paths_enumerated = true;
  const std::size_t n = market.strike_count();
  for_each_path(lat, [&](const WeightedPath& wp) {
    const auto& path = wp.path;
    double S = c.S0;
    double statics = 0.0;
    std::int32_t v = g.root();
    std::size_t stage = 0;
    for (int t = 0;; ++t) {
      while (stage < path.stop_times.size() && path.stop_times[stage] == t) {
        const auto& nd = g[static_cast<std::size_t>(v)];
        for (std::size_t j = 0; j < n; ++j)
          statics += alpha(stage, j) * inner.call_payoff(static_cast<std::size_t>(v), j);
        if (g.is_last_stage(nd)) statics += beta * inner.power_payoff(static_cast<std::size_t>(v));
        ++stage;
        if (nd.stop_child >= 0) v = nd.stop_child;
      }
      if (stage == path.stop_times.size()) break;
      const auto& nd = g[static_cast<std::size_t>(v)];
      const auto next = path.increments[static_cast<std::size_t>(t)] > 0 ? nd.up : nd.down;
      const double mean_next = 0.5 * (table.value[static_cast<std::size_t>(nd.up)] +
                                      table.value[static_cast<std::size_t>(nd.down)]);
      S += table.value[static_cast<std::size_t>(next)] - mean_next;
      v = next;
    }
    const double phi = evaluate(g.payoff(), path, lat.dx);
    c.min_path_residual = std::min(c.min_path_residual, S + statics - phi);
    ++c.paths_checked;
  });
  return c;
}

}  // namespace skembed
