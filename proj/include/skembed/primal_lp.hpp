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

/// @file primal_lp.hpp
/// @brief Lattice primal problem as a linear program over randomized
/// multiple-stopping flows, constrained by call prices (optionally with a
/// power moment) or by full marginal laws.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/lattice.hpp"
#include "skembed/matrix.hpp"
#include "skembed/measures.hpp"
#include "skembed/simplex.hpp"
#include "skembed/state_graph.hpp"
#include "skembed/stopping_dp.hpp"

namespace skembed {

enum class ConstraintMode { CALLS, MARGINALS };

struct Constraints {
  ConstraintMode mode = ConstraintMode::CALLS;
  MarketData market;
  std::vector<DiscreteMeasure> marginals;

  static Constraints calls(MarketData m) { return {ConstraintMode::CALLS, std::move(m), {}}; }
  static Constraints of_marginals(std::vector<DiscreteMeasure> mus) {
    return {ConstraintMode::MARGINALS, {}, std::move(mus)};
  }
};

/// Splits each atom between the two neighbouring lattice levels so that
/// mass and mean are preserved. Returns masses indexed by level k + N.
inline std::vector<double> quantize_levels(const DiscreteMeasure& mu, double dx, int N) {
  std::vector<double> w(static_cast<std::size_t>(2 * N + 1), 0.0);
  for (const auto& a : mu.atoms()) {
    const double u = a.position / dx;
    if (std::abs(u) > N + 1e-9) {
      std::ostringstream os;
      os << "quantization failure: atom at " << a.position << " lies outside the lattice range ["
         << -N * dx << ", " << N * dx << "]";
      throw InvalidInput(os.str());
    }
    const double r = std::round(u);
    if (std::abs(u - r) <= 1e-9) {
      w[static_cast<std::size_t>(static_cast<int>(r) + N)] += a.mass;
      continue;
    }
    const int lo = static_cast<int>(std::floor(u));
    const double f = u - lo;
    w[static_cast<std::size_t>(lo + N)] += a.mass * (1.0 - f);
    w[static_cast<std::size_t>(lo + 1 + N)] += a.mass * f;
  }
  return w;
}

inline DiscreteMeasure quantize(const DiscreteMeasure& mu, double dx, int N) {
  const auto w = quantize_levels(mu, dx, N);
  std::vector<Atom> atoms;
  for (int k = -N; k <= N; ++k)
    if (w[static_cast<std::size_t>(k + N)] > 0.0) atoms.push_back({k * dx, w[static_cast<std::size_t>(k + N)]});
  return DiscreteMeasure::from_weights(std::move(atoms));
}

struct ColumnInfo {
  std::int32_t node = 0;
  bool stop = true;
};

enum class RowKind { FLOW, CALL, POWER, MARGINAL };

struct RowInfo {
  RowKind kind = RowKind::FLOW;
  int i = 0;  // node (FLOW), maturity (CALL, MARGINAL)
  int j = 0;  // strike (CALL) or level k (MARGINAL)
};

struct LPInstance {
  std::shared_ptr<const StateGraph> graph;
  LinearProgram lp;
  std::vector<ColumnInfo> columns;
  std::vector<RowInfo> row_info;
  std::vector<std::int32_t> stop_col;  // per node
  std::vector<std::int32_t> cont_col;  // per node, -1 at the horizon
};

struct PrimalOptions {
  SimplexOptions simplex{};
  std::size_t max_nodes = StateGraph::kDefaultMaxNodes;
  /// Lower bounds on stop mass at chosen nodes, used to build perturbed
  /// (suboptimal) embeddings.
  std::vector<std::pair<std::int32_t, double>> forced_stop;
};

/// Variables are stop and continue masses per graph node. Flow rows say the
/// mass arriving at a node leaves it by stopping or continuing; the root
/// receives unit mass.
inline LPInstance build_lp(const Constraints& cons, const LatticeSpec& lattice,
                           const PayoffSpec& payoff, const PrimalOptions& opt = {}) {
  LPInstance inst;
  inst.graph = std::make_shared<StateGraph>(lattice, payoff, opt.max_nodes);
  const auto& g = *inst.graph;
  const int m = lattice.stages;
  const int N = lattice.steps;
  if (cons.mode == ConstraintMode::CALLS) {
    cons.market.validate();
    if (cons.market.maturities() != static_cast<std::size_t>(m))
      throw InvalidInput("build_lp: market maturities must equal lattice stages");
  } else {
    if (cons.marginals.size() != static_cast<std::size_t>(m))
      throw InvalidInput("build_lp: need one marginal per stage");
    const auto v = peacock_check(cons.marginals);
    if (!v.ok) throw MarketRejected("build_lp: marginals are not a peacock");
  }

  const std::size_t S = g.size();
  inst.stop_col.assign(S, -1);
  inst.cont_col.assign(S, -1);
  auto& lp = inst.lp;
  for (std::size_t v = 0; v < S; ++v) {
    inst.stop_col[v] = static_cast<std::int32_t>(inst.columns.size());
    inst.columns.push_back({static_cast<std::int32_t>(v), true});
    lp.objective.push_back(g[v].reward);
    if (g[v].up >= 0) {
      inst.cont_col[v] = static_cast<std::int32_t>(inst.columns.size());
      inst.columns.push_back({static_cast<std::int32_t>(v), false});
      lp.objective.push_back(0.0);
    }
  }
  lp.cols = inst.columns.size();

  lp.rows.resize(S);
  for (std::size_t v = 0; v < S; ++v) {
    auto& row = lp.rows[v].entries;
    row.push_back({inst.stop_col[v], 1.0});
    if (inst.cont_col[v] >= 0) row.push_back({inst.cont_col[v], 1.0});
    lp.rows[v].rhs = v == 0 ? 1.0 : 0.0;
    inst.row_info.push_back({RowKind::FLOW, static_cast<int>(v), 0});
  }
  for (std::size_t v = 0; v < S; ++v) {
    const auto& nd = g[v];
    if (nd.stop_child >= 0)
      lp.rows[static_cast<std::size_t>(nd.stop_child)].entries.push_back({inst.stop_col[v], -1.0});
    if (nd.up >= 0) {
      lp.rows[static_cast<std::size_t>(nd.up)].entries.push_back({inst.cont_col[v], -0.5});
      lp.rows[static_cast<std::size_t>(nd.down)].entries.push_back({inst.cont_col[v], -0.5});
    }
  }

  if (cons.mode == ConstraintMode::CALLS) {
    const auto& mk = cons.market;
    for (std::size_t i = 0; i < mk.maturities(); ++i) {
      for (std::size_t j = 0; j < mk.strike_count(); ++j) {
        LinearProgram::Row row;
        for (std::size_t v = 0; v < S; ++v) {
          if (static_cast<std::size_t>(g[v].stage) != i) continue;
          const double c = std::max(g[v].x - mk.strikes[j], 0.0);
          if (c != 0.0) row.entries.push_back({inst.stop_col[v], c});
        }
        row.rhs = mk.calls(i, j);
        lp.rows.push_back(std::move(row));
        inst.row_info.push_back({RowKind::CALL, static_cast<int>(i), static_cast<int>(j)});
      }
    }
    if (mk.power) {
      LinearProgram::Row row;
      for (std::size_t v = 0; v < S; ++v) {
        if (!g.is_last_stage(g[v]) || g[v].k == 0) continue;
        row.entries.push_back({inst.stop_col[v], std::pow(std::abs(g[v].x), mk.power->p)});
      }
      row.rhs = mk.power->V;
      lp.rows.push_back(std::move(row));
      inst.row_info.push_back({RowKind::POWER, m - 1, 0});
    }
  } else {
    for (int i = 0; i < m; ++i) {
      const auto w = quantize_levels(cons.marginals[static_cast<std::size_t>(i)], lattice.dx, N);
      std::vector<LinearProgram::Row> rows(static_cast<std::size_t>(2 * N + 1));
      for (std::size_t v = 0; v < S; ++v)
        if (g[v].stage == i) rows[static_cast<std::size_t>(g[v].k + N)].entries.push_back({inst.stop_col[v], 1.0});
      for (int k = -N; k <= N; ++k) {
        auto& row = rows[static_cast<std::size_t>(k + N)];
        row.rhs = w[static_cast<std::size_t>(k + N)];
        lp.rows.push_back(std::move(row));
        inst.row_info.push_back({RowKind::MARGINAL, i, k});
      }
    }
  }

  if (!opt.forced_stop.empty()) {
    lp.lower.assign(lp.cols, 0.0);
    for (const auto& [node, mass] : opt.forced_stop) {
      if (node < 0 || static_cast<std::size_t>(node) >= S)
        throw InvalidInput("build_lp: forced stop node out of range");
      lp.lower[static_cast<std::size_t>(inst.stop_col[static_cast<std::size_t>(node)])] = mass;
    }
  }

  // Starting basis: continue everywhere and stop at the horizon.
  lp.crash.assign(lp.rows.size(), -1);
  for (std::size_t v = 0; v < S; ++v)
    lp.crash[v] = inst.cont_col[v] >= 0 ? inst.cont_col[v] : inst.stop_col[v];
  return inst;
}

struct PrimalReport {
  LPStatus status = LPStatus::INFEASIBLE;
  double value = 0.0;
  std::shared_ptr<const StateGraph> graph;
  std::vector<double> stop_mass;
  std::vector<double> cont_mass;
  std::vector<double> stop_prob;
  std::vector<DiscreteMeasure> marginals;
  std::vector<std::int32_t> support_nodes;  // nodes with positive stop mass
  Matrix call_duals;                        // prices of the call rows (CALLS mode)
  double power_dual = 0.0;
  double primal_residual = 0.0;
  double complementary_slackness = 0.0;
  double boundary_slack = std::numeric_limits<double>::infinity();
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t pivots = 0;
};

inline PrimalReport solve_primal(const Constraints& cons, const LatticeSpec& lattice,
                                 const PayoffSpec& payoff, const PrimalOptions& opt = {}) {
  const auto inst = build_lp(cons, lattice, payoff, opt);
  const auto sol = simplex_solve(inst.lp, opt.simplex);
  PrimalReport rep;
  rep.status = sol.status;
  rep.graph = inst.graph;
  rep.rows = inst.lp.rows.size();
  rep.cols = inst.lp.cols;
  rep.pivots = sol.pivots;
  if (cons.mode == ConstraintMode::CALLS) {
    const auto all = arbitrage_check(cons.market, std::numeric_limits<double>::infinity());
    rep.boundary_slack = all.min_slack();
  }
  if (sol.status != LPStatus::OPTIMAL) return rep;

  const auto& g = *inst.graph;
  const std::size_t S = g.size();
  rep.value = sol.value;
  rep.primal_residual = sol.primal_residual;
  rep.complementary_slackness = sol.complementary_slackness;
  rep.stop_mass.assign(S, 0.0);
  rep.cont_mass.assign(S, 0.0);
  rep.stop_prob.assign(S, 1.0);
  for (std::size_t v = 0; v < S; ++v) {
    rep.stop_mass[v] = sol.x[static_cast<std::size_t>(inst.stop_col[v])];
    if (inst.cont_col[v] >= 0) rep.cont_mass[v] = sol.x[static_cast<std::size_t>(inst.cont_col[v])];
    const double tot = rep.stop_mass[v] + rep.cont_mass[v];
    rep.stop_prob[v] = tot > 0.0 ? rep.stop_mass[v] / tot : 1.0;
    if (rep.stop_mass[v] > 1e-12) rep.support_nodes.push_back(static_cast<std::int32_t>(v));
  }
  std::vector<double> clean = rep.stop_mass;
  for (double& w : clean)
    if (w <= 1e-15) w = 0.0;
  rep.marginals = InnerSolver::stage_marginals(g, clean);

  if (cons.mode == ConstraintMode::CALLS) {
    const auto& mk = cons.market;
    rep.call_duals = Matrix(mk.maturities(), mk.strike_count(), 0.0);
    for (std::size_t r = 0; r < inst.row_info.size(); ++r) {
      const auto& info = inst.row_info[r];
      if (info.kind == RowKind::CALL)
        rep.call_duals(static_cast<std::size_t>(info.i), static_cast<std::size_t>(info.j)) = sol.duals[r];
      else if (info.kind == RowKind::POWER)
        rep.power_dual = sol.duals[r];
    }
  }
  return rep;
}

}  // namespace skembed
