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

/// @file dual_solver.hpp
/// @brief Static-hedge dual: minimizes F(alpha, beta) = G(alpha, beta) +
/// alpha.C + beta V over call weights alpha and the power weight beta, where
/// G is the lattice multiple-stopping value with penalized statics.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/lattice.hpp"
#include "skembed/matrix.hpp"
#include "skembed/measures.hpp"
#include "skembed/stopping_dp.hpp"

namespace skembed {

/// Continuous piecewise-linear function with linear extension beyond the
/// outer knots.
struct PiecewiseLinear {
  std::vector<double> knots;
  std::vector<double> values;
  double left_slope = 0.0;
  double right_slope = 0.0;

  double operator()(double x) const {
    if (knots.empty()) return 0.0;
    if (x <= knots.front()) return values.front() + left_slope * (x - knots.front());
    if (x >= knots.back()) return values.back() + right_slope * (x - knots.back());
    const auto it = std::upper_bound(knots.begin(), knots.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - knots.begin());
    const double w = (x - knots[j - 1]) / (knots[j] - knots[j - 1]);
    return values[j - 1] + w * (values[j] - values[j - 1]);
  }

  double lipschitz() const {
    double L = std::max(std::abs(left_slope), std::abs(right_slope));
    for (std::size_t j = 1; j < knots.size(); ++j)
      L = std::max(L, std::abs((values[j] - values[j - 1]) / (knots[j] - knots[j - 1])));
    return L;
  }

  /// lambda(x) = sum_j a_j (x - K_j)^+ as a piecewise-linear function.
  static PiecewiseLinear from_calls(const std::vector<double>& strikes, std::span<const double> a) {
    PiecewiseLinear f;
    f.knots = strikes;
    double slope = 0.0;
    double val = 0.0;
    for (std::size_t j = 0; j < strikes.size(); ++j) {
      if (j > 0) val += slope * (strikes[j] - strikes[j - 1]);
      f.values.push_back(val);
      slope += a[j];
    }
    f.right_slope = slope;
    return f;
  }
};

struct MultiplierMatrix {
  Matrix alpha;
  double beta = 0.0;
};

enum class DualStatus { CONVERGED, TARGET_REACHED, NOT_CONVERGED };

inline const char* to_string(DualStatus s) {
  switch (s) {
    case DualStatus::CONVERGED: return "CONVERGED";
    case DualStatus::TARGET_REACHED: return "TARGET_REACHED";
    case DualStatus::NOT_CONVERGED: return "NOT_CONVERGED";
  }
  return "?";
}

struct DualOptions {
  int max_iters = 5000;
  int window = 50;                // iterations over which improvement is measured
  double improve_tol = 1e-7;      // minimum best-value improvement over `window`
  std::optional<double> target;   // known optimum (e.g. the lattice primal value)
  double target_gap = 1e-9;       // stop once best - target falls below this
  int patience = 5;               // non-improving steps before the level gap halves
  double initial_level_gap = 0.0; // 0 picks a scale from F(0)
  std::size_t max_nodes = StateGraph::kDefaultMaxNodes;
};

struct DualReport {
  double value = std::numeric_limits<double>::infinity();
  MultiplierMatrix optimizer;
  int iterations = 0;
  int best_iteration = 0;
  DualStatus status = DualStatus::NOT_CONVERGED;
  std::vector<double> history;         // F at each iterate
  std::vector<double> subgradient_norms;
  double certificate_residual = std::numeric_limits<double>::quiet_NaN();
};

struct CertificateReport {
  double min_residual = 0.0;
  double min_node_residual = 0.0;
  double min_path_residual = 0.0;
  std::size_t paths_checked = 0;
  bool paths_enumerated = false;
  double S0 = 0.0;
  double static_value = 0.0;
  double upper_value = 0.0;
  double value_mismatch = 0.0;  // |upper_value - report.value|
};

namespace detail {

inline std::string describe(const ArbitrageVerdict& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.violations.size() && i < 8; ++i) {
    const auto& w = v.violations[i];
    os << (i ? "; " : "") << w.tag << (w.boundary ? "(boundary)" : "") << " at [";
    for (std::size_t k = 0; k < w.indices.size(); ++k) os << (k ? "," : "") << w.indices[k];
    os << "] slack " << w.slack;
  }
  if (v.violations.size() > 8) os << "; ...";
  return os.str();
}

/// Polyak subgradient descent on F. With a known optimum the step targets
/// it directly; otherwise it targets best - delta and halves delta after
/// `patience` steps without reaching that level, restarting from the best
/// point.
inline DualReport minimize_dual(const InnerSolver& inner, const DualOptions& opt) {
  const auto& market = inner.market();
  const std::size_t m = market.maturities();
  const std::size_t n = market.strike_count();
  const bool power = market.power.has_value();
  const std::size_t dim = m * n + (power ? 1 : 0);

  // The power coordinate is rescaled so its subgradient has the same order
  // as the call coordinates.
  double beta_scale = 1.0;
  if (power) {
    double xmax = 0.0;
    double pmax = 0.0;
    for (std::size_t v = 0; v < inner.graph().size(); ++v) {
      xmax = std::max(xmax, std::abs(inner.graph()[v].x));
      pmax = std::max(pmax, inner.power_payoff(v));
    }
    if (pmax > 0.0) beta_scale = std::max(xmax, 1e-12) / pmax;
  }

  std::vector<double> z(dim, 0.0);
  std::vector<double> best_z = z;
  Matrix alpha(m, n, 0.0);
  auto unpack = [&](const std::vector<double>& v, Matrix& a, double& beta) {
    for (std::size_t i = 0; i < m * n; ++i) a.flat()[i] = v[i];
    beta = power ? v[m * n] * beta_scale : 0.0;
  };

  DualReport rep;
  std::vector<double> g(dim);
  auto evaluate = [&](const std::vector<double>& v) {
    double beta = 0.0;
    unpack(v, alpha, beta);
    const auto r = inner.solve(alpha, beta);
    double F = r.value + dot(alpha, market.calls);
    for (std::size_t i = 0; i < m * n; ++i)
      g[i] = market.calls.flat()[i] - r.stats.call_expectations.flat()[i];
    if (power) {
      F += beta * market.power->V;
      g[m * n] = (market.power->V - r.stats.power_moment) * beta_scale;
    }
    return F;
  };

  double F = evaluate(z);
  double best = F;
  double delta = opt.initial_level_gap > 0.0 ? opt.initial_level_gap : 0.1 * (1.0 + std::abs(F));
  int since_progress = 0;
  std::vector<double> d(dim, 0.0);
  std::vector<double> best_trace;

  for (int it = 0;; ++it) {
    rep.history.push_back(F);
    double gn2 = 0.0;
    for (double gi : g) gn2 += gi * gi;
    rep.subgradient_norms.push_back(std::sqrt(gn2));
    if (F < best) {
      if (F < best - 0.5 * delta) since_progress = 0;
      best = F;
      best_z = z;
      rep.best_iteration = it;
    }
    best_trace.push_back(best);
    rep.iterations = it + 1;

    if (opt.target && best - *opt.target <= opt.target_gap) {
      rep.status = DualStatus::TARGET_REACHED;
      break;
    }
    if (gn2 == 0.0) {  // F is minimal at z
      rep.status = DualStatus::CONVERGED;
      break;
    }
    if (it >= opt.window &&
        best_trace[static_cast<std::size_t>(it - opt.window)] - best < opt.improve_tol) {
      rep.status = DualStatus::CONVERGED;
      break;
    }
    if (it + 1 >= opt.max_iters) {
      rep.status = DualStatus::NOT_CONVERGED;
      break;
    }

    if (!opt.target && ++since_progress > opt.patience) {
      delta *= 0.5;
      since_progress = 0;
      z = best_z;
      F = evaluate(z);
      std::fill(d.begin(), d.end(), 0.0);
      continue;
    }
    const double level = opt.target ? *opt.target : best - delta;

    // Deflected direction d = g + gamma d_prev, gamma > 0 only when the new
    // subgradient turns back against the previous direction.
    double gd = 0.0;
    double dd = 0.0;
    for (std::size_t i = 0; i < dim; ++i) gd += g[i] * d[i], dd += d[i] * d[i];
    const double gamma = (gd < 0.0 && dd > 0.0) ? -1.5 * gd / dd : 0.0;
    double dn2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      d[i] = g[i] + gamma * d[i];
      dn2 += d[i] * d[i];
    }
    if (dn2 == 0.0) std::copy(g.begin(), g.end(), d.begin()), dn2 = gn2;
    const double step = std::max(F - level, 0.0) / dn2;
    for (std::size_t i = 0; i < dim; ++i) z[i] -= step * d[i];
    F = evaluate(z);
  }

  rep.value = best;
  rep.optimizer.alpha = Matrix(m, n, 0.0);
  unpack(best_z, rep.optimizer.alpha, rep.optimizer.beta);
  return rep;
}

}  // namespace detail

/// D0(K, C), or its power-constrained variant when `market.power` is set.
/// Requires strictly arbitrage-free prices.
inline DualReport solve_dual(const MarketData& market, const LatticeSpec& lattice,
                             const PayoffSpec& payoff, const DualOptions& opt = {}) {
  const auto verdict = arbitrage_check(market);
  if (!verdict.ok)
    throw MarketRejected("solve_dual: call prices are not strictly arbitrage-free: " +
                         detail::describe(verdict));
  const InnerSolver inner(lattice, payoff, market, opt.max_nodes);
  return detail::minimize_dual(inner, opt);
}

/// Knot-restricted D0(mu): call weights at the knots priced under mu. The
/// constant and linear parts of each lambda_i integrate to zero against a
/// centered mu, so the call weights carry the whole restriction.
inline DualReport solve_dual_measure(const std::vector<DiscreteMeasure>& mus,
                                     const std::vector<double>& knots, const LatticeSpec& lattice,
                                     const PayoffSpec& payoff, const DualOptions& opt = {}) {
  if (mus.empty()) throw InvalidInput("solve_dual_measure: no marginals");
  const auto verdict = peacock_check(mus);
  if (!verdict.ok || !verdict.centered)
    throw MarketRejected("solve_dual_measure: marginals are not a centered peacock: " +
                         detail::describe(verdict));
  MarketData market;
  market.strikes = knots;
  market.calls = Matrix(mus.size(), knots.size(), 0.0);
  for (std::size_t i = 0; i < mus.size(); ++i)
    for (std::size_t j = 0; j < knots.size(); ++j) market.calls(i, j) = call_price(mus[i], knots[j]);
  const InnerSolver inner(lattice, payoff, market, opt.max_nodes);
  return detail::minimize_dual(inner, opt);
}

/// Rebuilds the superhedge at the reported multipliers and checks it.
inline CertificateReport verify_certificate(const DualReport& report, const MarketData& market,
                                            const LatticeSpec& lattice, const PayoffSpec& payoff,
                                            int enumerate_limit = 12) {
  const InnerSolver inner(lattice, payoff, market);
  const auto r = inner.solve(report.optimizer.alpha, report.optimizer.beta);
  const auto c = extract_certificate(inner, report.optimizer.alpha, report.optimizer.beta, r.table,
                                     enumerate_limit);
  CertificateReport out;
  out.min_residual = c.min_residual();
  out.min_node_residual = c.min_node_residual;
  out.min_path_residual = c.paths_enumerated ? c.min_path_residual : 0.0;
  out.paths_checked = c.paths_checked;
  out.paths_enumerated = c.paths_enumerated;
  out.S0 = c.S0;
  out.static_value = c.static_value;
  out.upper_value = c.upper_value;
  out.value_mismatch = std::abs(c.upper_value - report.value);
  return out;
}

}  // namespace skembed
