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

/// @file experiments.hpp
/// @brief Nested strike schedules, convergence of the calibrated bound to
/// the marginal-constrained one, recovery of marginals from call quotes,
/// and rate audits against the theoretical envelopes.

#pragma once

#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/measures.hpp"
#include "skembed/metrics.hpp"
#include "skembed/primal_lp.hpp"

namespace skembed {

enum class ScheduleKind { STAB, STAB2 };

inline const char* to_string(ScheduleKind k) { return k == ScheduleKind::STAB ? "STAB" : "STAB2"; }

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "STAB") return ScheduleKind::STAB;
  if (s == "STAB2") return ScheduleKind::STAB2;
  throw InvalidInput("unknown schedule kind '" + s + "'");
}

struct GridLevel {
  std::vector<double> strikes;
  double bound = 0.0;  // |K| = min(-K_1, K_n)
  double mesh = 0.0;   // largest spacing
};

struct GridSchedule {
  ScheduleKind kind = ScheduleKind::STAB;
  std::vector<GridLevel> levels;
};

/// Level l (from 0) is {j h_l : |j h_l| <= w_l}. STAB uses w_l = a 2^{l/2}
/// and h_l = h0 2^{-ceil(l/2)}; STAB2 uses w_l = a 2^{l/4} and h_l = h0 2^{-l},
/// so that |K| sqrt(dK) shrinks like 2^{-l/4}.
inline GridSchedule make_schedule(ScheduleKind kind, int levels, double base_width,
                                  double base_step) {
  if (levels < 2) throw InvalidInput("make_schedule: need at least 2 levels");
  if (!(base_width > 0.0) || !(base_step > 0.0) || base_step > base_width)
    throw InvalidInput("make_schedule: need 0 < base_step <= base_width");
  GridSchedule s;
  s.kind = kind;
  for (int l = 0; l < levels; ++l) {
    const bool stab = kind == ScheduleKind::STAB;
    const double w = base_width * std::exp2(stab ? l / 2.0 : l / 4.0);
    const double h = std::ldexp(base_step, -(stab ? (l + 1) / 2 : l));
    const long J = static_cast<long>(std::floor(w / h + 1e-9));
    GridLevel g;
    for (long j = -J; j <= J; ++j) g.strikes.push_back(static_cast<double>(j) * h);
    g.bound = std::min(-g.strikes.front(), g.strikes.back());
    g.mesh = h;
    s.levels.push_back(std::move(g));
  }
  return s;
}

/// C_ij = mu_i((x - K_j)^+) at the level's strikes. With `p` set, the power
/// constraint carries V = mu_m(|x|^p).
inline MarketData calls_from_measure(const std::vector<DiscreteMeasure>& mus, const GridLevel& level,
                                     std::optional<double> p = std::nullopt) {
  if (mus.empty()) throw InvalidInput("calls_from_measure: no marginals");
  const auto v = peacock_check(mus);
  if (!v.ok) throw MarketRejected("calls_from_measure: marginals are not a peacock");
  MarketData mk;
  mk.strikes = level.strikes;
  mk.calls = Matrix(mus.size(), level.strikes.size(), 0.0);
  for (std::size_t i = 0; i < mus.size(); ++i)
    for (std::size_t j = 0; j < level.strikes.size(); ++j)
      mk.calls(i, j) = call_price(mus[i], level.strikes[j]);
  if (p) mk.power = PowerConstraint{*p, power_moment(mus.back(), *p)};
  return mk;
}

/// One-marginal envelope (dK)^{1/(4q)} + |K|^{-p/(4q^2)}.
inline double one_marginal_envelope(double bound_K, double mesh_K, double p) {
  const double q = p / (p - 1.0);
  return std::pow(mesh_K, 1.0 / (4.0 * q)) + std::pow(bound_K, -p / (4.0 * q * q));
}

/// Multi-marginal envelope |K|^{r} (sqrt(dK) + |K|^{-p/(2q)})^{r}, r = (p-2)/(p-1).
inline double multi_marginal_envelope(double bound_K, double mesh_K, double p) {
  const double q = p / (p - 1.0);
  const double r = (p - 2.0) / (p - 1.0);
  return std::pow(bound_K, r) * std::pow(std::sqrt(mesh_K) + std::pow(bound_K, -p / (2.0 * q)), r);
}

struct RateRow {
  int n = 0;
  double bound_K = 0.0;
  double mesh_K = 0.0;
  double value = 0.0;        // P^V with a power constraint, P otherwise
  double gap = 0.0;          // value - P(mu)
  double theory_bound = 0.0;
  double plain_value = 0.0;  // P(K, C) without the power row
};

struct RateTable {
  std::vector<RateRow> rows;
  double reference = 0.0;  // P(mu) on the same lattice
  double slope = std::numeric_limits<double>::quiet_NaN();
  int stages = 1;
  std::optional<double> p;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "n,bound_K,mesh_K,value,gap,theory_bound\n";
    for (const auto& r : rows)
      os << r.n << ',' << r.bound_K << ',' << r.mesh_K << ',' << r.value << ',' << r.gap << ','
         << r.theory_bound << '\n';
    return os.str();
  }
};

namespace detail {

/// Least-squares slope of log(gap) against log(bound) over rows with
/// gap above `floor`; NaN with fewer than two such rows.
inline double log_log_slope(const std::vector<RateRow>& rows, double floor) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (const auto& r : rows) {
    if (!(r.gap > floor) || !(r.theory_bound > 0.0)) continue;
    const double x = std::log(r.theory_bound);
    const double y = std::log(r.gap);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++k;
  }
  if (k < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = k * sxx - sx * sx;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (k * sxy - sx * sy) / den;
}

}  // namespace detail

struct ConvergenceOptions {
  PrimalOptions primal{};
  std::optional<double> power_p;  // solve P^V with this exponent as well as P
  double envelope_p = 4.0;        // exponent for the theory column without power
  double gap_floor = 1e-9;        // gaps at or below this are treated as zero in fits
  bool parallel = true;
};

namespace detail {

inline double solve_value(const Constraints& c, const LatticeSpec& lat, const PayoffSpec& payoff,
                          const PrimalOptions& opt, const std::string& what) {
  const auto r = solve_primal(c, lat, payoff, opt);
  if (r.status != LPStatus::OPTIMAL)
    throw MarketRejected(what + ": LP is " + std::string(to_string(r.status)));
  return r.value;
}

}  // namespace detail

/// Solves P(K^n, C^n) (and P^V) for every schedule level against P(mu) on the
/// same lattice. The marginals are first moved onto the lattice.
inline RateTable convergence_run(const std::vector<DiscreteMeasure>& mus, const PayoffSpec& payoff,
                                 const GridSchedule& schedule, const LatticeSpec& lattice,
                                 const ConvergenceOptions& opt = {}) {
  if (mus.size() != static_cast<std::size_t>(lattice.stages))
    throw InvalidInput("convergence_run: need one marginal per stage");
  std::vector<DiscreteMeasure> q;
  for (const auto& mu : mus) q.push_back(quantize(mu, lattice.dx, lattice.steps));

  RateTable t;
  t.stages = lattice.stages;
  t.p = opt.power_p;
  const double p_env = opt.power_p.value_or(opt.envelope_p);

  auto level_task = [&](std::size_t l) {
    const auto& lv = schedule.levels[l];
    RateRow r;
    r.n = static_cast<int>(l + 1);
    r.bound_K = lv.bound;
    r.mesh_K = lv.mesh;
    const std::string tag = "level " + std::to_string(l + 1);
    r.plain_value = detail::solve_value(Constraints::calls(calls_from_measure(q, lv)), lattice,
                                        payoff, opt.primal, tag);
    r.value = opt.power_p ? detail::solve_value(
                                Constraints::calls(calls_from_measure(q, lv, opt.power_p)),
                                lattice, payoff, opt.primal, tag + " (power)")
                          : r.plain_value;
    r.theory_bound = lattice.stages == 1 ? one_marginal_envelope(lv.bound, lv.mesh, p_env)
                                         : multi_marginal_envelope(lv.bound, lv.mesh, p_env);
    return r;
  };

  const std::size_t L = schedule.levels.size();
  if (opt.parallel) {
    auto ref = std::async(std::launch::async, [&] {
      return detail::solve_value(Constraints::of_marginals(q), lattice, payoff, opt.primal,
                                 "reference");
    });
    std::vector<std::future<RateRow>> jobs;
    for (std::size_t l = 0; l < L; ++l) jobs.push_back(std::async(std::launch::async, level_task, l));
    t.reference = ref.get();
    for (auto& j : jobs) t.rows.push_back(j.get());
  } else {
    t.reference =
        detail::solve_value(Constraints::of_marginals(q), lattice, payoff, opt.primal, "reference");
    for (std::size_t l = 0; l < L; ++l) t.rows.push_back(level_task(l));
  }
  for (auto& r : t.rows) r.gap = r.value - t.reference;
  t.slope = detail::log_log_slope(t.rows, opt.gap_floor);
  return t;
}

struct RecoveryRow {
  int n = 0;
  double bound_K = 0.0;
  double mesh_K = 0.0;
  double rho = 0.0;
  double w1 = 0.0;
};

/// Per level: rebuild a measure from the level's call quotes of mu and
/// measure its distance to mu.
inline std::vector<RecoveryRow> recovery_run(const DiscreteMeasure& mu, const GridSchedule& schedule) {
  std::vector<RecoveryRow> out;
  for (std::size_t l = 0; l < schedule.levels.size(); ++l) {
    const auto& lv = schedule.levels[l];
    const auto mk = calls_from_measure({mu}, lv);
    const auto nu = measure_from_calls(mk, 0);
    out.push_back({static_cast<int>(l + 1), lv.bound, lv.mesh, levy_prokhorov(nu, mu),
                   wasserstein1(nu, mu)});
  }
  return out;
}

struct RateAudit {
  bool pass = false;
  bool covered = true;         // false when the envelope is not established for (stages, p)
  std::string label;           // PASS, FAIL or UNCOVERED
  double fitted_constant = 0;  // geometric mean of gap / bound over positive gaps
  double dominating_constant = 0;  // max of gap / bound; gap <= this x bound everywhere
  double slope = std::numeric_limits<double>::quiet_NaN();
  int positive_rows = 0;
};

/// The envelope constants are existential, so the audit fits one. It passes
/// when the constants and the log-log slope are finite and the gap shrinks
/// at least as fast as the envelope (slope >= `min_slope`). Rows whose gap
/// is at or below `gap_floor` count as dominated.
inline RateAudit rate_audit(const RateTable& table, double p, double min_slope = 0.9,
                            double gap_floor = 1e-9) {
  RateAudit a;
  a.covered = table.stages == 1 ? p > 1.0 : p > 3.0;
  double log_sum = 0.0;
  for (const auto& r : table.rows) {
    if (!(r.theory_bound > 0.0) || !std::isfinite(r.theory_bound)) {
      a.label = "FAIL";
      return a;
    }
    if (!(r.gap > gap_floor)) continue;
    const double ratio = r.gap / r.theory_bound;
    log_sum += std::log(ratio);
    a.dominating_constant = std::max(a.dominating_constant, ratio);
    ++a.positive_rows;
  }
  if (a.positive_rows == 0) {
    a.fitted_constant = 0.0;
    a.pass = true;
  } else {
    a.fitted_constant = std::exp(log_sum / a.positive_rows);
    a.slope = detail::log_log_slope(table.rows, gap_floor);
    // One positive row fixes a constant but no slope.
    const bool slope_ok = a.positive_rows < 2 || (std::isfinite(a.slope) && a.slope >= min_slope);
    a.pass = std::isfinite(a.fitted_constant) && std::isfinite(a.dominating_constant) && slope_ok;
  }
  a.label = !a.covered ? "UNCOVERED" : (a.pass ? "PASS" : "FAIL");
  return a;
}

}  // namespace skembed
