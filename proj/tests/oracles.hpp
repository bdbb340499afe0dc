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

// Independent reference computations and random generators shared by the
// unit tests and the acceptance binary. Nothing here calls the solver code
// it is used to check, apart from the path evaluator and the plain simplex
// used as a generic LP engine for transport problems.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "skembed/skembed.hpp"

namespace oracle {

using namespace skembed;

// ---- generators -----------------------------------------------------------

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// `atoms` distinct positions in [lo, hi], masses bounded away from zero.
inline DiscreteMeasure random_measure(Rng& rng, int atoms, double lo, double hi) {
  std::vector<double> xs;
  while (static_cast<int>(xs.size()) < atoms) {
    const double x = uniform(rng, lo, hi);
    if (std::none_of(xs.begin(), xs.end(), [&](double y) { return std::abs(x - y) < 1e-6; })) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  std::vector<Atom> out;
  double total = 0.0;
  for (double x : xs) {
    const double w = 0.05 + uniform(rng);
    out.push_back({x, w});
    total += w;
  }
  for (auto& a : out) a.mass /= total;
  return DiscreteMeasure::from_weights(std::move(out));
}

/// Random measure on {k dx : |k| <= K}.
inline DiscreteMeasure random_lattice_measure(Rng& rng, int atoms, double dx, int K) {
  std::vector<Atom> out;
  for (int i = 0; i < atoms; ++i) out.push_back({uniform_int(rng, -K, K) * dx, 0.05 + uniform(rng)});
  double total = 0.0;
  for (const auto& a : out) total += a.mass;
  for (auto& a : out) a.mass /= total;
  return DiscreteMeasure::from_weights(std::move(out));
}

/// Stopped marginals of a random randomized stopping rule on the lattice.
inline std::vector<DiscreteMeasure> random_policy_marginals(Rng& rng, const LatticeSpec& lat,
                                                            const PayoffSpec& payoff, double max_stop = 0.3) {
  StateGraph g(lat, payoff);
  std::vector<double> sp(g.size());
  for (auto& s : sp) s = max_stop * uniform(rng);
  return InnerSolver::forward_masses(g, sp).marginals;
}

inline MarketData market_from_marginals(const std::vector<DiscreteMeasure>& mus, std::vector<double> strikes) {
  MarketData mk;
  mk.strikes = std::move(strikes);
  mk.calls = Matrix(mus.size(), mk.strikes.size(), 0.0);
  for (std::size_t i = 0; i < mus.size(); ++i)
    for (std::size_t j = 0; j < mk.strikes.size(); ++j) {
      double c = 0.0;
      for (const auto& a : mus[i].atoms()) c += a.mass * std::max(a.position - mk.strikes[j], 0.0);
      mk.calls(i, j) = c;
    }
  return mk;
}

/// Interior market priced by a random stopping rule, n jittered strikes in
/// [lo, hi]. Retries until the quotes are strictly arbitrage-free.
inline MarketData random_interior_market(Rng& rng, const LatticeSpec& lat, const PayoffSpec& payoff, int n,
                                         double lo = -1.0, double hi = 1.0) {
  for (int tries = 0; tries < 1000; ++tries) {
    const auto mus = random_policy_marginals(rng, lat, payoff);
    std::vector<double> K;
    for (int j = 0; j < n; ++j) K.push_back(lo + (hi - lo) * (j + 0.5 + 0.3 * (uniform(rng) - 0.5)) / n);
    auto mk = market_from_marginals(mus, K);
    if (arbitrage_check(mk).ok) return mk;
  }
  throw Error("random_interior_market: no interior market found");
}

// ---- brute force over deterministic stopping rules -------------------------

/// One deterministic rule's outcome: expected objective and the expected
/// call payoffs E[(B_{T_i} - K_j)^+] (flattened, maturity-major).
struct RuleOutcome {
  double value = 0.0;
  std::vector<double> calls;
};

/// Enumerates every deterministic multiple-stopping rule on a lattice with
/// N <= 4 by recursion over the binary prefix tree, returning the outcome of
/// each. The reward on a stopped path is Phi (from lattice::evaluate on the
/// explicit path) minus sum_i alpha_i . (omega_{theta_i} - K)^+ minus
/// beta |omega_{theta_m}|^p.
inline std::vector<RuleOutcome> all_rule_outcomes(const LatticeSpec& lat, const PayoffSpec& payoff,
                                                  const std::vector<double>& strikes, const Matrix& alpha,
                                                  double beta = 0.0, double p = 2.0) {
  const int N = lat.steps;
  const int m = lat.stages;
  const std::size_t n = strikes.size();
  StoppedPath path;
  path.increments.assign(static_cast<std::size_t>(N), 1);  // padded; only the prefix is read
  std::vector<int> prefix;
  std::vector<int> stops;

  // Outcomes from the current node onward given `stage` stops already made.
  std::function<std::vector<RuleOutcome>(int)> rec = [&](int stage) -> std::vector<RuleOutcome> {
    const int t = static_cast<int>(prefix.size());
    long level = 0;
    for (int d : prefix) level += d;
    const double x = static_cast<double>(level) * lat.dx;
    std::vector<RuleOutcome> out;

    // Stop here.
    {
      stops.push_back(t);
      std::vector<RuleOutcome> after;
      if (stage + 1 == m) {
        StoppedPath sp;
        sp.increments.assign(prefix.begin(), prefix.end());
        sp.stop_times = stops;
        RuleOutcome r;
        r.value = evaluate(payoff, sp, lat.dx) - beta * std::pow(std::abs(x), p);
        r.calls.assign(static_cast<std::size_t>(m) * n, 0.0);
        after.push_back(std::move(r));
      } else {
        after = rec(stage + 1);
      }
      stops.pop_back();
      for (auto& r : after) {
        for (std::size_t j = 0; j < n; ++j) {
          const double c = std::max(x - strikes[j], 0.0);
          r.value -= alpha(static_cast<std::size_t>(stage), j) * c;
          r.calls[static_cast<std::size_t>(stage) * n + j] += c;
        }
        out.push_back(std::move(r));
      }
    }
    // Continue (not possible at the horizon).
    if (t < N) {
      prefix.push_back(1);
      const auto up = rec(stage);
      prefix.back() = -1;
      const auto down = rec(stage);
      prefix.pop_back();
      for (const auto& a : up)
        for (const auto& b : down) {
          RuleOutcome r;
          r.value = 0.5 * (a.value + b.value);
          r.calls.resize(a.calls.size());
          for (std::size_t k = 0; k < a.calls.size(); ++k) r.calls[k] = 0.5 * (a.calls[k] + b.calls[k]);
          out.push_back(std::move(r));
        }
    }
    return out;
  };
  return rec(0);
}

/// Number of deterministic rules for m = 1: T(0) = 1, T(n) = 1 + T(n-1)^2.
inline std::uint64_t single_stop_rule_count(int N) {
  std::uint64_t t = 1;
  for (int i = 0; i < N; ++i) t = 1 + t * t;
  return t;
}

inline double brute_force_max(const LatticeSpec& lat, const PayoffSpec& payoff, const std::vector<double>& strikes,
                              const Matrix& alpha, double beta = 0.0, double p = 2.0) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : all_rule_outcomes(lat, payoff, strikes, alpha, beta, p)) best = std::max(best, r.value);
  return best;
}

/// Best Phi-expectation over deterministic rules whose call expectations
/// match the market within `tol`; -inf when none does.
inline double brute_force_calibrated(const LatticeSpec& lat, const PayoffSpec& payoff, const MarketData& mk,
                                     double tol = 1e-12) {
  const Matrix zero(mk.maturities(), mk.strike_count(), 0.0);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : all_rule_outcomes(lat, payoff, mk.strikes, zero)) {
    bool ok = true;
    for (std::size_t k = 0; k < r.calls.size() && ok; ++k) ok = std::abs(r.calls[k] - mk.calls.flat()[k]) <= tol;
    if (ok) best = std::max(best, r.value);
  }
  return best;
}

// ---- metrics oracles -------------------------------------------------------

/// Exact transport LP min sum |x_i - y_j| pi_ij over couplings.
inline double transport_w1(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto a = mu.atoms();
  const auto b = nu.atoms();
  LinearProgram lp;
  lp.cols = a.size() * b.size();
  for (const auto& x : a)
    for (const auto& y : b) lp.objective.push_back(-std::abs(x.position - y.position));
  for (std::size_t i = 0; i < a.size(); ++i) {
    LinearProgram::Row row;
    for (std::size_t j = 0; j < b.size(); ++j) row.entries.push_back({static_cast<std::int32_t>(i * b.size() + j), 1.0});
    row.rhs = a[i].mass;
    lp.rows.push_back(row);
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    LinearProgram::Row row;
    for (std::size_t i = 0; i < a.size(); ++i) row.entries.push_back({static_cast<std::int32_t>(i * b.size() + j), 1.0});
    row.rhs = b[j].mass;
    lp.rows.push_back(row);
  }
  const auto sol = simplex_solve(lp);
  if (sol.status != LPStatus::OPTIMAL) throw Error("transport LP not optimal");
  return -sol.value;
}

inline double cdf_at(const DiscreteMeasure& mu, double x) {
  double s = 0.0;
  for (const auto& a : mu.atoms())
    if (a.position <= x) s += a.mass;
  return s;
}

/// Band condition F_mu(x - e) - e <= F_nu(x) <= F_mu(x + e) + e checked at
/// every atom, every atom shifted by +-e, and just left of each of those.
inline bool band_holds(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double e) {
  std::vector<double> xs;
  for (const auto* m : {&mu, &nu})
    for (const auto& a : m->atoms())
      for (double s : {0.0, e, -e}) {
        xs.push_back(a.position + s);
        xs.push_back(a.position + s - 1e-9);
      }
  for (double x : xs) {
    const double f = cdf_at(nu, x);
    if (cdf_at(mu, x - e) - e > f + 1e-12) return false;
    if (f > cdf_at(mu, x + e) + e + 1e-12) return false;
  }
  return true;
}

/// Smallest e on the grid {k h} for which the band condition holds.
inline double levy_prokhorov_grid(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double h = 1e-4) {
  for (long k = 0;; ++k)
    if (band_holds(mu, nu, static_cast<double>(k) * h)) return static_cast<double>(k) * h;
}

/// sup over a uniform grid on [-R, R] of |C_mu(K) - C_nu(K)|.
inline double calls_gap_grid(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double R, double h = 1e-4) {
  double g = 0.0;
  const long M = static_cast<long>(std::ceil(2.0 * R / h));
  for (long k = 0; k <= M; ++k) {
    const double K = std::min(-R + static_cast<double>(k) * h, R);
    double c1 = 0.0;
    double c2 = 0.0;
    for (const auto& a : mu.atoms()) c1 += a.mass * std::max(a.position - K, 0.0);
    for (const auto& a : nu.atoms()) c2 += a.mass * std::max(a.position - K, 0.0);
    g = std::max(g, std::abs(c1 - c2));
  }
  return g;
}

}  // namespace oracle
