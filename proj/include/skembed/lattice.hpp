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

/// @file lattice.hpp
/// @brief Scaled random-walk path space with ordered stop-time vectors,
/// capped path-dependent payoffs, exhaustive enumeration and the d-bar
/// metric on stopped paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "skembed/error.hpp"

namespace skembed {

/// Walk with N steps of size dx = sqrt(dt) and m ordered stopping stages.
struct LatticeSpec {
  int steps = 1;
  double dx = 1.0;
  int stages = 1;

  static LatticeSpec from_dt(int steps, double dt, int stages = 1) {
    if (!(dt > 0.0)) throw InvalidInput("lattice: dt must be positive");
    return LatticeSpec{steps, std::sqrt(dt), stages}.checked();
  }

  double dt() const { return dx * dx; }
  double horizon() const { return steps * dt(); }

  LatticeSpec checked() const {
    if (steps < 1) throw InvalidInput("lattice: steps must be >= 1");
    if (!(dx > 0.0) || !std::isfinite(dx)) throw InvalidInput("lattice: dx must be positive");
    if (stages < 1) throw InvalidInput("lattice: stages must be >= 1");
    return *this;
  }

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;
};

enum class PayoffKind {
  LOOKBACK_MAX_CAPPED,
  STOPPED_ABS_CAPPED,
  RANGE_CAPPED,
  FORWARD_STRADDLE_CAPPED,
};

inline std::string_view to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::LOOKBACK_MAX_CAPPED: return "LOOKBACK_MAX_CAPPED";
    case PayoffKind::STOPPED_ABS_CAPPED: return "STOPPED_ABS_CAPPED";
    case PayoffKind::RANGE_CAPPED: return "RANGE_CAPPED";
    case PayoffKind::FORWARD_STRADDLE_CAPPED: return "FORWARD_STRADDLE_CAPPED";
  }
  return "?";
}

inline PayoffKind payoff_kind_from_string(std::string_view s) {
  for (auto k : {PayoffKind::LOOKBACK_MAX_CAPPED, PayoffKind::STOPPED_ABS_CAPPED,
                 PayoffKind::RANGE_CAPPED, PayoffKind::FORWARD_STRADDLE_CAPPED})
    if (to_string(k) == s) return k;
  throw InvalidInput("unknown payoff kind '" + std::string(s) + "'");
}

/// Capped reward on stopped paths. `lipschitz()` is the certified constant
/// with respect to d-bar and `sup_norm()` bounds |Phi|.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::STOPPED_ABS_CAPPED;
  double cap = 1.0;

  double lipschitz() const { return kind == PayoffKind::RANGE_CAPPED ? 2.0 : 1.0; }
  double sup_norm() const { return cap; }
  bool time_invariant() const {
    return kind == PayoffKind::LOOKBACK_MAX_CAPPED || kind == PayoffKind::STOPPED_ABS_CAPPED;
  }
  int min_stages() const { return kind == PayoffKind::FORWARD_STRADDLE_CAPPED ? 2 : 1; }

  PayoffSpec checked() const {
    if (!(cap >= 0.0) || !std::isfinite(cap)) throw InvalidInput("payoff: cap must be >= 0");
    return *this;
  }

  friend bool operator==(const PayoffSpec&, const PayoffSpec&) = default;
};

/// Walk increments in {-1, 0, +1} (0 is a hold step) together with
/// nondecreasing stop times measured in steps.
struct StoppedPath {
  std::vector<int> increments;
  std::vector<int> stop_times;

  int last_stop() const { return stop_times.empty() ? 0 : stop_times.back(); }

  /// Walk level in units of dx after t steps.
  long level(int t) const {
    long s = 0;
    for (int i = 0; i < t; ++i) s += increments[static_cast<std::size_t>(i)];
    return s;
  }

  void validate() const {
    if (stop_times.empty()) throw InvalidInput("path: no stop times");
    for (std::size_t i = 0; i < stop_times.size(); ++i) {
      if (stop_times[i] < 0) throw InvalidInput("path: negative stop time");
      if (i > 0 && stop_times[i] < stop_times[i - 1])
        throw InvalidInput("path: stop times must be nondecreasing");
    }
    if (static_cast<std::size_t>(last_stop()) > increments.size())
      throw InvalidInput("path: last stop time beyond recorded increments");
    for (int d : increments)
      if (d < -1 || d > 1) throw InvalidInput("path: increments must lie in {-1,0,1}");
  }

  friend bool operator==(const StoppedPath&, const StoppedPath&) = default;
  friend auto operator<=>(const StoppedPath&, const StoppedPath&) = default;
};

struct WeightedPath {
  StoppedPath path;
  double weight = 0.0;
};

/// Phi(omega, theta). Only the path up to the last stop time is read.
inline double evaluate(const PayoffSpec& payoff, const StoppedPath& path, double dx) {
  const int T = path.last_stop();
  long level = 0;
  long hi = 0;
  long lo = 0;
  long at_first = 0;
  long at_second = 0;
  const int t1 = path.stop_times.front();
  const int t2 = path.stop_times.size() > 1 ? path.stop_times[1] : t1;
  for (int t = 0; t <= T; ++t) {
    if (t > 0) level += path.increments[static_cast<std::size_t>(t - 1)];
    hi = std::max(hi, level);
    lo = std::min(lo, level);
    if (t == t1) at_first = level;
    if (t == t2) at_second = level;
  }
  double raw = 0.0;
  switch (payoff.kind) {
    case PayoffKind::LOOKBACK_MAX_CAPPED: raw = static_cast<double>(hi) * dx; break;
    case PayoffKind::STOPPED_ABS_CAPPED: raw = std::abs(static_cast<double>(level)) * dx; break;
    case PayoffKind::RANGE_CAPPED: raw = static_cast<double>(hi - lo) * dx; break;
    case PayoffKind::FORWARD_STRADDLE_CAPPED:
      if (path.stop_times.size() < 2)
        throw InvalidInput("FORWARD_STRADDLE_CAPPED needs at least two stop times");
      raw = std::abs(static_cast<double>(at_second - at_first)) * dx;
      break;
  }
  return std::min(raw, payoff.cap);
}

/// d-bar(a, b) = sum_i sqrt(|theta_i - theta'_i| dt) + sup_t |a_{theta_i ^ t} - b_{theta'_i ^ t}|,
/// with positions scaled by dx and the sup over the common step clock.
inline double d_bar(const StoppedPath& a, const StoppedPath& b, double dx) {
  if (a.stop_times.size() != b.stop_times.size())
    throw InvalidInput("d_bar: paths have different stage counts");
  const double dt = dx * dx;
  double total = 0.0;
  for (std::size_t i = 0; i < a.stop_times.size(); ++i) {
    const int ta = a.stop_times[i];
    const int tb = b.stop_times[i];
    total += std::sqrt(std::abs(ta - tb) * dt);
    long la = 0;
    long lb = 0;
    long worst = 0;
    for (int t = 1; t <= std::max(ta, tb); ++t) {
      if (t <= ta) la += a.increments[static_cast<std::size_t>(t - 1)];
      if (t <= tb) lb += b.increments[static_cast<std::size_t>(t - 1)];
      worst = std::max(worst, std::abs(la - lb));
    }
    total += static_cast<double>(worst) * dx;
  }
  return total;
}

/// Number of nondecreasing stop vectors in {0..N}^m, i.e. C(N+m, m).
inline std::uint64_t stop_vector_count(int N, int m) {
  std::uint64_t c = 1;
  for (int i = 1; i <= m; ++i) c = c * static_cast<std::uint64_t>(N + i) / static_cast<std::uint64_t>(i);
  return c;
}

/// Streams every (path, deterministic stop vector) pair of the lattice,
/// each path carrying weight 2^-N. Increments always have full length N.
inline void for_each_path(const LatticeSpec& spec,
                          const std::function<void(const WeightedPath&)>& visit,
                          std::uint64_t budget = 20'000'000) {
  spec.checked();
  if (spec.steps > 14) throw BudgetExceeded("enumerate_paths: N must be <= 14");
  const std::uint64_t paths = std::uint64_t{1} << spec.steps;
  if (paths * stop_vector_count(spec.steps, spec.stages) > budget)
    throw BudgetExceeded("enumerate_paths: path count exceeds budget");
  const double w = std::ldexp(1.0, -spec.steps);
  WeightedPath wp;
  wp.weight = w;
  wp.path.increments.resize(static_cast<std::size_t>(spec.steps));
  wp.path.stop_times.assign(static_cast<std::size_t>(spec.stages), 0);
  for (std::uint64_t bits = 0; bits < paths; ++bits) {
    for (int t = 0; t < spec.steps; ++t)
      wp.path.increments[static_cast<std::size_t>(t)] = ((bits >> t) & 1U) ? 1 : -1;
    auto& th = wp.path.stop_times;
    std::fill(th.begin(), th.end(), 0);
    while (true) {
      visit(wp);
      int i = spec.stages - 1;
      while (i >= 0 && th[static_cast<std::size_t>(i)] == spec.steps) --i;
      if (i < 0) break;
      const int v = th[static_cast<std::size_t>(i)] + 1;
      for (int j = i; j < spec.stages; ++j) th[static_cast<std::size_t>(j)] = v;
    }
  }
}

inline std::vector<WeightedPath> enumerate_paths(const LatticeSpec& spec,
                                                 std::uint64_t budget = 20'000'000) {
  std::vector<WeightedPath> out;
  for_each_path(spec, [&](const WeightedPath& p) { out.push_back(p); }, budget);
  return out;
}

}  // namespace skembed
