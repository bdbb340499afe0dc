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

/// @file monotonicity.hpp
/// @brief Stop-go pairs for single stopping: a prefix and a stopped path
/// ending at the same level such that exchanging their stop decisions
/// gains against every continuation.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/lattice.hpp"
#include "skembed/stopping_dp.hpp"

namespace skembed {

/// Stopped paths charged by an optimizer (m = 1), increments truncated at
/// the stop time.
struct SupportSet {
  std::vector<WeightedPath> paths;

  static SupportSet from_policy(const StateGraph& g, const std::vector<double>& stop_prob,
                                double min_mass = 1e-12) {
    if (g.lattice().stages != 1) throw InvalidInput("support set: needs a single stopping stage");
    SupportSet s;
    s.paths = support_paths(g, stop_prob, min_mass);
    for (auto& wp : s.paths) wp.path.increments.resize(static_cast<std::size_t>(wp.path.last_stop()));
    return s;
  }
};

struct StopGoViolation {
  StoppedPath prefix;
  StoppedPath stopped;
  double margin = 0.0;  // smallest gain over all continuations
};

struct StopGoReport {
  std::size_t pairs_checked = 0;
  std::size_t prefixes = 0;
  std::vector<StopGoViolation> violations;
};

namespace detail {

inline void require_single_stage(const StoppedPath& p, const char* who) {
  if (p.stop_times.size() != 1) throw InvalidInput(std::string(who) + ": paths must have one stop time");
}

/// Level, running max and running min of a stopped path (units of dx).
/// For m = 1 every payoff kind is a function of these three numbers.
struct PathSummary {
  long level = 0;
  long hi = 0;
  long lo = 0;
  friend auto operator<=>(const PathSummary&, const PathSummary&) = default;
};

inline PathSummary summarize(const StoppedPath& p) {
  PathSummary s;
  for (int t = 0; t < p.last_stop(); ++t) {
    s.level += p.increments[static_cast<std::size_t>(t)];
    s.hi = std::max(s.hi, s.level);
    s.lo = std::min(s.lo, s.level);
  }
  return s;
}

inline double summary_value(const PayoffSpec& payoff, const PathSummary& s, double dx) {
  double raw = 0.0;
  switch (payoff.kind) {
    case PayoffKind::LOOKBACK_MAX_CAPPED: raw = static_cast<double>(s.hi) * dx; break;
    case PayoffKind::STOPPED_ABS_CAPPED: raw = std::abs(static_cast<double>(s.level)) * dx; break;
    case PayoffKind::RANGE_CAPPED: raw = static_cast<double>(s.hi - s.lo) * dx; break;
    case PayoffKind::FORWARD_STRADDLE_CAPPED:
      throw InvalidInput("stop-go: FORWARD_STRADDLE_CAPPED needs two stop times");
  }
  return std::min(raw, payoff.cap);
}

/// min over continuations w'' (1..H steps) of
///   xi(a) + xi(b (x) w'') - xi(a (x) w'') - xi(b),
/// stopping early once the running minimum drops below `stop_below`.
inline double stop_go_margin(const PathSummary& a, const PathSummary& b, const PayoffSpec& payoff,
                             double dx, int H, double stop_below) {
  const double base = summary_value(payoff, a, dx) - summary_value(payoff, b, dx);
  double worst = std::numeric_limits<double>::infinity();
  auto dfs = [&](auto&& self, PathSummary ca, PathSummary cb, int depth) -> void {
    for (int d : {+1, -1}) {
      if (worst < stop_below) return;
      PathSummary na = ca;
      PathSummary nb = cb;
      for (PathSummary* s : {&na, &nb}) {
        s->level += d;
        s->hi = std::max(s->hi, s->level);
        s->lo = std::min(s->lo, s->level);
      }
      const double gain =
          base + summary_value(payoff, nb, dx) - summary_value(payoff, na, dx);
      worst = std::min(worst, gain);
      if (depth + 1 < H) self(self, na, nb, depth + 1);
    }
  };
  dfs(dfs, a, b, 0);
  return worst;
}

}  // namespace detail

/// Strict-time prefixes (omega up to theta, theta) of support paths with
/// theta below the path's own stop time, deduplicated and sorted.
inline std::vector<StoppedPath> prefixes(const SupportSet& support) {
  std::set<StoppedPath> out;
  for (const auto& wp : support.paths) {
    detail::require_single_stage(wp.path, "prefixes");
    const int T = wp.path.last_stop();
    for (int t = 0; t < T; ++t) {
      StoppedPath p;
      p.increments.assign(wp.path.increments.begin(), wp.path.increments.begin() + t);
      p.stop_times = {t};
      out.insert(std::move(p));
    }
  }
  return {out.begin(), out.end()};
}

/// Worst gain of the pair over continuations of 1..H steps.
inline double stop_go_margin(const StoppedPath& prefix, const StoppedPath& stopped,
                             const PayoffSpec& payoff, const LatticeSpec& lattice, int H) {
  detail::require_single_stage(prefix, "is_stop_go");
  detail::require_single_stage(stopped, "is_stop_go");
  prefix.validate();
  stopped.validate();
  if (H < 1 || H > 12) throw InvalidInput("is_stop_go: continuation horizon must be in [1, 12]");
  const auto a = detail::summarize(prefix);
  const auto b = detail::summarize(stopped);
  if (a.level != b.level) throw InvalidInput("is_stop_go: endpoint mismatch");
  return detail::stop_go_margin(a, b, payoff, lattice.dx, H,
                                -std::numeric_limits<double>::infinity());
}

inline bool is_stop_go(const StoppedPath& prefix, const StoppedPath& stopped,
                       const PayoffSpec& payoff, const LatticeSpec& lattice, int H,
                       double delta_sg = 1e-9) {
  return stop_go_margin(prefix, stopped, payoff, lattice, H) >= delta_sg;
}

/// Every (prefix, support path) pair with matching endpoints.
inline StopGoReport check_support(const SupportSet& support, const PayoffSpec& payoff,
                                  const LatticeSpec& lattice, int H, double delta_sg = 1e-9,
                                  std::size_t pair_budget = 50'000'000) {
  if (H < 1 || H > 12) throw InvalidInput("check_support: continuation horizon must be in [1, 12]");
  StopGoReport rep;
  const auto pre = prefixes(support);
  rep.prefixes = pre.size();
  if (pre.empty() || support.paths.empty()) return rep;

  std::multimap<long, std::pair<detail::PathSummary, const StoppedPath*>> by_level;
  for (const auto& wp : support.paths) {
    const auto s = detail::summarize(wp.path);
    by_level.emplace(s.level, std::make_pair(s, &wp.path));
  }
  std::map<std::pair<detail::PathSummary, detail::PathSummary>, double> cache;
  for (const auto& p : pre) {
    const auto a = detail::summarize(p);
    auto [lo, hi] = by_level.equal_range(a.level);
    for (auto it = lo; it != hi; ++it) {
      if (++rep.pairs_checked > pair_budget) throw BudgetExceeded("check_support: pair budget exceeded");
      const auto& [b, path] = it->second;
      auto key = std::make_pair(a, b);
      auto c = cache.find(key);
      if (c == cache.end())
        c = cache.emplace(key, detail::stop_go_margin(a, b, payoff, lattice.dx, H, delta_sg)).first;
      if (c->second >= delta_sg) rep.violations.push_back({p, *path, c->second});
    }
  }
  return rep;
}

}  // namespace skembed
