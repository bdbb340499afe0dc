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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"

using namespace skembed;

namespace {

StoppedPath stopped(std::vector<int> inc) {
  StoppedPath p;
  p.stop_times = {static_cast<int>(inc.size())};
  p.increments = std::move(inc);
  return p;
}

StoppedPath concat(const StoppedPath& a, const std::vector<int>& tail) {
  StoppedPath out;
  out.increments.assign(a.increments.begin(), a.increments.begin() + a.last_stop());
  out.increments.insert(out.increments.end(), tail.begin(), tail.end());
  out.stop_times = {a.last_stop() + static_cast<int>(tail.size())};
  return out;
}

// Smallest gain over every explicit continuation of length 1..H.
double margin_by_scan(const StoppedPath& a, const StoppedPath& b, const PayoffSpec& ps, double dx, int H) {
  double worst = std::numeric_limits<double>::infinity();
  for (int len = 1; len <= H; ++len)
    for (int bits = 0; bits < (1 << len); ++bits) {
      std::vector<int> tail;
      for (int t = 0; t < len; ++t) tail.push_back(((bits >> t) & 1) ? 1 : -1);
      const double gain = evaluate(ps, a, dx) + evaluate(ps, concat(b, tail), dx) - evaluate(ps, concat(a, tail), dx) -
                          evaluate(ps, b, dx);
      worst = std::min(worst, gain);
    }
  return worst;
}

std::vector<StoppedPath> all_stopped_paths(int N) {
  std::vector<StoppedPath> out;
  for (int len = 0; len <= N; ++len)
    for (int bits = 0; bits < (1 << len); ++bits) {
      std::vector<int> inc;
      for (int t = 0; t < len; ++t) inc.push_back(((bits >> t) & 1) ? 1 : -1);
      out.push_back(stopped(inc));
    }
  return out;
}

}  // namespace

TEST(Prefixes, Examples) {
  SupportSet s;
  s.paths.push_back({stopped({}), 1.0});
  EXPECT_TRUE(prefixes(s).empty());
  s.paths = {{stopped({1, 1}), 1.0}};
  const auto pre = prefixes(s);
  ASSERT_EQ(pre.size(), 2u);
  EXPECT_EQ(pre[0], stopped({}));
  EXPECT_EQ(pre[1], stopped({1}));
}

TEST(Prefixes, MatchesDirectScan) {
  oracle::Rng rng(71);
  for (int rep = 0; rep < 20; ++rep) {
    const LatticeSpec lat{4, 0.5, 1};
    const StateGraph g(lat, {PayoffKind::STOPPED_ABS_CAPPED, 1});
    std::vector<double> sp(g.size());
    for (auto& p : sp) p = oracle::uniform(rng) < 0.3 ? 1.0 : oracle::uniform(rng) < 0.5 ? 0.0 : 0.5;
    const auto s = SupportSet::from_policy(g, sp);
    std::set<StoppedPath> scan;
    for (const auto& wp : s.paths)
      for (int t = 0; t < wp.path.last_stop(); ++t) {
        std::vector<int> inc(wp.path.increments.begin(), wp.path.increments.begin() + t);
        scan.insert(stopped(inc));
      }
    EXPECT_EQ(prefixes(s).size(), scan.size());
  }
}

TEST(StopGo, ZeroPayoffNeverPairs) {
  const LatticeSpec lat{3, 1.0, 1};
  const PayoffSpec zero{PayoffKind::LOOKBACK_MAX_CAPPED, 0};
  for (const auto& a : all_stopped_paths(3))
    for (const auto& b : all_stopped_paths(3))
      if (a.level(a.last_stop()) == b.level(b.last_stop())) EXPECT_FALSE(is_stop_go(a, b, zero, lat, 3));
}

TEST(StopGo, MatchesContinuationScan) {
  const LatticeSpec lat{3, 1.0, 1};
  for (auto kind : {PayoffKind::STOPPED_ABS_CAPPED, PayoffKind::LOOKBACK_MAX_CAPPED, PayoffKind::RANGE_CAPPED}) {
    const PayoffSpec ps{kind, 2.0};
    int pairs = 0;
    for (const auto& a : all_stopped_paths(3))
      for (const auto& b : all_stopped_paths(3)) {
        if (a.level(a.last_stop()) != b.level(b.last_stop())) continue;
        const double scan = margin_by_scan(a, b, ps, lat.dx, 3);
        EXPECT_NEAR(stop_go_margin(a, b, ps, lat, 3), scan, 1e-12);
        EXPECT_EQ(is_stop_go(a, b, ps, lat, 3), scan >= 1e-9);
        // Both orders cannot be stop-go pairs.
        EXPECT_FALSE(is_stop_go(a, b, ps, lat, 3) && is_stop_go(b, a, ps, lat, 3));
        ++pairs;
      }
    EXPECT_GT(pairs, 0);
  }
}

TEST(StopGo, LookbackHigherRunningMax) {
  // The prefix has seen a max of 2, the stopped path only 0; both end at 0.
  const LatticeSpec lat{6, 1.0, 1};
  const PayoffSpec ps{PayoffKind::LOOKBACK_MAX_CAPPED, 5};
  const auto a = stopped({1, 1, -1, -1});
  const auto b = stopped({-1, 1});
  const double m = stop_go_margin(a, b, ps, lat, 4);
  EXPECT_NEAR(m, margin_by_scan(a, b, ps, 1.0, 4), 1e-12);
  // Continuing b gains at least as much as continuing a on every tail, and
  // strictly more on the all-up tail, but ties on the all-down tail.
  EXPECT_FALSE(is_stop_go(a, b, ps, lat, 4));
  EXPECT_NEAR(m, 0.0, 1e-12);
}

TEST(StopGo, Errors) {
  const LatticeSpec lat{4, 1.0, 1};
  const PayoffSpec ps{PayoffKind::STOPPED_ABS_CAPPED, 1};
  EXPECT_THROW(is_stop_go(stopped({1}), stopped({-1}), ps, lat, 2), InvalidInput);
  EXPECT_THROW(is_stop_go(stopped({1}), stopped({1}), ps, lat, 13), InvalidInput);
  StoppedPath two{{1, -1}, {1, 2}};
  EXPECT_THROW(is_stop_go(two, stopped({}), ps, lat, 2), InvalidInput);
}

TEST(CheckSupport, EmptySupport) {
  const auto rep = check_support(SupportSet{}, {PayoffKind::RANGE_CAPPED, 1}, {4, 1.0, 1}, 4);
  EXPECT_EQ(rep.pairs_checked, 0u);
  EXPECT_TRUE(rep.violations.empty());
}

TEST(CheckSupport, LpOptimizerClean) {
  oracle::Rng rng(72);
  const LatticeSpec lat{8, 0.5, 1};
  const PayoffSpec ps{PayoffKind::RANGE_CAPPED, 1.5 * lat.dx};
  int checked = 0;
  for (int rep = 0; rep < 3; ++rep) {
    const auto mk = oracle::random_interior_market(rng, lat, ps, 3, -1.5, 1.5);
    const auto r = solve_primal(Constraints::calls(mk), lat, ps);
    ASSERT_EQ(r.status, LPStatus::OPTIMAL);
    const auto support = SupportSet::from_policy(*r.graph, r.stop_prob);
    const auto report = check_support(support, ps, lat, lat.steps);
    EXPECT_TRUE(report.violations.empty()) << report.violations.size() << " violations";
    checked += static_cast<int>(report.pairs_checked);
  }
  EXPECT_GT(checked, 0);
}

TEST(CheckSupport, ForcedRootStopDetected) {
  oracle::Rng rng(73);
  const LatticeSpec lat{8, 0.5, 1};
  const PayoffSpec ps{PayoffKind::RANGE_CAPPED, 1.5 * lat.dx};
  const auto mk = oracle::random_interior_market(rng, lat, ps, 3, -1.5, 1.5);
  const auto r = solve_primal(Constraints::calls(mk), lat, ps);
  ASSERT_EQ(r.status, LPStatus::OPTIMAL);
  PrimalOptions opt;
  opt.forced_stop = {{0, 0.1}};
  const auto bad = solve_primal(Constraints::calls(mk), lat, ps, opt);
  ASSERT_EQ(bad.status, LPStatus::OPTIMAL);
  EXPECT_LE(bad.value, r.value - 1e-3);
  const auto report = check_support(SupportSet::from_policy(*bad.graph, bad.stop_prob), ps, lat, lat.steps);
  ASSERT_FALSE(report.violations.empty());
  for (const auto& v : report.violations) {
    EXPECT_GE(v.margin, 1e-9);
    EXPECT_NEAR(v.margin, margin_by_scan(v.prefix, v.stopped, ps, lat.dx, lat.steps), 1e-12);
  }
}

TEST(CheckSupport, PairBudget) {
  const LatticeSpec lat{6, 0.5, 1};
  const StateGraph g(lat, {PayoffKind::RANGE_CAPPED, 1});
  std::vector<double> half(g.size(), 0.5);
  const auto s = SupportSet::from_policy(g, half);
  EXPECT_THROW(check_support(s, {PayoffKind::RANGE_CAPPED, 1}, lat, 4, 1e-9, 10), BudgetExceeded);
}
