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
#include <map>

#include "oracles.hpp"

using namespace skembed;

namespace {

MarketData dummy_market(int m, std::vector<double> strikes) {
  MarketData mk;
  mk.strikes = std::move(strikes);
  mk.calls = Matrix(static_cast<std::size_t>(m), mk.strikes.size(), 0.5);
  return mk;
}

Matrix random_alpha(oracle::Rng& rng, std::size_t m, std::size_t n, double lo, double hi) {
  Matrix a(m, n);
  for (auto& v : a.flat()) v = oracle::uniform(rng, lo, hi);
  return a;
}

}  // namespace

TEST(Inner, AbsPayoffUnpenalized) {
  const LatticeSpec lat{4, 1.0, 1};
  const InnerSolver inner(lat, {PayoffKind::STOPPED_ABS_CAPPED, 10}, dummy_market(1, {0}));
  const auto r = inner.solve(Matrix(1, 1, 0.0));
  EXPECT_DOUBLE_EQ(r.value, 1.5);
  EXPECT_DOUBLE_EQ(r.stats.payoff_expectation, 1.5);
}

TEST(Inner, ZeroPayoffStopsAtOnce) {
  const LatticeSpec lat{6, 0.5, 1};
  const InnerSolver inner(lat, {PayoffKind::STOPPED_ABS_CAPPED, 0}, dummy_market(1, {0}));
  const auto r = inner.solve(Matrix(1, 1, 0.7));
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.policy.action[0], Action::STOP);
  EXPECT_STREQ(r.policy.tie_rule, "STOP_ON_TIE");
}

TEST(Inner, SolveInnerWrapper) {
  InnerProblem pb{{4, 1.0, 1}, {PayoffKind::STOPPED_ABS_CAPPED, 10}, dummy_market(1, {0}), Matrix(1, 1, 0.0), 0.0};
  EXPECT_DOUBLE_EQ(solve_inner(pb).value, 1.5);
  pb.alpha = Matrix(2, 1, 0.0);
  EXPECT_THROW(solve_inner(pb), InvalidInput);
}

TEST(Inner, EqualsBruteForceOverRules) {
  oracle::Rng rng(41);
  const PayoffKind kinds[] = {PayoffKind::LOOKBACK_MAX_CAPPED, PayoffKind::STOPPED_ABS_CAPPED,
                              PayoffKind::RANGE_CAPPED, PayoffKind::FORWARD_STRADDLE_CAPPED};
  for (int rep = 0; rep < 40; ++rep) {
    const auto kind = kinds[rep % 4];
    const int m = kind == PayoffKind::FORWARD_STRADDLE_CAPPED ? 2 : oracle::uniform_int(rng, 1, 2);
    const int N = oracle::uniform_int(rng, 1, m == 1 ? 4 : 3);
    const LatticeSpec lat{N, oracle::uniform(rng, 0.3, 1.0), m};
    const PayoffSpec ps{kind, oracle::uniform(rng, 0.5, 3.0)};
    std::vector<double> K{-0.5, 0.2};
    auto mk = dummy_market(m, K);
    const auto alpha = random_alpha(rng, static_cast<std::size_t>(m), K.size(), -0.5, 1.0);
    double beta = 0;
    if (rep % 3 == 0) {
      mk.power = PowerConstraint{2.0, 1.0};
      beta = oracle::uniform(rng, -0.3, 0.3);
    }
    const InnerSolver inner(lat, ps, mk);
    const double dp = inner.solve(alpha, beta).value;
    const double bf = oracle::brute_force_max(lat, ps, K, alpha, beta, 2.0);
    EXPECT_NEAR(dp, bf, 1e-12) << "rep " << rep;
  }
}

TEST(Inner, ValueTableInvariants) {
  const LatticeSpec lat{8, 0.5, 2};
  const InnerSolver inner(lat, {PayoffKind::FORWARD_STRADDLE_CAPPED, 1.0}, dummy_market(2, {0}));
  oracle::Rng rng(42);
  const auto r = inner.solve(random_alpha(rng, 2, 1, 0, 0.5));
  const auto& g = inner.graph();
  for (std::size_t v = 0; v < g.size(); ++v) {
    EXPECT_EQ(r.table.value[v], std::max(r.table.stop[v], r.table.cont[v]));
    if (g[v].t == lat.steps) {
      EXPECT_EQ(r.table.value[v], r.table.stop[v]);
      EXPECT_EQ(r.policy.action[v], Action::STOP);
    }
  }
}

TEST(ForwardSupport, Examples) {
  const LatticeSpec lat{2, 1.0, 1};
  const StateGraph g(lat, {PayoffKind::STOPPED_ABS_CAPPED, 5});
  StoppingPolicy stop_now;
  stop_now.action.assign(g.size(), Action::STOP);
  const auto fs = forward_support(stop_now, g);
  EXPECT_EQ(fs.marginals[0], DiscreteMeasure::dirac(0));
  const auto paths = support_paths(g, InnerSolver::stop_probabilities(stop_now));
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_TRUE(paths[0].path.increments.empty());

  StoppingPolicy late;
  late.action.assign(g.size(), Action::CONTINUE);
  const auto fl = forward_support(late, g);
  EXPECT_EQ(fl.marginals[0], DiscreteMeasure({{-2, 0.25}, {0, 0.5}, {2, 0.25}}));
}

TEST(ForwardSupport, MatchesPathEnumeration) {
  oracle::Rng rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    const LatticeSpec lat{4, 0.5, 1};
    const StateGraph g(lat, {PayoffKind::LOOKBACK_MAX_CAPPED, 1.0});
    StoppingPolicy pol;
    for (std::size_t v = 0; v < g.size(); ++v)
      pol.action.push_back(oracle::uniform(rng) < 0.4 ? Action::STOP : Action::CONTINUE);
    const auto fs = forward_support(pol, g);
    // Walk every full path through the graph and stop where the policy says.
    std::map<long, double> law;
    for (int bits = 0; bits < 16; ++bits) {
      std::int32_t v = 0;
      for (int t = 0;; ++t) {
        const auto& nd = g[static_cast<std::size_t>(v)];
        if (nd.up < 0 || pol.action[static_cast<std::size_t>(v)] == Action::STOP) {
          law[nd.k] += 1.0 / 16;
          break;
        }
        v = ((bits >> t) & 1) ? nd.up : nd.down;
      }
    }
    ASSERT_EQ(fs.marginals[0].size(), law.size());
    std::size_t i = 0;
    for (const auto& [k, w] : law) {
      EXPECT_DOUBLE_EQ(fs.marginals[0].atoms()[i].position, k * lat.dx);
      EXPECT_DOUBLE_EQ(fs.marginals[0].atoms()[i].mass, w);
      ++i;
    }
  }
}

TEST(Certificate, ZeroPayoff) {
  const LatticeSpec lat{5, 0.5, 1};
  const InnerSolver inner(lat, {PayoffKind::RANGE_CAPPED, 0}, dummy_market(1, {0, 0.5}));
  const Matrix alpha(1, 2, 0.0);
  const auto r = inner.solve(alpha);
  const auto c = extract_certificate(inner, alpha, 0.0, r.table);
  EXPECT_EQ(c.min_residual(), 0.0);
  EXPECT_TRUE(c.paths_enumerated);
}

TEST(Certificate, SolvedInstanceDominates) {
  oracle::Rng rng(44);
  for (auto kind : {PayoffKind::LOOKBACK_MAX_CAPPED, PayoffKind::STOPPED_ABS_CAPPED, PayoffKind::RANGE_CAPPED}) {
    const LatticeSpec lat{4, 0.5, 1};
    const InnerSolver inner(lat, {kind, 1.0}, dummy_market(1, {-0.5, 0, 0.5}));
    const auto alpha = random_alpha(rng, 1, 3, -0.5, 1.0);
    const auto r = inner.solve(alpha);
    const auto c = extract_certificate(inner, alpha, 0.0, r.table);
    EXPECT_GE(c.min_path_residual, -1e-12);
    EXPECT_GE(c.min_node_residual, -1e-12);
    EXPECT_EQ(c.paths_checked, 16u * 5u);

    auto broken = r.table;
    broken.value[0] -= 0.1;
    const auto cb = extract_certificate(inner, alpha, 0.0, broken);
    EXPECT_LT(cb.min_residual(), -0.05);
  }
}

TEST(Inner, ConvexInMultipliers) {
  oracle::Rng rng(45);
  const LatticeSpec lat{10, 0.3, 1};
  auto mk = dummy_market(1, {-0.6, 0, 0.6});
  mk.power = PowerConstraint{4.0, 1.0};
  const InnerSolver inner(lat, {PayoffKind::LOOKBACK_MAX_CAPPED, 1.0}, mk);
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = random_alpha(rng, 1, 3, -1, 1);
    const auto b = random_alpha(rng, 1, 3, -1, 1);
    const double ba = oracle::uniform(rng, -0.2, 0.2);
    const double bb = oracle::uniform(rng, -0.2, 0.2);
    Matrix mid(1, 3);
    for (std::size_t j = 0; j < 3; ++j) mid(0, j) = 0.5 * (a(0, j) + b(0, j));
    const double ga = inner.solve(a, ba).value;
    const double gb = inner.solve(b, bb).value;
    EXPECT_LE(inner.solve(mid, 0.5 * (ba + bb)).value, 0.5 * (ga + gb) + 1e-10);
  }
}

TEST(Inner, SubgradientInequality) {
  oracle::Rng rng(46);
  const LatticeSpec lat{10, 0.3, 2};
  auto mk = dummy_market(2, {-0.3, 0.3});
  mk.power = PowerConstraint{2.0, 1.0};
  const InnerSolver inner(lat, {PayoffKind::STOPPED_ABS_CAPPED, 1.0}, mk);
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = random_alpha(rng, 2, 2, -1, 1);
    const auto b = random_alpha(rng, 2, 2, -1, 1);
    const double ba = oracle::uniform(rng, -0.3, 0.3);
    const double bb = oracle::uniform(rng, -0.3, 0.3);
    const auto ra = inner.solve(a, ba);
    double lin = ra.value;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) lin -= ra.stats.call_expectations(i, j) * (b(i, j) - a(i, j));
    lin -= ra.stats.power_moment * (bb - ba);
    EXPECT_GE(inner.solve(b, bb).value, lin - 1e-9);
  }
}

TEST(Inner, HorizonDoublingStable) {
  // Once the capped reward is reachable with near certainty, extending the
  // horizon barely moves the value.
  const PayoffSpec ps{PayoffKind::STOPPED_ABS_CAPPED, 0.5};
  const auto value = [&](int N) {
    const InnerSolver inner({N, 0.25, 1}, ps, dummy_market(1, {0}));
    return inner.solve(Matrix(1, 1, 0.0)).value;
  };
  const double v40 = value(40);
  const double v80 = value(80);
  EXPECT_GE(v80, v40);
  EXPECT_LE(v80 - v40, 1e-3);
}

TEST(Inner, BudgetExceeded) {
  EXPECT_THROW(InnerSolver({30, 0.1, 3}, {PayoffKind::RANGE_CAPPED, 3.0}, dummy_market(3, {0}), 1000), BudgetExceeded);
}
