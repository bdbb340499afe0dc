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

/// @file state_graph.hpp
/// @brief Reachable augmented states (stage, time, level, running
/// statistics) of the lattice under every multiple-stopping rule.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/lattice.hpp"

namespace skembed {

/// One augmented state. `stage` counts the stops already made, so a node at
/// stage s decides whether to stop time s+1 (one-based) now. Levels and
/// auxiliary statistics are in units of dx.
struct GraphNode {
  int stage = 0;
  int t = 0;
  int k = 0;
  int a = 0;  // running max (LOOKBACK, RANGE) or first-stop anchor (FORWARD)
  int b = 0;  // running min (RANGE)
  double x = 0.0;
  double reward = 0.0;  // payoff collected when this node's stage stops here
  std::int32_t stop_child = -1;
  std::int32_t up = -1;
  std::int32_t down = -1;
};

class StateGraph {
 public:
  static constexpr std::size_t kDefaultMaxNodes = 4'000'000;

  StateGraph() = default;

  StateGraph(const LatticeSpec& lattice, const PayoffSpec& payoff,
             std::size_t max_nodes = kDefaultMaxNodes)
      : lattice_(lattice.checked()), payoff_(payoff.checked()) {
    if (lattice_.stages < payoff_.min_stages())
      throw InvalidInput("payoff " + std::string(to_string(payoff_.kind)) + " needs at least " +
                         std::to_string(payoff_.min_stages()) + " stages");
    if (lattice_.steps > kMaxSteps) throw BudgetExceeded("state graph: too many lattice steps");
    build(max_nodes);
  }

  const LatticeSpec& lattice() const { return lattice_; }
  const PayoffSpec& payoff() const { return payoff_; }
  std::size_t size() const { return nodes_.size(); }
  const GraphNode& operator[](std::size_t i) const { return nodes_[i]; }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  std::int32_t root() const { return 0; }
  bool is_last_stage(const GraphNode& n) const { return n.stage == lattice_.stages - 1; }

  /// Index of the node reached by a transition, or -1 when absent.
  std::int32_t find(int stage, int t, int k, int a, int b) const {
    auto it = index_.find(key(stage, t, k, a, b));
    return it == index_.end() ? -1 : it->second;
  }

 private:
  static constexpr int kMaxSteps = 1000;
  static constexpr int kSaturated = 2040;
  static constexpr int kOffset = 2048;

  static std::uint64_t key(int stage, int t, int k, int a, int b) {
    auto u = [](int v) { return static_cast<std::uint64_t>(v + kOffset) & 0xFFFU; };
    return (static_cast<std::uint64_t>(stage) << 48) | (static_cast<std::uint64_t>(t) << 36) |
           (u(k) << 24) | (u(a) << 12) | u(b);
  }

  int cap_units() const {
    return static_cast<int>(std::ceil(payoff_.cap / lattice_.dx - 1e-12));
  }

  void advance_aux(int k, int& a, int& b) const {
    switch (payoff_.kind) {
      case PayoffKind::LOOKBACK_MAX_CAPPED: a = std::min(std::max(a, k), cap_units()); break;
      case PayoffKind::RANGE_CAPPED:
        if (a == kSaturated) break;
        a = std::max(a, k);
        b = std::min(b, k);
        if (a - b >= cap_units()) a = kSaturated, b = -kSaturated;
        break;
      case PayoffKind::STOPPED_ABS_CAPPED:
      case PayoffKind::FORWARD_STRADDLE_CAPPED: break;
    }
  }

  double reward_of(int stage, int k, int a, int b) const {
    const double dx = lattice_.dx;
    const int last = lattice_.stages - 1;
    double raw = 0.0;
    switch (payoff_.kind) {
      case PayoffKind::LOOKBACK_MAX_CAPPED:
        if (stage != last) return 0.0;
        raw = a * dx;
        break;
      case PayoffKind::STOPPED_ABS_CAPPED:
        if (stage != last) return 0.0;
        raw = std::abs(k) * dx;
        break;
      case PayoffKind::RANGE_CAPPED:
        if (stage != last) return 0.0;
        raw = static_cast<double>(a - b) * dx;
        break;
      case PayoffKind::FORWARD_STRADDLE_CAPPED:
        if (stage != 1) return 0.0;
        raw = std::abs(k - a) * dx;
        break;
    }
    return std::min(raw, payoff_.cap);
  }

  void build(std::size_t max_nodes) {
    const int N = lattice_.steps;
    const int m = lattice_.stages;
    std::vector<GraphNode> raw;
    std::unordered_map<std::uint64_t, std::int32_t> at;
    auto intern = [&](int stage, int t, int k, int a, int b) -> std::int32_t {
      const auto h = key(stage, t, k, a, b);
      auto it = at.find(h);
      if (it != at.end()) return it->second;
      if (raw.size() >= max_nodes)
        throw BudgetExceeded("state graph exceeds " + std::to_string(max_nodes) + " nodes");
      GraphNode n;
      n.stage = stage;
      n.t = t;
      n.k = k;
      n.a = a;
      n.b = b;
      raw.push_back(n);
      const auto id = static_cast<std::int32_t>(raw.size() - 1);
      at.emplace(h, id);
      return id;
    };
    intern(0, 0, 0, 0, 0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const GraphNode n = raw[i];
      if (n.stage + 1 < m) {
        int a = n.a;
        int b = n.b;
        if (payoff_.kind == PayoffKind::FORWARD_STRADDLE_CAPPED) a = n.stage == 0 ? n.k : 0;
        const auto c = intern(n.stage + 1, n.t, n.k, a, b);
        raw[i].stop_child = c;
      }
      if (n.t < N) {
        for (int d : {+1, -1}) {
          int a = n.a;
          int b = n.b;
          advance_aux(n.k + d, a, b);
          const auto c = intern(n.stage, n.t + 1, n.k + d, a, b);
          (d > 0 ? raw[i].up : raw[i].down) = c;
        }
      }
    }

    std::vector<std::int32_t> order(raw.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int32_t l, std::int32_t r) {
      const auto& x = raw[static_cast<std::size_t>(l)];
      const auto& y = raw[static_cast<std::size_t>(r)];
      return std::tie(x.t, x.stage, x.k, x.a, x.b) < std::tie(y.t, y.stage, y.k, y.a, y.b);
    });
    std::vector<std::int32_t> rank(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      rank[static_cast<std::size_t>(order[i])] = static_cast<std::int32_t>(i);
    auto remap = [&](std::int32_t v) { return v < 0 ? v : rank[static_cast<std::size_t>(v)]; };

    nodes_.resize(raw.size());
    index_.clear();
    index_.reserve(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      GraphNode n = raw[static_cast<std::size_t>(order[i])];
      n.stop_child = remap(n.stop_child);
      n.up = remap(n.up);
      n.down = remap(n.down);
      n.x = n.k * lattice_.dx;
      n.reward = reward_of(n.stage, n.k, n.a, n.b);
      nodes_[i] = n;
      index_.emplace(key(n.stage, n.t, n.k, n.a, n.b), static_cast<std::int32_t>(i));
    }
  }

  LatticeSpec lattice_;
  PayoffSpec payoff_;
  std::vector<GraphNode> nodes_;
  std::unordered_map<std::uint64_t, std::int32_t> index_;
};

}  // namespace skembed
