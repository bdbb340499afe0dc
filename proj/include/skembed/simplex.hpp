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

/// @file simplex.hpp
/// @brief Dense two-phase tableau simplex for equality-form linear programs
/// max c.x subject to A x = b, x >= lower.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "skembed/error.hpp"

namespace skembed {

struct LinearProgram {
  struct Row {
    std::vector<std::pair<std::int32_t, double>> entries;
    double rhs = 0.0;
  };

  std::size_t cols = 0;
  std::vector<double> objective;  // maximized
  std::vector<double> lower;      // empty means all zero
  std::vector<Row> rows;
  /// Optional starting basis: a column per row to pivot in before phase I,
  /// or -1. Ignored when it produces a negative basic value.
  std::vector<std::int32_t> crash;

  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.entries.size();
    return n;
  }
  double lower_bound(std::size_t j) const { return lower.empty() ? 0.0 : lower[j]; }
};

struct SimplexOptions {
  double pivot_tol = 1e-11;
  double feas_tol = 1e-9;
  double opt_tol = 1e-10;
  std::size_t max_nonzeros = 20'000;
  std::size_t max_pivots = 5'000'000;
  int bland_after = 50;  // consecutive degenerate pivots before switching to Bland
};

enum class LPStatus { OPTIMAL, INFEASIBLE, UNBOUNDED };

inline const char* to_string(LPStatus s) {
  switch (s) {
    case LPStatus::OPTIMAL: return "OPTIMAL";
    case LPStatus::INFEASIBLE: return "INFEASIBLE";
    case LPStatus::UNBOUNDED: return "UNBOUNDED";
  }
  return "?";
}

struct LPSolution {
  LPStatus status = LPStatus::INFEASIBLE;
  double value = 0.0;
  std::vector<double> x;
  std::vector<double> duals;  // y with A^T y >= c, value = b . y at optimum
  double primal_residual = 0.0;
  double complementary_slackness = 0.0;
  double phase1_objective = 0.0;
  std::size_t pivots = 0;
  bool crash_used = false;
};

namespace detail {

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const std::vector<double>& rhs)
      : R_(lp.rows.size()), n_(lp.cols), W_(n_ + R_ + 1), t_(R_ * W_, 0.0), basis_(R_), sign_(R_, 1) {
    for (std::size_t r = 0; r < R_; ++r) {
      for (const auto& [j, v] : lp.rows[r].entries) at(r, static_cast<std::size_t>(j)) += v;
      at(r, n_ + r) = 1.0;
      at(r, W_ - 1) = rhs[r];
      basis_[r] = n_ + r;
    }
    z1_.assign(W_, 0.0);
    z2_.assign(W_, 0.0);
  }

  std::size_t rows() const { return R_; }
  std::size_t structural() const { return n_; }
  double& at(std::size_t r, std::size_t c) { return t_[r * W_ + c]; }
  double at(std::size_t r, std::size_t c) const { return t_[r * W_ + c]; }
  double rhs(std::size_t r) const { return at(r, W_ - 1); }
  std::size_t basic(std::size_t r) const { return basis_[r]; }
  bool artificial_basic(std::size_t r) const { return basis_[r] >= n_; }
  int sign(std::size_t r) const { return sign_[r]; }
  std::vector<double>& z1() { return z1_; }
  std::vector<double>& z2() { return z2_; }

  void flip_row(std::size_t r) {
    double* row = &t_[r * W_];
    for (std::size_t c = 0; c < W_; ++c) row[c] = -row[c];
    row[n_ + r] = 1.0;
    sign_[r] = -sign_[r];
  }

  void pivot(std::size_t r, std::size_t j) {
    double* prow = &t_[r * W_];
    const double inv = 1.0 / prow[j];
    nz_.clear();
    for (std::size_t c = 0; c < W_; ++c) {
      if (prow[c] == 0.0) continue;
      prow[c] *= inv;
      if (std::abs(prow[c]) < kDrop) {
        prow[c] = 0.0;
        continue;
      }
      nz_.push_back(c);
    }
    prow[j] = 1.0;
    auto eliminate = [&](double* row) {
      const double f = row[j];
      if (f == 0.0) return;
      for (std::size_t c : nz_) {
        double v = row[c] - f * prow[c];
        row[c] = std::abs(v) < kDrop ? 0.0 : v;
      }
      row[j] = 0.0;
    };
    for (std::size_t i = 0; i < R_; ++i)
      if (i != r) eliminate(&t_[i * W_]);
    eliminate(z1_.data());
    eliminate(z2_.data());
    basis_[r] = j;
  }

 private:
  static constexpr double kDrop = 1e-14;
  std::size_t R_;
  std::size_t n_;
  std::size_t W_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
  std::vector<int> sign_;
  std::vector<double> z1_;
  std::vector<double> z2_;
  std::vector<std::size_t> nz_;
};

}  // namespace detail

/// Two-phase simplex on a dense tableau carrying one identity column per
/// row. Those columns serve as phase-I artificials and, at the end, hold the
/// row duals in their reduced costs. Entering columns follow Dantzig's rule
/// and fall back to Bland's rule after a run of degenerate pivots.
inline LPSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  if (lp.objective.size() != lp.cols) throw InvalidInput("simplex: objective size mismatch");
  if (!lp.lower.empty() && lp.lower.size() != lp.cols)
    throw InvalidInput("simplex: lower-bound size mismatch");
  if (lp.nonzeros() > opt.max_nonzeros)
    throw BudgetExceeded("simplex: " + std::to_string(lp.nonzeros()) +
                         " nonzeros exceed the cap of " + std::to_string(opt.max_nonzeros));
  const std::size_t R = lp.rows.size();
  const std::size_t n = lp.cols;

  std::vector<double> b(R);
  double bnorm = 1.0;
  for (std::size_t r = 0; r < R; ++r) {
    b[r] = lp.rows[r].rhs;
    for (const auto& [j, v] : lp.rows[r].entries) b[r] -= v * lp.lower_bound(static_cast<std::size_t>(j));
    bnorm = std::max(bnorm, std::abs(b[r]));
  }

  LPSolution sol;
  auto make = [&](bool use_crash) {
    detail::Tableau tab(lp, b);
    bool ok = true;
    if (use_crash) {
      for (std::size_t r = 0; r < R && r < lp.crash.size(); ++r) {
        const auto j = lp.crash[r];
        if (j < 0) continue;
        if (std::abs(tab.at(r, static_cast<std::size_t>(j))) <= opt.pivot_tol) {
          ok = false;
          break;
        }
        tab.pivot(r, static_cast<std::size_t>(j));
        ++sol.pivots;
      }
      for (std::size_t r = 0; ok && r < R; ++r)
        if (!tab.artificial_basic(r) && tab.rhs(r) < -opt.feas_tol) ok = false;
    }
    return std::pair{std::move(tab), ok};
  };

  auto [tab, crash_ok] = make(!lp.crash.empty());
  sol.crash_used = !lp.crash.empty() && crash_ok;
  if (!lp.crash.empty() && !crash_ok) tab = make(false).first;

  for (std::size_t r = 0; r < R; ++r)
    if (tab.artificial_basic(r) && tab.rhs(r) < 0.0) tab.flip_row(r);

  // Phase-I costs: 1 on artificials that start basic, else 0. Phase-II
  // minimizes -c.
  std::vector<double> c1(n + R, 0.0);
  std::vector<double> c2(n + R, 0.0);
  for (std::size_t j = 0; j < n; ++j) c2[j] = -lp.objective[j];
  for (std::size_t r = 0; r < R; ++r)
    if (tab.artificial_basic(r)) c1[tab.basic(r)] = 1.0;
  const std::size_t W = n + R + 1;
  auto init_costs = [&](std::vector<double>& z, const std::vector<double>& c) {
    z.assign(W, 0.0);
    for (std::size_t j = 0; j < n + R; ++j) z[j] = c[j];
    for (std::size_t r = 0; r < R; ++r) {
      const double cb = c[tab.basic(r)];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < W; ++j) z[j] -= cb * tab.at(r, j);
    }
  };
  init_costs(tab.z1(), c1);
  init_costs(tab.z2(), c2);

  enum class Step { OPTIMAL, UNBOUNDED };
  auto run = [&](std::vector<double>& z, bool phase_two) -> Step {
    int degenerate = 0;
    while (true) {
      if (sol.pivots >= opt.max_pivots) throw BudgetExceeded("simplex: pivot limit reached");
      const bool bland = degenerate >= opt.bland_after;
      std::size_t enter = n;
      double best = -opt.opt_tol;
      for (std::size_t j = 0; j < n; ++j) {
        if (z[j] < best) {
          enter = j;
          if (bland) break;
          best = z[j];
        }
      }
      if (enter == n) return Step::OPTIMAL;

      // Harris two-pass ratio test: the first pass finds the step allowed
      // when every basic value may dip by feas_tol, the second picks the
      // largest pivot (or, under Bland, the lowest basic index among the
      // well-sized pivots) within that step.
      std::size_t leave = R;
      double ratio = std::numeric_limits<double>::infinity();
      double piv = 0.0;
      bool tiny = false;
      long tiny_row = -1;
      double relaxed = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < R; ++r) {
        const double a = tab.at(r, enter);
        if (phase_two && tab.artificial_basic(r)) {
          if (std::abs(a) > opt.pivot_tol && std::abs(a) > piv) {
            leave = r;
            piv = std::abs(a);
          }
          continue;
        }
        if (a <= opt.pivot_tol) {
          if (a > 1e-14) tiny = true, tiny_row = static_cast<long>(r);
          continue;
        }
        relaxed = std::min(relaxed, (std::max(tab.rhs(r), 0.0) + opt.feas_tol) / a);
      }
      if (leave != R) {
        ratio = 0.0;
      } else if (relaxed < std::numeric_limits<double>::infinity()) {
        double amax = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
          const double a = tab.at(r, enter);
          if (a > opt.pivot_tol && std::max(tab.rhs(r), 0.0) / a <= relaxed) amax = std::max(amax, a);
        }
        for (std::size_t r = 0; r < R; ++r) {
          const double a = tab.at(r, enter);
          if (a <= opt.pivot_tol) continue;
          const double q = std::max(tab.rhs(r), 0.0) / a;
          if (q > relaxed) continue;
          bool take = leave == R;
          if (!take && bland)
            take = a >= 1e-3 * amax && (piv < 1e-3 * amax || tab.basic(r) < tab.basic(leave));
          else if (!take)
            take = a > piv;
          if (take) {
            leave = r;
            ratio = q;
            piv = a;
          }
        }
      }
      if (leave == R) {
        if (tiny)
          throw NumericBreakdown("simplex: only sub-tolerance pivots available", tiny_row,
                                 static_cast<long>(enter));
        return Step::UNBOUNDED;
      }
      degenerate = ratio <= 1e-12 ? degenerate + 1 : 0;
      tab.pivot(leave, enter);
      ++sol.pivots;
    }
  };

  run(tab.z1(), false);
  double infeas = 0.0;
  for (std::size_t r = 0; r < R; ++r)
    if (tab.artificial_basic(r) && c1[tab.basic(r)] > 0.0) infeas += std::abs(tab.rhs(r));
  sol.phase1_objective = infeas;
  if (infeas > opt.feas_tol * bnorm) {
    sol.status = LPStatus::INFEASIBLE;
    return sol;
  }
  for (std::size_t r = 0; r < R; ++r) {
    if (!tab.artificial_basic(r)) continue;
    std::size_t j_best = n;
    double a_best = 1e-9;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = std::abs(tab.at(r, j));
      if (a > a_best) a_best = a, j_best = j;
    }
    if (j_best < n) {
      tab.pivot(r, j_best);
      ++sol.pivots;
    }
  }

  if (run(tab.z2(), true) == Step::UNBOUNDED) {
    sol.status = LPStatus::UNBOUNDED;
    return sol;
  }

  sol.status = LPStatus::OPTIMAL;
  sol.x.assign(n, 0.0);
  for (std::size_t r = 0; r < R; ++r)
    if (!tab.artificial_basic(r)) sol.x[tab.basic(r)] = std::max(tab.rhs(r), 0.0);
  for (std::size_t j = 0; j < n; ++j) sol.x[j] += lp.lower_bound(j);
  sol.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) sol.value += lp.objective[j] * sol.x[j];

  // Reduced cost of identity column r under costs -c is -sign_r * y_r for
  // the minimization duals; the maximization duals are their negatives.
  sol.duals.assign(R, 0.0);
  for (std::size_t r = 0; r < R; ++r) sol.duals[r] = tab.sign(r) * tab.z2()[n + r];

  std::vector<double> reduced(n);
  for (std::size_t j = 0; j < n; ++j) reduced[j] = -lp.objective[j];
  double resid = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    double ax = 0.0;
    for (const auto& [j, v] : lp.rows[r].entries) {
      ax += v * sol.x[static_cast<std::size_t>(j)];
      reduced[static_cast<std::size_t>(j)] += v * sol.duals[r];
    }
    resid = std::max(resid, std::abs(ax - lp.rows[r].rhs));
  }
  sol.primal_residual = resid;
  double cs = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    cs = std::max(cs, std::abs((sol.x[j] - lp.lower_bound(j)) * reduced[j]));
  sol.complementary_slackness = cs;
  return sol;
}

}  // namespace skembed
