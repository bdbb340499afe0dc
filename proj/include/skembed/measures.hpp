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

/// @file measures.hpp
/// @brief Atomic probability measures on the line, call-price curves,
/// static-arbitrage checks on call matrices and recovery of a measure from
/// finitely many call quotes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/matrix.hpp"

namespace skembed {

struct Atom {
  double position;
  double mass;
  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Finite atomic probability measure. Atoms are kept sorted by position
/// with strictly positive masses summing to one.
class DiscreteMeasure {
 public:
  static constexpr double kMassTolerance = 1e-12;

  /// Validates the atom list as given; throws InvalidInput on unsorted
  /// positions, non-positive masses or a total mass away from one.
  explicit DiscreteMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) { validate(); }

  static DiscreteMeasure dirac(double x) { return DiscreteMeasure({{x, 1.0}}); }

  /// Sorts, merges coincident positions, drops masses at or below
  /// `drop_below` and rescales to unit mass. Rescaling is refused when the
  /// input total is further than `renorm_tol` from one.
  static DiscreteMeasure from_weights(std::vector<Atom> atoms, double drop_below = 0.0,
                                      double renorm_tol = 1e-6) {
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.position < b.position; });
    std::vector<Atom> merged;
    for (const auto& a : atoms) {
      if (!merged.empty() && merged.back().position == a.position)
        merged.back().mass += a.mass;
      else
        merged.push_back(a);
    }
    std::erase_if(merged, [&](const Atom& a) { return a.mass <= drop_below; });
    double total = 0.0;
    for (const auto& a : merged) total += a.mass;
    if (merged.empty() || std::abs(total - 1.0) > renorm_tol) {
      std::ostringstream os;
      os << "measure total mass " << total << " is not 1";
      throw InvalidInput(os.str());
    }
    for (auto& a : merged) a.mass /= total;
    return DiscreteMeasure(std::move(merged));
  }

  std::span<const Atom> atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double min_position() const { return atoms_.front().position; }
  double max_position() const { return atoms_.back().position; }

  friend bool operator==(const DiscreteMeasure&, const DiscreteMeasure&) = default;

 private:
  void validate() const {
    if (atoms_.empty()) throw InvalidInput("measure has no atoms");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      if (!std::isfinite(a.position) || !std::isfinite(a.mass))
        throw InvalidInput("measure atom is not finite");
      if (!(a.mass > 0.0)) throw InvalidInput("measure atom mass must be positive");
      if (i > 0 && !(atoms_[i - 1].position < a.position))
        throw InvalidInput("measure atom positions must be strictly increasing");
      total += a.mass;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
      std::ostringstream os;
      os.precision(17);
      os << "measure masses sum to " << total << ", expected 1";
      throw InvalidInput(os.str());
    }
  }

  std::vector<Atom> atoms_;
};

/// p-th power moment constraint on the last maturity, with conjugate
/// exponent q = p / (p - 1).
struct PowerConstraint {
  double p = 2.0;
  double V = 0.0;
  double q() const { return p / (p - 1.0); }
  friend bool operator==(const PowerConstraint&, const PowerConstraint&) = default;
};

/// Strikes K (strictly increasing) and an m x n call-price matrix, rows
/// indexed by maturity.
struct MarketData {
  std::vector<double> strikes;
  Matrix calls;
  std::optional<PowerConstraint> power;

  std::size_t maturities() const { return calls.rows(); }
  std::size_t strike_count() const { return strikes.size(); }

  void validate() const {
    if (strikes.empty()) throw InvalidInput("market: strikes must be nonempty");
    for (std::size_t j = 1; j < strikes.size(); ++j)
      if (!(strikes[j - 1] < strikes[j]))
        throw InvalidInput("market: strikes must be strictly increasing");
    if (calls.rows() == 0) throw InvalidInput("market: calls must have at least one maturity row");
    if (calls.cols() != strikes.size())
      throw InvalidInput("market: every calls row must have one price per strike");
    for (double c : calls.flat()) {
      if (!std::isfinite(c) || c < 0.0)
        throw InvalidInput("market: calls must be finite and nonnegative");
    }
    if (power) {
      if (!(power->p > 1.0)) throw InvalidInput("market: power.p must exceed 1");
      if (!(power->V > 0.0)) throw InvalidInput("market: power.V must be positive");
    }
  }

  friend bool operator==(const MarketData&, const MarketData&) = default;
};

/// One failed (or boundary) condition. `slack` is positive when the
/// condition holds with room; boundary entries sit within the arbitrage
/// slack of equality.
struct Violation {
  std::string tag;
  std::vector<std::size_t> indices;
  double slack = 0.0;
  bool boundary = false;
};

struct ArbitrageVerdict {
  bool ok = true;
  bool centered = false;
  std::vector<Violation> violations;

  /// True when every violation is a boundary case, i.e. the data lies in
  /// the closure of the open no-arbitrage set.
  bool in_closure() const {
    return std::all_of(violations.begin(), violations.end(),
                       [](const Violation& v) { return v.boundary; });
  }
  bool has_boundary() const {
    return std::any_of(violations.begin(), violations.end(),
                       [](const Violation& v) { return v.boundary; });
  }
  /// Smallest slack over all recorded violations (+inf when none).
  double min_slack() const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& v : violations) s = std::min(s, v.slack);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Elementary functionals
// ---------------------------------------------------------------------------

inline double mean(const DiscreteMeasure& mu) {
  double s = 0.0;
  for (const auto& a : mu.atoms()) s += a.mass * a.position;
  return s;
}

/// mu((x - K)^+).
inline double call_price(const DiscreteMeasure& mu, double strike) {
  double s = 0.0;
  for (const auto& a : mu.atoms())
    if (a.position > strike) s += a.mass * (a.position - strike);
  return s;
}

inline double power_moment(const DiscreteMeasure& mu, double p) {
  if (p < 1.0) throw InvalidInput("power_moment: p must be >= 1");
  double s = 0.0;
  for (const auto& a : mu.atoms()) s += a.mass * std::pow(std::abs(a.position), p);
  return s;
}

/// Right-continuous distribution function.
inline double cdf(const DiscreteMeasure& mu, double x) {
  double s = 0.0;
  for (const auto& a : mu.atoms()) {
    if (a.position > x) break;
    s += a.mass;
  }
  return std::min(s, 1.0);
}

/// Left-continuous generalized inverse inf{x : F(x) >= u}; u = 0 maps to
/// the smallest atom.
inline double quantile(const DiscreteMeasure& mu, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidInput("quantile: u must lie in [0,1]");
  double s = 0.0;
  for (const auto& a : mu.atoms()) {
    s += a.mass;
    if (s >= u - 1e-15) return a.position;
  }
  return mu.max_position();
}

// ---------------------------------------------------------------------------
// Convex order and static arbitrage
// ---------------------------------------------------------------------------

namespace detail {

inline void record(ArbitrageVerdict& v, std::string tag, std::vector<std::size_t> idx, double slack,
                   double tol) {
  if (slack > tol) return;
  v.violations.push_back({std::move(tag), std::move(idx), slack, slack >= -tol});
}

}  // namespace detail

/// Checks that `mus` is a peacock: equal means and call curves
/// nondecreasing in the maturity index. For atomic measures the call
/// curves are piecewise linear with kinks at atoms, so comparing at every
/// atom of every measure is exact.
inline ArbitrageVerdict peacock_check(std::span<const DiscreteMeasure> mus, double tol = 1e-9) {
  if (mus.empty()) throw InvalidInput("peacock_check: need at least one measure");
  ArbitrageVerdict v;
  std::vector<double> kinks;
  for (const auto& mu : mus)
    for (const auto& a : mu.atoms()) kinks.push_back(a.position);
  std::sort(kinks.begin(), kinks.end());
  kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());

  v.centered = true;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const double mi = mean(mus[i]);
    if (std::abs(mi) > tol) v.centered = false;
    if (i == 0) continue;
    const double gap = std::abs(mi - mean(mus[i - 1]));
    if (gap > tol) v.violations.push_back({"mean_mismatch", {i - 1, i}, -gap, false});
    for (std::size_t k = 0; k < kinks.size(); ++k) {
      const double slack = call_price(mus[i], kinks[k]) - call_price(mus[i - 1], kinks[k]);
      if (slack < -tol) v.violations.push_back({"convex_order", {i - 1, i, k}, slack, false});
    }
  }
  v.ok = v.violations.empty();
  return v;
}

/// Membership of the call matrix in the open no-arbitrage set: prices
/// strictly increasing in maturity, strictly decreasing in strike, above
/// intrinsic value, with strike slopes strictly inside (-1, 0) and strictly
/// increasing. Conditions within `slack_tol` of equality are reported as
/// boundary violations.
inline ArbitrageVerdict arbitrage_check(const MarketData& market, double slack_tol = 1e-9) {
  market.validate();
  ArbitrageVerdict v;
  const auto& K = market.strikes;
  const auto& C = market.calls;
  const std::size_t m = C.rows();
  const std::size_t n = C.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      detail::record(v, "intrinsic", {i, j}, C(i, j) - std::max(-K[j], 0.0), slack_tol);
      if (i + 1 < m)
        detail::record(v, "maturity_increasing", {i, j}, C(i + 1, j) - C(i, j), slack_tol);
      if (j + 1 < n) {
        const double slope = (C(i, j + 1) - C(i, j)) / (K[j + 1] - K[j]);
        detail::record(v, "strike_decreasing", {i, j}, -slope * (K[j + 1] - K[j]), slack_tol);
        detail::record(v, "slope_lower", {i, j}, 1.0 + slope, slack_tol);
        if (j > 0) {
          const double prev = (C(i, j) - C(i, j - 1)) / (K[j] - K[j - 1]);
          detail::record(v, "convexity", {i, j - 1, j, j + 1}, slope - prev, slack_tol);
        }
      }
    }
  }
  v.ok = v.violations.empty();
  return v;
}

// ---------------------------------------------------------------------------
// Truncation, Carr-Madan, recovery from calls
// ---------------------------------------------------------------------------

/// Law of (-R) v (R ^ X).
inline DiscreteMeasure truncate(const DiscreteMeasure& mu, double R) {
  if (!(R > 0.0)) throw InvalidInput("truncate: R must be positive");
  std::vector<Atom> out;
  out.reserve(mu.size());
  for (const auto& a : mu.atoms()) out.push_back({std::clamp(a.position, -R, R), a.mass});
  return DiscreteMeasure::from_weights(std::move(out));
}

/// Composite trapezoid approximation of f(x) = int_a^b f''(K) (x-K)^+ dK on
/// a uniform mesh of `knots` points, with an extra knot placed at x so the
/// kink of the integrand falls on the mesh.
inline double carr_madan_replicate(const std::function<double(double)>& f_second, double lo,
                                   double hi, double x, int knots) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw InvalidInput("carr_madan_replicate: invalid support interval");
  if (knots < 2) throw InvalidInput("carr_madan_replicate: need at least two knots");
  if (x <= lo) return 0.0;
  const double top = std::min(x, hi);
  const double h = (hi - lo) / (knots - 1);
  const auto pieces = std::max<long>(1, static_cast<long>(std::ceil((top - lo) / h - 1e-12)));
  const double step = (top - lo) / static_cast<double>(pieces);
  auto integrand = [&](double k) { return f_second(k) * (x - k); };
  double s = 0.5 * (integrand(lo) + integrand(top));
  for (long i = 1; i < pieces; ++i) s += integrand(lo + step * static_cast<double>(i));
  return s * step;
}

/// Rebuilds a centered measure from one maturity row of call quotes: atoms
/// on the strikes plus at most two tail atoms, chosen so the piecewise
/// linear call curve interpolates every quote.
///
/// Tail placement: with interior slopes s_j between consecutive strikes, the
/// left tail segment takes slope (-1 + s_1)/2 and the right one s_{n-1}/2.
/// A single quote uses the two-atom law symmetric about the strike. Quotes
/// sitting on the intrinsic bound (C_1 = -K_1 or C_n = 0) drop the
/// corresponding tail atom.
inline DiscreteMeasure measure_from_calls(const MarketData& market, std::size_t row,
                                          double tol = 1e-10) {
  market.validate();
  if (row >= market.maturities()) throw InvalidInput("measure_from_calls: maturity row out of range");
  const auto& K = market.strikes;
  const auto C = market.calls.row(row);
  const std::size_t n = K.size();
  auto scale = [&](double x) { return tol * (1.0 + std::abs(x)); };

  const double put_first = C[0] + K[0];  // E(K_1 - X)^+ for a centered law
  if (put_first < -scale(K[0]))
    throw MarketRejected("measure_from_calls: C[0] below the intrinsic bound -K[0]");
  if (C[n - 1] < -tol) throw MarketRejected("measure_from_calls: negative call price");
  const bool left_tail = put_first > scale(K[0]);
  const bool right_tail = C[n - 1] > tol;

  std::vector<double> slope(n > 1 ? n - 1 : 0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    slope[j] = (C[j + 1] - C[j]) / (K[j + 1] - K[j]);
    if (slope[j] < -1.0 - tol || slope[j] > tol) {
      std::ostringstream os;
      os << "measure_from_calls: slope between strikes " << j << " and " << j + 1 << " is "
         << slope[j] << ", outside [-1, 0]";
      throw MarketRejected(os.str());
    }
  }
  for (std::size_t j = 1; j + 1 < n; ++j) {
    if (slope[j] < slope[j - 1] - tol) {
      std::ostringstream os;
      os << "measure_from_calls: negative butterfly at strikes (" << j - 1 << ", " << j << ", "
         << j + 1 << "): slopes " << slope[j - 1] << " then " << slope[j];
      throw MarketRejected(os.str());
    }
  }

  double s_left = -1.0;
  double s_right = 0.0;
  if (n == 1) {
    if (left_tail && right_tail) {
      s_left = s_right = -C[0] / (2.0 * C[0] + K[0]);
    } else if (left_tail) {
      s_left = -0.5;
    } else if (right_tail) {
      s_right = -0.5;
    }
  } else {
    if (left_tail) {
      if (slope.front() <= -1.0 + tol)
        throw MarketRejected("measure_from_calls: first slope is -1 but C[0] exceeds intrinsic");
      s_left = 0.5 * (-1.0 + slope.front());
    }
    if (right_tail) {
      if (slope.back() >= -tol)
        throw MarketRejected("measure_from_calls: call curve flat at a positive level");
      s_right = 0.5 * slope.back();
    }
  }

  std::vector<Atom> atoms;
  if (left_tail) atoms.push_back({K[0] - put_first / (1.0 + s_left), 1.0 + s_left});
  for (std::size_t j = 0; j < n; ++j) {
    const double before = j == 0 ? s_left : slope[j - 1];
    const double after = j + 1 == n ? s_right : slope[j];
    atoms.push_back({K[j], after - before});
  }
  if (right_tail) atoms.push_back({K[n - 1] + C[n - 1] / (-s_right), -s_right});
  for (auto& a : atoms) a.mass = std::max(a.mass, 0.0);
  return DiscreteMeasure::from_weights(std::move(atoms), 1e-13);
}

}  // namespace skembed
