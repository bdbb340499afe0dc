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

/// @file metrics.hpp
/// @brief Levy-Prokhorov and Wasserstein-1 distances between atomic
/// measures, sup-distance of call curves, and the explicit bound chains
/// relating them.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "skembed/error.hpp"
#include "skembed/measures.hpp"

namespace skembed {

struct MetricReport {
  double rho = 0.0;
  double w1 = 0.0;
  double calls_sup_gap = 0.0;
  double R = 0.0;
};

struct BoundCertificate {
  double epsilon = 0.0;
  double rho_bound = 0.0;
  double w_bound = 0.0;
  double rho = 0.0;
  double w1 = 0.0;
  bool holds = true;
};

struct MarginalGapBound {
  double epsilon = 0.0;
  double rho_bound = 0.0;
  double w_bound = 0.0;
};

namespace detail {

struct Cumulative {
  std::vector<double> x;
  std::vector<double> F;  // F[i] = mass of atoms at positions <= x[i]
};

inline Cumulative cumulative(const DiscreteMeasure& mu) {
  Cumulative c;
  double s = 0.0;
  for (const auto& a : mu.atoms()) {
    s += a.mass;
    c.x.push_back(a.position);
    c.F.push_back(std::min(s, 1.0));
  }
  c.F.back() = 1.0;
  return c;
}

// Largest deficit F_a(a_i) - F_b(a_i + eps) over the atoms of a. The test
// b_j <= a_i + eps is evaluated as b_j - a_i <= eps so that eps equal to an
// atom distance is classified the same way the candidate list computed it.
inline double band_deficit(const Cumulative& a, const Cumulative& b, double eps) {
  double worst = -1.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    while (j < b.x.size() && b.x[j] - a.x[i] <= eps) ++j;
    const double Fb = j == 0 ? 0.0 : b.F[j - 1];
    worst = std::max(worst, a.F[i] - Fb);
  }
  return worst;
}

inline bool band_feasible(const Cumulative& a, const Cumulative& b, double eps) {
  return band_deficit(a, b, eps) <= eps && band_deficit(b, a, eps) <= eps;
}

}  // namespace detail

/// Levy-Prokhorov distance in the CDF-band form: the least eps with
/// F_mu(x - eps) - eps <= F_nu(x) <= F_mu(x + eps) + eps for all x.
///
/// For atomic measures the least eps is either an atom distance or a jump
/// level of a deficit, so the search bisects over that finite candidate
/// list and the result is exact up to floating point.
inline double levy_prokhorov(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto a = detail::cumulative(mu);
  const auto b = detail::cumulative(nu);
  std::vector<double> cand{0.0, 1.0};
  for (double x : a.x)
    for (double y : b.x) {
      if (y - x > 0.0) cand.push_back(y - x);
      if (x - y > 0.0) cand.push_back(x - y);
    }
  auto add_levels = [&](const detail::Cumulative& p, const detail::Cumulative& r) {
    for (double Fp : p.F) {
      if (Fp > 0.0) cand.push_back(Fp);
      for (double Fr : r.F)
        if (Fp - Fr > 0.0) cand.push_back(Fp - Fr);
    }
  };
  add_levels(a, b);
  add_levels(b, a);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  while (!cand.empty() && cand.back() > 1.0) cand.pop_back();

  std::size_t lo = 0;
  std::size_t hi = cand.size() - 1;  // cand[hi] == 1 is always feasible
  if (detail::band_feasible(a, b, cand[lo])) return cand[lo];
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (detail::band_feasible(a, b, cand[mid]))
      hi = mid;
    else
      lo = mid;
  }
  return cand[hi];
}

/// Integral of |F_mu - F_nu| over the line.
inline double wasserstein1(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<double> xs;
  for (const auto& a : mu.atoms()) xs.push_back(a.position);
  for (const auto& a : nu.atoms()) xs.push_back(a.position);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    w += std::abs(cdf(mu, xs[i]) - cdf(nu, xs[i])) * (xs[i + 1] - xs[i]);
  return w;
}

/// sup over K in [-R, R] of |mu((x-K)^+) - nu((x-K)^+)|. Both curves are
/// piecewise linear, so the sup sits at an atom inside the window or at an
/// endpoint.
inline double calls_sup_gap(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double R) {
  if (!(R > 0.0)) throw InvalidInput("calls_sup_gap: R must be positive");
  std::vector<double> ks{-R, R};
  for (const auto* m : {&mu, &nu})
    for (const auto& a : m->atoms())
      if (a.position > -R && a.position < R) ks.push_back(a.position);
  double g = 0.0;
  for (double k : ks) g = std::max(g, std::abs(call_price(mu, k) - call_price(nu, k)));
  return g;
}

inline MetricReport metric_report(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double R) {
  return {levy_prokhorov(mu, nu), wasserstein1(mu, nu), calls_sup_gap(mu, nu, R), R};
}

/// For mu, nu supported in [-R, R] with call-curve gap eps on the window:
/// rho <= sqrt(2 eps) and W <= 4 R sqrt(eps).
inline BoundCertificate rate_certificate(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                         double R, double slack = 1e-12) {
  if (!(R > 0.0)) throw InvalidInput("rate_certificate: R must be positive");
  for (const auto* m : {&mu, &nu})
    if (m->min_position() < -R || m->max_position() > R)
      throw InvalidInput("rate_certificate: measure support leaves [-R, R]");
  BoundCertificate c;
  c.epsilon = calls_sup_gap(mu, nu, R);
  c.rho_bound = std::sqrt(2.0 * c.epsilon);
  c.w_bound = 4.0 * R * std::sqrt(c.epsilon);
  c.rho = levy_prokhorov(mu, nu);
  c.w1 = wasserstein1(mu, nu);
  c.holds = c.rho <= c.rho_bound + slack && c.w1 <= c.w_bound + slack;
  return c;
}

/// Explicit distance bound between mu and any measure nu sharing mu's call
/// prices on a grid with bound |K| and mesh dK, when both have p-th moment
/// at most V. With R = |K| and q the conjugate exponent:
///   eps       = dK + 4 V R^{-p/q}
///   rho_bound = sqrt(2 eps) + 2 V R^{-p}
///   w_bound   = 4 R sqrt(eps) + 2 V R^{-p/q}
inline MarginalGapBound marginal_gap_bound(double bound_K, double mesh_K, double p, double V) {
  if (!(bound_K > 0.0)) throw InvalidInput("marginal_gap_bound: |K| must be positive");
  if (!(mesh_K > 0.0)) throw InvalidInput("marginal_gap_bound: mesh must be positive");
  if (!(p > 1.0)) throw InvalidInput("marginal_gap_bound: p must exceed 1");
  const double q = p / (p - 1.0);
  const double R = bound_K;
  MarginalGapBound b;
  b.epsilon = mesh_K + 4.0 * V * std::pow(R, -p / q);
  b.rho_bound = std::sqrt(2.0 * b.epsilon) + 2.0 * V * std::pow(R, -p);
  b.w_bound = 4.0 * R * std::sqrt(b.epsilon) + 2.0 * V * std::pow(R, -p / q);
  return b;
}

}  // namespace skembed
