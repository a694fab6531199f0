#pragma once

// Test-only reference computations. Everything here evaluates integrals and
// optima by brute force, independently of the closed forms and adaptive
// quadrature used by the library, so the two routes can be compared.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "impact/impact_functions.hpp"
#include "impact/rng.hpp"
#include "impact/trajectory.hpp"

namespace oracle {

template <class F>
double trapezoid(F&& f, double a, double b, long n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.5 * (f(a) + f(b));
  for (long i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i));
  return s * h;
}

template <class F>
double midpoint(F&& f, double a, double b, long n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += f(a + h * (static_cast<double>(i) + 0.5));
  return s * h;
}

// J(c, U; sgn) = int_0^U (c + sgn * x) f(x) dx for U >= 0. For A = 0 the
// substitution s = x^alpha removes the x^(alpha-1) singularity exactly:
//   int_0^U (c + sgn x) k alpha x^(alpha-1) dx = k int_0^(U^alpha) (c + sgn s^(1/alpha)) ds.
inline double one_sided_drift(const impact::PermanentImpact& p, double c, double sgn, double U,
                              long n) {
  if (U == 0.0) return 0.0;
  if (p.A == 0.0) {
    const double inva = 1.0 / p.alpha;
    return p.k * trapezoid([&](double s) { return c + sgn * std::pow(s, inva); }, 0.0,
                           std::pow(U, p.alpha), n);
  }
  return midpoint([&](double x) { return (c + sgn * x) * impact::f_density(p, x); }, 0.0, U, n);
}

// int_{u0}^{u1} (c + u) f(|u|) du, splitting at u = 0. This is the per-segment
// drift of the cumulative-volume model with c = q_T - q_0 and u = q_0 - q_t.
inline double drift_segment(const impact::PermanentImpact& p, double c, double u0, double u1,
                            long n) {
  auto from_zero = [&](double u) {
    // int_0^u (c + y) f(|y|) dy; y < 0 handled by y -> -x
    if (u >= 0.0) return one_sided_drift(p, c, 1.0, u, n);
    return -one_sided_drift(p, c, -1.0, -u, n);
  };
  return from_zero(u1) - from_zero(u0);
}

// Drift part of E[X_T] - X_0 for a piecewise-linear trajectory under the
// cumulative-volume model, by brute-force segment integration.
inline double cumulative_drift(const impact::PermanentImpact& p, const impact::Trajectory& traj,
                               long n_per_segment) {
  const double c = traj.qT() - traj.q0();
  double drift = 0.0;
  for (std::size_t i = 0; i < traj.n_segments(); ++i) {
    const auto seg = traj.segment(i);
    drift += drift_segment(p, c, traj.q0() - seg.qa, traj.q0() - seg.qb, n_per_segment);
  }
  return drift;
}

// Expected PnL of a slow-leg/fast-leg round trip of volume Q under
// k(v) = kv sgn(v) |v|^gamma, h = 0: the first leg runs at |rate| a, the
// second at b, and the sign pattern cancels out of the closed form.
inline double two_block_pnl(double kv, double gamma, double a, double b, double Q) {
  return kv * 0.5 * Q * Q * (std::pow(a, gamma - 1.0) - std::pow(b, gamma - 1.0));
}

// Maximum of two_block_pnl over |rates| in [r_lo, r_hi], durations in
// [d_lo, d_hi], Q = a d_a = b d_b. For gamma < 1 the fast leg saturates at
// the rate cap and the slow-leg duration at d_hi, so the family reduces to a
// 1-D profile in a whose stationary point a* = b (2/(1+gamma))^(1/(gamma-1))
// is known; the max over {a*, bounds, dense grid} is the family optimum.
inline double two_block_optimum(double kv, double gamma, double r_lo, double r_hi, double d_lo,
                                double d_hi) {
  const double b = r_hi;
  auto profile = [&](double a) {
    const double Q = a * d_hi;
    const double d_b = Q / b;
    if (a < r_lo || a > r_hi || d_b < d_lo || d_b > d_hi) return -1e300;
    return two_block_pnl(kv, gamma, a, b, Q);
  };
  double best = -1e300;
  const long n = 4000;
  for (long i = 0; i <= n; ++i)
    best = std::max(best, profile(r_lo + (r_hi - r_lo) * static_cast<double>(i) / n));
  if (gamma < 1.0) {
    const double a_star = b * std::pow(2.0 / (1.0 + gamma), 1.0 / (gamma - 1.0));
    best = std::max(best, profile(a_star));
  }
  return best;
}

// Random piecewise-linear liquidation q0 -> 0 on [0, T] with interior knots;
// inventory may overshoot or change sign along the way.
inline impact::Trajectory random_liquidation(impact::SplitMix64& rng, double q0, double T,
                                             int interior_knots) {
  std::vector<double> t{0.0};
  for (int i = 0; i < interior_knots; ++i)
    t.push_back(T * (static_cast<double>(i) + rng.next_unit()) /
                (static_cast<double>(interior_knots) + 1.0));
  t.push_back(T);
  std::vector<double> q{q0};
  for (int i = 0; i < interior_knots; ++i)
    q.push_back(q0 * (2.0 * rng.next_unit() - 0.5));  // anywhere in [-q0/2, 3q0/2]
  q.push_back(0.0);
  return impact::Trajectory::from_knots(std::move(t), std::move(q));
}

inline double sample_kurtosis(const double* x, long n) {
  double mean = 0.0;
  for (long i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  return m4 / (m2 * m2);
}

}  // namespace oracle
