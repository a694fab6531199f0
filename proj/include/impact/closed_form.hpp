#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "impact/impact_functions.hpp"
#include "impact/trajectory.hpp"

namespace impact {

// E[X_T] for a piecewise-linear inventory path. On each segment the drift
// integral reduces, with u = q0 - q_t, to
//   int (q_T - q0 + u) f(|u|) du = (q_T - q0) dF + dG,
// so the singular endpoint u -> 0 (A = 0, alpha < 1) is absorbed by the
// exact antiderivatives and f itself is never sampled. The execution-cost
// integral is exact per segment: h(v) v = eta |v|^(1+beta) is constant there.
inline double expected_terminal_cash(const ModelParams& m, const Trajectory& traj) {
  const double q0 = traj.q0();
  const double qT = traj.qT();
  double drift = 0.0;
  double cost = 0.0;
  for (std::size_t i = 0; i < traj.n_segments(); ++i) {
    const auto seg = traj.segment(i);
    const double u0 = q0 - seg.qa;
    const double u1 = q0 - seg.qb;
    if (u0 != u1) {
      drift += (qT - q0) * (F_cumulative(m.permanent, u1) - F_cumulative(m.permanent, u0));
      drift += G_potential(m.permanent, u1) - G_potential(m.permanent, u0);
    }
    cost += h_cost_rate(m.instantaneous, seg.rate()) * seg.dt();
  }
  return m.X0 + (q0 - qT) * m.S0 + drift - cost;
}

// Liquidation expectation under the pure power law (A = 0):
//   E[X_T] = X0 + q0 S0 - k/(1+alpha) |q0|^(1+alpha) - int h(v) v dt.
// The permanent term depends on q0 only, not on the path taken, so this must
// agree with expected_terminal_cash for every liquidation of the same q0.
inline double expected_liquidation_cash_powerlaw(const ModelParams& m, double q0,
                                                 const Trajectory& traj) {
  if (m.permanent.A != 0.0)
    throw std::invalid_argument("expected_liquidation_cash_powerlaw: requires A = 0");
  if (!traj.is_liquidation())
    throw std::invalid_argument("expected_liquidation_cash_powerlaw: trajectory must end at q = 0");
  if (std::abs(traj.q0() - q0) > 1e-12 * std::max(1.0, std::abs(q0)))
    throw std::invalid_argument("expected_liquidation_cash_powerlaw: q0 does not match trajectory");
  double cost = 0.0;
  for (std::size_t i = 0; i < traj.n_segments(); ++i) {
    const auto seg = traj.segment(i);
    cost += h_cost_rate(m.instantaneous, seg.rate()) * seg.dt();
  }
  const double perm =
      m.permanent.k / (1.0 + m.permanent.alpha) * std::pow(std::abs(q0), 1.0 + m.permanent.alpha);
  return m.X0 + q0 * m.S0 - perm - cost;
}

// Expected post-trade price shift of a full liquidation, any T' >= T:
// E[S_T' - S0] = -F(q0). Independent of T, T' and of the schedule.
inline double expected_permanent_shift(const PermanentImpact& p, double q0) {
  return -F_cumulative(p, q0);
}

// Error covariance of the two estimation observables (eps1, eps2) for a
// liquidation observed at T' = T + delta. General piecewise-linear path;
// with g = q_t/q0 - 1/(1+alpha) linear on each segment, both integrals are
// exact:
//   Var(eps1) = sigma^2 (T + delta)
//   Cov       = sigma^2 (delta/(1+alpha) - int g dt)
//   Var(eps2) = sigma^2 (delta/(1+alpha)^2 + int g^2 dt)
inline Eigen::Matrix2d error_covariance(const Trajectory& traj, double alpha, double sigma,
                                        double delta) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("error_covariance: alpha must be in (0, 1]");
  if (!(sigma >= 0.0)) throw std::invalid_argument("error_covariance: sigma must be >= 0");
  if (!(delta >= 0.0)) throw std::invalid_argument("error_covariance: delta must be >= 0");
  if (!traj.is_liquidation())
    throw std::invalid_argument("error_covariance: trajectory must be a liquidation");
  const double q0 = traj.q0();
  if (q0 == 0.0) throw std::invalid_argument("error_covariance: q0 must be nonzero");

  const double c = 1.0 / (1.0 + alpha);
  double int_g = 0.0;
  double int_g2 = 0.0;
  for (std::size_t i = 0; i < traj.n_segments(); ++i) {
    const auto seg = traj.segment(i);
    const double ga = seg.qa / q0 - c;
    const double gb = seg.qb / q0 - c;
    int_g += seg.dt() * 0.5 * (ga + gb);
    int_g2 += seg.dt() * (ga * ga + ga * gb + gb * gb) / 3.0;
  }

  const double s2 = sigma * sigma;
  Eigen::Matrix2d cov;
  cov(0, 0) = s2 * (traj.horizon() + delta);
  cov(0, 1) = cov(1, 0) = s2 * (delta * c - int_g);
  cov(1, 1) = s2 * (delta * c * c + int_g2);
  return cov;
}

// Specialization of error_covariance to the linear schedule
// q_t = q0 (1 - t/T). Used as the per-record GLS weight in the estimator;
// the general integral form above must reproduce it, which the test suite
// pins down.
inline Eigen::Matrix2d linear_schedule_covariance(double alpha, double sigma, double T,
                                                  double delta) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("linear_schedule_covariance: alpha must be in (0, 1]");
  if (!(T > 0.0)) throw std::invalid_argument("linear_schedule_covariance: T must be > 0");
  if (!(delta >= 0.0)) throw std::invalid_argument("linear_schedule_covariance: delta must be >= 0");
  const double c = 1.0 / (1.0 + alpha);
  const double s2 = sigma * sigma;
  const double onea = 1.0 + alpha;
  Eigen::Matrix2d cov;
  cov(0, 0) = s2 * (T + delta);
  cov(0, 1) = cov(1, 0) = s2 * (delta * c + T * (c - 0.5));
  cov(1, 1) = s2 * (delta * c * c + T / 3.0 * (1.0 + alpha * alpha * alpha) / (onea * onea * onea));
  return cov;
}

}  // namespace impact
