#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "impact/closed_form.hpp"
#include "impact/impact_functions.hpp"
#include "impact/rng.hpp"
#include "impact/trajectory.hpp"

namespace impact {

// Near-uniform grid on [0, T'] with T' = T + delta. The n_steps are split
// between [0, T] and (T, T'] proportionally so that t = T is always a grid
// point; trajectory knots are merged in so the rate is constant within every
// step.
struct GridConfig {
  int n_steps;
  double T;
  double delta;

  GridConfig(int n_steps_, double T_, double delta_ = 0.0)
      : n_steps(n_steps_), T(T_), delta(delta_) {
    if (n_steps < 1) throw std::invalid_argument("GridConfig: n_steps must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("GridConfig: T must be > 0");
    if (!(delta >= 0.0)) throw std::invalid_argument("GridConfig: delta must be >= 0");
  }

  double horizon() const { return T + delta; }
};

struct SimulatedPath {
  Eigen::VectorXd times, q, S, X;
  double S_terminal = 0.0;  // S_{T'}
  double X_terminal = 0.0;  // X_T (= X_{T'}: no trading after T)
  double hv_cost = 0.0;     // realized int_0^T h(v) v dt, exact per segment
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<double> build_times(const GridConfig& g, const Trajectory& traj) {
  if (std::abs(traj.horizon() - g.T) > 1e-12 * std::max(1.0, g.T))
    throw std::invalid_argument("GridConfig: T does not match the trajectory horizon");
  int n_exec = g.n_steps;
  int n_post = 0;
  if (g.delta > 0.0) {
    n_exec = std::clamp(
        static_cast<int>(std::lround(g.n_steps * g.T / g.horizon())), 1, std::max(1, g.n_steps - 1));
    n_post = g.n_steps - n_exec;
  }
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(g.n_steps) + traj.knot_times().size() + 2);
  for (int i = 0; i <= n_exec; ++i) t.push_back(g.T * i / n_exec);
  for (int i = 1; i <= n_post; ++i) t.push_back(g.T + g.delta * i / n_post);
  for (double tk : traj.knot_times())
    if (tk > 0.0 && tk < g.T) t.push_back(tk);
  std::sort(t.begin(), t.end());
  // drop duplicates and near-coincident points that would create zero-length steps
  const double eps = 1e-12 * g.horizon();
  std::vector<double> out;
  out.reserve(t.size());
  for (double v : t)
    if (out.empty() || v - out.back() > eps) out.push_back(v);
  out.front() = 0.0;
  return out;
}

// Per-grid quantities shared by every path of an ensemble: knot-exact
// inventory, the exact permanent-drift increments via F, and the exact
// per-step execution cost.
struct StepPlan {
  std::vector<double> t, q, Fu, sqrt_dt, dq, hv_step;
  double q0 = 0.0, qT = 0.0;
  double hv_total = 0.0;
};

inline StepPlan build_plan(const ModelParams& m, const Trajectory& traj, const GridConfig& g) {
  StepPlan plan;
  plan.t = build_times(g, traj);
  const std::size_t n = plan.t.size();
  plan.q.resize(n);
  plan.Fu.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.q[i] = traj.q_at(plan.t[i]);
    plan.Fu[i] = F_cumulative(m.permanent, traj.q0() - plan.q[i]);
  }
  plan.q0 = traj.q0();
  plan.qT = traj.qT();
  plan.sqrt_dt.resize(n - 1);
  plan.dq.resize(n - 1);
  plan.hv_step.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dt = plan.t[i + 1] - plan.t[i];
    plan.sqrt_dt[i] = std::sqrt(dt);
    plan.dq[i] = plan.q[i] - plan.q[i + 1];
    const double v = plan.dq[i] / dt;
    plan.hv_step[i] = h_cost_rate(m.instantaneous, v) * dt;
    plan.hv_total += plan.hv_step[i];
  }
  return plan;
}

struct PathTerminals {
  double S_Tprime = 0.0;
  double X_T = 0.0;
  double hv_cost = 0.0;
  double brownian_q = 0.0;  // sum (qT - q_i) dW_i, the Lemma-2 martingale sans -sigma
};

// One path. S uses the exact drift increment -(F(u_{i+1}) - F(u_i)) plus
// sigma sqrt(dt) Z, so S is exact in distribution at grid points; the cash
// integral int v S dt is the only discretized term (trapezoid in time, one
// normal draw per step).
inline PathTerminals run_path(const ModelParams& m, const StepPlan& plan, std::uint64_t seed,
                              SimulatedPath* record) {
  NormalSampler rng(seed);
  const std::size_t n = plan.t.size();
  double S = m.S0;
  double X = m.X0;
  double brown = 0.0;
  if (record) {
    record->times = Eigen::Map<const Eigen::VectorXd>(plan.t.data(), static_cast<long>(n));
    record->q = Eigen::Map<const Eigen::VectorXd>(plan.q.data(), static_cast<long>(n));
    record->S.resize(static_cast<long>(n));
    record->X.resize(static_cast<long>(n));
    record->S(0) = S;
    record->X(0) = X;
    record->seed = seed;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dW = plan.sqrt_dt[i] * rng.next();
    const double S_next = S - (plan.Fu[i + 1] - plan.Fu[i]) + m.sigma * dW;
    X += plan.dq[i] * 0.5 * (S + S_next) - plan.hv_step[i];
    brown += (plan.qT - plan.q[i]) * dW;
    S = S_next;
    if (record) {
      record->S(static_cast<long>(i) + 1) = S;
      record->X(static_cast<long>(i) + 1) = X;
    }
  }
  PathTerminals out;
  out.S_Tprime = S;
  out.X_T = X;  // v = 0 after T, so X never moves past T
  out.hv_cost = plan.hv_total;
  out.brownian_q = brown;
  if (record) {
    record->S_terminal = S;
    record->X_terminal = X;
    record->hv_cost = plan.hv_total;
  }
  return out;
}

// Deterministic parallel map over path indices: each worker fills disjoint
// slots of a preallocated buffer, so results never depend on thread count.
template <class Fn>
void parallel_paths(long n_paths, int threads, Fn&& fn) {
  int n_threads = threads;
  if (n_threads <= 0)
    n_threads = static_cast<int>(std::min(32u, std::max(1u, std::thread::hardware_concurrency())));
  n_threads = static_cast<int>(std::min<long>(n_threads, n_paths));
  if (n_threads <= 1) {
    for (long i = 0; i < n_paths; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  const long chunk = (n_paths + n_threads - 1) / n_threads;
  for (int w = 0; w < n_threads; ++w) {
    const long lo = w * chunk;
    const long hi = std::min(n_paths, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (long i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Compensated (Kahan) sum; the fixed left-to-right order keeps ensemble
// reductions independent of parallelism.
inline double kahan_sum(const double* x, long n) {
  double s = 0.0, c = 0.0;
  for (long i = 0; i < n; ++i) {
    const double y = x[i] - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

}  // namespace detail

inline SimulatedPath simulate_path(const ModelParams& m, const Trajectory& traj,
                                   const GridConfig& g, std::uint64_t seed) {
  const auto plan = detail::build_plan(m, traj, g);
  SimulatedPath path;
  detail::run_path(m, plan, seed, &path);
  return path;
}

enum class Observable { cash_change, price_shift, epsilon1, epsilon2, martingale };

inline const char* observable_name(Observable o) {
  switch (o) {
    case Observable::cash_change: return "cash_change";
    case Observable::price_shift: return "price_shift";
    case Observable::epsilon1: return "epsilon1";
    case Observable::epsilon2: return "epsilon2";
    case Observable::martingale: return "martingale";
  }
  return "?";
}

namespace detail {

inline double extract(Observable o, const ModelParams& m, const StepPlan& plan,
                      const PathTerminals& p) {
  switch (o) {
    case Observable::cash_change:
      return p.X_T - m.X0;
    case Observable::price_shift:
      return p.S_Tprime - m.S0;
    case Observable::epsilon1:
      // eps1 = (S_T' - S0) + k sgn(q0) |q0|^alpha
      return (p.S_Tprime - m.S0) + F_cumulative(m.permanent, plan.q0);
    case Observable::epsilon2: {
      const double a = m.permanent.alpha;
      return (p.S_Tprime + a * m.S0) / (1.0 + a) - (p.X_T - m.X0) / plan.q0 -
             p.hv_cost / plan.q0;
    }
    case Observable::martingale:
      return p.brownian_q;
  }
  return 0.0;
}

}  // namespace detail

struct EnsembleStats {
  long n_paths = 0;
  std::vector<Observable> observables;
  Eigen::VectorXd mean;            // compensated column means
  Eigen::VectorXd standard_error;  // sample std / sqrt(n)
  Eigen::MatrixXd covariance;      // unbiased sample covariance
};

// Monte Carlo ensemble over paths i = 0..n-1, path i on RNG stream
// stream_seed(base_seed, i). Embarrassingly parallel; the reduction order is
// fixed, so statistics are bit-identical for any thread count.
inline EnsembleStats run_ensemble(const ModelParams& m, const Trajectory& traj,
                                  const GridConfig& g, long n_paths, std::uint64_t base_seed,
                                  const std::vector<Observable>& observables, int threads = 0) {
  if (n_paths < 2) throw std::invalid_argument("run_ensemble: n_paths must be >= 2");
  if (observables.empty()) throw std::invalid_argument("run_ensemble: no observables requested");
  for (Observable o : observables) {
    if ((o == Observable::epsilon1 || o == Observable::epsilon2) && m.permanent.A != 0.0)
      throw std::invalid_argument("run_ensemble: epsilon observables require A = 0");
    if (o == Observable::epsilon2 && traj.q0() == 0.0)
      throw std::invalid_argument("run_ensemble: epsilon2 requires q0 != 0");
  }
  const auto plan = detail::build_plan(m, traj, g);
  const long n_obs = static_cast<long>(observables.size());
  Eigen::MatrixXd obs(n_paths, n_obs);  // column-major: per-observable columns stay contiguous
  detail::parallel_paths(n_paths, threads, [&](long i) {
    const auto term = detail::run_path(m, plan, stream_seed(base_seed, static_cast<std::uint64_t>(i)),
                                       nullptr);
    for (long j = 0; j < n_obs; ++j)
      obs(i, j) = detail::extract(observables[static_cast<std::size_t>(j)], m, plan, term);
  });

  EnsembleStats stats;
  stats.n_paths = n_paths;
  stats.observables = observables;
  stats.mean.resize(n_obs);
  for (long j = 0; j < n_obs; ++j)
    stats.mean(j) = detail::kahan_sum(obs.col(j).data(), n_paths) / static_cast<double>(n_paths);
  stats.covariance.resize(n_obs, n_obs);
  Eigen::MatrixXd centered = obs.rowwise() - stats.mean.transpose();
  for (long j = 0; j < n_obs; ++j) {
    for (long k = j; k < n_obs; ++k) {
      Eigen::VectorXd prod = centered.col(j).cwiseProduct(centered.col(k));
      const double cjk = detail::kahan_sum(prod.data(), n_paths) / static_cast<double>(n_paths - 1);
      stats.covariance(j, k) = stats.covariance(k, j) = cjk;
    }
  }
  stats.standard_error =
      (stats.covariance.diagonal() / static_cast<double>(n_paths)).cwiseSqrt();
  return stats;
}

struct CovarianceCheck {
  Eigen::Matrix2d predicted;  // closed-form error covariance
  Eigen::Matrix2d empirical;  // sample covariance of (eps1, eps2)
  long n_paths = 0;
};

// Side-by-side comparison of the closed-form error covariance against the
// Monte Carlo sample covariance of the per-path residuals.
inline CovarianceCheck verify_covariance(const ModelParams& m, const Trajectory& traj,
                                         const GridConfig& g, long n_paths,
                                         std::uint64_t base_seed, int threads = 0) {
  CovarianceCheck check;
  check.predicted = error_covariance(traj, m.permanent.alpha, m.sigma, g.delta);
  const auto stats = run_ensemble(m, traj, g, n_paths, base_seed,
                                  {Observable::epsilon1, Observable::epsilon2}, threads);
  check.empirical = stats.covariance;
  check.n_paths = n_paths;
  return check;
}

}  // namespace impact
