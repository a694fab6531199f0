#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "impact/impact_functions.hpp"
#include "impact/nelder_mead.hpp"
#include "impact/rng.hpp"
#include "impact/simulate.hpp"
#include "impact/trajectory.hpp"

namespace impact {

struct TradingBlock {
  double duration;  // > 0
  double rate;      // v: > 0 sells, < 0 buys
};

// Round trip as piecewise-constant rate blocks; the net traded volume must
// vanish so inventory returns to its start.
class RoundTripStrategy {
 public:
  explicit RoundTripStrategy(std::vector<TradingBlock> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw std::invalid_argument("RoundTripStrategy: need at least one block");
    double net = 0.0;
    double gross = 0.0;
    for (const auto& b : blocks_) {
      if (!(b.duration > 0.0) || !std::isfinite(b.duration) || !std::isfinite(b.rate))
        throw std::invalid_argument("RoundTripStrategy: blocks need finite rate, duration > 0");
      net += b.rate * b.duration;
      gross += std::abs(b.rate) * b.duration;
    }
    if (std::abs(net) > 1e-12 * std::max(1.0, gross))
      throw std::invalid_argument("RoundTripStrategy: blocks do not close the position");
  }

  const std::vector<TradingBlock>& blocks() const { return blocks_; }

  double total_duration() const {
    double t = 0.0;
    for (const auto& b : blocks_) t += b.duration;
    return t;
  }

  Trajectory to_trajectory(double q0 = 0.0) const {
    std::vector<double> t{0.0}, q{q0};
    for (const auto& b : blocks_) {
      t.push_back(t.back() + b.duration);
      q.push_back(q.back() - b.rate * b.duration);
    }
    q.back() = q0;  // closure holds to 1e-12; pin it so the round-trip flag is exact
    return Trajectory::from_knots(std::move(t), std::move(q));
  }

 private:
  std::vector<TradingBlock> blocks_;
};

// Which drift the PnL functional runs under: the velocity model
// dS = sigma dW - k(v) dt, or the cumulative-volume model
// dS = sigma dW - f(|q0 - q_t|) v dt. Exactly one is active.
class ImpactRegime {
 public:
  static ImpactRegime almgren_chriss(VelocityImpact k, InstantaneousImpact h) {
    return ImpactRegime(std::move(k), std::nullopt, std::move(h));
  }
  static ImpactRegime cumulative_volume(PermanentImpact f, InstantaneousImpact h) {
    return ImpactRegime(std::nullopt, std::move(f), std::move(h));
  }

  bool is_cumulative() const { return permanent_.has_value(); }
  const VelocityImpact& velocity() const {
    if (!velocity_) throw std::logic_error("ImpactRegime: not a velocity regime");
    return *velocity_;
  }
  const PermanentImpact& permanent() const {
    if (!permanent_) throw std::logic_error("ImpactRegime: not a cumulative regime");
    return *permanent_;
  }
  const InstantaneousImpact& instantaneous() const { return instantaneous_; }

 private:
  ImpactRegime(std::optional<VelocityImpact> k, std::optional<PermanentImpact> f,
               InstantaneousImpact h)
      : velocity_(std::move(k)), permanent_(std::move(f)), instantaneous_(std::move(h)) {}

  std::optional<VelocityImpact> velocity_;
  std::optional<PermanentImpact> permanent_;
  InstantaneousImpact instantaneous_;
};

// E[X_T] - X_0 of a closed strategy, exact: the martingale term has zero
// mean and every block integral is in closed form. Velocity regime:
// sum_j k(v_j) int_j (q_T - q_t) dt with q_t linear per block. Cumulative
// regime: per-block (q_T - q_0) dF + dG, which telescopes to zero for any
// closed path, leaving -int h(v) v dt.
inline double expected_round_trip_pnl(const ImpactRegime& regime, const RoundTripStrategy& s) {
  double drift = 0.0;
  double cost = 0.0;
  // relative inventory w_t = q_t - q_0; w_T ~ 0 by closure
  double w = 0.0;
  double wT = 0.0;
  for (const auto& b : s.blocks()) wT -= b.rate * b.duration;
  if (regime.is_cumulative()) {
    const auto& f = regime.permanent();
    for (const auto& b : s.blocks()) {
      const double u0 = -w;  // u = q0 - q_t
      const double u1 = u0 + b.rate * b.duration;
      drift += wT * (F_cumulative(f, u1) - F_cumulative(f, u0));
      drift += G_potential(f, u1) - G_potential(f, u0);
      cost += h_cost_rate(regime.instantaneous(), b.rate) * b.duration;
      w = -u1;
    }
  } else {
    const auto& k = regime.velocity();
    for (const auto& b : s.blocks()) {
      const double w1 = w - b.rate * b.duration;
      drift += k_velocity(k, b.rate) * b.duration * (wT - 0.5 * (w + w1));
      cost += h_cost_rate(regime.instantaneous(), b.rate) * b.duration;
      w = w1;
    }
  }
  return drift - cost;
}

struct SearchBounds {
  double rate_min;      // lower bound on |v|, >= 0
  double rate_max;      // upper bound on |v|
  double duration_min;  // > 0
  double duration_max;

  SearchBounds(double rate_min_, double rate_max_, double duration_min_, double duration_max_)
      : rate_min(rate_min_),
        rate_max(rate_max_),
        duration_min(duration_min_),
        duration_max(duration_max_) {
    if (!(rate_min >= 0.0 && rate_max > rate_min && std::isfinite(rate_max)))
      throw std::invalid_argument("SearchBounds: need 0 <= rate_min < rate_max < inf");
    if (!(duration_min > 0.0 && duration_max > duration_min && std::isfinite(duration_max)))
      throw std::invalid_argument("SearchBounds: need 0 < duration_min < duration_max < inf");
  }
};

struct SearchStart {
  int start_id = 0;
  double pnl = 0.0;
  std::vector<TradingBlock> blocks;
};

struct SearchResult {
  std::vector<TradingBlock> best_blocks;
  double best_pnl = 0.0;
  int evaluations = 0;
  std::vector<SearchStart> starts;

  RoundTripStrategy best_strategy() const { return RoundTripStrategy(best_blocks); }
};

namespace detail {

// Parameter layout for an n-block search: x = (v_1..v_{n-1}, d_1..d_n); the
// last rate is eliminated by the closure constraint. Durations and the free
// rates are clamped into bounds before the strategy is built (so the PnL is
// always evaluated on a valid closed strategy) and the clamping distance is
// penalized; the eliminated rate can only be penalized.
struct StrategyBuilder {
  int n_blocks;
  SearchBounds bounds;

  std::pair<std::vector<TradingBlock>, double> build(const Eigen::VectorXd& x) const {
    const int n = n_blocks;
    double penalty = 0.0;
    std::vector<TradingBlock> blocks(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const double d_raw = x(n - 1 + j);
      const double d = std::clamp(d_raw, bounds.duration_min, bounds.duration_max);
      penalty += std::abs(d - d_raw);
      blocks[static_cast<std::size_t>(j)].duration = d;
    }
    double net = 0.0;
    for (int j = 0; j < n - 1; ++j) {
      const double v_raw = x(j);
      const double mag = std::clamp(std::abs(v_raw), bounds.rate_min, bounds.rate_max);
      const double v = std::copysign(mag, v_raw == 0.0 ? 1.0 : v_raw);
      penalty += std::abs(mag - std::abs(v_raw));
      blocks[static_cast<std::size_t>(j)].rate = v;
      net += v * blocks[static_cast<std::size_t>(j)].duration;
    }
    const double d_last = blocks.back().duration;
    const double v_last = -net / d_last;
    blocks.back().rate = v_last;
    const double mag_last = std::abs(v_last);
    if (mag_last < bounds.rate_min) penalty += bounds.rate_min - mag_last;
    if (mag_last > bounds.rate_max) penalty += mag_last - bounds.rate_max;
    return {std::move(blocks), penalty};
  }

  bool feasible(const std::vector<TradingBlock>& blocks) const {
    const double tol = 1e-9 * std::max(1.0, bounds.rate_max);
    const double mag = std::abs(blocks.back().rate);
    return mag >= bounds.rate_min - tol && mag <= bounds.rate_max + tol;
  }
};

}  // namespace detail

// Derivative-free search for a profitable round trip: Nelder-Mead over
// (rates, durations) with the last rate eliminated by closure, multi-started
// from a seeded grid (start s draws from stream_seed(seed, s)). The budget
// caps total objective evaluations across all starts. Starts are independent
// and may run in parallel; the winner is reduced in start order, so results
// do not depend on thread count.
inline SearchResult search_arbitrage(const ImpactRegime& regime, int n_blocks,
                                     const SearchBounds& bounds, int eval_budget,
                                     std::uint64_t seed, int n_starts = 12, int threads = 1) {
  if (n_blocks < 2) throw std::invalid_argument("search_arbitrage: n_blocks must be >= 2");
  if (n_starts < 1) throw std::invalid_argument("search_arbitrage: n_starts must be >= 1");
  const int dim = 2 * n_blocks - 1;
  const int per_start = eval_budget / n_starts;
  if (per_start < dim + 2)
    throw std::invalid_argument("search_arbitrage: eval budget too small for the block count");

  const detail::StrategyBuilder builder{n_blocks, bounds};

  struct StartOutcome {
    SearchStart start;
    int evals = 0;
    bool has_best = false;
  };
  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(n_starts));

  detail::parallel_paths(n_starts, threads, [&](long s) {
    SplitMix64 rng(stream_seed(seed, static_cast<std::uint64_t>(s)));
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng.next_unit(); };

    // seed a feasible starting point (rejection on the eliminated rate)
    Eigen::VectorXd x0(dim);
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      for (int j = 0; j < n_blocks - 1; ++j) {
        const double mag = uniform(bounds.rate_min, bounds.rate_max);
        x0(j) = (rng.next_unit() < 0.5 ? -mag : mag);
      }
      for (int j = 0; j < n_blocks; ++j)
        x0(n_blocks - 1 + j) = uniform(bounds.duration_min, bounds.duration_max);
      auto [blocks, pen] = builder.build(x0);
      ok = (pen == 0.0) && builder.feasible(blocks);
    }
    auto& outcome = outcomes[static_cast<std::size_t>(s)];
    outcome.start.start_id = static_cast<int>(s);
    if (!ok) return;  // no feasible seed under these bounds; other starts may still succeed

    double best_pnl = -std::numeric_limits<double>::infinity();
    std::vector<TradingBlock> best_blocks;
    auto objective = [&](const Eigen::VectorXd& x) {
      auto [blocks, penalty] = builder.build(x);
      const double pnl = expected_round_trip_pnl(regime, RoundTripStrategy(blocks));
      if (penalty == 0.0 && builder.feasible(blocks) && pnl > best_pnl) {
        best_pnl = pnl;
        best_blocks = blocks;
      }
      return -pnl + 1e3 * (penalty + penalty * penalty);
    };

    Eigen::VectorXd step(dim);
    for (int j = 0; j < n_blocks - 1; ++j) step(j) = 0.25 * (bounds.rate_max - bounds.rate_min);
    for (int j = 0; j < n_blocks; ++j)
      step(n_blocks - 1 + j) = 0.25 * (bounds.duration_max - bounds.duration_min);

    NelderMeadOptions opt;
    opt.max_evals = per_start;
    const auto res = nelder_mead(objective, x0, step, opt);
    outcome.evals = res.evals;
    if (best_blocks.empty()) return;
    outcome.has_best = true;
    outcome.start.pnl = best_pnl;
    outcome.start.blocks = std::move(best_blocks);
  });

  SearchResult result;
  bool any = false;
  for (auto& o : outcomes) {
    result.evaluations += o.evals;
    if (!o.has_best) continue;
    result.starts.push_back(o.start);
    if (!any || o.start.pnl > result.best_pnl) {
      any = true;
      result.best_pnl = o.start.pnl;
      result.best_blocks = o.start.blocks;
    }
  }
  if (!any)
    throw std::invalid_argument(
        "search_arbitrage: no feasible strategy under the given bounds (closure cannot satisfy "
        "the rate bounds)");
  return result;
}

}  // namespace impact
