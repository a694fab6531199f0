#include <doctest.h>

#include <cmath>
#include <vector>

#include "impact/arbitrage.hpp"
#include "oracles.hpp"

using impact::expected_round_trip_pnl;
using impact::ImpactRegime;
using impact::InstantaneousImpact;
using impact::PermanentImpact;
using impact::RoundTripStrategy;
using impact::search_arbitrage;
using impact::SearchBounds;
using impact::TradingBlock;
using impact::VelocityImpact;

namespace {

// Brute-force PnL under the velocity regime: fine trapezoid of
// (q_T - q_t) k(v) - h(v) v in t. The integrand is linear per block, so this
// is exact up to roundoff and fully independent of the library path.
double velocity_pnl_oracle(const VelocityImpact& k, const InstantaneousImpact& h,
                           const std::vector<TradingBlock>& blocks) {
  double qT = 0.0;
  for (const auto& b : blocks) qT -= b.rate * b.duration;
  double pnl = 0.0;
  double q = 0.0;
  for (const auto& b : blocks) {
    const long n = 200;
    const double kv = impact::k_velocity(k, b.rate);
    double acc = 0.0;
    for (long i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      const double qt = q - b.rate * b.duration * static_cast<double>(i) / n;
      acc += w * (qT - qt);
    }
    pnl += kv * acc * b.duration / n - impact::h_cost_rate(h, b.rate) * b.duration;
    q -= b.rate * b.duration;
  }
  return pnl;
}

std::vector<TradingBlock> random_closed_blocks(impact::SplitMix64& rng, int n_blocks) {
  std::vector<TradingBlock> blocks(static_cast<std::size_t>(n_blocks));
  double net = 0.0;
  for (int j = 0; j < n_blocks; ++j) {
    blocks[static_cast<std::size_t>(j)].duration = 0.05 + rng.next_unit();
    if (j + 1 < n_blocks) {
      const double v = 4.0 * rng.next_unit() - 2.0;
      blocks[static_cast<std::size_t>(j)].rate = v;
      net += v * blocks[static_cast<std::size_t>(j)].duration;
    }
  }
  blocks.back().rate = -net / blocks.back().duration;
  return blocks;
}

}  // namespace

TEST_SUITE("arbitrage") {

TEST_CASE("strategy validation") {
  CHECK_THROWS_AS(RoundTripStrategy({}), std::invalid_argument);
  CHECK_THROWS_AS(RoundTripStrategy({{1.0, 1.0}}), std::invalid_argument);  // does not close
  CHECK_THROWS_AS(RoundTripStrategy({{0.0, 1.0}, {1.0, 0.0}}), std::invalid_argument);
  CHECK_NOTHROW(RoundTripStrategy({{1.0, 1.0}, {0.5, -2.0}}));
  CHECK_NOTHROW(RoundTripStrategy({{1.0, 0.0}}));  // doing nothing is a valid round trip
}

TEST_CASE("strategies convert to closed trajectories") {
  const RoundTripStrategy s({{1.0, -1.0}, {0.25, 4.0}});
  const auto traj = s.to_trajectory(2.0);
  CHECK(traj.q0() == 2.0);
  CHECK(traj.qT() == 2.0);
  CHECK(traj.is_round_trip());
  CHECK(traj.q_at(1.0) == doctest::Approx(3.0));  // bought one share by t = 1
  CHECK(traj.horizon() == doctest::Approx(1.25));
  CHECK(s.total_duration() == doctest::Approx(1.25));
}

TEST_CASE("two-block concave velocity impact is exploitable: slow in, fast out") {
  // buy at rate 1 for one unit of time, sell at rate 4 for a quarter
  const RoundTripStrategy s({{1.0, -1.0}, {0.25, 4.0}});
  const auto regime =
      ImpactRegime::almgren_chriss(VelocityImpact(1.0, 0.5), InstantaneousImpact::zero());
  const double pnl = expected_round_trip_pnl(regime, s);
  CHECK(pnl == doctest::Approx(0.25).epsilon(1e-14));  // Q^2 (a^(g-1) - b^(g-1)) / 2
  CHECK(pnl == doctest::Approx(oracle::two_block_pnl(1.0, 0.5, 1.0, 4.0, 1.0)).epsilon(1e-14));
  CHECK(pnl == doctest::Approx(velocity_pnl_oracle(regime.velocity(), regime.instantaneous(),
                                                   s.blocks()))
                   .epsilon(1e-12));
}

TEST_CASE("linear velocity impact admits no profitable round trip") {
  const RoundTripStrategy s({{1.0, -1.0}, {0.25, 4.0}});
  const auto regime =
      ImpactRegime::almgren_chriss(VelocityImpact::linear(1.0), InstantaneousImpact::zero());
  CHECK(std::abs(expected_round_trip_pnl(regime, s)) <= 1e-14);
}

TEST_CASE("linear velocity impact: PnL telescopes to the closure residual, never positive") {
  impact::SplitMix64 rng(404);
  const double kappa = 1.7;
  const auto h = InstantaneousImpact(0.02, 0.5);
  const auto regime = ImpactRegime::almgren_chriss(VelocityImpact::linear(kappa), h);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto blocks = random_closed_blocks(rng, 2 + static_cast<int>(rng.next_u64() % 4));
    const RoundTripStrategy s(blocks);
    double cost = 0.0, residual = 0.0;
    for (const auto& b : blocks) {
      cost += impact::h_cost_rate(h, b.rate) * b.duration;
      residual -= b.rate * b.duration;
    }
    const double pnl = expected_round_trip_pnl(regime, s);
    CHECK(pnl == doctest::Approx(-0.5 * kappa * residual * residual - cost).epsilon(1e-12));
    CHECK(pnl <= 1e-15);
  }
}

TEST_CASE("cumulative-volume round trips only ever pay the execution cost") {
  impact::SplitMix64 rng(808);
  const auto h = InstantaneousImpact(0.1, 0.6);
  for (int rep = 0; rep < 200; ++rep) {
    const auto blocks = random_closed_blocks(rng, 2 + static_cast<int>(rng.next_u64() % 5));
    const RoundTripStrategy s(blocks);
    double cost = 0.0;
    for (const auto& b : blocks) cost += impact::h_cost_rate(h, b.rate) * b.duration;
    const auto regime =
        ImpactRegime::cumulative_volume(PermanentImpact(1.0, 0.5, 0.0), h);
    CHECK(expected_round_trip_pnl(regime, s) == doctest::Approx(-cost).epsilon(1e-12));
    // costless version is an exact wash
    const auto free_regime =
        ImpactRegime::cumulative_volume(PermanentImpact(1.0, 0.5, 0.0), InstantaneousImpact::zero());
    CHECK(std::abs(expected_round_trip_pnl(free_regime, s)) <= 1e-12);
  }
}

TEST_CASE("cumulative-volume PnL is independent of the permanent-impact shape") {
  impact::SplitMix64 rng(111);
  const auto h = InstantaneousImpact(0.05, 0.8);
  const auto blocks = random_closed_blocks(rng, 4);
  const RoundTripStrategy s(blocks);
  const double base = expected_round_trip_pnl(
      ImpactRegime::cumulative_volume(PermanentImpact(1.0, 0.5, 0.0), h), s);
  for (const auto& p : {PermanentImpact(3.0, 0.5, 0.0), PermanentImpact(1.0, 0.25, 0.0),
                        PermanentImpact(1.0, 1.0, 0.0), PermanentImpact(2.0, 0.7, 1.5),
                        PermanentImpact(0.2, 0.9, 0.01)}) {
    const double pnl = expected_round_trip_pnl(ImpactRegime::cumulative_volume(p, h), s);
    CHECK(pnl == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("PnL is invariant under rate sign flips and zero-rate padding") {
  impact::SplitMix64 rng(27);
  const auto blocks = random_closed_blocks(rng, 3);
  auto flipped = blocks;
  for (auto& b : flipped) b.rate = -b.rate;
  auto padded = blocks;
  padded.insert(padded.begin(), TradingBlock{0.4, 0.0});
  padded.push_back(TradingBlock{0.2, 0.0});

  const auto h = InstantaneousImpact(0.07, 0.5);
  const auto regimes = {
      ImpactRegime::almgren_chriss(VelocityImpact(1.3, 0.5), h),
      ImpactRegime::cumulative_volume(PermanentImpact(1.1, 0.6, 0.2), h),
  };
  for (const auto& regime : regimes) {
    const double base = expected_round_trip_pnl(regime, RoundTripStrategy(blocks));
    CHECK(expected_round_trip_pnl(regime, RoundTripStrategy(flipped)) ==
          doctest::Approx(base).epsilon(1e-12));
    CHECK(expected_round_trip_pnl(regime, RoundTripStrategy(padded)) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("regime accessors guard their kind") {
  const auto ac = ImpactRegime::almgren_chriss(VelocityImpact(1.0, 0.5), InstantaneousImpact::zero());
  CHECK_THROWS_AS(ac.permanent(), std::logic_error);
  const auto cum =
      ImpactRegime::cumulative_volume(PermanentImpact(1.0, 0.5, 0.0), InstantaneousImpact::zero());
  CHECK_THROWS_AS(cum.velocity(), std::logic_error);
}

TEST_CASE("search bounds are validated") {
  CHECK_THROWS_AS(SearchBounds(-1.0, 10.0, 0.05, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(SearchBounds(0.1, 0.1, 0.05, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(SearchBounds(0.1, 10.0, 0.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(SearchBounds(0.1, 10.0, 2.0, 0.05), std::invalid_argument);
  const auto regime =
      ImpactRegime::almgren_chriss(VelocityImpact(1.0, 0.5), InstantaneousImpact::zero());
  CHECK_THROWS_AS(search_arbitrage(regime, 1, SearchBounds(0.1, 10, 0.05, 2), 500, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(search_arbitrage(regime, 4, SearchBounds(0.1, 10, 0.05, 2), 10, 1),
                  std::invalid_argument);  // budget below simplex size
}

TEST_CASE("search finds the concave-impact arbitrage within 500 evaluations") {
  const auto regime =
      ImpactRegime::almgren_chriss(VelocityImpact(1.0, 0.5), InstantaneousImpact::zero());
  const auto res = search_arbitrage(regime, 2, SearchBounds(0.1, 10.0, 0.05, 2.0), 500, 7, 8);
  CHECK(res.evaluations <= 500);
  CHECK(res.best_pnl >= 0.2);
  // every reported strategy is a genuine closed round trip
  CHECK_NOTHROW(res.best_strategy());
  // and never beats the analytic optimum of the two-block family
  const double bound = oracle::two_block_optimum(1.0, 0.5, 0.1, 10.0, 0.05, 2.0);
  CHECK(res.best_pnl <= bound + 1e-9);
  CHECK(res.starts.size() <= 8);
  for (const auto& st : res.starts) CHECK(st.pnl <= bound + 1e-9);
}

TEST_CASE("search confirms linear impact is arbitrage-free") {
  const auto regime =
      ImpactRegime::almgren_chriss(VelocityImpact::linear(1.0), InstantaneousImpact::zero());
  const auto res = search_arbitrage(regime, 2, SearchBounds(0.1, 10.0, 0.05, 2.0), 3000, 11, 50);
  CHECK(res.best_pnl <= 1e-9);
}

TEST_CASE("search under the cumulative model with costs pushes to the no-trading boundary") {
  const auto regime = ImpactRegime::cumulative_volume(PermanentImpact(1.0, 0.5, 0.0),
                                                      InstantaneousImpact(0.1, 0.7));
  const SearchBounds bounds(0.1, 10.0, 0.05, 2.0);
  const auto res = search_arbitrage(regime, 2, bounds, 4000, 13, 10);
  CHECK(res.best_pnl <= 0.0);
  // optimum is minimal trading: both legs near the smallest admissible rate
  // and duration, where the unavoidable cost is tiny
  for (const auto& b : res.best_blocks) {
    CHECK(std::abs(b.rate) <= 2.0 * bounds.rate_min);
    CHECK(b.duration <= 4.0 * bounds.duration_min);
  }
}

TEST_CASE("search reports infeasible bounds") {
  const auto regime =
      ImpactRegime::almgren_chriss(VelocityImpact(1.0, 0.5), InstantaneousImpact::zero());
  // closure needs |v2| = |v1| d1/d2 inside [100, 100.0001]: rejection sampling
  // cannot realistically hit that sliver
  CHECK_THROWS_AS(search_arbitrage(regime, 2, SearchBounds(100.0, 100.0001, 0.05, 2.0), 500, 3),
                  std::invalid_argument);
}

TEST_CASE("search is deterministic and thread-invariant") {
  const auto regime =
      ImpactRegime::almgren_chriss(VelocityImpact(1.0, 0.5), InstantaneousImpact::zero());
  const auto a = search_arbitrage(regime, 3, SearchBounds(0.1, 10.0, 0.05, 2.0), 900, 5, 6, 1);
  const auto b = search_arbitrage(regime, 3, SearchBounds(0.1, 10.0, 0.05, 2.0), 900, 5, 6, 4);
  CHECK(a.best_pnl == b.best_pnl);
  REQUIRE(a.starts.size() == b.starts.size());
  for (std::size_t i = 0; i < a.starts.size(); ++i) CHECK(a.starts[i].pnl == b.starts[i].pnl);
}

}  // TEST_SUITE
