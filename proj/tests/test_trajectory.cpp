#include <doctest.h>

#include <vector>

#include "impact/trajectory.hpp"

using impact::Trajectory;

TEST_SUITE("trajectory") {

TEST_CASE("linear schedule") {
  const auto traj = Trajectory::linear(4.0, 2.0);
  CHECK(traj.q0() == 4.0);
  CHECK(traj.qT() == 0.0);
  CHECK(traj.horizon() == 2.0);
  CHECK(traj.q_at(0.0) == 4.0);
  CHECK(traj.q_at(1.0) == doctest::Approx(2.0));
  CHECK(traj.q_at(2.0) == 0.0);
  CHECK(traj.q_at(5.0) == 0.0);   // constant past the horizon
  CHECK(traj.q_at(-1.0) == 4.0);  // and before the start
  CHECK(traj.is_liquidation());
  CHECK_FALSE(traj.is_round_trip());
  CHECK(traj.n_segments() == 1);
  CHECK(traj.segment(0).rate() == doctest::Approx(2.0));  // v = -q' > 0: selling
}

TEST_CASE("piecewise knots and rates") {
  const auto traj = Trajectory::from_knots({0.0, 1.0, 1.5, 2.5}, {0.0, -2.0, -2.0, 0.0});
  CHECK(traj.n_segments() == 3);
  CHECK(traj.segment(0).rate() == doctest::Approx(2.0));   // buying 2 shares per unit time
  CHECK(traj.segment(1).rate() == doctest::Approx(0.0));   // hold
  CHECK(traj.segment(2).rate() == doctest::Approx(-2.0));  // selling back
  CHECK(traj.q_at(0.5) == doctest::Approx(-1.0));
  CHECK(traj.q_at(1.25) == doctest::Approx(-2.0));
  CHECK(traj.q_at(2.0) == doctest::Approx(-1.0));
  CHECK(traj.is_round_trip());
  CHECK(traj.is_liquidation());  // ends flat at 0 as well
}

TEST_CASE("round-trip flag uses a relative closure tolerance") {
  const auto closed = Trajectory::from_knots({0.0, 1.0, 2.0}, {5.0, 8.0, 5.0 + 1e-13});
  CHECK(closed.is_round_trip());
  const auto open = Trajectory::from_knots({0.0, 1.0, 2.0}, {5.0, 8.0, 5.1});
  CHECK_FALSE(open.is_round_trip());
}

TEST_CASE("knot validation") {
  CHECK_THROWS_AS(Trajectory::from_knots({0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory::from_knots({0.0, 1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory::from_knots({0.5, 1.0}, {1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory::from_knots({0.0, 1.0, 1.0}, {1.0, 0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory::from_knots({0.0, 2.0, 1.0}, {1.0, 0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory::linear(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Trajectory::linear(1.0, -2.0), std::invalid_argument);
}

}  // TEST_SUITE
