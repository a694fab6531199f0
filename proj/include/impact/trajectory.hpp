#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace impact {

// Piecewise-linear inventory path q : [0, T] -> R given by knots (t_i, q_i)
// with strictly increasing times starting at 0. The trading rate v = -q' is
// constant between knots and undefined at them. `linear` builds the
// constant-participation schedule q_t = q0 (1 - t/T).
class Trajectory {
 public:
  struct Segment {
    double t0, t1, qa, qb;
    double dt() const { return t1 - t0; }
    double rate() const { return -(qb - qa) / (t1 - t0); }  // v = -q'
  };

  static Trajectory linear(double q0, double T) {
    return Trajectory(std::vector<double>{0.0, T}, std::vector<double>{q0, 0.0});
  }

  static Trajectory from_knots(std::vector<double> times, std::vector<double> values) {
    return Trajectory(std::move(times), std::move(values));
  }

  double horizon() const { return t_.back(); }
  double q0() const { return q_.front(); }
  double qT() const { return q_.back(); }
  std::size_t n_segments() const { return t_.size() - 1; }
  Segment segment(std::size_t i) const { return {t_[i], t_[i + 1], q_[i], q_[i + 1]}; }
  const std::vector<double>& knot_times() const { return t_; }
  const std::vector<double>& knot_values() const { return q_; }

  // Inventory at time t; constant at qT beyond the horizon, q0 before 0.
  double q_at(double t) const {
    if (t <= t_.front()) return q_.front();
    if (t >= t_.back()) return q_.back();
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double w = (t - t_[i]) / (t_[i + 1] - t_[i]);
    return q_[i] + w * (q_[i + 1] - q_[i]);
  }

  bool is_round_trip() const { return std::abs(qT() - q0()) <= tol_; }
  bool is_liquidation() const { return std::abs(qT()) <= tol_; }

 private:
  Trajectory(std::vector<double> t, std::vector<double> q) : t_(std::move(t)), q_(std::move(q)) {
    if (t_.size() != q_.size() || t_.size() < 2)
      throw std::invalid_argument("Trajectory: need matching knot vectors with >= 2 knots");
    if (t_.front() != 0.0) throw std::invalid_argument("Trajectory: first knot must be t = 0");
    double scale = 1.0;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || !std::isfinite(q_[i]))
        throw std::invalid_argument("Trajectory: knots must be finite");
      if (i > 0 && !(t_[i] > t_[i - 1]))
        throw std::invalid_argument("Trajectory: knot times must be strictly increasing");
      scale = std::max(scale, std::abs(q_[i]));
    }
    tol_ = 1e-12 * scale;
  }

  std::vector<double> t_, q_;
  double tol_ = 1e-12;
};

}  // namespace impact
