#pragma once

#include <cmath>
#include <stdexcept>

#include "impact/quadrature.hpp"

namespace impact {

// Sign conventions used throughout the toolkit:
//   * q_t is inventory. A sell program runs q_0 > 0 down to q_T = 0.
//   * v_t = -q'(t) is the trading rate: v > 0 while selling, v < 0 while buying.
//   * Selling pushes the price down: dS = sigma dW - f(|q_0 - q_t|) v dt.
//   * Slippage and cumulated execution cost are positive for sells, and the
//     estimation observables keep that orientation.

// Permanent-impact density f(q) = k * alpha / (q + A)^(1 - alpha) for the
// cumulative executed volume q >= 0. Positive and (weakly) decreasing; with
// A = 0 and alpha < 1 it blows up at q = 0 but stays locally integrable.
struct PermanentImpact {
  double k;      // impact scale (price per share^alpha), > 0
  double alpha;  // concavity exponent, in (0, 1]; alpha = 1 is the linear case
  double A;      // regularization offset (shares), >= 0; A > 0 removes the blow-up

  PermanentImpact(double k_, double alpha_, double A_ = 0.0) : k(k_), alpha(alpha_), A(A_) {
    if (!(k > 0.0)) throw std::invalid_argument("PermanentImpact: k must be > 0");
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw std::invalid_argument("PermanentImpact: alpha must be in (0, 1]");
    if (!(A >= 0.0)) throw std::invalid_argument("PermanentImpact: A must be >= 0");
  }
};

inline double f_density(const PermanentImpact& p, double q) {
  if (!(q >= 0.0)) throw std::domain_error("f_density: q must be >= 0");
  if (q == 0.0 && p.A == 0.0 && p.alpha < 1.0)
    throw std::domain_error(
        "f_density: density diverges at q = 0 for A = 0, alpha < 1; integrate via F_cumulative");
  return p.k * p.alpha * std::pow(q + p.A, p.alpha - 1.0);
}

// F(z) = int_0^z f(|y|) dy, extended to z < 0 by odd symmetry. For A = 0 this
// is the macroscopic power law k sgn(z) |z|^alpha.
inline double F_cumulative(const PermanentImpact& p, double z) {
  const double az = std::abs(z);
  const double mag = (p.A == 0.0)
                         ? p.k * std::pow(az, p.alpha)
                         : p.k * (std::pow(az + p.A, p.alpha) - std::pow(p.A, p.alpha));
  return std::copysign(mag, z);
}

// G(z) = int_0^z y f(|y|) dy. Even, nonnegative, G(0) = 0. Closed form when
// A = 0; adaptive Simpson otherwise (the integrand is smooth once A > 0).
inline double G_potential(const PermanentImpact& p, double z) {
  const double az = std::abs(z);
  if (az == 0.0) return 0.0;
  if (p.A == 0.0) return p.k * p.alpha / (1.0 + p.alpha) * std::pow(az, 1.0 + p.alpha);
  return adaptive_simpson([&p](double y) { return y * f_density(p, y); }, 0.0, az, 1e-10);
}

// Execution cost h(t, v) = eta * sgn(v) |v|^beta. The model is
// time-homogeneous in v1; the flag is carried for interface stability only.
struct InstantaneousImpact {
  double eta;   // cost scale, >= 0 (0 disables the cost entirely)
  double beta;  // exponent in (0, 1]
  bool time_dependent = false;

  InstantaneousImpact(double eta_, double beta_) : eta(eta_), beta(beta_) {
    if (!(eta >= 0.0)) throw std::invalid_argument("InstantaneousImpact: eta must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0))
      throw std::invalid_argument("InstantaneousImpact: beta must be in (0, 1]");
  }

  static InstantaneousImpact zero() { return InstantaneousImpact(0.0, 1.0); }
};

inline double h_impact(const InstantaneousImpact& h, double v) {
  return std::copysign(h.eta * std::pow(std::abs(v), h.beta), v);
}

// h(t, v) * v, the cost accrual rate: eta |v|^(1+beta) >= 0.
inline double h_cost_rate(const InstantaneousImpact& h, double v) {
  return h.eta * std::pow(std::abs(v), 1.0 + h.beta);
}

// Velocity-only permanent impact k(v) = kv * sgn(v) |v|^gamma, the classical
// dS = sigma dW - k(v) dt drift. gamma = 1 is the linear no-arbitrage case.
struct VelocityImpact {
  double kv;     // scale, > 0
  double gamma;  // exponent, > 0

  VelocityImpact(double kv_, double gamma_) : kv(kv_), gamma(gamma_) {
    if (!(kv > 0.0)) throw std::invalid_argument("VelocityImpact: kv must be > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("VelocityImpact: gamma must be > 0");
  }

  static VelocityImpact linear(double kv_) { return VelocityImpact(kv_, 1.0); }
};

inline double k_velocity(const VelocityImpact& k, double v) {
  return std::copysign(k.kv * std::pow(std::abs(v), k.gamma), v);
}

struct ModelParams {
  PermanentImpact permanent;
  InstantaneousImpact instantaneous;
  double sigma;  // volatility (price per sqrt(time)), >= 0
  double S0;     // initial price, > 0
  double X0;     // initial cash

  ModelParams(PermanentImpact permanent_, InstantaneousImpact instantaneous_, double sigma_,
              double S0_, double X0_ = 0.0)
      : permanent(permanent_), instantaneous(instantaneous_), sigma(sigma_), S0(S0_), X0(X0_) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("ModelParams: sigma must be >= 0");
    if (!(S0 > 0.0)) throw std::invalid_argument("ModelParams: S0 must be > 0");
  }
};

}  // namespace impact
