#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace impact {

// Thrown when adaptive refinement exhausts its depth budget before meeting the
// requested absolute tolerance. achieved() is the error bound actually met.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(double requested, double achieved)
      : std::runtime_error("adaptive quadrature did not converge: requested abs tol " +
                           std::to_string(requested) + ", achieved " + std::to_string(achieved)),
        requested_(requested),
        achieved_(achieved) {}
  double requested() const noexcept { return requested_; }
  double achieved() const noexcept { return achieved_; }

 private:
  double requested_;
  double achieved_;
};

namespace detail {

template <class F>
double simpson_adapt(F& f, double a, double fa, double m, double fm, double b, double fb,
                     double whole, double tol, int depth, double& unresolved) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  if (std::abs(err) <= 15.0 * tol || depth <= 0) {
    if (std::abs(err) > 15.0 * tol) unresolved += std::abs(err) / 15.0;
    return left + right + err / 15.0;
  }
  return simpson_adapt(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, unresolved) +
         simpson_adapt(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, unresolved);
}

}  // namespace detail

// Adaptive Simpson on [a, b] with absolute tolerance (Richardson-corrected,
// 15x acceptance test). Throws QuadratureError when the depth limit is hit
// with part of the error budget still unresolved.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol = 1e-10, int max_depth = 48) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double unresolved = 0.0;
  const double value =
      detail::simpson_adapt(f, a, fa, m, fm, b, fb, whole, abs_tol, max_depth, unresolved);
  if (unresolved > 0.0) throw QuadratureError(abs_tol, abs_tol + unresolved);
  return value;
}

}  // namespace impact
