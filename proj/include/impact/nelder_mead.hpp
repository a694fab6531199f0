#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace impact {

struct NelderMeadOptions {
  int max_evals = 400;   // hard budget on objective calls, every call counted
  double f_tol = 1e-12;  // stop once the simplex f-spread falls below this
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double fval = 0.0;
  int evals = 0;
  bool converged = false;
};

// Downhill simplex with the standard reflection/expansion/contraction/shrink
// coefficients (1, 2, 1/2, 1/2). Derivative-free; respects max_evals strictly.
template <class F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const NelderMeadOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("nelder_mead: empty parameter vector");
  if (step.size() != n) throw std::invalid_argument("nelder_mead: step size mismatch");

  NelderMeadResult res;
  std::vector<Eigen::VectorXd> x(n + 1, x0);
  Eigen::VectorXd fx(n + 1);
  for (int i = 0; i < n; ++i) x[i + 1](i) += step(i);

  auto eval = [&](const Eigen::VectorXd& p) {
    ++res.evals;
    return f(p);
  };

  int filled = 0;
  for (; filled <= n && res.evals < opt.max_evals; ++filled) fx(filled) = eval(x[filled]);
  for (int i = filled; i <= n; ++i) fx(i) = std::numeric_limits<double>::infinity();

  std::vector<int> idx(n + 1);
  std::iota(idx.begin(), idx.end(), 0);
  auto order = [&] {
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fx(a) < fx(b); });
  };

  while (res.evals < opt.max_evals) {
    order();
    const int best = idx[0], worst = idx[n], second = idx[n - 1];
    if (std::isfinite(fx(worst)) && fx(worst) - fx(best) <= opt.f_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += x[idx[i]];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + (centroid - x[worst]);
    const double fr = eval(xr);
    if (fr < fx(best)) {
      if (res.evals < opt.max_evals) {
        const Eigen::VectorXd xe = centroid + 2.0 * (xr - centroid);
        const double fe = eval(xe);
        if (fe < fr) {
          x[worst] = xe;
          fx(worst) = fe;
          continue;
        }
      }
      x[worst] = xr;
      fx(worst) = fr;
      continue;
    }
    if (fr < fx(second)) {
      x[worst] = xr;
      fx(worst) = fr;
      continue;
    }
    if (res.evals >= opt.max_evals) break;
    const bool outside = fr < fx(worst);
    const Eigen::VectorXd xc =
        outside ? centroid + 0.5 * (xr - centroid) : centroid + 0.5 * (x[worst] - centroid);
    const double fc = eval(xc);
    if (fc < std::min(fr, fx(worst))) {
      x[worst] = xc;
      fx(worst) = fc;
      continue;
    }
    // shrink toward the best vertex
    for (int i = 1; i <= n && res.evals < opt.max_evals; ++i) {
      x[idx[i]] = x[idx[0]] + 0.5 * (x[idx[i]] - x[idx[0]]);
      fx(idx[i]) = eval(x[idx[i]]);
    }
  }

  order();
  res.x = x[idx[0]];
  res.fval = fx(idx[0]);
  return res;
}

}  // namespace impact
