#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "impact/closed_form.hpp"
#include "impact/csv.hpp"
#include "impact/impact_functions.hpp"
#include "impact/simulate.hpp"
#include "impact/trajectory.hpp"

namespace impact {

// One synthetic metaorder: the estimation unit. q0 > 0 is a sell; the linear
// (POV) schedule is the only generator schedule in v1.
struct MetaorderRecord {
  long id = 0;
  double q0 = 0.0;
  double T = 0.0;
  double delta = 0.0;
  double S0 = 0.0;
  double S_Tprime = 0.0;
  double cash_change = 0.0;  // X_T - X_0
  double sigma = 0.0;        // volatility used for this order (known by design)
  std::string schedule = "linear";
};

inline double observable_y1(const MetaorderRecord& r) { return r.S_Tprime - r.S0; }

// y2 = (S_T' + alpha S0)/(1+alpha) - (X_T - X_0)/q0. Expectation under the
// linear schedule and power-law h is eta sgn(q0) |q0/T|^beta; alpha = 1
// reduces to the classical midpoint form (S_T' + S0)/2 - (X_T - X_0)/q0.
inline double observable_y2(const MetaorderRecord& r, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("observable_y2: alpha must be in (0, 1]");
  if (r.q0 == 0.0) throw std::invalid_argument("observable_y2: q0 must be nonzero");
  return (r.S_Tprime + alpha * r.S0) / (1.0 + alpha) - r.cash_change / r.q0;
}

struct DatasetRanges {
  double q0_abs_min, q0_abs_max;  // |q0| sampled log-uniformly
  double T_min, T_max;            // uniform
  double delta_min, delta_max;    // uniform
};

struct DatasetConfig {
  long n_orders = 0;
  DatasetRanges ranges{};
  int n_steps = 512;  // simulation grid per order
};

// Synthetic metaorder database: order i samples (|q0|, T, delta) from RNG
// stream 2i and simulates on stream 2i+1, both under base_seed; the side
// alternates sell/buy so the book stays balanced. Fully deterministic given
// base_seed, independent of thread count.
inline std::vector<MetaorderRecord> generate_dataset(const ModelParams& m, const DatasetConfig& cfg,
                                                     std::uint64_t base_seed, int threads = 0) {
  if (cfg.n_orders < 1) throw std::invalid_argument("generate_dataset: n_orders must be >= 1");
  const auto& rg = cfg.ranges;
  if (!(rg.q0_abs_min > 0.0 && rg.q0_abs_max >= rg.q0_abs_min))
    throw std::invalid_argument("generate_dataset: bad |q0| range");
  if (!(rg.T_min > 0.0 && rg.T_max >= rg.T_min))
    throw std::invalid_argument("generate_dataset: bad T range");
  if (!(rg.delta_min >= 0.0 && rg.delta_max >= rg.delta_min))
    throw std::invalid_argument("generate_dataset: bad delta range");

  std::vector<MetaorderRecord> records(static_cast<std::size_t>(cfg.n_orders));
  detail::parallel_paths(cfg.n_orders, threads, [&](long i) {
    SplitMix64 sampler(stream_seed(base_seed, 2 * static_cast<std::uint64_t>(i)));
    const double lq = std::log(rg.q0_abs_min) +
                      (std::log(rg.q0_abs_max) - std::log(rg.q0_abs_min)) * sampler.next_unit();
    const double T = rg.T_min + (rg.T_max - rg.T_min) * sampler.next_unit();
    const double delta = rg.delta_min + (rg.delta_max - rg.delta_min) * sampler.next_unit();
    const double q0 = (i % 2 == 0 ? 1.0 : -1.0) * std::exp(lq);

    const Trajectory traj = Trajectory::linear(q0, T);
    const GridConfig grid(cfg.n_steps, T, delta);
    const auto plan = detail::build_plan(m, traj, grid);
    const auto term =
        detail::run_path(m, plan, stream_seed(base_seed, 2 * static_cast<std::uint64_t>(i) + 1),
                         nullptr);

    auto& r = records[static_cast<std::size_t>(i)];
    r.id = i;
    r.q0 = q0;
    r.T = T;
    r.delta = delta;
    r.S0 = m.S0;
    r.S_Tprime = term.S_Tprime;
    r.cash_change = term.X_T - m.X0;
    r.sigma = m.sigma;
    r.schedule = "linear";
  });
  return records;
}

struct FitResult {
  double scale = 0.0;     // k-hat or eta-hat
  double exponent = 0.0;  // alpha-hat or beta-hat
  double scale_se = 0.0;
  double exponent_se = 0.0;
  double objective = 0.0;  // weighted SSR at the optimum
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct GoldenResult {
  double x = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Golden-section minimization on [lo, hi]; unimodal objective assumed.
template <class F>
GoldenResult golden_min(F&& f, double lo, double hi, double x_tol = 1e-10, int max_iter = 200) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  GoldenResult res;
  while (b - a > x_tol && res.iterations < max_iter) {
    ++res.iterations;
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  res.x = 0.5 * (a + b);
  res.converged = (b - a) <= x_tol;
  return res;
}

// GLS weights 1/var; a fully degenerate design (all variances zero, i.e. a
// noiseless dataset) falls back to uniform weights so the zero-residual fit
// still goes through.
inline std::vector<double> make_weights(const std::vector<double>& variances,
                                        const char* op_name) {
  bool all_zero = true, any_zero = false;
  for (double v : variances) {
    if (v < 0.0) throw std::invalid_argument(std::string(op_name) + ": negative error variance");
    if (v == 0.0)
      any_zero = true;
    else
      all_zero = false;
  }
  std::vector<double> w(variances.size(), 1.0);
  if (all_zero) return w;
  if (any_zero)
    throw std::invalid_argument(std::string(op_name) +
                                ": mix of zero and nonzero error variances is not weightable");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / variances[i];
  return w;
}

inline long count_distinct_levels(std::vector<double> levels) {
  std::sort(levels.begin(), levels.end());
  long distinct = levels.empty() ? 0 : 1;
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i] - levels[i - 1] > 1e-9 * std::max(1.0, levels[i])) ++distinct;
  return distinct;
}

// Profiled 1-D weighted power-law fit shared by both stages: the model is
// y ~ sign * scale * base^expo (sign = -sgn(q0) for the permanent stage,
// +sgn(q0) for the instantaneous one); scale is profiled out in closed form
// and the exponent found by golden section on (0, 1].
struct PowerLawFitInput {
  std::vector<double> y, base, sign, w;  // base > 0
};

inline FitResult profiled_power_fit(const PowerLawFitInput& in) {
  const std::size_t n = in.y.size();
  std::vector<double> logb(n);
  for (std::size_t i = 0; i < n; ++i) logb[i] = std::log(in.base[i]);

  auto profile = [&](double expo, double& scale_out) {
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = in.sign[i] * std::exp(expo * logb[i]);
      sxy += in.w[i] * x * in.y[i];
      sxx += in.w[i] * x * x;
    }
    const double scale = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = in.y[i] - scale * in.sign[i] * std::exp(expo * logb[i]);
      ssr += in.w[i] * r * r;
    }
    scale_out = scale;
    return ssr;
  };

  double scale_tmp = 0.0;
  const auto gold = golden_min([&](double e) { return profile(e, scale_tmp); }, 1e-4, 1.0);

  FitResult fit;
  fit.exponent = gold.x;
  fit.iterations = gold.iterations;
  double scale = 0.0;
  fit.objective = profile(gold.x, scale);
  fit.scale = scale;

  // Gauss-Newton standard errors from the weighted normal matrix
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in.sign[i] * std::exp(fit.exponent * logb[i]);
    const double d_scale = x;
    const double d_expo = fit.scale * x * logb[i];
    M(0, 0) += in.w[i] * d_scale * d_scale;
    M(0, 1) += in.w[i] * d_scale * d_expo;
    M(1, 1) += in.w[i] * d_expo * d_expo;
  }
  M(1, 0) = M(0, 1);
  const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(0, 1);
  if (det > 0.0 && std::isfinite(det)) {
    fit.scale_se = std::sqrt(M(1, 1) / det);
    fit.exponent_se = std::sqrt(M(0, 0) / det);
    fit.converged = gold.converged;
  }
  return fit;
}

}  // namespace detail

// Stage 1: weighted nonlinear least squares of y1 = S_T' - S0 on
// -k sgn(q0) |q0|^alpha with weights 1/(sigma^2 (T + delta)); alpha by golden
// section with k profiled out. Needs at least two distinct |q0| levels.
inline FitResult fit_permanent(const std::vector<MetaorderRecord>& records) {
  const std::size_t n = records.size();
  if (n < 3) throw std::invalid_argument("fit_permanent: need at least 3 records");
  std::vector<double> levels(n);
  for (std::size_t i = 0; i < n; ++i) levels[i] = std::abs(records[i].q0);
  if (detail::count_distinct_levels(levels) < 2)
    throw std::invalid_argument(
        "fit_permanent: non-identifiable design, all records share one |q0| level");

  detail::PowerLawFitInput in;
  in.y.resize(n);
  in.base.resize(n);
  in.sign.resize(n);
  std::vector<double> variances(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    if (r.q0 == 0.0) throw std::invalid_argument("fit_permanent: q0 must be nonzero");
    if (!(r.T > 0.0) || r.delta < 0.0) throw std::invalid_argument("fit_permanent: bad T or delta");
    in.y[i] = observable_y1(r);
    in.base[i] = std::abs(r.q0);
    in.sign[i] = r.q0 > 0.0 ? -1.0 : 1.0;  // model: y1 = -k sgn(q0)|q0|^alpha
    variances[i] = r.sigma * r.sigma * (r.T + r.delta);
  }
  in.w = detail::make_weights(variances, "fit_permanent");
  return detail::profiled_power_fit(in);
}

// Stage 1 with the concavity exponent pinned (the classical pipeline fixes
// alpha = 1): only the scale k is estimated, by the same weighted linear
// profile, so downstream stages run unchanged on a misspecified exponent.
inline FitResult fit_permanent_at(const std::vector<MetaorderRecord>& records, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("fit_permanent_at: alpha must be in (0, 1]");
  if (records.empty()) throw std::invalid_argument("fit_permanent_at: no records");
  double sxy = 0.0, sxx = 0.0;
  std::vector<double> variances(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    variances[i] = records[i].sigma * records[i].sigma * (records[i].T + records[i].delta);
  const auto w = detail::make_weights(variances, "fit_permanent_at");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.q0 == 0.0) throw std::invalid_argument("fit_permanent_at: q0 must be nonzero");
    const double x = (r.q0 > 0.0 ? -1.0 : 1.0) * std::pow(std::abs(r.q0), alpha);
    sxy += w[i] * x * observable_y1(r);
    sxx += w[i] * x * x;
  }
  FitResult fit;
  fit.exponent = alpha;
  fit.exponent_se = 0.0;
  fit.scale = sxy / sxx;
  fit.scale_se = std::sqrt(1.0 / sxx);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double res = observable_y1(r) +
                       fit.scale * (r.q0 > 0.0 ? 1.0 : -1.0) * std::pow(std::abs(r.q0), alpha);
    fit.objective += w[i] * res * res;
  }
  fit.iterations = 1;
  fit.converged = std::isfinite(fit.scale) && sxx > 0.0;
  return fit;
}

// Stage 2: GLS of y2(., alpha_hat) on eta sgn(q0) |q0/T|^beta, weighted by
// the Theorem-style Var(eps2) of the linear schedule evaluated at alpha_hat.
inline FitResult fit_instantaneous(const std::vector<MetaorderRecord>& records, double alpha_hat) {
  if (!(alpha_hat > 0.0 && alpha_hat <= 1.0))
    throw std::invalid_argument("fit_instantaneous: alpha_hat must be in (0, 1]");
  const std::size_t n = records.size();
  if (n < 3) throw std::invalid_argument("fit_instantaneous: need at least 3 records");
  std::vector<double> levels(n);
  for (std::size_t i = 0; i < n; ++i) levels[i] = std::abs(records[i].q0 / records[i].T);
  if (detail::count_distinct_levels(levels) < 2)
    throw std::invalid_argument(
        "fit_instantaneous: non-identifiable design, all records share one |q0/T| level");

  detail::PowerLawFitInput in;
  in.y.resize(n);
  in.base.resize(n);
  in.sign.resize(n);
  std::vector<double> variances(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    in.y[i] = observable_y2(r, alpha_hat);
    in.base[i] = std::abs(r.q0 / r.T);
    in.sign[i] = r.q0 > 0.0 ? 1.0 : -1.0;  // cost observable is positive for sells
    variances[i] = linear_schedule_covariance(alpha_hat, r.sigma, r.T, r.delta)(1, 1);
  }
  in.w = detail::make_weights(variances, "fit_instantaneous");
  return detail::profiled_power_fit(in);
}

struct ResidualDiagnostics {
  Eigen::VectorXd r1, r2;  // raw residuals of the two estimating equations
  Eigen::VectorXd z1, z2;  // standardized by the closed-form error variances
  double z1_variance = 0.0;
  double z2_variance = 0.0;
  double empirical_correlation = 0.0;  // corr(z1, z2)
  double predicted_correlation = 0.0;  // design average of the closed-form correlation
};

inline ResidualDiagnostics residual_diagnostics(const std::vector<MetaorderRecord>& records,
                                                const FitResult& permanent_fit,
                                                const FitResult& instantaneous_fit) {
  if (!permanent_fit.converged || !instantaneous_fit.converged)
    throw std::invalid_argument("residual_diagnostics: fits must have converged");
  const long n = static_cast<long>(records.size());
  ResidualDiagnostics d;
  d.r1.resize(n);
  d.r2.resize(n);
  d.z1.resize(n);
  d.z2.resize(n);
  double rho_sum = 0.0;
  long rho_n = 0;
  for (long i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    const double s = r.q0 > 0.0 ? 1.0 : -1.0;
    d.r1(i) = observable_y1(r) +
              permanent_fit.scale * s * std::pow(std::abs(r.q0), permanent_fit.exponent);
    d.r2(i) = observable_y2(r, permanent_fit.exponent) -
              instantaneous_fit.scale * s *
                  std::pow(std::abs(r.q0 / r.T), instantaneous_fit.exponent);
    const Eigen::Matrix2d cov =
        linear_schedule_covariance(permanent_fit.exponent, r.sigma, r.T, r.delta);
    d.z1(i) = cov(0, 0) > 0.0 ? d.r1(i) / std::sqrt(cov(0, 0)) : 0.0;
    d.z2(i) = cov(1, 1) > 0.0 ? d.r2(i) / std::sqrt(cov(1, 1)) : 0.0;
    if (cov(0, 0) > 0.0 && cov(1, 1) > 0.0) {
      rho_sum += cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
      ++rho_n;
    }
  }
  d.predicted_correlation = rho_n > 0 ? rho_sum / static_cast<double>(rho_n) : 0.0;

  const double m1 = d.z1.mean();
  const double m2 = d.z2.mean();
  const Eigen::VectorXd c1 = d.z1.array() - m1;
  const Eigen::VectorXd c2 = d.z2.array() - m2;
  const double denom = static_cast<double>(n > 1 ? n - 1 : 1);
  d.z1_variance = c1.squaredNorm() / denom;
  d.z2_variance = c2.squaredNorm() / denom;
  const double norm = std::sqrt(c1.squaredNorm() * c2.squaredNorm());
  d.empirical_correlation = norm > 0.0 ? c1.dot(c2) / norm : 0.0;
  return d;
}

// --- metaorder CSV schema (bit-exact) -------------------------------------
// header: id,q0,T,delta,S0,S_Tprime,cash_change,sigma,schedule
// '.' decimal point, no thousands separators, UTF-8, LF line endings.

inline constexpr const char* kMetaorderHeader =
    "id,q0,T,delta,S0,S_Tprime,cash_change,sigma,schedule";

inline void write_metaorders(const std::string& path, const std::vector<MetaorderRecord>& records) {
  CsvWriter w(path);
  w.raw_line(kMetaorderHeader);
  for (const auto& r : records) {
    w.row({std::to_string(r.id), format_double(r.q0), format_double(r.T), format_double(r.delta),
           format_double(r.S0), format_double(r.S_Tprime), format_double(r.cash_change),
           format_double(r.sigma), r.schedule});
  }
}

inline std::vector<MetaorderRecord> read_metaorders(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != kMetaorderHeader)
    throw CsvError("bad or missing metaorder header, expected '" +
                       std::string(kMetaorderHeader) + "'",
                   1);
  std::vector<MetaorderRecord> records;
  records.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const long line_no = static_cast<long>(i) + 1;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 9) throw CsvError("expected 9 fields", line_no);
    MetaorderRecord r;
    r.id = parse_long(fields[0], line_no);
    r.q0 = parse_double(fields[1], line_no);
    r.T = parse_double(fields[2], line_no);
    r.delta = parse_double(fields[3], line_no);
    r.S0 = parse_double(fields[4], line_no);
    r.S_Tprime = parse_double(fields[5], line_no);
    r.cash_change = parse_double(fields[6], line_no);
    r.sigma = parse_double(fields[7], line_no);
    r.schedule = std::string(fields[8]);
    if (r.q0 == 0.0) throw CsvError("q0 must be nonzero", line_no);
    if (!(r.T > 0.0)) throw CsvError("T must be > 0", line_no);
    if (r.delta < 0.0) throw CsvError("delta must be >= 0", line_no);
    if (!(r.S0 > 0.0)) throw CsvError("S0 must be > 0", line_no);
    if (r.sigma < 0.0) throw CsvError("sigma must be >= 0", line_no);
    if (r.schedule.empty()) throw CsvError("schedule must be non-empty", line_no);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace impact
