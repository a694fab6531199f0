// impactkit: batch experiments for the cumulative-volume market-impact model.
// Subcommands: simulate, arbitrage, generate, estimate, verify-covariance.
// Every run reads one JSON config, writes CSVs plus the resolved config and a
// manifest into --out, and is byte-for-byte reproducible from the config.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "impact/arbitrage.hpp"
#include "impact/closed_form.hpp"
#include "impact/csv.hpp"
#include "impact/estimation.hpp"
#include "impact/impact_functions.hpp"
#include "impact/simulate.hpp"
#include "impact/trajectory.hpp"
#include "impact/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  int threads = 0;
  std::optional<std::uint64_t> seed_override;
};

// --- strict config access ---------------------------------------------------

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return j;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& ctx) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) throw ConfigError("unknown key '" + ctx + item.key() + "'");
}

const json& require_key(const json& obj, const std::string& key, const std::string& ctx) {
  if (!obj.contains(key)) throw ConfigError("missing required key '" + ctx + key + "'");
  return obj.at(key);
}

double as_double(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw ConfigError("key '" + ctx + "' must be a number");
  return v.get<double>();
}

long as_long(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw ConfigError("key '" + ctx + "' must be an integer");
  return v.get<long>();
}

std::uint64_t as_seed(const json& v, const std::string& ctx) {
  if (!v.is_number_integer())
    throw ConfigError("key '" + ctx + "' must be a nonnegative integer");
  if (!v.is_number_unsigned() && v.get<long long>() < 0)
    throw ConfigError("key '" + ctx + "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw ConfigError("key '" + ctx + "' must be a string");
  return v.get<std::string>();
}

std::pair<double, double> as_range(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.size() != 2)
    throw ConfigError("key '" + ctx + "' must be an array [lo, hi]");
  return {as_double(v[0], ctx + "[0]"), as_double(v[1], ctx + "[1]")};
}

double get_or(const json& obj, const std::string& key, double def, const std::string& ctx) {
  return obj.contains(key) ? as_double(obj.at(key), ctx + key) : def;
}

// Domain-type construction from config values: invariant violations there are
// configuration mistakes, not runtime faults.
template <class Fn>
auto config_checked(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// --- config -> domain objects -----------------------------------------------

impact::ModelParams parse_model(const json& cfg) {
  const json& j = require_key(cfg, "model", "");
  reject_unknown(j, {"k", "alpha", "A", "eta", "beta", "sigma", "S0", "X0"}, "model.");
  const double k = as_double(require_key(j, "k", "model."), "model.k");
  const double alpha = as_double(require_key(j, "alpha", "model."), "model.alpha");
  const double A = get_or(j, "A", 0.0, "model.");
  const double eta = get_or(j, "eta", 0.0, "model.");
  const double beta = get_or(j, "beta", 1.0, "model.");
  const double sigma = as_double(require_key(j, "sigma", "model."), "model.sigma");
  const double S0 = as_double(require_key(j, "S0", "model."), "model.S0");
  const double X0 = get_or(j, "X0", 0.0, "model.");
  return config_checked([&] {
    return impact::ModelParams(impact::PermanentImpact(k, alpha, A),
                               impact::InstantaneousImpact(eta, beta), sigma, S0, X0);
  });
}

impact::Trajectory parse_trajectory(const json& cfg) {
  const json& j = require_key(cfg, "trajectory", "");
  const std::string type = as_string(require_key(j, "type", "trajectory."), "trajectory.type");
  if (type == "linear") {
    reject_unknown(j, {"type", "q0", "T"}, "trajectory.");
    const double q0 = as_double(require_key(j, "q0", "trajectory."), "trajectory.q0");
    const double T = as_double(require_key(j, "T", "trajectory."), "trajectory.T");
    return config_checked([&] { return impact::Trajectory::linear(q0, T); });
  }
  if (type == "knots") {
    reject_unknown(j, {"type", "times", "q"}, "trajectory.");
    const json& jt = require_key(j, "times", "trajectory.");
    const json& jq = require_key(j, "q", "trajectory.");
    if (!jt.is_array() || !jq.is_array())
      throw ConfigError("trajectory.times and trajectory.q must be arrays");
    std::vector<double> t, q;
    for (std::size_t i = 0; i < jt.size(); ++i) t.push_back(as_double(jt[i], "trajectory.times[]"));
    for (std::size_t i = 0; i < jq.size(); ++i) q.push_back(as_double(jq[i], "trajectory.q[]"));
    return config_checked([&] { return impact::Trajectory::from_knots(t, q); });
  }
  throw ConfigError("trajectory.type must be 'linear' or 'knots'");
}

impact::GridConfig parse_grid(const json& cfg, double T) {
  const json& j = require_key(cfg, "grid", "");
  reject_unknown(j, {"n_steps", "delta"}, "grid.");
  const long n_steps = as_long(require_key(j, "n_steps", "grid."), "grid.n_steps");
  const double delta = get_or(j, "delta", 0.0, "grid.");
  return config_checked([&] { return impact::GridConfig(static_cast<int>(n_steps), T, delta); });
}

impact::Observable parse_observable(const std::string& name) {
  if (name == "cash_change") return impact::Observable::cash_change;
  if (name == "price_shift") return impact::Observable::price_shift;
  if (name == "epsilon1") return impact::Observable::epsilon1;
  if (name == "epsilon2") return impact::Observable::epsilon2;
  if (name == "martingale") return impact::Observable::martingale;
  throw ConfigError("unknown observable '" + name + "'");
}

// --- run metadata -----------------------------------------------------------

void write_run_files(const fs::path& out, const std::string& command, const json& resolved) {
  fs::create_directories(out);
  std::ofstream manifest(out / "manifest.txt", std::ios::binary);
  manifest << "schema_version: " << impact::kSchemaVersion << "\n"
           << "toolkit_version: " << impact::kToolkitVersion << "\n"
           << "command: " << command << "\n";
  std::ofstream rc(out / "resolved_config.json", std::ios::binary);
  rc << resolved.dump(2) << "\n";
}

// --- subcommands ------------------------------------------------------------

void cmd_simulate(const CommonArgs& args) {
  json cfg = load_config(args.config_path);
  reject_unknown(cfg, {"model", "trajectory", "grid", "ensemble"}, "");
  const auto model = parse_model(cfg);
  const auto traj = parse_trajectory(cfg);
  const auto grid = parse_grid(cfg, traj.horizon());

  const json& je = require_key(cfg, "ensemble", "");
  reject_unknown(je, {"n_paths", "base_seed", "observables", "dump_paths"}, "ensemble.");
  const long n_paths = as_long(require_key(je, "n_paths", "ensemble."), "ensemble.n_paths");
  std::uint64_t base_seed =
      as_seed(require_key(je, "base_seed", "ensemble."), "ensemble.base_seed");
  if (args.seed_override) base_seed = *args.seed_override;
  const long dump_paths =
      je.contains("dump_paths") ? as_long(je.at("dump_paths"), "ensemble.dump_paths") : 0;
  if (dump_paths < 0 || dump_paths > n_paths)
    throw ConfigError("ensemble.dump_paths must lie in [0, n_paths]");
  std::vector<impact::Observable> observables;
  if (je.contains("observables")) {
    const json& jo = je.at("observables");
    if (!jo.is_array()) throw ConfigError("ensemble.observables must be an array of names");
    for (const auto& o : jo)
      observables.push_back(parse_observable(as_string(o, "ensemble.observables[]")));
  } else {
    observables = {impact::Observable::cash_change, impact::Observable::price_shift};
  }

  cfg["ensemble"]["base_seed"] = base_seed;
  write_run_files(args.out_dir, "simulate", cfg);

  const auto stats = config_checked([&] {
    return impact::run_ensemble(model, traj, grid, n_paths, base_seed, observables, args.threads);
  });

  impact::CsvWriter ens((fs::path(args.out_dir) / "ensemble.csv").string());
  ens.raw_line("observable,mean,stderr,n");
  for (std::size_t i = 0; i < observables.size(); ++i)
    ens.row({impact::observable_name(observables[i]),
             impact::format_double(stats.mean(static_cast<long>(i))),
             impact::format_double(stats.standard_error(static_cast<long>(i))),
             std::to_string(stats.n_paths)});

  for (long p = 0; p < dump_paths; ++p) {
    const auto path = impact::simulate_path(
        model, traj, grid, impact::stream_seed(base_seed, static_cast<std::uint64_t>(p)));
    impact::CsvWriter w((fs::path(args.out_dir) / ("path_" + std::to_string(p) + ".csv")).string());
    w.raw_line("t,q,S,X");
    for (long i = 0; i < path.times.size(); ++i)
      w.row({impact::format_double(path.times(i)), impact::format_double(path.q(i)),
             impact::format_double(path.S(i)), impact::format_double(path.X(i))});
  }
  std::cout << "simulate: " << stats.n_paths << " paths, " << observables.size()
            << " observables -> " << args.out_dir << "\n";
}

void cmd_arbitrage(const CommonArgs& args) {
  json cfg = load_config(args.config_path);
  reject_unknown(cfg, {"search"}, "");
  const json& js = require_key(cfg, "search", "");
  reject_unknown(js,
                 {"regime", "velocity", "permanent", "instantaneous", "n_blocks", "rate_bounds",
                  "duration_bounds", "budget", "n_starts", "seed"},
                 "search.");

  impact::InstantaneousImpact h = impact::InstantaneousImpact::zero();
  if (js.contains("instantaneous")) {
    const json& jh = js.at("instantaneous");
    reject_unknown(jh, {"eta", "beta"}, "search.instantaneous.");
    h = config_checked([&] {
      return impact::InstantaneousImpact(
          as_double(require_key(jh, "eta", "search.instantaneous."), "search.instantaneous.eta"),
          as_double(require_key(jh, "beta", "search.instantaneous."), "search.instantaneous.beta"));
    });
  }

  const std::string regime_name = as_string(require_key(js, "regime", "search."), "search.regime");
  std::optional<impact::ImpactRegime> regime;
  if (regime_name == "almgren_chriss") {
    const json& jv = require_key(js, "velocity", "search.");
    reject_unknown(jv, {"kv", "gamma"}, "search.velocity.");
    regime = config_checked([&] {
      return impact::ImpactRegime::almgren_chriss(
          impact::VelocityImpact(
              as_double(require_key(jv, "kv", "search.velocity."), "search.velocity.kv"),
              as_double(require_key(jv, "gamma", "search.velocity."), "search.velocity.gamma")),
          h);
    });
  } else if (regime_name == "cumulative") {
    const json& jp = require_key(js, "permanent", "search.");
    reject_unknown(jp, {"k", "alpha", "A"}, "search.permanent.");
    regime = config_checked([&] {
      return impact::ImpactRegime::cumulative_volume(
          impact::PermanentImpact(
              as_double(require_key(jp, "k", "search.permanent."), "search.permanent.k"),
              as_double(require_key(jp, "alpha", "search.permanent."), "search.permanent.alpha"),
              get_or(jp, "A", 0.0, "search.permanent.")),
          h);
    });
  } else {
    throw ConfigError("search.regime must be 'almgren_chriss' or 'cumulative'");
  }

  const long n_blocks = as_long(require_key(js, "n_blocks", "search."), "search.n_blocks");
  const auto [r_lo, r_hi] =
      as_range(require_key(js, "rate_bounds", "search."), "search.rate_bounds");
  const auto [d_lo, d_hi] =
      as_range(require_key(js, "duration_bounds", "search."), "search.duration_bounds");
  const long budget = as_long(require_key(js, "budget", "search."), "search.budget");
  const long n_starts = js.contains("n_starts") ? as_long(js.at("n_starts"), "search.n_starts") : 12;
  std::uint64_t seed = as_seed(require_key(js, "seed", "search."), "search.seed");
  if (args.seed_override) seed = *args.seed_override;

  cfg["search"]["seed"] = seed;
  write_run_files(args.out_dir, "arbitrage", cfg);

  const auto bounds = config_checked([&] { return impact::SearchBounds(r_lo, r_hi, d_lo, d_hi); });
  const auto result = config_checked([&] {
    return impact::search_arbitrage(*regime, static_cast<int>(n_blocks), bounds,
                                    static_cast<int>(budget), seed, static_cast<int>(n_starts),
                                    args.threads);
  });

  impact::CsvWriter report((fs::path(args.out_dir) / "search_report.csv").string());
  std::string header = "start_id,pnl";
  for (long b = 1; b <= n_blocks; ++b)
    header += ",duration_" + std::to_string(b) + ",rate_" + std::to_string(b);
  report.raw_line(header);
  for (const auto& st : result.starts) {
    std::vector<std::string> row{std::to_string(st.start_id), impact::format_double(st.pnl)};
    for (const auto& b : st.blocks) {
      row.push_back(impact::format_double(b.duration));
      row.push_back(impact::format_double(b.rate));
    }
    report.row(row);
  }

  std::string summary = "regime=" + regime_name +
                        " best_pnl=" + impact::format_double(result.best_pnl) +
                        " evaluations=" + std::to_string(result.evaluations) + " blocks=";
  for (std::size_t i = 0; i < result.best_blocks.size(); ++i) {
    const auto& b = result.best_blocks[i];
    summary += (i ? ";" : "") + std::string("(") + impact::format_double(b.duration) + "," +
               impact::format_double(b.rate) + ")";
  }
  std::ofstream(fs::path(args.out_dir) / "summary.txt", std::ios::binary) << summary << "\n";
  std::cout << summary << "\n";
}

void cmd_generate(const CommonArgs& args) {
  json cfg = load_config(args.config_path);
  reject_unknown(cfg, {"model", "dataset"}, "");
  const auto model = parse_model(cfg);
  const json& jd = require_key(cfg, "dataset", "");
  reject_unknown(jd,
                 {"n_orders", "q0_abs_range", "T_range", "delta", "delta_range", "n_steps",
                  "base_seed", "file"},
                 "dataset.");
  impact::DatasetConfig dcfg;
  dcfg.n_orders = as_long(require_key(jd, "n_orders", "dataset."), "dataset.n_orders");
  const auto [qlo, qhi] =
      as_range(require_key(jd, "q0_abs_range", "dataset."), "dataset.q0_abs_range");
  const auto [tlo, thi] = as_range(require_key(jd, "T_range", "dataset."), "dataset.T_range");
  double dlo = 0.0, dhi = 0.0;
  if (jd.contains("delta_range")) {
    std::tie(dlo, dhi) = as_range(jd.at("delta_range"), "dataset.delta_range");
  } else {
    dlo = dhi = as_double(require_key(jd, "delta", "dataset."), "dataset.delta");
  }
  dcfg.ranges = {qlo, qhi, tlo, thi, dlo, dhi};
  dcfg.n_steps =
      static_cast<int>(jd.contains("n_steps") ? as_long(jd.at("n_steps"), "dataset.n_steps") : 512);
  std::uint64_t base_seed = as_seed(require_key(jd, "base_seed", "dataset."), "dataset.base_seed");
  if (args.seed_override) base_seed = *args.seed_override;
  const std::string file =
      jd.contains("file") ? as_string(jd.at("file"), "dataset.file") : std::string("metaorders.csv");

  cfg["dataset"]["base_seed"] = base_seed;
  write_run_files(args.out_dir, "generate", cfg);

  const auto records =
      config_checked([&] { return impact::generate_dataset(model, dcfg, base_seed, args.threads); });
  impact::write_metaorders((fs::path(args.out_dir) / file).string(), records);
  std::cout << "generate: " << records.size() << " metaorders -> "
            << (fs::path(args.out_dir) / file).string() << "\n";
}

void cmd_estimate(const CommonArgs& args) {
  json cfg = load_config(args.config_path);
  reject_unknown(cfg, {"estimate"}, "");
  const json& je = require_key(cfg, "estimate", "");
  reject_unknown(je, {"input", "fix_alpha"}, "estimate.");
  const std::string input = as_string(require_key(je, "input", "estimate."), "estimate.input");
  std::optional<double> fix_alpha;
  if (je.contains("fix_alpha") && !je.at("fix_alpha").is_null())
    fix_alpha = as_double(je.at("fix_alpha"), "estimate.fix_alpha");

  write_run_files(args.out_dir, "estimate", cfg);

  const auto records = impact::read_metaorders(input);
  const impact::FitResult perm =
      fix_alpha ? impact::fit_permanent_at(records, *fix_alpha) : impact::fit_permanent(records);
  const auto inst = impact::fit_instantaneous(records, perm.exponent);

  impact::CsvWriter report((fs::path(args.out_dir) / "fit_report.csv").string());
  report.raw_line("parameter,estimate,std_error,converged,iterations,objective");
  auto fit_row = [&report](const char* name, double est, double se, const impact::FitResult& f) {
    report.row({name, impact::format_double(est), impact::format_double(se),
                f.converged ? "1" : "0", std::to_string(f.iterations),
                impact::format_double(f.objective)});
  };
  fit_row("k", perm.scale, perm.scale_se, perm);
  fit_row("alpha", perm.exponent, perm.exponent_se, perm);
  fit_row("eta", inst.scale, inst.scale_se, inst);
  fit_row("beta", inst.exponent, inst.exponent_se, inst);

  const auto diag = impact::residual_diagnostics(records, perm, inst);
  impact::CsvWriter rescsv((fs::path(args.out_dir) / "residuals.csv").string());
  rescsv.raw_line("id,r1,r2,z1,z2");
  for (std::size_t i = 0; i < records.size(); ++i)
    rescsv.row({std::to_string(records[i].id),
                impact::format_double(diag.r1(static_cast<long>(i))),
                impact::format_double(diag.r2(static_cast<long>(i))),
                impact::format_double(diag.z1(static_cast<long>(i))),
                impact::format_double(diag.z2(static_cast<long>(i)))});

  std::ostringstream summary;
  summary << "records: " << records.size() << "\n";
  if (fix_alpha) summary << "alpha fixed at " << impact::format_double(*fix_alpha) << "\n";
  summary << "permanent:     k = " << impact::format_double(perm.scale) << " (se "
          << impact::format_double(perm.scale_se)
          << "), alpha = " << impact::format_double(perm.exponent) << " (se "
          << impact::format_double(perm.exponent_se) << ")\n"
          << "instantaneous: eta = " << impact::format_double(inst.scale) << " (se "
          << impact::format_double(inst.scale_se)
          << "), beta = " << impact::format_double(inst.exponent) << " (se "
          << impact::format_double(inst.exponent_se) << ")\n"
          << "standardized residual variance: z1 = " << impact::format_double(diag.z1_variance)
          << ", z2 = " << impact::format_double(diag.z2_variance) << "\n"
          << "residual correlation: empirical = "
          << impact::format_double(diag.empirical_correlation)
          << ", predicted = " << impact::format_double(diag.predicted_correlation) << "\n";
  std::ofstream(fs::path(args.out_dir) / "summary.txt", std::ios::binary) << summary.str();
  std::cout << summary.str();
}

void cmd_verify_covariance(const CommonArgs& args) {
  json cfg = load_config(args.config_path);
  reject_unknown(cfg, {"model", "trajectory", "grid", "ensemble"}, "");
  const auto model = parse_model(cfg);
  const auto traj = parse_trajectory(cfg);
  const auto grid = parse_grid(cfg, traj.horizon());
  const json& je = require_key(cfg, "ensemble", "");
  reject_unknown(je, {"n_paths", "base_seed"}, "ensemble.");
  const long n_paths = as_long(require_key(je, "n_paths", "ensemble."), "ensemble.n_paths");
  std::uint64_t base_seed =
      as_seed(require_key(je, "base_seed", "ensemble."), "ensemble.base_seed");
  if (args.seed_override) base_seed = *args.seed_override;

  cfg["ensemble"]["base_seed"] = base_seed;
  write_run_files(args.out_dir, "verify-covariance", cfg);

  const auto check = config_checked([&] {
    return impact::verify_covariance(model, traj, grid, n_paths, base_seed, args.threads);
  });

  impact::CsvWriter w((fs::path(args.out_dir) / "covariance_check.csv").string());
  w.raw_line("entry,predicted,empirical,abs_error,rel_error");
  const char* names[3] = {"var_eps1", "cov_eps12", "var_eps2"};
  const int idx[3][2] = {{0, 0}, {0, 1}, {1, 1}};
  for (int e = 0; e < 3; ++e) {
    const double pred = check.predicted(idx[e][0], idx[e][1]);
    const double emp = check.empirical(idx[e][0], idx[e][1]);
    const double abs_err = std::abs(emp - pred);
    const double rel_err = pred != 0.0 ? abs_err / std::abs(pred) : 0.0;
    w.row({names[e], impact::format_double(pred), impact::format_double(emp),
           impact::format_double(abs_err), impact::format_double(rel_err)});
  }
  std::cout << "verify-covariance: " << n_paths << " paths -> " << args.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "impactkit: simulation, arbitrage search and impact estimation for the "
      "cumulative-volume market-impact model"};
  app.require_subcommand(1);

  CommonArgs args;
  const char* descriptions[][2] = {
      {"simulate", "Monte Carlo ensemble of (q, S, X) paths with optional path dumps"},
      {"arbitrage", "derivative-free search for profitable round trips"},
      {"generate", "synthesize a metaorder database under the linear schedule"},
      {"estimate", "two-stage GLS fit of (k, alpha) and (eta, beta) from a metaorder CSV"},
      {"verify-covariance", "closed-form vs Monte Carlo error covariance of the observables"},
  };
  for (const auto& d : descriptions) {
    auto* sub = app.add_subcommand(d[0], d[1]);
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    sub->add_option("--out", args.out_dir, "output directory (default: out)");
    sub->add_option("--threads", args.threads, "worker thread cap (0 = hardware)");
    sub->add_option("--seed", args.seed_override, "override the config RNG seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "simulate") cmd_simulate(args);
    else if (cmd == "arbitrage") cmd_arbitrage(args);
    else if (cmd == "generate") cmd_generate(args);
    else if (cmd == "estimate") cmd_estimate(args);
    else if (cmd == "verify-covariance") cmd_verify_covariance(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const impact::CsvError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
