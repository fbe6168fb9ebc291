#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stochsens/bench.hpp"
#include "stochsens/models.hpp"
#include "stochsens/samplers.hpp"
#include "stochsens/sim.hpp"

// Command-line front end:
//
//   stochsens simulate    MODEL [--T t] [--paths n] [--out file.csv] ...
//   stochsens sensitivity MODEL --method apa|apa-exact|girsanov|cfd|crp|crn ...
//   stochsens bench       --table 1|2|3|4 [--scale s] [--out dir]
//
// MODEL is a JSON model file or builtin:<name>. Exit codes: 0 success,
// 2 usage/validation/inapplicable, 3 the stopping rule hit n_max.

namespace stochsens::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNoConvergence = 3;

struct ModelOptions {
  std::string model;
  std::optional<double> T;
  std::optional<double> theta;
  std::string sensitive;
  std::vector<std::string> params;  // name=value
};

struct SeedOption {
  std::optional<std::uint64_t> seed;

  std::uint64_t resolve() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("STOCHSENS_SEED")) {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env, &used);
        if (used == std::string(env).size()) return v;
      } catch (const std::exception&) {
      }
      throw Error(std::string("STOCHSENS_SEED is not an unsigned integer: '") +
                  env + "'");
    }
    return 1;
  }
};

inline void add_model_options(CLI::App& cmd, ModelOptions& m) {
  cmd.add_option("model", m.model, "model file, or builtin:<name> (" +
                                       [] {
                                         std::string s;
                                         for (const auto& n : models::builtin_names())
                                           s += (s.empty() ? "" : ", ") + n;
                                         return s;
                                       }() + ")")
      ->required();
  cmd.add_option("--T", m.T, "time horizon (default: the model's T)");
  cmd.add_option("--theta", m.theta, "value of the sensitive parameter");
  cmd.add_option("--sensitive", m.sensitive,
                 "name of the parameter to differentiate against");
  cmd.add_option("--param", m.params, "override a parameter: name=value")
      ->take_all();
}

/// Loads the model, applies overrides and runs the static checks. Blocking
/// violations raise ModelError; the others are printed as warnings.
inline ModelSpec resolve_model(const ModelOptions& m, std::ostream& err) {
  ModelSpec spec = models::load_model_or_builtin(m.model);
  ReactionNetwork net = spec.network;
  for (const std::string& kv : m.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ModelError("--param expects name=value, got '" + kv + "'");
    double v = 0.0;
    try {
      v = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw ModelError("--param " + kv + ": value is not a number");
    }
    net = net.with_param(kv.substr(0, eq), v);
  }
  if (!m.sensitive.empty()) net = net.with_sensitive(m.sensitive);
  if (m.theta) net = net.with_theta(*m.theta);
  if (m.T) {
    if (!(*m.T >= 0.0) || !std::isfinite(*m.T))
      throw ModelError("--T must be a finite time >= 0");
    spec.horizon = *m.T;
  }
  const auto violations = validate(net);
  bool blocking = false;
  for (const Violation& v : violations) {
    err << (v.blocking() ? "error" : "warning") << ": condition (" << v.condition
        << ") violated by reaction " << v.reaction << ": " << v.message << "\n";
    blocking |= v.blocking();
  }
  if (blocking) throw ModelError("model failed validation");
  spec.network = std::move(net);
  return spec;
}

inline std::string indexed_path(const std::string& path, std::size_t i) {
  const std::filesystem::path p(path);
  return (p.parent_path() /
          (p.stem().string() + "_" + std::to_string(i) + p.extension().string()))
      .string();
}

// --------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  ModelOptions model;
  SeedOption seed;
  std::size_t paths = 1;
  std::string out;
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out,
                        std::ostream& err) {
  const ModelSpec spec = resolve_model(a.model, err);
  const std::uint64_t seed = a.seed.resolve();
  if (a.paths < 1) throw Error("--paths must be >= 1");
  for (std::size_t i = 0; i < a.paths; ++i) {
    RngStream rng(seed, i);
    const Trajectory traj = simulate(spec.network, spec.network.theta(),
                                     spec.horizon, rng, Recording::all());
    if (a.out.empty()) {
      if (a.paths > 1) out << "# path " << i << "\n";
      write_trajectory_csv(traj, out);
      continue;
    }
    const std::string path = a.paths > 1 ? indexed_path(a.out, i) : a.out;
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write '" + path + "'");
    write_trajectory_csv(traj, file);
    out << "wrote " << path << " (" << traj.jump_count << " jumps)\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------------------
// sensitivity

struct SensitivityArgs {
  ModelOptions model;
  SeedOption seed;
  std::string method = "apa";
  double rel_ci = 0.05;
  std::uint64_t n_min = 100;
  std::uint64_t n_max = 10'000'000;
  double h = 0.0;
  std::size_t M = 50;
  double kappa = 3.0;
  unsigned workers = 1;
  std::string out;
  std::string diag;
  bool timing = false;
};

inline void write_report_file(const EstimateReport& r, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error("cannot write '" + path + "'");
  if (std::filesystem::path(path).extension() == ".csv")
    file << report_csv_header() << "\n" << report_csv_row(r) << "\n";
  else
    file << report_json(r).dump(2) << "\n";
}

inline int cmd_sensitivity(const SensitivityArgs& a, std::ostream& out,
                           std::ostream& err) {
  const ModelSpec spec = resolve_model(a.model, err);
  const Method method = parse_method(a.method);
  MethodOptions opt;
  opt.apa.M = a.M;
  opt.apa.kappa = a.kappa;
  opt.h = a.h;
  if (a.h < 0.0) throw Error("--h must be > 0");
  if (a.workers < 1) throw Error("--workers must be >= 1");
  std::shared_ptr<DiagnosticsLog> diag;
  if (!a.diag.empty()) {
    if (method != Method::apa) throw Error("--diag is only available for --method apa");
    diag = std::make_shared<DiagnosticsLog>();
  }
  const Sampler sampler = make_sampler(method, spec.network, spec.observable,
                                       spec.horizon, opt, a.seed.resolve(), diag);
  StoppingRule rule;
  rule.rel_target = a.rel_ci;
  rule.n_min = a.n_min;
  rule.n_max = a.n_max;
  EstimateReport r = run_until_target(sampler, rule, a.workers);
  r.method = to_string(method);
  r.theta = spec.network.theta();
  r.T = spec.horizon;

  out << "method=" << r.method << " theta=" << format_number(r.theta)
      << " T=" << format_number(r.T) << "\n"
      << "estimate=" << format_number(r.estimate)
      << " ci_half=" << format_number(r.ci_half) << " n=" << r.n
      << " variance=" << format_number(r.variance) << "\n"
      << "mean_jumps_per_sample=" << format_number(r.mean_cost)
      << " wall_seconds=" << format_number(r.seconds) << "\n";
  if (is_finite_difference(method))
    out << "h=" << format_number(opt.h == 0.0 ? default_h(r.theta) : opt.h) << "\n";
  if (!r.converged) out << "not converged: " << r.flag << "\n";

  if (!a.out.empty()) {
    EstimateReport file_report = r;
    if (!a.timing) file_report.seconds = 0.0;
    write_report_file(file_report, a.out);
  }
  if (diag) {
    std::ofstream file(a.diag, std::ios::binary);
    if (!file) throw Error("cannot write '" + a.diag + "'");
    for (const ApaDiagnostics& d : diag->first(r.n)) {
      nlohmann::ordered_json j;
      j["score"] = d.score;
      j["eta"] = d.eta;
      j["n_queries"] = d.n_queries;
      j["n_fallbacks"] = d.n_fallbacks;
      j["aux_jump_count"] = d.aux_jump_count;
      file << j.dump() << "\n";
    }
  }
  return r.converged ? kExitOk : kExitNoConvergence;
}

// --------------------------------------------------------------------------
// bench

struct BenchArgs {
  int table = 0;
  double scale = 1.0;
  std::string out;
  SeedOption seed;
  unsigned workers = 1;
  bool timing = false;
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.scale > 0.0)) throw Error("--scale must be > 0");
  if (a.workers < 1) throw Error("--workers must be >= 1");
  BenchSpec spec;
  spec.table = a.table;
  spec.scale = a.scale;
  spec.seed = a.seed.resolve();
  spec.workers = a.workers;
  bench_cells(a.table);  // validates the table number before any work
  const auto rows = run_bench(spec, &err);
  write_bench_csv(rows, out, a.timing);
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    const std::string path =
        (std::filesystem::path(a.out) / ("table" + std::to_string(a.table) + ".csv"))
            .string();
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot write '" + path + "'");
    write_bench_csv(rows, file, a.timing);
    err << "wrote " << path << "\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------------------
// entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"stochsens: stochastic reaction-network simulation and unbiased "
               "parameter-sensitivity estimation"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "write SSA trajectories as CSV");
  add_model_options(*c_sim, sim.model);
  c_sim->add_option("--seed", sim.seed.seed, "random seed (env STOCHSENS_SEED)");
  c_sim->add_option("--paths", sim.paths, "number of independent paths");
  c_sim->add_option("--out", sim.out,
                    "output CSV (with several paths: name_<i>.csv); default stdout");

  SensitivityArgs sens;
  auto* c_sens = app.add_subcommand("sensitivity",
                                    "estimate dE[f(X(T))]/dtheta to a relative CI target");
  add_model_options(*c_sens, sens.model);
  c_sens->add_option("--method", sens.method,
                     "apa | apa-exact | girsanov | cfd | crp | crn | independent");
  c_sens->add_option("--rel-ci", sens.rel_ci, "target CI half-length / |estimate|");
  c_sens->add_option("--n-min", sens.n_min, "minimum number of samples");
  c_sens->add_option("--n-max", sens.n_max, "maximum number of samples");
  // "-h" would clash with the finite-difference step; help stays on --help.
  c_sens->set_help_flag("--help", "Print this help message and exit");
  c_sens->add_option("--h", sens.h, "finite-difference step (default 0.01*max(theta,1e-3))");
  c_sens->add_option("--M", sens.M, "APA auxiliary paths per sample");
  c_sens->add_option("--kappa", sens.kappa, "APA horizon extension factor");
  c_sens->add_option("--seed", sens.seed.seed, "random seed (env STOCHSENS_SEED)");
  c_sens->add_option("--workers", sens.workers, "worker threads");
  c_sens->add_option("--out", sens.out, "report file (.json, or .csv)");
  c_sens->add_option("--diag", sens.diag, "per-sample APA diagnostics (JSON lines)");
  c_sens->add_flag("--timing", sens.timing, "record wall time in the report file");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "reproduce a published comparison table");
  c_bench->add_option("--table", bench.table, "table number 1-4")->required();
  c_bench->add_option("--scale", bench.scale, "multiplier on sample sizes and caps");
  c_bench->add_option("--out", bench.out, "directory for table<N>.csv");
  c_bench->add_option("--seed", bench.seed.seed, "random seed (env STOCHSENS_SEED)");
  c_bench->add_option("--workers", bench.workers, "worker threads");
  c_bench->add_flag("--timing", bench.timing, "record wall time in the CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (*c_sim) return cmd_simulate(sim, out, err);
    if (*c_sens) return cmd_sensitivity(sens, out, err);
    if (*c_bench) return cmd_bench(bench, out, err);
  } catch (const InapplicableError& e) {
    err << "inapplicable: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SimulationError& e) {
    err << "simulation error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  std::vector<const char*> argv{"stochsens"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace stochsens::cli
