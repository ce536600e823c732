#pragma once

#include "spring/harness/harness.hpp"
#include "spring/harness/plot.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

namespace spring::cli {

/// Bad flag or config value; reported with usage text and exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Settings = std::map<std::string, std::string>;

inline std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '_', '-');
  return k;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// Flat key=value file; '#' starts a comment. Keys accept '-' or '_'.
inline Settings read_config(const std::string& path, const std::set<std::string>& allowed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  Settings out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = normalize_key(trim(line.substr(0, eq)));
    if (!allowed.count(key)) throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace detail {

template <class T>
T convert(const Settings& s, const std::string& key, T fallback) {
  const auto it = s.find(key);
  if (it == s.end()) return fallback;
  const std::string& v = it->second;
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      throw std::invalid_argument(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::logic_error&) {
    throw UsageError("invalid value '" + v + "' for " + key);
  }
}

inline std::string text(const Settings& s, const std::string& key, const std::string& fallback) {
  const auto it = s.find(key);
  return it == s.end() ? fallback : it->second;
}

template <class F>
auto parse_or_usage(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::vector<Algorithm> parse_algorithms(const std::string& list) {
  std::vector<Algorithm> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_or_usage([&] { return parse_algorithm(item); }));
  }
  if (out.empty()) throw UsageError("no algorithm given");
  return out;
}

}  // namespace detail

inline harness::ProblemSpec problem_from(const Settings& s) {
  harness::ProblemSpec p;
  p.kind = detail::parse_or_usage([&] { return harness::parse_problem_kind(detail::text(s, "problem", "nmf")); });
  p.data = detail::text(s, "data", "");
  p.rank = detail::convert<Index>(s, "rank", p.rank);
  p.sparsity = detail::convert<Index>(s, "sparsity", p.sparsity);
  p.lambda = detail::convert<double>(s, "lambda", p.lambda);
  p.lambda1 = detail::convert<double>(s, "lambda1", p.lambda1);
  p.lambda2 = detail::convert<double>(s, "lambda2", p.lambda2);
  p.theta = detail::convert<double>(s, "theta", p.theta);
  p.kernel = detail::convert<Index>(s, "kernel", p.kernel);
  p.tiles = detail::convert<Index>(s, "tiles", p.tiles);
  return p;
}

inline harness::RunSpec run_spec_from(const Settings& s, const std::string& default_algos) {
  harness::RunSpec spec;
  spec.problem = problem_from(s);
  spec.algorithms = detail::parse_algorithms(detail::text(s, "algo", default_algos));
  spec.batch = detail::convert<Index>(s, "batch", 0);
  spec.out_dir = detail::text(s, "out", "spring_out");
  spec.repeat = detail::convert<std::size_t>(s, "repeat", 1);
  spec.jobs = detail::convert<unsigned>(s, "jobs", 1);
  if (spec.repeat < 1) throw UsageError("repeat must be >= 1");
  SolverConfig& c = spec.solver;
  c.epochs = detail::convert<std::size_t>(s, "epochs", 20);
  c.seed = detail::convert<std::uint64_t>(s, "seed", 0);
  c.step_policy = detail::parse_or_usage([&] { return parse_step_policy(detail::text(s, "steps", "practical")); });
  c.warm_start = detail::convert<bool>(s, "warm-start", false);
  c.sarah_p = detail::convert<double>(s, "sarah-p", 0.0);
  c.power.iterations = detail::convert<int>(s, "power-iters", c.power.iterations);
  c.power.batch = detail::convert<Index>(s, "lipschitz-batch", 0);
  c.fixed_step_x = detail::convert<double>(s, "step-x", 0.0);
  c.fixed_step_y = detail::convert<double>(s, "step-y", 0.0);
  c.record_timing = detail::convert<bool>(s, "timing", true);
  c.lipschitz_refresh = detail::convert<bool>(s, "lipschitz-refresh", true);
  if (s.count("tolerance")) c.grad_map_tolerance = detail::convert<double>(s, "tolerance", 0.0);
  return spec;
}

/// A random point inside the constraint set (deblurring: uniform image, projected kernel).
inline Iterate random_feasible_point(const harness::AnyProblem& problem, std::uint64_t seed) {
  if (const auto* bid = std::get_if<BlindDeblurProblem>(&problem)) {
    CounterRng rng(seed, Stream::test);
    Vec x(static_cast<Eigen::Index>(bid->dim_x())), y(static_cast<Eigen::Index>(bid->dim_y()));
    for (auto& v : x) v = rng.uniform();
    for (auto& v : y) v = rng.uniform(0.0, 2.0 / static_cast<double>(y.size()));
    return {x, bid->prox_y(1.0, y)};
  }
  return harness::initial_point(problem, seed);
}

namespace detail {

inline const std::vector<std::string>& problem_keys() {
  static const std::vector<std::string> k{"problem", "data", "rank", "sparsity", "lambda", "lambda1",
                                          "lambda2", "theta", "kernel", "tiles", "seed"};
  return k;
}
inline const std::vector<std::string>& solver_keys() {
  static const std::vector<std::string> k{"algo", "batch", "epochs", "steps", "out", "repeat", "jobs", "sarah-p",
                                          "power-iters", "lipschitz-batch", "step-x", "step-y", "timing", "lipschitz-refresh",
                                          "tolerance"};
  return k;
}

struct Command {
  CLI::App* app = nullptr;
  std::set<std::string> keys;
  Settings raw;
  bool warm_start = false;
  std::string config;

  void add(const std::vector<std::string>& ks, const std::map<std::string, std::string>& help) {
    for (const auto& k : ks) {
      keys.insert(k);
      const auto h = help.find(k);
      app->add_option("--" + k, raw[k], h == help.end() ? "" : h->second);
    }
  }

  /// Config file first, then flags given on the command line.
  Settings settings() const {
    Settings s = config.empty() ? Settings{} : read_config(config, keys);
    for (const auto& k : keys) {
      if (k == "warm-start") continue;
      if (app->count("--" + k)) s[k] = raw.at(k);
    }
    if (warm_start) s["warm-start"] = "true";
    return s;
  }
};

inline std::map<std::string, std::string> option_help() {
  return {
      {"problem", "nmf | pca | deblur (default nmf)"},
      {"data", "matrix (CSV/SPMX) or PGM image; empty selects the bundled toy data"},
      {"rank", "factorization rank (default 5)"},
      {"sparsity", "nonzeros per column of X for nmf (default rows/2)"},
      {"lambda", "deblurring regularization weight (default 5e-4)"},
      {"lambda1", "sparse PCA weight on X (default 0.1)"},
      {"lambda2", "sparse PCA weight on Y (default 0.1)"},
      {"theta", "deblurring potential parameter (default 1e3)"},
      {"kernel", "deblurring kernel side length (default 5)"},
      {"tiles", "deblurring component tiles (default 16)"},
      {"seed", "base seed (default 0)"},
      {"algo", "comma list of palm, ipalm, spring-sgd, spring-saga, spring-sarah"},
      {"batch", "mini-batch size; 0 selects ceil(n/40)"},
      {"epochs", "number of epochs (default 20)"},
      {"steps", "practical | theoretical | fixed"},
      {"out", "output directory (plot: output SVG path)"},
      {"repeat", "seed sweep length (default 1)"},
      {"jobs", "worker threads for the seed sweep (default 1)"},
      {"sarah-p", "SARAH refresh period; 0 selects n"},
      {"power-iters", "power-method iterations per Lipschitz estimate (default 5)"},
      {"lipschitz-batch", "mini-batch for stochastic Lipschitz estimates; 0 uses --batch"},
      {"step-x", "fixed x step size (with --steps fixed)"},
      {"step-y", "fixed y step size (with --steps fixed)"},
      {"timing", "record wall-clock time in traces (default true)"},
      {"lipschitz-refresh", "re-estimate Lipschitz constants every iteration (default true)"},
      {"tolerance", "stop once the squared gradient-map norm falls to this value"},
      {"points", "number of random points (default 3)"},
      {"tol", "pass threshold for the finite-difference check (default 1e-5)"},
  };
}

inline void print_summary(std::ostream& out, const harness::ExperimentSummary& s) {
  out << "problem " << to_string(s.problem) << ", n = " << s.n << ", batch = " << s.batch << "\n";
  for (const auto& r : s.runs) {
    out << std::left << std::setw(14) << to_string(r.algorithm) << " seed " << std::setw(4) << r.seed
        << std::setprecision(10) << " objective " << std::setw(18) << r.final_objective << " sfo " << r.sfo_calls
        << (r.ok ? "" : "  FAILED: " + r.error) << "\n";
  }
}

}  // namespace detail

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 usage error.
inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic proximal alternating minimization benchmarks", "spring_cli"};
  app.require_subcommand(1, 1);
  const auto help = detail::option_help();

  detail::Command run_cmd, bench_cmd, grad_cmd, lip_cmd;
  const auto setup = [&](detail::Command& c, const char* name, const char* desc, bool solver) {
    c.app = app.add_subcommand(name, desc);
    c.app->add_option("--config", c.config, "flat key=value file; flags override it");
    c.add(detail::problem_keys(), help);
    if (solver) {
      c.add(detail::solver_keys(), help);
      c.keys.insert("warm-start");
      c.app->add_flag("--warm-start", c.warm_start, "plain SGD estimates for the first epoch (SAGA/SARAH)");
    }
  };
  setup(run_cmd, "run", "run one or more algorithms over a seed sweep", true);
  setup(bench_cmd, "bench", "compare all algorithms against PALM", true);
  setup(grad_cmd, "check-grad", "finite-difference check of the component gradients", false);
  grad_cmd.add({"points", "tol"}, help);
  setup(lip_cmd, "estimate-lipschitz", "power-method Lipschitz estimates at the initial point", false);
  lip_cmd.add({"power-iters"}, help);

  auto* plot_cmd = app.add_subcommand("plot", "render trace CSVs as an SVG convergence plot");
  std::vector<std::string> traces;
  std::string mode = "objective", axis = "sfo", plot_out = "plot.svg";
  plot_cmd->add_option("traces", traces, "trace CSV files")->required();
  plot_cmd->add_option("--mode", mode, "objective | gradmap");
  plot_cmd->add_option("--x-axis", axis, "epoch | sfo");
  plot_cmd->add_option("--out", plot_out, "output SVG path");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (run_cmd.app->parsed() || bench_cmd.app->parsed()) {
      const bool is_bench = bench_cmd.app->parsed();
      const detail::Command& c = is_bench ? bench_cmd : run_cmd;
      const Settings s = c.settings();
      harness::RunSpec spec = run_spec_from(s, is_bench ? "palm,ipalm,spring-sgd,spring-saga,spring-sarah" : "palm");
      if (!is_bench) {
        const auto summary = harness::run_experiment(spec);
        detail::print_summary(out, summary);
        out << "traces and summary.json written to " << spec.out_dir << "\n";
        return summary.all_ok() ? 0 : 1;
      }
      const auto report = harness::bench(spec);
      detail::print_summary(out, report.summary);
      out << "epochs to reach PALM's final objective:\n";
      for (const auto& e : report.entries) {
        out << "  " << std::left << std::setw(14) << to_string(e.algorithm) << " seed " << std::setw(4) << e.seed;
        if (e.epochs_to_palm_final) {
          out << std::setprecision(6) << *e.epochs_to_palm_final << "\n";
        } else {
          out << "not reached\n";
        }
      }
      out << "traces, summary.json and bench.json written to " << spec.out_dir << "\n";
      return report.summary.all_ok() ? 0 : 1;
    }
    if (grad_cmd.app->parsed()) {
      const Settings s = grad_cmd.settings();
      const auto problem = harness::make_problem(problem_from(s));
      const std::size_t points = detail::convert<std::size_t>(s, "points", 3);
      const double tol = detail::convert<double>(s, "tol", 1e-5);
      const std::uint64_t seed = detail::convert<std::uint64_t>(s, "seed", 0);
      double worst = 0.0;
      for (std::size_t i = 0; i < points; ++i) {
        const Iterate z = random_feasible_point(problem, seed + i);
        worst = std::max(worst, std::visit([&](const auto& p) { return fd_gradient_check(p, z); }, problem));
      }
      out << "worst relative finite-difference error over " << points << " points: " << std::setprecision(3)
          << std::scientific << worst << std::defaultfloat << " (tolerance " << tol << ")\n";
      return worst <= tol ? 0 : 1;
    }
    if (lip_cmd.app->parsed()) {
      const Settings s = lip_cmd.settings();
      const auto problem = harness::make_problem(problem_from(s));
      const std::uint64_t seed = detail::convert<std::uint64_t>(s, "seed", 0);
      const PowerMethodConfig pm{detail::convert<int>(s, "power-iters", 5)};
      if (pm.iterations < 1) throw UsageError("power-iters must be >= 1");
      const Iterate z = harness::initial_point(problem, seed);
      CounterRng rng(seed, Stream::power_method);
      const auto [lx, ly] = std::visit(
          [&](const auto& p) {
            const Batch all = full_batch(p);
            const double a = estimate_lipschitz_x(p, all, z.x, z.y, pm, rng);
            return std::pair{a, estimate_lipschitz_y(p, all, z.x, z.y, pm, rng)};
          },
          problem);
      out << std::setprecision(10) << "L_x = " << lx << "\nL_y = " << ly << "\n";
      return 0;
    }
    if (plot_cmd->parsed()) {
      plot::emit_plot(traces, detail::parse_or_usage([&] { return plot::parse_mode(mode); }),
                      detail::parse_or_usage([&] { return plot::parse_axis(axis); }), plot_out);
      out << "wrote " << plot_out << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace spring::cli
