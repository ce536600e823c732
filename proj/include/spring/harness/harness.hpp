#pragma once

#include "spring/harness/io.hpp"
#include "spring/problems/deblur.hpp"
#include "spring/problems/factorization.hpp"
#include "spring/rng.hpp"
#include "spring/solver.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>

namespace spring::harness {

inline constexpr std::uint64_t kToySeed = 20200914;

// --- Bundled toy data ------------------------------------------------------------

/// Nonnegative low-rank-plus-noise matrix: A = W H + 0.01 |N|, W sparse uniform.
inline Eigen::MatrixXd toy_nmf_matrix(Index rows = 50, Index cols = 20, Index rank = 5, std::uint64_t seed = kToySeed) {
  CounterRng rng(seed, Stream::data);
  Eigen::MatrixXd W(rows, rank), H(rank, cols);
  for (Eigen::Index c = 0; c < W.cols(); ++c)
    for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = rng.bernoulli(0.5) ? rng.uniform() : 0.0;
  for (Eigen::Index c = 0; c < H.cols(); ++c)
    for (Eigen::Index r = 0; r < H.rows(); ++r) H(r, c) = rng.uniform();
  Eigen::MatrixXd A = W * H;
  for (Eigen::Index c = 0; c < A.cols(); ++c)
    for (Eigen::Index r = 0; r < A.rows(); ++r) A(r, c) += 0.01 * std::abs(rng.normal());
  return A;
}

/// Piecewise-constant test scene: background, a bright square, a darker disk and a thin bar.
inline Image toy_sharp_image(Index h, Index w) {
  Image img = Image::Constant(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w), 0.15);
  const double hh = static_cast<double>(h), ww = static_cast<double>(w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const double y = (static_cast<double>(r) + 0.5) / hh, x = (static_cast<double>(c) + 0.5) / ww;
      if (y > 0.15 && y < 0.45 && x > 0.15 && x < 0.5) img(r, c) = 0.9;
      if ((y - 0.65) * (y - 0.65) + (x - 0.65) * (x - 0.65) < 0.04) img(r, c) = 0.55;
      if (x > 0.8 && x < 0.86 && y > 0.1 && y < 0.9) img(r, c) = 1.0;
    }
  return img;
}

/// Blurred observation of the toy scene: valid convolution with a k x k box kernel
/// plus small Gaussian noise, clipped to [0, 1]. The output is out_h x out_w.
inline Image toy_blurred_image(Index out_h = 32, Index out_w = 32, Index k = 5, double noise = 0.005,
                               std::uint64_t seed = kToySeed) {
  const Image sharp = toy_sharp_image(out_h + k - 1, out_w + k - 1);
  const Image kernel = Image::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k * k));
  Image Z = convolve_valid(sharp, kernel);
  CounterRng rng(seed, Stream::data);
  for (Eigen::Index r = 0; r < Z.rows(); ++r)
    for (Eigen::Index c = 0; c < Z.cols(); ++c) Z(r, c) = std::clamp(Z(r, c) + noise * rng.normal(), 0.0, 1.0);
  return Z;
}

// --- Problem construction --------------------------------------------------------------

enum class ProblemKind { nmf, pca, deblur };

inline ProblemKind parse_problem_kind(std::string_view s) {
  if (s == "nmf" || s == "sparse-nmf") return ProblemKind::nmf;
  if (s == "pca" || s == "sparse-pca") return ProblemKind::pca;
  if (s == "deblur" || s == "bid") return ProblemKind::deblur;
  throw std::invalid_argument("unknown problem '" + std::string(s) + "'");
}

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::nmf: return "nmf";
    case ProblemKind::pca: return "pca";
    case ProblemKind::deblur: return "deblur";
  }
  return "?";
}

/// Problem parameters. An empty data path selects the bundled toy data. The
/// defaults for lambda, lambda1 and lambda2 are not taken from any published run.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::nmf;
  std::string data;
  Index rank = 5;
  Index sparsity = 0;  // 0 selects half the rows
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double lambda = 5e-4;
  double theta = 1e3;
  Index kernel = 5;
  Index tiles = 16;
};

using AnyProblem = std::variant<SparseNmfProblem, SparsePcaProblem, BlindDeblurProblem>;

inline AnyProblem make_problem(const ProblemSpec& spec) {
  switch (spec.kind) {
    case ProblemKind::nmf:
    case ProblemKind::pca: {
      Eigen::MatrixXd A = spec.data.empty() ? toy_nmf_matrix() : io::load_matrix(spec.data);
      if (spec.kind == ProblemKind::pca) return SparsePcaProblem(std::move(A), spec.rank, spec.lambda1, spec.lambda2);
      const Index s = spec.sparsity ? spec.sparsity : std::max<Index>(1, static_cast<Index>(A.rows()) / 2);
      return SparseNmfProblem(std::move(A), spec.rank, s);
    }
    case ProblemKind::deblur: {
      Image Z = spec.data.empty() ? toy_blurred_image(32, 32, spec.kernel) : io::load_image(spec.data);
      return BlindDeblurProblem(std::move(Z), spec.kernel, spec.kernel, spec.lambda, spec.theta, spec.tiles);
    }
  }
  throw std::logic_error("make_problem: unreachable");
}

inline Index num_components(const AnyProblem& p) {
  return std::visit([](const auto& q) { return q.num_components(); }, p);
}

/// Deterministic initial point shared by every algorithm run with the same seed:
/// uniform factors projected onto the constraints (NMF), small Gaussian factors
/// (PCA), or the edge-padded observation with a flat kernel (deblurring).
inline Iterate initial_point(const AnyProblem& problem, std::uint64_t seed) {
  CounterRng rng(seed, Stream::init);
  return std::visit(
      [&](const auto& p) -> Iterate {
        using T = std::decay_t<decltype(p)>;
        Vec x(static_cast<Eigen::Index>(p.dim_x())), y(static_cast<Eigen::Index>(p.dim_y()));
        if constexpr (std::is_same_v<T, BlindDeblurProblem>) {
          const Image& Z = p.observed();
          const auto top = static_cast<Eigen::Index>((p.kernel_h() - 1) / 2);
          const auto left = static_cast<Eigen::Index>((p.kernel_w() - 1) / 2);
          Image X(static_cast<Eigen::Index>(p.image_h()), static_cast<Eigen::Index>(p.image_w()));
          for (Eigen::Index r = 0; r < X.rows(); ++r)
            for (Eigen::Index c = 0; c < X.cols(); ++c)
              X(r, c) = Z(std::clamp<Eigen::Index>(r - top, 0, Z.rows() - 1), std::clamp<Eigen::Index>(c - left, 0, Z.cols() - 1));
          x = Eigen::Map<const Vec>(X.data(), X.size());
          y = p.prox_y(1.0, Vec::Ones(y.size()));
        } else if constexpr (std::is_same_v<T, SparseNmfProblem>) {
          for (auto& v : x) v = rng.uniform();
          for (auto& v : y) v = rng.uniform();
          x = p.prox_x(1.0, x);
        } else {
          for (auto& v : x) v = 0.5 * rng.normal();
          for (auto& v : y) v = 0.5 * rng.normal();
        }
        return {x, y};
      },
      problem);
}

// --- Experiments ----------------------------------------------------------------------

struct RunSpec {
  ProblemSpec problem;
  SolverConfig solver;            // algorithm and seed are overridden per run
  std::vector<Algorithm> algorithms{Algorithm::palm};
  Index batch = 0;                // 0 selects ceil(n / 40) for the stochastic methods
  std::string out_dir = "spring_out";
  std::size_t repeat = 1;         // seeds solver.seed + 0 .. repeat - 1
  unsigned jobs = 1;
};

struct RunRecord {
  Algorithm algorithm = Algorithm::palm;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::string trace_file;
  Trace trace;
  double final_objective = 0.0;
  double min_grad_map_norm_sq = 0.0;
  std::size_t sfo_calls = 0;
  std::size_t lipschitz_sfo = 0;
  std::size_t iterations = 0;
};

struct ExperimentSummary {
  ProblemKind problem = ProblemKind::nmf;
  Index n = 0;
  Index batch = 0;
  std::vector<RunRecord> runs;

  bool all_ok() const {
    return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.ok; });
  }
};

inline Index resolve_batch(Index requested, Index n) { return requested ? requested : std::max<Index>(1, (n + 39) / 40); }

inline std::string trace_name(Algorithm a, std::uint64_t seed) {
  return std::string(to_string(a)) + "_seed" + std::to_string(seed) + ".csv";
}

inline void finish_record(RunRecord& rec) {
  if (rec.trace.rows.empty()) return;
  rec.final_objective = rec.trace.rows.back().objective;
  rec.min_grad_map_norm_sq = rec.trace.rows.front().grad_map_norm_sq;
  for (const auto& r : rec.trace.rows) rec.min_grad_map_norm_sq = std::min(rec.min_grad_map_norm_sq, r.grad_map_norm_sq);
}

inline nlohmann::json to_json(const ExperimentSummary& s) {
  nlohmann::json j;
  j["problem"] = std::string(to_string(s.problem));
  j["n"] = s.n;
  j["batch"] = s.batch;
  j["grad_map_mode"] = Trace{}.grad_map_mode;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : s.runs) {
    nlohmann::json e;
    e["algorithm"] = std::string(to_string(r.algorithm));
    e["seed"] = r.seed;
    e["ok"] = r.ok;
    if (!r.ok) e["error"] = r.error;
    e["trace"] = r.trace_file;
    e["final_objective"] = r.final_objective;
    e["min_grad_map_norm_sq"] = r.min_grad_map_norm_sq;
    e["sfo_calls"] = r.sfo_calls;
    e["lipschitz_sfo"] = r.lipschitz_sfo;
    e["iterations"] = r.iterations;
    j["runs"].push_back(e);
  }
  return j;
}

/// Runs every (algorithm, seed) pair on a worker pool. Each run writes its own
/// trace CSV; a failing run is recorded and the sweep carries on. Writes
/// summary.json into the output directory.
inline ExperimentSummary run_experiment(const RunSpec& spec) {
  if (spec.repeat < 1) throw std::invalid_argument("run spec: repeat must be >= 1");
  if (spec.algorithms.empty()) throw std::invalid_argument("run spec: no algorithms");
  const AnyProblem problem = make_problem(spec.problem);
  const Index n = num_components(problem);
  std::filesystem::create_directories(spec.out_dir);

  ExperimentSummary summary;
  summary.problem = spec.problem.kind;
  summary.n = n;
  summary.batch = resolve_batch(spec.batch, n);
  for (std::size_t s = 0; s < spec.repeat; ++s)
    for (Algorithm a : spec.algorithms) {
      RunRecord r;
      r.algorithm = a;
      r.seed = spec.solver.seed + s;
      r.trace_file = (std::filesystem::path(spec.out_dir) / trace_name(a, r.seed)).string();
      summary.runs.push_back(std::move(r));
    }

  const auto execute = [&](RunRecord& rec) {
    SolverConfig cfg = spec.solver;
    cfg.algorithm = rec.algorithm;
    cfg.seed = rec.seed;
    cfg.batch_size = summary.batch;
    try {
      const Iterate z0 = initial_point(problem, rec.seed);
      const RunResult res = std::visit([&](const auto& p) { return run(p, cfg, z0); }, problem);
      rec.trace = res.trace;
      rec.sfo_calls = res.sfo_calls;
      rec.lipschitz_sfo = res.lipschitz_sfo;
      rec.iterations = res.iterations;
    } catch (const SolverError& e) {
      rec.ok = false;
      rec.error = e.what();
      rec.trace = e.trace();
      rec.iterations = e.iteration();
      if (!rec.trace.rows.empty()) {
        rec.sfo_calls = rec.trace.rows.back().sfo_calls;
        rec.lipschitz_sfo = rec.trace.rows.back().lipschitz_sfo;
      }
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    finish_record(rec);
    io::write_trace_csv(rec.trace_file, rec.trace);
  };

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  const auto worker = [&] {
    for (std::size_t i = next++; i < summary.runs.size(); i = next++) {
      try {
        execute(summary.runs[i]);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t pool = std::clamp<std::size_t>(spec.jobs, 1, summary.runs.size());
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  io::detail::write_file((std::filesystem::path(spec.out_dir) / "summary.json").string(), to_json(summary).dump(2) + "\n");
  return summary;
}

/// First trace row whose objective is at or below `target`.
inline std::optional<TraceRow> first_reaching(const Trace& trace, double target) {
  for (const auto& r : trace.rows)
    if (r.objective <= target) return r;
  return std::nullopt;
}

struct BenchEntry {
  Algorithm algorithm;
  std::uint64_t seed;
  double palm_final = 0.0;
  std::optional<double> epochs_to_palm_final;
  std::optional<std::size_t> sfo_to_palm_final;
};

struct BenchReport {
  ExperimentSummary summary;
  std::vector<BenchEntry> entries;
};

inline const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all{Algorithm::palm, Algorithm::ipalm, Algorithm::spring_sgd,
                                          Algorithm::spring_saga, Algorithm::spring_sarah};
  return all;
}

/// Runs the given algorithms (PALM is always included as the baseline) and, per
/// seed, reports how many epochs each other method needs to match PALM's final
/// objective. Writes bench.json next to summary.json.
inline BenchReport bench(RunSpec spec) {
  if (std::find(spec.algorithms.begin(), spec.algorithms.end(), Algorithm::palm) == spec.algorithms.end()) {
    spec.algorithms.insert(spec.algorithms.begin(), Algorithm::palm);
  }
  BenchReport report;
  report.summary = run_experiment(spec);
  const auto& runs = report.summary.runs;
  for (const auto& base : runs) {
    if (base.algorithm != Algorithm::palm || !base.ok || base.trace.rows.empty()) continue;
    for (const auto& r : runs) {
      if (r.seed != base.seed || r.algorithm == Algorithm::palm) continue;
      BenchEntry e{r.algorithm, r.seed, base.final_objective, std::nullopt, std::nullopt};
      if (const auto hit = first_reaching(r.trace, base.final_objective)) {
        e.epochs_to_palm_final = hit->epoch;
        e.sfo_to_palm_final = hit->sfo_calls;
      }
      report.entries.push_back(e);
    }
  }
  nlohmann::json j = to_json(report.summary);
  j["baseline"] = "palm";
  j["comparisons"] = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json c;
    c["algorithm"] = std::string(to_string(e.algorithm));
    c["seed"] = e.seed;
    c["palm_final_objective"] = e.palm_final;
    c["epochs_to_palm_final"] = e.epochs_to_palm_final ? nlohmann::json(*e.epochs_to_palm_final) : nlohmann::json();
    c["sfo_to_palm_final"] = e.sfo_to_palm_final ? nlohmann::json(*e.sfo_to_palm_final) : nlohmann::json();
    j["comparisons"].push_back(c);
  }
  io::detail::write_file((std::filesystem::path(spec.out_dir) / "bench.json").string(), j.dump(2) + "\n");
  return report;
}

}  // namespace spring::harness
