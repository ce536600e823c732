#pragma once

#include "spring/core.hpp"
#include "spring/rng.hpp"

#include <cmath>
#include <string_view>

namespace spring {

enum class EstimatorKind { sgd, saga, sarah };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::sgd: return "sgd";
    case EstimatorKind::saga: return "saga";
    case EstimatorKind::sarah: return "sarah";
  }
  return "?";
}

/// Draws uniform b-subsets of the component indices from one RNG stream.
class BatchSampler {
 public:
  BatchSampler(Index n, Index b, CounterRng rng) : n_(n), b_(b), rng_(rng) {
    if (n == 0 || b == 0 || b > n) throw std::invalid_argument("BatchSampler: need 1 <= b <= n");
  }

  Batch draw() { return sample_subset(rng_, n_, b_); }

  Index n() const { return n_; }
  Index b() const { return b_; }

 private:
  Index n_;
  Index b_;
  CounterRng rng_;
};

/// Component partial gradients of one block, evaluated for the indices of a batch.
struct BatchGradients {
  Batch batch;
  std::vector<Vec> grads;

  Vec mean() const {
    Vec acc = Vec::Zero(grads.front().size());
    for (const Vec& g : grads) acc += g;
    return acc / static_cast<double>(grads.size());
  }
};

template <BlockProblem P>
BatchGradients eval_batch_x(const P& problem, const Batch& batch, const Vec& x, const Vec& y,
                            std::size_t* sfo = nullptr) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  BatchGradients out{batch, {}};
  out.grads.reserve(batch.size());
  for (Index j : batch) out.grads.push_back(problem.component_grad_x(j, x, y));
  if (sfo) *sfo += batch.size();
  return out;
}

template <BlockProblem P>
BatchGradients eval_batch_y(const P& problem, const Batch& batch, const Vec& x, const Vec& y,
                            std::size_t* sfo = nullptr) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  BatchGradients out{batch, {}};
  out.grads.reserve(batch.size());
  for (Index j : batch) out.grads.push_back(problem.component_grad_y(j, x, y));
  if (sfo) *sfo += batch.size();
  return out;
}

// --- SGD -------------------------------------------------------------------

/// (1/b) sum_{j in batch} grad_x F_j(x, y).
template <BlockProblem P>
Vec sgd_estimate_x(const P& problem, const Batch& batch, const Iterate& z, std::size_t* sfo = nullptr) {
  check_dims(problem, z.x, z.y);
  return eval_batch_x(problem, batch, z.x, z.y, sfo).mean();
}

/// y-block analogue, evaluated at (x_next, y).
template <BlockProblem P>
Vec sgd_estimate_y(const P& problem, const Batch& batch, const Vec& x_next, const Vec& y,
                   std::size_t* sfo = nullptr) {
  check_dims(problem, x_next, y);
  return eval_batch_y(problem, batch, x_next, y, sfo).mean();
}

// --- SAGA ------------------------------------------------------------------

/// Gradient history of one block: n stored component gradients and their mean.
/// The mean is maintained incrementally and recomputed from scratch once every
/// n row replacements to bound drift.
class SagaTable {
 public:
  SagaTable() = default;
  SagaTable(Index n, Index dim) : rows_(n, Vec::Zero(static_cast<Eigen::Index>(dim))), mean_(Vec::Zero(static_cast<Eigen::Index>(dim))) {}
  explicit SagaTable(std::vector<Vec> rows) : rows_(std::move(rows)) { recompute_mean(); }

  bool initialized() const { return !rows_.empty(); }
  Index size() const { return rows_.size(); }
  const Vec& row(Index i) const { return rows_.at(i); }
  const Vec& mean() const { return mean_; }

  /// Replace the rows named by `fresh.batch`; other rows are untouched.
  void update(const BatchGradients& fresh) {
    const double inv_n = 1.0 / static_cast<double>(rows_.size());
    for (Index k = 0; k < fresh.batch.size(); ++k) {
      Vec& row = rows_.at(fresh.batch[k]);
      mean_ += inv_n * (fresh.grads[k] - row);
      row = fresh.grads[k];
    }
    replaced_ += fresh.batch.size();
    if (replaced_ >= rows_.size()) recompute_mean();
  }

  void recompute_mean() {
    mean_ = Vec::Zero(rows_.front().size());
    for (const Vec& r : rows_) mean_ += r;
    mean_ /= static_cast<double>(rows_.size());
    replaced_ = 0;
  }

  /// (1/b) sum_j (fresh_j - g_j) + (1/n) sum_i g_i. Does not modify the table.
  Vec estimate(const BatchGradients& fresh) const {
    if (!initialized()) throw std::logic_error("SAGA table used before initialization");
    Vec acc = Vec::Zero(mean_.size());
    for (Index k = 0; k < fresh.batch.size(); ++k) acc += fresh.grads[k] - rows_.at(fresh.batch[k]);
    return acc / static_cast<double>(fresh.batch.size()) + mean_;
  }

 private:
  std::vector<Vec> rows_;
  Vec mean_;
  Index replaced_ = 0;
};

struct SagaState {
  SagaTable x;
  SagaTable y;

  /// Zero tables (cold start); intended for tests.
  static SagaState zeros(Index n, Index m1, Index m2) { return {SagaTable(n, m1), SagaTable(n, m2)}; }

  /// Tables filled with the component gradients at z. Costs 2n SFO calls.
  template <BlockProblem P>
  static SagaState at(const P& problem, const Iterate& z, std::size_t* sfo = nullptr) {
    const Batch all = full_batch(problem);
    return {SagaTable(eval_batch_x(problem, all, z.x, z.y, sfo).grads),
            SagaTable(eval_batch_y(problem, all, z.x, z.y, sfo).grads)};
  }
};

template <BlockProblem P>
Vec saga_estimate_x(const P& problem, const Batch& batch, const Iterate& z, const SagaState& state,
                    std::size_t* sfo = nullptr) {
  check_dims(problem, z.x, z.y);
  return state.x.estimate(eval_batch_x(problem, batch, z.x, z.y, sfo));
}

template <BlockProblem P>
Vec saga_estimate_y(const P& problem, const Batch& batch, const Vec& x_next, const Vec& y,
                    const SagaState& state, std::size_t* sfo = nullptr) {
  check_dims(problem, x_next, y);
  return state.y.estimate(eval_batch_y(problem, batch, x_next, y, sfo));
}

// --- SARAH (loopless) --------------------------------------------------------

/// Recursive estimates for both blocks plus the points they were formed at.
struct SarahState {
  double p = 1.0;
  Vec est_x;
  Vec est_y;
  Iterate anchor_x;  // point of the last x-estimate, (x_k, y_k)
  Iterate anchor_y;  // point of the last y-estimate, (x_{k+1}, y_k)
  bool initialized = false;
  std::size_t refreshes = 0;

  explicit SarahState(double period = 1.0) : p(period) {
    if (!(period >= 1.0)) throw std::invalid_argument("SARAH: refresh period p must be >= 1");
  }

  /// One shared refresh event per iteration for both blocks.
  bool draw_refresh(CounterRng& coin) const { return coin.bernoulli(1.0 / p); }
};

/// With `refresh` (or before the first estimate) returns the exact x-partial
/// gradient at z_new; otherwise the recursive update from the stored anchor.
/// Updates the state to the returned value.
template <BlockProblem P>
Vec sarah_estimate_x(const P& problem, const Batch& batch, const Iterate& z_new, SarahState& state,
                     bool refresh, std::size_t* sfo = nullptr) {
  check_dims(problem, z_new.x, z_new.y);
  if (refresh || !state.initialized) {
    const Batch all = full_batch(problem);
    state.est_x = eval_batch_x(problem, all, z_new.x, z_new.y, sfo).mean();
  } else {
    Vec diff = eval_batch_x(problem, batch, z_new.x, z_new.y, sfo).mean();
    diff -= eval_batch_x(problem, batch, state.anchor_x.x, state.anchor_x.y, sfo).mean();
    state.est_x += diff;
  }
  state.anchor_x = z_new;
  return state.est_x;
}

/// y-block analogue at z_new = (x_{k+1}, y_k). Marks the state initialized.
template <BlockProblem P>
Vec sarah_estimate_y(const P& problem, const Batch& batch, const Iterate& z_new, SarahState& state,
                     bool refresh, std::size_t* sfo = nullptr) {
  check_dims(problem, z_new.x, z_new.y);
  if (refresh || !state.initialized) {
    const Batch all = full_batch(problem);
    state.est_y = eval_batch_y(problem, all, z_new.x, z_new.y, sfo).mean();
    ++state.refreshes;
  } else {
    Vec diff = eval_batch_y(problem, batch, z_new.x, z_new.y, sfo).mean();
    diff -= eval_batch_y(problem, batch, state.anchor_y.x, state.anchor_y.y, sfo).mean();
    state.est_y += diff;
  }
  state.anchor_y = z_new;
  state.initialized = true;
  return state.est_y;
}

// --- Variance constants and probes --------------------------------------------

struct EstimatorConstants {
  double V1 = 0.0;
  double V2 = 0.0;
  double V_upsilon = 0.0;
  double rho = 1.0;
};

/// Variance-reduction constants: SAGA (6M^2/b, sqrt(6)M/sqrt(b), 134nL^2/b^2, b/(2n)),
/// SARAH (2L^2, 2L, 2L^2, 1/p). SGD is not variance-reduced.
inline EstimatorConstants estimator_constants(EstimatorKind kind, Index n, Index b, double p, double L,
                                              double M) {
  const auto nd = static_cast<double>(n);
  const auto bd = static_cast<double>(b);
  switch (kind) {
    case EstimatorKind::saga:
      if (b == 0 || b > n) throw std::invalid_argument("estimator_constants: need 1 <= b <= n");
      return {6.0 * M * M / bd, std::sqrt(6.0) * M / std::sqrt(bd), 134.0 * nd * L * L / (bd * bd),
              bd / (2.0 * nd)};
    case EstimatorKind::sarah:
      if (!(p >= 1.0)) throw std::invalid_argument("estimator_constants: p must be >= 1");
      return {2.0 * L * L, 2.0 * L, 2.0 * L * L, 1.0 / p};
    case EstimatorKind::sgd:
      break;
  }
  throw std::invalid_argument("estimator_constants: SGD estimator is not variance-reduced");
}

struct VarianceProbe {
  double upsilon = 0.0;
  double gamma_sum = 0.0;
  Index s = 0;  // number of vectors v^i entering upsilon
  EstimatorConstants constants;
};

/// SAGA: upsilon = (1/(bn)) sum_i (||gx_i(z) - g^x_i||^2 + 4 ||gy_i(z) - g^y_i||^2),
/// gamma = (1/sqrt(bn)) sum_i (||gx_i(z) - g^x_i|| + 2 ||gy_i(z) - g^y_i||).
template <BlockProblem P>
VarianceProbe probe_upsilon_saga(const P& problem, const SagaState& state, const Iterate& z, Index b,
                                 const EstimatorConstants& constants = {}) {
  if (!state.x.initialized() || !state.y.initialized()) {
    throw std::logic_error("probe_upsilon_saga: tables not initialized");
  }
  const Index n = problem.num_components();
  double sq = 0.0;
  double lin = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double dx = (problem.component_grad_x(i, z.x, z.y) - state.x.row(i)).norm();
    const double dy = (problem.component_grad_y(i, z.x, z.y) - state.y.row(i)).norm();
    sq += dx * dx + 4.0 * dy * dy;
    lin += dx + 2.0 * dy;
  }
  const double bn = static_cast<double>(b) * static_cast<double>(n);
  return {sq / bn, lin / std::sqrt(bn), 2 * n, constants};
}

/// SARAH: upsilon = ||est_x - gx||^2 + ||est_y - gy||^2 against supplied full gradients.
inline VarianceProbe probe_upsilon_sarah(const SarahState& state, const Vec& full_gx, const Vec& full_gy,
                                         const EstimatorConstants& constants = {}) {
  const double ex = (state.est_x - full_gx).norm();
  const double ey = (state.est_y - full_gy).norm();
  return {ex * ex + ey * ey, ex + ey, 2, constants};
}

}  // namespace spring
