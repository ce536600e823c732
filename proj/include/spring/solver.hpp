#pragma once

#include "spring/core.hpp"
#include "spring/diagnostics.hpp"
#include "spring/estimators.hpp"
#include "spring/lipschitz.hpp"
#include "spring/rng.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>

namespace spring {

enum class StepPolicy { practical, theoretical, fixed };

inline std::string_view to_string(StepPolicy p) {
  switch (p) {
    case StepPolicy::practical: return "practical";
    case StepPolicy::theoretical: return "theoretical";
    case StepPolicy::fixed: return "fixed";
  }
  return "?";
}

inline StepPolicy parse_step_policy(std::string_view s) {
  if (s == "practical") return StepPolicy::practical;
  if (s == "theoretical") return StepPolicy::theoretical;
  if (s == "fixed") return StepPolicy::fixed;
  throw std::invalid_argument("unknown step policy '" + std::string(s) + "'");
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::palm;
  Index batch_size = 1;  // ignored by palm / ipalm
  double sarah_p = 0.0;  // 0 selects p = n
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  StepPolicy step_policy = StepPolicy::practical;
  double fixed_step_x = 0.0;
  double fixed_step_y = 0.0;
  bool warm_start = false;
  std::optional<double> grad_map_tolerance;
  bool lipschitz_refresh = true;
  PowerMethodConfig power;

  // Constants for the theoretical policy. Zero means "estimate at z_0 by power
  // iteration on the full batch" (and M defaults to L, per-block caps to L).
  double lipschitz_L = 0.0;
  double lipschitz_M = 0.0;
  double lipschitz_x = 0.0;
  double lipschitz_y = 0.0;
  StepBoundVariant bound_variant = StepBoundVariant::sublinear;

  bool saga_cold_start = false;  // zero SAGA tables instead of gradients at z_0 (testing)
  bool record_trace = true;
  bool record_timing = true;
  double divergence_factor = 1e6;

  EstimatorKind estimator() const {
    switch (algorithm) {
      case Algorithm::spring_saga: return EstimatorKind::saga;
      case Algorithm::spring_sarah: return EstimatorKind::sarah;
      default: return EstimatorKind::sgd;
    }
  }

  Index effective_batch(Index n) const { return is_stochastic(algorithm) ? batch_size : n; }
  double effective_p(Index n) const { return sarah_p > 0.0 ? sarah_p : static_cast<double>(n); }
  std::size_t steps_per_epoch(Index n) const {
    const Index b = effective_batch(n);
    return (n + b - 1) / b;
  }

  void validate(Index n) const {
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (is_stochastic(algorithm) && (batch_size < 1 || batch_size > n)) {
      throw std::invalid_argument("config: batch size must satisfy 1 <= b <= n");
    }
    if (algorithm == Algorithm::spring_sarah && sarah_p != 0.0 && sarah_p < 1.0) {
      throw std::invalid_argument("config: SARAH period p must be >= 1");
    }
    if (step_policy == StepPolicy::fixed && (!(fixed_step_x > 0.0) || !(fixed_step_y > 0.0))) {
      throw std::invalid_argument("config: fixed step sizes must be positive");
    }
    if (step_policy == StepPolicy::theoretical && algorithm == Algorithm::spring_sgd) {
      throw std::invalid_argument("config: no theoretical step size for the non-variance-reduced SGD estimator");
    }
    if (power.iterations < 1) throw std::invalid_argument("config: power iterations must be >= 1");
    if (power.batch > n) throw std::invalid_argument("config: Lipschitz batch must not exceed n");
  }
};

struct TraceRow {
  double epoch = 0.0;  // sfo_calls / (2n)
  std::size_t sfo_calls = 0;
  double objective = 0.0;
  double grad_map_norm_sq = 0.0;
  double wall_ms = 0.0;
  std::size_t lipschitz_sfo = 0;
};

/// Per-epoch record. The gradient map of a row is G_{g_x/2, g_y/2}(z_k) with the
/// step sizes and post-update x of the step taken from z_k; the last row has no
/// following step and uses the deterministic prox-gradient x instead.
struct Trace {
  std::vector<TraceRow> rows;
  std::string grad_map_mode = "post-update-x";
};

using EstimatorState = std::variant<std::monostate, SagaState, SarahState>;

/// Thrown when a run fails mid-way; carries the partial trace and last finite iterate.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Trace partial, Iterate last, std::size_t iteration)
      : std::runtime_error(what), trace_(std::move(partial)), last_(std::move(last)), iteration_(iteration) {}
  const Trace& trace() const { return trace_; }
  const Iterate& last_iterate() const { return last_; }
  std::size_t iteration() const { return iteration_; }

 private:
  Trace trace_;
  Iterate last_;
  std::size_t iteration_;
};

struct RunResult {
  Iterate z;
  Trace trace;
  EstimatorState state;
  std::size_t iterations = 0;
  std::size_t sfo_calls = 0;
  std::size_t lipschitz_sfo = 0;
  std::size_t diagnostic_grad_evals = 0;
  bool reached_tolerance = false;
};

/// Information passed to a per-iteration observer.
struct StepInfo {
  std::size_t k;
  const Iterate& before;
  const Iterate& after;
  double gamma_x;
  double gamma_y;
  std::size_t sfo_calls;
};
using Observer = std::function<void(const StepInfo&)>;

/// Mini-batch partial-gradient estimator of one SPRING run: batch samplers for
/// each block (independent streams), the SARAH refresh coin and estimator memory.
class StochasticEstimator {
 public:
  StochasticEstimator(EstimatorKind kind, Index n, Index b, double p, std::uint64_t seed)
      : kind_(kind),
        batch_x_(n, b, CounterRng(seed, Stream::batch_x)),
        batch_y_(n, b, CounterRng(seed, Stream::batch_y)),
        coin_(seed, Stream::sarah_coin),
        sarah_(kind == EstimatorKind::sarah ? p : 1.0) {}

  EstimatorKind kind() const { return kind_; }
  Index batch_size() const { return batch_x_.b(); }

  /// While set, the estimator returns plain mini-batch gradients (warm start);
  /// SAGA tables keep absorbing the fresh gradients.
  void set_plain_sgd(bool on) { plain_sgd_ = on; }
  bool plain_sgd() const { return plain_sgd_; }

  SagaState& saga() { return saga_; }
  SarahState& sarah() { return sarah_; }
  const SagaState& saga() const { return saga_; }
  const SarahState& sarah() const { return sarah_; }

  void begin_iteration() {
    refresh_ = kind_ == EstimatorKind::sarah && !plain_sgd_ && sarah_.draw_refresh(coin_);
  }
  bool refresh_drawn() const { return refresh_; }

  template <BlockProblem P>
  Vec estimate_x(const P& problem, const Iterate& z, std::size_t& sfo) {
    const Batch batch = batch_x_.draw();
    if (kind_ == EstimatorKind::sarah && !plain_sgd_) {
      return sarah_estimate_x(problem, batch, z, sarah_, refresh_, &sfo);
    }
    BatchGradients fresh = eval_batch_x(problem, batch, z.x, z.y, &sfo);
    if (kind_ != EstimatorKind::saga) return fresh.mean();
    Vec est = plain_sgd_ ? fresh.mean() : saga_.x.estimate(fresh);
    saga_.x.update(fresh);
    return est;
  }

  template <BlockProblem P>
  Vec estimate_y(const P& problem, const Vec& x_next, const Vec& y, std::size_t& sfo) {
    const Batch batch = batch_y_.draw();
    if (kind_ == EstimatorKind::sarah && !plain_sgd_) {
      return sarah_estimate_y(problem, batch, Iterate{x_next, y}, sarah_, refresh_, &sfo);
    }
    BatchGradients fresh = eval_batch_y(problem, batch, x_next, y, &sfo);
    if (kind_ != EstimatorKind::saga) return fresh.mean();
    Vec est = plain_sgd_ ? fresh.mean() : saga_.y.estimate(fresh);
    saga_.y.update(fresh);
    return est;
  }

  EstimatorState state() const {
    switch (kind_) {
      case EstimatorKind::saga: return saga_;
      case EstimatorKind::sarah: return sarah_;
      case EstimatorKind::sgd: break;
    }
    return std::monostate{};
  }

 private:
  EstimatorKind kind_;
  BatchSampler batch_x_;
  BatchSampler batch_y_;
  CounterRng coin_;
  SagaState saga_;
  SarahState sarah_;
  bool plain_sgd_ = false;
  bool refresh_ = false;
};

struct StepResult {
  Iterate z;
  double gamma_x = 0.0;
  double gamma_y = 0.0;
};

namespace detail {

inline double constant_step(double g) {
  if (!(g > 0.0)) throw std::invalid_argument("step sizes must be positive");
  return g;
}

template <class Rule, class... Args>
double resolve_step(Rule& rule, Args&&... args) {
  if constexpr (std::is_arithmetic_v<std::decay_t<Rule>>) {
    return constant_step(static_cast<double>(rule));
  } else {
    return constant_step(rule(std::forward<Args>(args)...));
  }
}

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

}  // namespace detail

/// One SPRING iteration (strict Gauss-Seidel order):
///   x+ = prox_{gx J}(x - gx est_x(x, y)),  y+ = prox_{gy R}(y - gy est_y(x+, y)).
/// Step rules are either numbers or callables: step_x(z) and step_y(x+, y).
template <BlockProblem P, class StepX, class StepY>
StepResult spring_step(const P& problem, const Iterate& z, StochasticEstimator& est, StepX&& step_x,
                       StepY&& step_y, std::size_t& sfo) {
  check_dims(problem, z.x, z.y);
  StepResult out;
  est.begin_iteration();
  const Vec gx = est.estimate_x(problem, z, sfo);
  out.gamma_x = detail::resolve_step(step_x, z);
  out.z.x = problem.prox_x(out.gamma_x, z.x - out.gamma_x * gx);
  detail::require_finite(out.z.x, "x-iterate");
  const Vec gy = est.estimate_y(problem, out.z.x, z.y, sfo);
  out.gamma_y = detail::resolve_step(step_y, out.z.x, z.y);
  out.z.y = problem.prox_y(out.gamma_y, z.y - out.gamma_y * gy);
  detail::require_finite(out.z.y, "y-iterate");
  return out;
}

/// One PALM iteration with exact partial gradients (2n SFO calls).
template <BlockProblem P, class StepX, class StepY>
StepResult palm_step(const P& problem, const Iterate& z, StepX&& step_x, StepY&& step_y, std::size_t& sfo) {
  check_dims(problem, z.x, z.y);
  const Batch all = full_batch(problem);
  StepResult out;
  const Vec gx = eval_batch_x(problem, all, z.x, z.y, &sfo).mean();
  out.gamma_x = detail::resolve_step(step_x, z);
  out.z.x = problem.prox_x(out.gamma_x, z.x - out.gamma_x * gx);
  detail::require_finite(out.z.x, "x-iterate");
  const Vec gy = eval_batch_y(problem, all, out.z.x, z.y, &sfo).mean();
  out.gamma_y = detail::resolve_step(step_y, out.z.x, z.y);
  out.z.y = problem.prox_y(out.gamma_y, z.y - out.gamma_y * gy);
  detail::require_finite(out.z.y, "y-iterate");
  return out;
}

template <BlockProblem P>
Iterate palm_step(const P& problem, const Iterate& z, double gamma_x, double gamma_y) {
  std::size_t sfo = 0;
  return palm_step(problem, z, gamma_x, gamma_y, sfo).z;
}

/// Inertial PALM: extrapolate each block by beta (x_k - x_{k-1}) before its
/// prox-gradient step; the y-block sees the updated x. Step rules receive the
/// extrapolated points.
template <BlockProblem P, class StepX, class StepY>
StepResult ipalm_step(const P& problem, const Iterate& z, const Iterate& z_prev, double beta, StepX&& step_x,
                      StepY&& step_y, std::size_t& sfo) {
  check_dims(problem, z.x, z.y);
  check_dims(problem, z_prev.x, z_prev.y);
  const Batch all = full_batch(problem);
  StepResult out;
  const Vec x_bar = z.x + beta * (z.x - z_prev.x);
  const Vec gx = eval_batch_x(problem, all, x_bar, z.y, &sfo).mean();
  out.gamma_x = detail::resolve_step(step_x, Iterate{x_bar, z.y});
  out.z.x = problem.prox_x(out.gamma_x, x_bar - out.gamma_x * gx);
  detail::require_finite(out.z.x, "x-iterate");
  const Vec y_bar = z.y + beta * (z.y - z_prev.y);
  const Vec gy = eval_batch_y(problem, all, out.z.x, y_bar, &sfo).mean();
  out.gamma_y = detail::resolve_step(step_y, out.z.x, y_bar);
  out.z.y = problem.prox_y(out.gamma_y, y_bar - out.gamma_y * gy);
  detail::require_finite(out.z.y, "y-iterate");
  return out;
}

template <BlockProblem P>
Iterate ipalm_step(const P& problem, const Iterate& z, const Iterate& z_prev, double gamma_x, double gamma_y,
                   double beta) {
  std::size_t sfo = 0;
  return ipalm_step(problem, z, z_prev, beta, gamma_x, gamma_y, sfo).z;
}

namespace detail {

/// Step-size provider for one run: practical (power-method Lipschitz estimates,
/// optionally refreshed every iteration), theoretical or fixed.
template <BlockProblem P>
class StepPlanner {
 public:
  StepPlanner(const P& problem, const SolverConfig& cfg, const Iterate& z0)
      : problem_(problem),
        cfg_(cfg),
        n_(problem.num_components()),
        b_(cfg.effective_batch(problem.num_components())),
        power_rng_(cfg.seed, Stream::power_method),
        lip_batch_rng_(cfg.seed, Stream::lipschitz_batch) {
    if (cfg.step_policy == StepPolicy::theoretical) init_theoretical(z0);
  }

  /// Which rule governs iteration k (warm-start iterations follow the SGD rule).
  void set_iteration(std::size_t k, bool warm) {
    k_ = k;
    rule_ = warm ? Algorithm::spring_sgd : cfg_.algorithm;
  }

  double step_x(const Iterate& z) {
    switch (cfg_.step_policy) {
      case StepPolicy::fixed: return cfg_.fixed_step_x;
      case StepPolicy::theoretical: return theo_x_;
      case StepPolicy::practical: break;
    }
    if constexpr (CurvatureProblem<P>) {
      if (cfg_.lipschitz_refresh || !cached_x_) {
        lx_ = estimate(true, z.x, z.y);
        cached_x_ = true;
      }
      return practical_step(rule_, lx_, k_, b_, n_, &floored_);
    } else {
      throw std::invalid_argument("practical steps need a problem with curvature estimates");
    }
  }

  double step_y(const Vec& x_next, const Vec& y) {
    switch (cfg_.step_policy) {
      case StepPolicy::fixed: return cfg_.fixed_step_y;
      case StepPolicy::theoretical: return theo_y_;
      case StepPolicy::practical: break;
    }
    if constexpr (CurvatureProblem<P>) {
      if (cfg_.lipschitz_refresh || !cached_y_) {
        ly_ = estimate(false, x_next, y);
        cached_y_ = true;
      }
      return practical_step(rule_, ly_, k_, b_, n_, &floored_);
    } else {
      throw std::invalid_argument("practical steps need a problem with curvature estimates");
    }
  }

  std::size_t lipschitz_sfo() const { return lipschitz_sfo_; }
  bool floored() const { return floored_; }
  double theoretical_x() const { return theo_x_; }
  double theoretical_y() const { return theo_y_; }

 private:
  double estimate(bool x_block, const Vec& x, const Vec& y) {
    if constexpr (CurvatureProblem<P>) {
      const Index lb = cfg_.power.batch ? cfg_.power.batch : b_;
      Batch batch = is_stochastic(cfg_.algorithm) ? sample_subset(lip_batch_rng_, n_, lb) : full_batch(problem_);
      const std::size_t before = applications_;
      auto apply = [&](const Vec& v) {
        ++applications_;
        return x_block ? problem_.curvature_x(batch, x, y, v) : problem_.curvature_y(batch, x, y, v);
      };
      const double L = power_estimate_sq_norm(apply, x_block ? problem_.dim_x() : problem_.dim_y(), cfg_.power,
                                              power_rng_);
      lipschitz_sfo_ += (applications_ - before) * batch.size();
      return L;
    } else {
      (void)x_block, (void)x, (void)y;
      return 0.0;
    }
  }

  void init_theoretical(const Iterate& z0) {
    double L = cfg_.lipschitz_L;
    double lx = cfg_.lipschitz_x;
    double ly = cfg_.lipschitz_y;
    if (!(L > 0.0)) {
      if constexpr (CurvatureProblem<P>) {
        const Batch all = full_batch(problem_);
        PowerMethodConfig pm{std::max(cfg_.power.iterations, 50)};
        const double ex = estimate_lipschitz_x(problem_, all, z0.x, z0.y, pm, power_rng_);
        const double ey = estimate_lipschitz_y(problem_, all, z0.x, z0.y, pm, power_rng_);
        L = std::max(ex, ey);
        if (!(lx > 0.0)) lx = ex;
        if (!(ly > 0.0)) ly = ey;
      } else {
        throw std::invalid_argument("theoretical steps need lipschitz_L or a problem with curvature estimates");
      }
    }
    L = std::max(L, kLipschitzFloor);
    if (!(lx > 0.0)) lx = L;
    if (!(ly > 0.0)) ly = L;
    const double M = cfg_.lipschitz_M > 0.0 ? cfg_.lipschitz_M : L;
    EstimatorConstants c;  // exact gradients: V1 = V_upsilon = 0
    if (is_stochastic(cfg_.algorithm)) {
      c = estimator_constants(cfg_.estimator(), n_, b_, cfg_.effective_p(n_), L, M);
    }
    const double bound = theoretical_step_bound(std::max(lx, ly), c, cfg_.bound_variant);
    theo_x_ = std::min(bound, quarter_inverse_cap(std::max(lx, kLipschitzFloor)));
    theo_y_ = std::min(bound, quarter_inverse_cap(std::max(ly, kLipschitzFloor)));
  }

  const P& problem_;
  const SolverConfig& cfg_;
  Index n_;
  Index b_;
  CounterRng power_rng_;
  CounterRng lip_batch_rng_;
  std::size_t k_ = 1;
  Algorithm rule_ = Algorithm::palm;
  double lx_ = 0.0;
  double ly_ = 0.0;
  bool cached_x_ = false;
  bool cached_y_ = false;
  bool floored_ = false;
  double theo_x_ = 0.0;
  double theo_y_ = 0.0;
  std::size_t applications_ = 0;
  std::size_t lipschitz_sfo_ = 0;
};

}  // namespace detail

/// Runs epochs * ceil(n / b) iterations of the configured algorithm from z0.
/// A trace row is recorded at z0 and after every epoch (objective and gradient
/// map are diagnostic evaluations, not charged to sfo_calls). With warm start,
/// SAGA/SARAH use plain SGD estimates for the first epoch.
template <BlockProblem P>
RunResult run(const P& problem, const SolverConfig& cfg, const Iterate& z0, const Observer& observer = {}) {
  using Clock = std::chrono::steady_clock;
  const Index n = problem.num_components();
  cfg.validate(n);
  check_dims(problem, z0.x, z0.y);
  if (!z0.finite()) throw std::invalid_argument("run: initial point is not finite");

  const Index b = cfg.effective_batch(n);
  const std::size_t per_epoch = cfg.steps_per_epoch(n);
  const std::size_t total = cfg.epochs * per_epoch;
  const bool stochastic = is_stochastic(cfg.algorithm);
  const bool variance_reduced = cfg.algorithm == Algorithm::spring_saga || cfg.algorithm == Algorithm::spring_sarah;

  RunResult res;
  res.z = z0;
  detail::StepPlanner<P> planner(problem, cfg, z0);

  std::optional<StochasticEstimator> est;
  if (stochastic) {
    est.emplace(cfg.estimator(), n, b, cfg.effective_p(n), cfg.seed);
    if (cfg.algorithm == Algorithm::spring_saga) {
      est->saga() = cfg.saga_cold_start ? SagaState::zeros(n, problem.dim_x(), problem.dim_y())
                                        : SagaState::at(problem, z0, &res.sfo_calls);
    }
  }

  double elapsed_ms = 0.0;
  double phi0 = 0.0;
  std::optional<std::size_t> pending;  // trace row still waiting for its gradient map
  Iterate z_prev = z0;                 // previous iterate (inertial PALM)

  const auto diag_grad_map = [&](const Iterate& at, const Vec& x_next, double gx, double gy) {
    res.diagnostic_grad_evals += 2 * n;
    return generalized_gradient_map(problem, at, x_next, gx, gy).norm_sq;
  };
  const auto push_row = [&](const Iterate& z) {
    TraceRow row;
    row.sfo_calls = res.sfo_calls;
    row.epoch = static_cast<double>(res.sfo_calls) / (2.0 * static_cast<double>(n));
    row.objective = objective(problem, z);
    row.wall_ms = cfg.record_timing ? elapsed_ms : 0.0;
    row.lipschitz_sfo = planner.lipschitz_sfo();
    res.trace.rows.push_back(row);
    pending = res.trace.rows.size() - 1;
  };
  const auto fail = [&](const std::string& why, std::size_t k) -> SolverError {
    return SolverError(why, res.trace, res.z, k);
  };

  if (cfg.record_trace) {
    try {
      push_row(z0);
    } catch (const NumericalError& e) {
      throw fail(e.what(), 0);
    }
    phi0 = res.trace.rows.front().objective;
  }

  double last_gx = 0.0;
  double last_gy = 0.0;
  for (std::size_t k = 1; k <= total; ++k) {
    const auto t0 = Clock::now();
    const bool warm = cfg.warm_start && variance_reduced && k <= per_epoch;
    if (est) est->set_plain_sgd(warm);
    planner.set_iteration(k, warm);
    auto rule_x = [&](const Iterate& at) { return planner.step_x(at); };
    auto rule_y = [&](const Vec& xn, const Vec& y) { return planner.step_y(xn, y); };

    StepResult step;
    try {
      switch (cfg.algorithm) {
        case Algorithm::palm:
          step = palm_step(problem, res.z, rule_x, rule_y, res.sfo_calls);
          break;
        case Algorithm::ipalm:
          step = ipalm_step(problem, res.z, z_prev, ipalm_momentum(k), rule_x, rule_y, res.sfo_calls);
          break;
        default:
          step = spring_step(problem, res.z, *est, rule_x, rule_y, res.sfo_calls);
          break;
      }
    } catch (const NumericalError& e) {
      throw fail(std::string(e.what()) + " at iteration " + std::to_string(k), k);
    }
    elapsed_ms += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    last_gx = step.gamma_x;
    last_gy = step.gamma_y;

    if (observer) observer(StepInfo{k, res.z, step.z, step.gamma_x, step.gamma_y, res.sfo_calls});

    bool stop = false;
    if (pending) {
      const double g = diag_grad_map(res.z, step.z.x, step.gamma_x / 2.0, step.gamma_y / 2.0);
      res.trace.rows[*pending].grad_map_norm_sq = g;
      pending.reset();
      if (cfg.grad_map_tolerance && g <= *cfg.grad_map_tolerance) stop = true;
    }

    z_prev = std::move(res.z);
    res.z = std::move(step.z);
    res.iterations = k;

    if (cfg.record_trace && k % per_epoch == 0) {
      try {
        push_row(res.z);
      } catch (const NumericalError& e) {
        throw fail(std::string(e.what()) + " at iteration " + std::to_string(k), k);
      }
      const double phi = res.trace.rows.back().objective;
      if (std::isfinite(phi0) && phi > cfg.divergence_factor * std::max(std::abs(phi0), 1.0)) {
        throw fail("diverged: objective " + std::to_string(phi) + " at iteration " + std::to_string(k), k);
      }
    }
    if (stop) {
      res.reached_tolerance = true;
      break;
    }
  }

  if (pending) {
    // No step follows the final row: use the exact prox-gradient x instead.
    const double gx = last_gx > 0.0 ? last_gx / 2.0 : 1.0;
    const double gy = last_gy > 0.0 ? last_gy / 2.0 : 1.0;
    const Vec x_plus = problem.prox_x(gx, res.z.x - gx * full_grad_x(problem, res.z.x, res.z.y));
    res.diagnostic_grad_evals += n;
    res.trace.rows[*pending].grad_map_norm_sq = diag_grad_map(res.z, x_plus, gx, gy);
    if (cfg.grad_map_tolerance && res.trace.rows[*pending].grad_map_norm_sq <= *cfg.grad_map_tolerance) {
      res.reached_tolerance = true;
    }
  }

  res.lipschitz_sfo = planner.lipschitz_sfo();
  if (est) res.state = est->state();
  return res;
}

}  // namespace spring
