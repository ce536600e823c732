#pragma once

#include "spring/core.hpp"
#include "spring/estimators.hpp"
#include "spring/rng.hpp"

#include <cmath>

namespace spring {

enum class Algorithm { palm, ipalm, spring_sgd, spring_saga, spring_sarah };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::palm: return "palm";
    case Algorithm::ipalm: return "ipalm";
    case Algorithm::spring_sgd: return "spring-sgd";
    case Algorithm::spring_saga: return "spring-saga";
    case Algorithm::spring_sarah: return "spring-sarah";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::palm, Algorithm::ipalm, Algorithm::spring_sgd, Algorithm::spring_saga,
                      Algorithm::spring_sarah}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

inline bool is_stochastic(Algorithm a) { return a != Algorithm::palm && a != Algorithm::ipalm; }

struct PowerMethodConfig {
  int iterations = 5;
  Index batch = 0;  // Lipschitz subsample size for stochastic runs; 0 uses the solver batch
};

/// Estimates the largest eigenvalue of a symmetric PSD operator (e.g. M^T M, so
/// the result estimates ||M||^2) by `iterations` normalized power steps from a
/// random unit vector, returning ||A v_K||. Never exceeds the true value for a
/// PSD operator. Returns 0 if the operator annihilates the iterate.
template <class Apply>
double power_estimate_sq_norm(Apply&& apply, Index dim, const PowerMethodConfig& config, CounterRng& rng) {
  if (config.iterations < 1) throw std::invalid_argument("power method: iterations must be >= 1");
  if (dim == 0) throw std::invalid_argument("power method: empty operator");
  Vec v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.normalize();
  Vec av = apply(v);
  for (int it = 0; it < config.iterations; ++it) {
    const double nrm = av.norm();
    if (nrm == 0.0) return 0.0;
    v = av / nrm;
    av = apply(v);
  }
  return av.norm();
}

/// Floor applied to Lipschitz estimates before they are inverted.
inline constexpr double kLipschitzFloor = 1e-12;

struct StepSizes {
  double x = 0.0;
  double y = 0.0;
  bool floored = false;  // an estimate was raised to kLipschitzFloor
};

/// Practical per-block step from a Lipschitz estimate:
///   palm 1/L, ipalm 0.9/L, sgd 1/(sqrt(ceil(k b / n)) L), saga 1/(3L), sarah 1/(2L).
inline double practical_step(Algorithm algo, double lipschitz, std::size_t k, Index b, Index n,
                             bool* floored = nullptr) {
  if (!(lipschitz > kLipschitzFloor)) {
    if (floored) *floored = true;
    lipschitz = kLipschitzFloor;
  }
  switch (algo) {
    case Algorithm::palm: return 1.0 / lipschitz;
    case Algorithm::ipalm: return 0.9 / lipschitz;
    case Algorithm::spring_sgd: {
      if (k < 1) throw std::invalid_argument("practical_step: SGD iteration counter starts at 1");
      const std::size_t epoch = (k * b + n - 1) / n;
      return 1.0 / (std::sqrt(static_cast<double>(epoch)) * lipschitz);
    }
    case Algorithm::spring_saga: return 1.0 / (3.0 * lipschitz);
    case Algorithm::spring_sarah: return 1.0 / (2.0 * lipschitz);
  }
  return 0.0;
}

inline StepSizes practical_step_sizes(Algorithm algo, double lx, double ly, std::size_t k, Index b, Index n) {
  StepSizes s;
  s.x = practical_step(algo, lx, k, b, n, &s.floored);
  s.y = practical_step(algo, ly, k, b, n, &s.floored);
  return s;
}

enum class StepBoundVariant {
  sublinear,    // 1/16 coefficients: gradient-map rate
  error_bound,  // 1/20 coefficients: linear rate under an error bound
};

/// Upper bound on max(gamma_x, gamma_y) from the variance-reduction constants:
///   (1/c) sqrt(L^2/V^2 + c/V) - L/(c V),  V = V1 + V_upsilon / rho,  c in {16, 20},
/// evaluated in the algebraically equivalent form 1 / (L + sqrt(L^2 + c V)), which
/// stays finite as V -> 0 (limit 1/(2L)). Callers must additionally keep
/// gamma_x < 1/(4 L_x) and gamma_y < 1/(4 L_y).
inline double theoretical_step_bound(double l_bar, const EstimatorConstants& c, StepBoundVariant variant) {
  if (!(l_bar > 0.0)) throw std::invalid_argument("theoretical_step_bound: L must be positive");
  if (!(c.rho > 0.0 && c.rho <= 1.0)) throw std::invalid_argument("theoretical_step_bound: rho in (0, 1]");
  const double coef = variant == StepBoundVariant::sublinear ? 16.0 : 20.0;
  const double v = c.V1 + c.V_upsilon / c.rho;
  return 1.0 / (l_bar + std::sqrt(l_bar * l_bar + coef * v));
}

/// Closed-form step caps for the two analysed estimators:
///   SARAH with p = n:      1 / (2 L sqrt(30 n))
///   SAGA with b = n^(2/3): 1 / (2 sqrt(2710) L)
inline double theoretical_step_bound(EstimatorKind kind, double L, Index n) {
  if (!(L > 0.0)) throw std::invalid_argument("theoretical_step_bound: L must be positive");
  switch (kind) {
    case EstimatorKind::sarah: return 1.0 / (2.0 * L * std::sqrt(30.0 * static_cast<double>(n)));
    case EstimatorKind::saga: return 1.0 / (2.0 * std::sqrt(2710.0) * L);
    case EstimatorKind::sgd: break;
  }
  throw std::invalid_argument("theoretical_step_bound: no closed-form cap for SGD");
}

/// Strictly-below-1/(4L) cap required alongside the theoretical bound.
inline double quarter_inverse_cap(double L) {
  return std::nextafter(1.0 / (4.0 * L), 0.0);
}

/// Inertial PALM momentum (k - 1) / (k + 2), k >= 1.
inline double ipalm_momentum(std::size_t k) {
  if (k < 1) throw std::invalid_argument("ipalm_momentum: k starts at 1");
  const auto kd = static_cast<double>(k);
  return (kd - 1.0) / (kd + 2.0);
}

/// Power-method estimates of the Lipschitz constants of the batch-mean partial
/// gradients at (x, y) (for L_x) and at (x_next, y) (for L_y).
template <CurvatureProblem P>
double estimate_lipschitz_x(const P& problem, std::span<const Index> batch, const Vec& x, const Vec& y,
                            const PowerMethodConfig& cfg, CounterRng& rng) {
  return power_estimate_sq_norm([&](const Vec& v) { return problem.curvature_x(batch, x, y, v); },
                                problem.dim_x(), cfg, rng);
}

template <CurvatureProblem P>
double estimate_lipschitz_y(const P& problem, std::span<const Index> batch, const Vec& x, const Vec& y,
                            const PowerMethodConfig& cfg, CounterRng& rng) {
  return power_estimate_sq_norm([&](const Vec& v) { return problem.curvature_y(batch, x, y, v); },
                                problem.dim_y(), cfg, rng);
}

}  // namespace spring
