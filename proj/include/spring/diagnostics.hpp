#pragma once

#include "spring/core.hpp"
#include "spring/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace spring {

/// Generalized gradient map G_{g1,g2}(z) and its squared norm.
struct GradMapEval {
  Vec g_x;
  Vec g_y;
  double norm_sq = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

/// g_x = (x - prox_{g1 J}(x - g1 grad_x F(x, y))) / g1
/// g_y = (y - prox_{g2 R}(y - g2 grad_y F(x_next, y))) / g2
/// with exact full partial gradients. Pass x_next = x for the symmetric variant.
template <BlockProblem P>
GradMapEval generalized_gradient_map(const P& problem, const Iterate& z, const Vec& x_next, double gamma1,
                                     double gamma2) {
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) throw std::invalid_argument("gradient map: parameters must be positive");
  check_dims(problem, x_next, z.y);
  GradMapEval out;
  out.gamma1 = gamma1;
  out.gamma2 = gamma2;
  const Vec gx = full_grad_x(problem, z.x, z.y);
  out.g_x = (z.x - problem.prox_x(gamma1, z.x - gamma1 * gx)) / gamma1;
  const Vec gy = full_grad_y(problem, x_next, z.y);
  out.g_y = (z.y - problem.prox_y(gamma2, z.y - gamma2 * gy)) / gamma2;
  out.norm_sq = out.g_x.squaredNorm() + out.g_y.squaredNorm();
  return out;
}

/// dist(0, G) <= eps.
inline bool is_eps_critical(const GradMapEval& eval, double eps) { return std::sqrt(eval.norm_sq) <= eps; }

/// Psi = Phi(z_k) + upsilon / (2 rho sqrt(2 V)) + sqrt(V / 2) ||z_k - z_{k-1}||^2,
/// V = V1 + V_upsilon / rho.
template <BlockProblem P>
double lyapunov_psi(const P& problem, const Iterate& z_k, const Iterate& z_prev, double upsilon,
                    const EstimatorConstants& c) {
  const double v = c.V1 + c.V_upsilon / c.rho;
  const double phi = objective(problem, z_k);
  const double var_term = upsilon == 0.0 ? 0.0 : upsilon / (2.0 * c.rho * std::sqrt(2.0 * v));
  return phi + var_term + std::sqrt(v) / std::sqrt(2.0) * z_k.dist_sq(z_prev);
}

/// Central finite differences of each component value against the analytic
/// component gradients. Returns the worst ||fd - g||_inf / (1 + ||g||_inf) over
/// components and blocks.
template <BlockProblem P>
double fd_gradient_check(const P& problem, const Iterate& z, double h = 1e-6) {
  check_dims(problem, z.x, z.y);
  double worst = 0.0;
  const Index n = problem.num_components();
  for (Index i = 0; i < n; ++i) {
    const auto value = [&](const Vec& x, const Vec& y) { return problem.component_value(i, x, y); };
    const auto check_block = [&](const Vec& analytic, bool x_block) {
      Vec xp = z.x;
      Vec yp = z.y;
      Vec& var = x_block ? xp : yp;
      double err = 0.0;
      for (Eigen::Index j = 0; j < var.size(); ++j) {
        const double orig = var[j];
        var[j] = orig + h;
        const double fp = value(xp, yp);
        var[j] = orig - h;
        const double fm = value(xp, yp);
        var[j] = orig;
        err = std::max(err, std::abs((fp - fm) / (2.0 * h) - analytic[j]));
      }
      const double scale = analytic.size() ? analytic.cwiseAbs().maxCoeff() : 0.0;
      worst = std::max(worst, err / (1.0 + scale));
    };
    check_block(problem.component_grad_x(i, z.x, z.y), true);
    check_block(problem.component_grad_y(i, z.x, z.y), false);
  }
  return worst;
}

/// Calls f(batch) for every b-subset of {0..n-1} in lexicographic order.
inline void for_each_combination(Index n, Index b, const std::function<void(const Batch&)>& f) {
  if (b == 0 || b > n) throw std::invalid_argument("for_each_combination: need 1 <= b <= n");
  Batch idx(b);
  for (Index i = 0; i < b; ++i) idx[i] = i;
  while (true) {
    f(idx);
    Index pos = b;
    while (pos > 0 && idx[pos - 1] == n - b + pos - 1) --pos;
    if (pos == 0) return;
    ++idx[pos - 1];
    for (Index j = pos; j < b; ++j) idx[j] = idx[j - 1] + 1;
  }
}

/// Exhaustive oracle for the projection of v onto {p >= 0, ||p||_0 <= s}:
/// enumerates all supports of size <= s in lexicographic order and
/// keeps the first strict minimizer of 0.5||p - v||^2. gamma is irrelevant for an
/// indicator and only validated. Test-scale only (dim <= 12).
inline Vec bruteforce_prox_l0_nonneg(const Vec& v, Index s, double gamma = 1.0) {
  if (!(gamma > 0.0)) throw std::invalid_argument("bruteforce prox: gamma must be positive");
  const auto dim = static_cast<Index>(v.size());
  if (dim > 12) throw std::invalid_argument("bruteforce prox: dimension too large");
  Vec best = Vec::Zero(v.size());
  double best_cost = kInf;
  Batch support;
  // Depth-first enumeration yields supports in lexicographic order.
  std::function<void(Index)> visit = [&](Index start) {
    {
      Vec p = Vec::Zero(v.size());
      for (Index i : support) p[static_cast<Eigen::Index>(i)] = std::max(v[static_cast<Eigen::Index>(i)], 0.0);
      // Summing sorted terms makes equal multisets give bit-identical costs.
      std::vector<double> terms;
      for (Eigen::Index i = 0; i < v.size(); ++i) terms.push_back(0.5 * (p[i] - v[i]) * (p[i] - v[i]));
      std::sort(terms.begin(), terms.end());
      double cost = 0.0;
      for (double t : terms) cost += t;
      if (cost < best_cost) {
        best_cost = cost;
        best = p;
      }
    }
    if (support.size() == s) return;
    for (Index i = start; i < dim; ++i) {
      support.push_back(i);
      visit(i + 1);
      support.pop_back();
    }
  };
  visit(0);
  return best;
}

enum class Block { x, y };

/// Exact mean-squared error of one estimator over all C(n, b) batches at point z
/// (for the y-block, z = (x_{k+1}, y_k)). SAGA needs `saga`; SARAH needs `sarah`
/// holding the previous estimate and anchor, and is evaluated on its recursive
/// branch. Enforces n <= 8.
template <BlockProblem P>
double exhaustive_mse(const P& problem, EstimatorKind kind, Index b, Block block, const Iterate& z,
                      const SagaState* saga = nullptr, const SarahState* sarah = nullptr) {
  const Index n = problem.num_components();
  if (n > 8) throw std::invalid_argument("exhaustive_mse: n <= 8 required");
  const Vec truth = block == Block::x ? full_grad_x(problem, z.x, z.y) : full_grad_y(problem, z.x, z.y);
  double acc = 0.0;
  std::size_t count = 0;
  for_each_combination(n, b, [&](const Batch& batch) {
    Vec est;
    switch (kind) {
      case EstimatorKind::sgd:
        est = block == Block::x ? sgd_estimate_x(problem, batch, z) : sgd_estimate_y(problem, batch, z.x, z.y);
        break;
      case EstimatorKind::saga:
        if (!saga) throw std::invalid_argument("exhaustive_mse: SAGA state required");
        est = block == Block::x ? saga_estimate_x(problem, batch, z, *saga)
                                : saga_estimate_y(problem, batch, z.x, z.y, *saga);
        break;
      case EstimatorKind::sarah: {
        if (!sarah || !sarah->initialized) throw std::invalid_argument("exhaustive_mse: SARAH state required");
        SarahState copy = *sarah;
        est = block == Block::x ? sarah_estimate_x(problem, batch, z, copy, false)
                                : sarah_estimate_y(problem, batch, z, copy, false);
        break;
      }
    }
    acc += (est - truth).squaredNorm();
    ++count;
  });
  return acc / static_cast<double>(count);
}

}  // namespace spring
