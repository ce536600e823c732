#pragma once

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spring {

using Vec = Eigen::VectorXd;
using Index = std::size_t;
using Batch = std::vector<Index>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when an iterate, gradient or objective stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The block pair z = (x, y).
struct Iterate {
  Vec x;
  Vec y;

  bool finite() const { return x.allFinite() && y.allFinite(); }
  double dist_sq(const Iterate& o) const { return (x - o.x).squaredNorm() + (y - o.y).squaredNorm(); }
};

/// Two-block finite-sum composite problem
///   min_{x,y}  J(x) + (1/n) sum_i F_i(x, y) + R(y).
/// The component index set is owned by the adapter. J and R may be indicators,
/// in which case `reg_x`/`reg_y` return +inf outside their domain.
template <class P>
concept BlockProblem = requires(const P& p, Index i, const Vec& v, double g) {
  { p.num_components() } -> std::convertible_to<Index>;
  { p.dim_x() } -> std::convertible_to<Index>;
  { p.dim_y() } -> std::convertible_to<Index>;
  { p.component_value(i, v, v) } -> std::convertible_to<double>;
  { p.component_grad_x(i, v, v) } -> std::convertible_to<Vec>;
  { p.component_grad_y(i, v, v) } -> std::convertible_to<Vec>;
  { p.reg_x(v) } -> std::convertible_to<double>;
  { p.reg_y(v) } -> std::convertible_to<double>;
  { p.prox_x(g, v) } -> std::convertible_to<Vec>;
  { p.prox_y(g, v) } -> std::convertible_to<Vec>;
};

/// Problems that can report the local curvature of the batch-mean partial
/// gradient as a PSD operator action, used for power-method Lipschitz estimates.
template <class P>
concept CurvatureProblem =
    BlockProblem<P> && requires(const P& p, std::span<const Index> batch, const Vec& v) {
      { p.curvature_x(batch, v, v, v) } -> std::convertible_to<Vec>;
      { p.curvature_y(batch, v, v, v) } -> std::convertible_to<Vec>;
    };

template <BlockProblem P>
void check_dims(const P& problem, const Vec& x, const Vec& y) {
  if (static_cast<Index>(x.size()) != problem.dim_x() ||
      static_cast<Index>(y.size()) != problem.dim_y()) {
    throw std::invalid_argument("dimension mismatch: got (" + std::to_string(x.size()) + ", " +
                                std::to_string(y.size()) + "), problem expects (" +
                                std::to_string(problem.dim_x()) + ", " +
                                std::to_string(problem.dim_y()) + ")");
  }
}

template <BlockProblem P>
Batch full_batch(const P& problem) {
  Batch all(problem.num_components());
  for (Index i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

/// (1/n) sum_i F_i, summed in index order.
template <BlockProblem P>
double smooth_value(const P& problem, const Vec& x, const Vec& y) {
  check_dims(problem, x, y);
  double acc = 0.0;
  const Index n = problem.num_components();
  for (Index i = 0; i < n; ++i) acc += problem.component_value(i, x, y);
  return acc / static_cast<double>(n);
}

/// Phi(x, y) = J(x) + F(x, y) + R(y). Indicator violations give +inf; a NaN
/// anywhere is a numerical failure.
template <BlockProblem P>
double objective(const P& problem, const Iterate& z) {
  const double jx = problem.reg_x(z.x);
  const double ry = problem.reg_y(z.y);
  const double f = smooth_value(problem, z.x, z.y);
  if (std::isnan(jx) || std::isnan(ry) || std::isnan(f)) {
    throw NumericalError("objective: NaN encountered");
  }
  if (jx == kInf || ry == kInf) return kInf;
  return jx + f + ry;
}

/// Mean of the x-partial gradients over `batch`.
template <BlockProblem P>
Vec batch_grad_x(const P& problem, std::span<const Index> batch, const Vec& x, const Vec& y) {
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(problem.dim_x()));
  for (Index j : batch) acc += problem.component_grad_x(j, x, y);
  return acc / static_cast<double>(batch.size());
}

template <BlockProblem P>
Vec batch_grad_y(const P& problem, std::span<const Index> batch, const Vec& x, const Vec& y) {
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(problem.dim_y()));
  for (Index j : batch) acc += problem.component_grad_y(j, x, y);
  return acc / static_cast<double>(batch.size());
}

template <BlockProblem P>
Vec full_grad_x(const P& problem, const Vec& x, const Vec& y) {
  check_dims(problem, x, y);
  const Batch all = full_batch(problem);
  return batch_grad_x(problem, all, x, y);
}

template <BlockProblem P>
Vec full_grad_y(const P& problem, const Vec& x, const Vec& y) {
  check_dims(problem, x, y);
  const Batch all = full_batch(problem);
  return batch_grad_y(problem, all, x, y);
}

/// Evaluates prox_{gamma g}(v) through a caller-supplied proximal map, after
/// validating gamma.
template <class Prox>
Vec prox_generic(Prox&& prox, double gamma, const Vec& v) {
  if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
  return std::forward<Prox>(prox)(gamma, v);
}

/// Type-erased problem assembled from callables. Convenient for tests and for
/// small user-defined models; the built-in adapters implement the concept
/// directly.
struct FunctionProblem {
  using GradFn = std::function<Vec(Index, const Vec&, const Vec&)>;
  using ValueFn = std::function<double(Index, const Vec&, const Vec&)>;
  using RegFn = std::function<double(const Vec&)>;
  using ProxFn = std::function<Vec(double, const Vec&)>;
  using CurvFn = std::function<Vec(std::span<const Index>, const Vec&, const Vec&, const Vec&)>;

  Index n = 1;
  Index m1 = 1;
  Index m2 = 1;
  ValueFn value;
  GradFn grad_x;
  GradFn grad_y;
  RegFn reg_x_fn = [](const Vec&) { return 0.0; };
  RegFn reg_y_fn = [](const Vec&) { return 0.0; };
  ProxFn prox_x_fn = [](double, const Vec& v) { return v; };
  ProxFn prox_y_fn = [](double, const Vec& v) { return v; };
  CurvFn curv_x;
  CurvFn curv_y;

  Index num_components() const { return n; }
  Index dim_x() const { return m1; }
  Index dim_y() const { return m2; }
  double component_value(Index i, const Vec& x, const Vec& y) const { return value(i, x, y); }
  Vec component_grad_x(Index i, const Vec& x, const Vec& y) const { return grad_x(i, x, y); }
  Vec component_grad_y(Index i, const Vec& x, const Vec& y) const { return grad_y(i, x, y); }
  double reg_x(const Vec& x) const { return reg_x_fn(x); }
  double reg_y(const Vec& y) const { return reg_y_fn(y); }
  Vec prox_x(double g, const Vec& v) const { return prox_x_fn(g, v); }
  Vec prox_y(double g, const Vec& v) const { return prox_y_fn(g, v); }
  Vec curvature_x(std::span<const Index> b, const Vec& x, const Vec& y, const Vec& v) const {
    if (!curv_x) throw std::logic_error("FunctionProblem: no curvature_x supplied");
    return curv_x(b, x, y, v);
  }
  Vec curvature_y(std::span<const Index> b, const Vec& x, const Vec& y, const Vec& v) const {
    if (!curv_y) throw std::logic_error("FunctionProblem: no curvature_y supplied");
    return curv_y(b, x, y, v);
  }
};

/// Wraps a problem and counts every component partial-gradient evaluation and
/// curvature application independently of the solver's own bookkeeping.
template <BlockProblem P>
class InstrumentedProblem {
 public:
  explicit InstrumentedProblem(const P& inner) : inner_(&inner) {}

  Index num_components() const { return inner_->num_components(); }
  Index dim_x() const { return inner_->dim_x(); }
  Index dim_y() const { return inner_->dim_y(); }
  double component_value(Index i, const Vec& x, const Vec& y) const {
    return inner_->component_value(i, x, y);
  }
  Vec component_grad_x(Index i, const Vec& x, const Vec& y) const {
    ++grad_calls_;
    return inner_->component_grad_x(i, x, y);
  }
  Vec component_grad_y(Index i, const Vec& x, const Vec& y) const {
    ++grad_calls_;
    return inner_->component_grad_y(i, x, y);
  }
  double reg_x(const Vec& x) const { return inner_->reg_x(x); }
  double reg_y(const Vec& y) const { return inner_->reg_y(y); }
  Vec prox_x(double g, const Vec& v) const { return inner_->prox_x(g, v); }
  Vec prox_y(double g, const Vec& v) const { return inner_->prox_y(g, v); }

  Vec curvature_x(std::span<const Index> b, const Vec& x, const Vec& y, const Vec& v) const
    requires CurvatureProblem<P>
  {
    curvature_calls_ += b.size();
    return inner_->curvature_x(b, x, y, v);
  }
  Vec curvature_y(std::span<const Index> b, const Vec& x, const Vec& y, const Vec& v) const
    requires CurvatureProblem<P>
  {
    curvature_calls_ += b.size();
    return inner_->curvature_y(b, x, y, v);
  }

  std::size_t grad_calls() const { return grad_calls_.load(); }
  std::size_t curvature_calls() const { return curvature_calls_.load(); }

 private:
  const P* inner_;
  mutable std::atomic<std::size_t> grad_calls_{0};
  mutable std::atomic<std::size_t> curvature_calls_{0};
};

}  // namespace spring
