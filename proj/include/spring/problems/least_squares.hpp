#pragma once

#include "spring/core.hpp"
#include "spring/prox.hpp"
#include "spring/rng.hpp"

#include <Eigen/Dense>

namespace spring {

/// Simple regularizers for the toy problems.
struct SimpleReg {
  enum class Kind { none, nonneg, l1 } kind = Kind::none;
  double weight = 0.0;

  double value(const Vec& v) const {
    switch (kind) {
      case Kind::none: return 0.0;
      case Kind::nonneg: return (v.array() < 0.0).any() ? kInf : 0.0;
      case Kind::l1: return weight * v.lpNorm<1>();
    }
    return 0.0;
  }
  Vec prox(double gamma, const Vec& v) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
    switch (kind) {
      case Kind::none: return v;
      case Kind::nonneg: return prox::nonneg(v);
      case Kind::l1: return prox::soft_threshold(v, gamma * weight);
    }
    return v;
  }
};

/// Coupled least-squares components F_i(x, y) = 0.5 ||B_i [x; y] - c_i||^2.
/// Each B_i is k_i x (m1 + m2); the curvature of block x is the mean of the
/// corresponding diagonal blocks of B_i^T B_i (exact Hessian).
class LeastSquaresProblem {
 public:
  LeastSquaresProblem(std::vector<Eigen::MatrixXd> B, std::vector<Vec> c, Index m1, Index m2,
                      SimpleReg reg_x = {}, SimpleReg reg_y = {})
      : B_(std::move(B)), c_(std::move(c)), m1_(m1), m2_(m2), rx_(reg_x), ry_(reg_y) {
    if (B_.empty() || B_.size() != c_.size()) throw std::invalid_argument("LeastSquaresProblem: bad components");
    for (Index i = 0; i < B_.size(); ++i) {
      if (static_cast<Index>(B_[i].cols()) != m1 + m2 || B_[i].rows() != c_[i].size()) {
        throw std::invalid_argument("LeastSquaresProblem: component " + std::to_string(i) + " has wrong shape");
      }
    }
    for (const auto& b : B_) H_.push_back(b.transpose() * b);
  }

  /// Random dense instance; `rows` residual rows per component.
  static LeastSquaresProblem random(Index n, Index m1, Index m2, std::uint64_t seed, Index rows = 3,
                                    SimpleReg reg_x = {}, SimpleReg reg_y = {}) {
    CounterRng rng(seed, Stream::data);
    std::vector<Eigen::MatrixXd> B;
    std::vector<Vec> c;
    for (Index i = 0; i < n; ++i) {
      Eigen::MatrixXd b(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m1 + m2));
      for (Eigen::Index r = 0; r < b.rows(); ++r)
        for (Eigen::Index s = 0; s < b.cols(); ++s) b(r, s) = rng.normal();
      Vec ci(static_cast<Eigen::Index>(rows));
      for (Eigen::Index r = 0; r < ci.size(); ++r) ci[r] = rng.normal();
      B.push_back(std::move(b));
      c.push_back(std::move(ci));
    }
    return {std::move(B), std::move(c), m1, m2, reg_x, reg_y};
  }

  /// F(x, y) = 0.5||x - a||^2 + 0.5||y - b||^2 split into n components with random
  /// positive per-coordinate weights whose mean over components is exactly 1
  /// up to rounding. Component i carries 0.5 sum_j w_ij (z_j - t_j)^2.
  static LeastSquaresProblem separable(const Vec& a, const Vec& b, Index n, std::uint64_t seed) {
    const Index m1 = static_cast<Index>(a.size());
    const Index m2 = static_cast<Index>(b.size());
    const Index m = m1 + m2;
    Vec target(static_cast<Eigen::Index>(m));
    target << a, b;
    CounterRng rng(seed, Stream::data);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(0.5, 1.5);
    for (Eigen::Index j = 0; j < w.cols(); ++j) w.col(j) *= static_cast<double>(n) / w.col(j).sum();
    std::vector<Eigen::MatrixXd> B;
    std::vector<Vec> c;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      const Vec root = w.row(i).transpose().cwiseSqrt();
      B.emplace_back(root.asDiagonal());
      c.push_back(root.cwiseProduct(target));
    }
    return {std::move(B), std::move(c), m1, m2};
  }

  Index num_components() const { return B_.size(); }
  Index dim_x() const { return m1_; }
  Index dim_y() const { return m2_; }

  double component_value(Index i, const Vec& x, const Vec& y) const {
    return 0.5 * residual(i, x, y).squaredNorm();
  }
  Vec component_grad_x(Index i, const Vec& x, const Vec& y) const {
    return B_.at(i).leftCols(static_cast<Eigen::Index>(m1_)).transpose() * residual(i, x, y);
  }
  Vec component_grad_y(Index i, const Vec& x, const Vec& y) const {
    return B_.at(i).rightCols(static_cast<Eigen::Index>(m2_)).transpose() * residual(i, x, y);
  }

  double reg_x(const Vec& x) const { return rx_.value(x); }
  double reg_y(const Vec& y) const { return ry_.value(y); }
  Vec prox_x(double g, const Vec& v) const { return rx_.prox(g, v); }
  Vec prox_y(double g, const Vec& v) const { return ry_.prox(g, v); }

  Vec curvature_x(std::span<const Index> batch, const Vec&, const Vec&, const Vec& v) const {
    const auto m1 = static_cast<Eigen::Index>(m1_);
    Vec acc = Vec::Zero(m1);
    for (Index j : batch) acc += H_.at(j).topLeftCorner(m1, m1) * v;
    return acc / static_cast<double>(batch.size());
  }
  Vec curvature_y(std::span<const Index> batch, const Vec&, const Vec&, const Vec& v) const {
    const auto m2 = static_cast<Eigen::Index>(m2_);
    Vec acc = Vec::Zero(m2);
    for (Index j : batch) acc += H_.at(j).bottomRightCorner(m2, m2) * v;
    return acc / static_cast<double>(batch.size());
  }

  /// Exact constants: Lipschitz moduli of the mean partial gradients (largest
  /// eigenvalue of the mean diagonal Hessian blocks) and the largest component
  /// Hessian norm (M).
  double exact_lipschitz_x() const { return mean_block_eig(true); }
  double exact_lipschitz_y() const { return mean_block_eig(false); }
  double max_component_lipschitz() const {
    double best = 0.0;
    for (const auto& h : H_) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
      best = std::max(best, es.eigenvalues().maxCoeff());
    }
    return best;
  }

  const Eigen::MatrixXd& hessian(Index i) const { return H_.at(i); }

 private:
  Vec residual(Index i, const Vec& x, const Vec& y) const {
    const auto& b = B_.at(i);
    return b.leftCols(static_cast<Eigen::Index>(m1_)) * x + b.rightCols(static_cast<Eigen::Index>(m2_)) * y - c_.at(i);
  }

  double mean_block_eig(bool x_block) const {
    const auto m1 = static_cast<Eigen::Index>(m1_);
    const auto m2 = static_cast<Eigen::Index>(m2_);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(x_block ? m1 : m2, x_block ? m1 : m2);
    for (const auto& h : H_) acc += x_block ? Eigen::MatrixXd(h.topLeftCorner(m1, m1)) : Eigen::MatrixXd(h.bottomRightCorner(m2, m2));
    acc /= static_cast<double>(H_.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(acc, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }

  std::vector<Eigen::MatrixXd> B_;
  std::vector<Vec> c_;
  std::vector<Eigen::MatrixXd> H_;
  Index m1_;
  Index m2_;
  SimpleReg rx_;
  SimpleReg ry_;
};

}  // namespace spring
