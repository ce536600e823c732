#pragma once

#include "spring/core.hpp"
#include "spring/prox.hpp"

#include <Eigen/Dense>

namespace spring {

/// Smooth part shared by the matrix-factorization models: ||A - XY||_F^2 with
/// X (rows x r) and Y (r x d), both stored column-major in the flat blocks.
/// Component i is column i of A, scaled by d so the mean over components is the
/// full Frobenius loss:  F_i = d ||A_i - X Y_i||^2.
class FactorizationLoss {
 public:
  FactorizationLoss(Eigen::MatrixXd A, Index rank) : A_(std::move(A)), r_(rank) {
    if (A_.size() == 0) throw std::invalid_argument("factorization: empty data matrix");
    if (r_ < 1 || r_ > static_cast<Index>(A_.cols())) {
      throw std::invalid_argument("factorization: rank must satisfy 1 <= r <= d");
    }
  }

  Index num_components() const { return static_cast<Index>(A_.cols()); }
  Index dim_x() const { return rows() * r_; }
  Index dim_y() const { return r_ * num_components(); }
  Index rows() const { return static_cast<Index>(A_.rows()); }
  Index rank() const { return r_; }
  const Eigen::MatrixXd& data() const { return A_; }

  Eigen::Map<const Eigen::MatrixXd> X(const Vec& x) const {
    return {x.data(), A_.rows(), static_cast<Eigen::Index>(r_)};
  }
  Eigen::Map<const Eigen::MatrixXd> Y(const Vec& y) const {
    return {y.data(), static_cast<Eigen::Index>(r_), A_.cols()};
  }

  double component_value(Index i, const Vec& x, const Vec& y) const {
    return scale() * residual(i, x, y).squaredNorm();
  }

  /// 2d (X Y_i - A_i) Y_i^T
  Vec component_grad_x(Index i, const Vec& x, const Vec& y) const {
    const Vec res = residual(i, x, y);
    Eigen::MatrixXd g = (2.0 * scale()) * res * y_col(i, y).transpose();
    return Eigen::Map<const Vec>(g.data(), g.size());
  }

  /// 2d X^T (X Y_i - A_i) in column i, zero elsewhere.
  Vec component_grad_y(Index i, const Vec& x, const Vec& y) const {
    Vec g = Vec::Zero(static_cast<Eigen::Index>(dim_y()));
    g.segment(static_cast<Eigen::Index>(i * r_), static_cast<Eigen::Index>(r_)) =
        (2.0 * scale()) * X(x).transpose() * residual(i, x, y);
    return g;
  }

  /// Batch-mean Hessian in X: V -> (2d/b) V Y_B Y_B^T.
  Vec curvature_x(std::span<const Index> batch, const Vec&, const Vec& y, const Vec& v) const {
    const auto r = static_cast<Eigen::Index>(r_);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(r, r);
    for (Index j : batch) gram.noalias() += y_col(j, y) * y_col(j, y).transpose();
    Eigen::Map<const Eigen::MatrixXd> V(v.data(), A_.rows(), r);
    Eigen::MatrixXd out = (2.0 * scale() / static_cast<double>(batch.size())) * V * gram;
    return Eigen::Map<const Vec>(out.data(), out.size());
  }

  /// Batch-mean Hessian in Y: column j in the batch -> (2d/b) X^T X V_j.
  Vec curvature_y(std::span<const Index> batch, const Vec& x, const Vec&, const Vec& v) const {
    const auto r = static_cast<Eigen::Index>(r_);
    const Eigen::MatrixXd gram = X(x).transpose() * X(x);
    Vec out = Vec::Zero(v.size());
    const double s = 2.0 * scale() / static_cast<double>(batch.size());
    for (Index j : batch) {
      const auto off = static_cast<Eigen::Index>(j * r_);
      out.segment(off, r) = s * gram * v.segment(off, r);
    }
    return out;
  }

  /// ||A - XY||_F^2 evaluated in one shot (reference for the component split).
  double monolithic_loss(const Vec& x, const Vec& y) const { return (A_ - X(x) * Y(y)).squaredNorm(); }

 private:
  double scale() const { return static_cast<double>(A_.cols()); }
  Eigen::Map<const Vec> y_col(Index i, const Vec& y) const {
    return {y.data() + i * r_, static_cast<Eigen::Index>(r_)};
  }
  Vec residual(Index i, const Vec& x, const Vec& y) const {
    check_dims(*this, x, y);
    return X(x) * y_col(i, y) - A_.col(static_cast<Eigen::Index>(i));
  }

  // check_dims needs the concept, which this base alone does not satisfy.
  static void check_dims(const FactorizationLoss& p, const Vec& x, const Vec& y) {
    if (static_cast<Index>(x.size()) != p.dim_x() || static_cast<Index>(y.size()) != p.dim_y()) {
      throw std::invalid_argument("factorization: dimension mismatch");
    }
  }

  Eigen::MatrixXd A_;
  Index r_;
};

/// min ||A - XY||_F^2  s.t.  X, Y >= 0,  ||X_i||_0 <= s for every column of X.
class SparseNmfProblem : public FactorizationLoss {
 public:
  SparseNmfProblem(Eigen::MatrixXd A, Index rank, Index sparsity)
      : FactorizationLoss(std::move(A), rank), s_(sparsity) {
    if (s_ < 1 || s_ > rows()) throw std::invalid_argument("sparse NMF: need 1 <= s <= rows");
  }

  Index sparsity() const { return s_; }

  double reg_x(const Vec& x) const {
    if ((x.array() < 0.0).any()) return kInf;
    for (Index c = 0; c < rank(); ++c) {
      const auto col = x.segment(static_cast<Eigen::Index>(c * rows()), static_cast<Eigen::Index>(rows()));
      if (static_cast<Index>((col.array() != 0.0).count()) > s_) return kInf;
    }
    return 0.0;
  }
  double reg_y(const Vec& y) const { return (y.array() < 0.0).any() ? kInf : 0.0; }
  Vec prox_x(double gamma, const Vec& v) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
    return prox::l0_nonneg_columns(v, rows(), s_);
  }
  Vec prox_y(double gamma, const Vec& v) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
    return prox::nonneg(v);
  }

 private:
  Index s_;
};

/// min ||A - XY||_F^2 + lambda1 ||X||_1 + lambda2 ||Y||_1.
class SparsePcaProblem : public FactorizationLoss {
 public:
  SparsePcaProblem(Eigen::MatrixXd A, Index rank, double lambda1, double lambda2)
      : FactorizationLoss(std::move(A), rank), l1_(lambda1), l2_(lambda2) {
    if (l1_ < 0.0 || l2_ < 0.0) throw std::invalid_argument("sparse PCA: weights must be nonnegative");
  }

  double reg_x(const Vec& x) const { return l1_ * x.lpNorm<1>(); }
  double reg_y(const Vec& y) const { return l2_ * y.lpNorm<1>(); }
  Vec prox_x(double gamma, const Vec& v) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
    return prox::soft_threshold(v, gamma * l1_);
  }
  Vec prox_y(double gamma, const Vec& v) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
    return prox::soft_threshold(v, gamma * l2_);
  }

 private:
  double l1_;
  double l2_;
};

}  // namespace spring
