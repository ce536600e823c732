#include "spring/diagnostics.hpp"
#include "spring/problems/deblur.hpp"
#include "spring/problems/factorization.hpp"
#include "spring/problems/least_squares.hpp"

#include <gtest/gtest.h>

using namespace spring;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) out[i++] = e;
  return out;
}

Eigen::MatrixXd rmat(CounterRng& r, Eigen::Index h, Eigen::Index w) {
  Eigen::MatrixXd M(h, w);
  for (Eigen::Index i = 0; i < M.size(); ++i) M(i) = r.uniform();
  return M;
}

Image rimg(CounterRng& r, Eigen::Index h, Eigen::Index w) { return rmat(r, h, w); }

Vec rvec(CounterRng& r, Index m, double lo = -1, double hi = 1) {
  Vec v(static_cast<Eigen::Index>(m));
  for (auto& e : v) e = r.uniform(lo, hi);
  return v;
}

Vec flat(const Image& I) { return Eigen::Map<const Vec>(I.data(), I.size()); }

// Direct quadruple loop: out(r, c) = sum_{a, b} X(r + kh - 1 - a, c + kw - 1 - b) Y(a, b).
Image naive_conv(const Image& X, const Image& Y) {
  const auto kh = Y.rows(), kw = Y.cols();
  Image out(X.rows() - kh + 1, X.cols() - kw + 1);
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      double acc = 0;
      for (Eigen::Index a = 0; a < kh; ++a)
        for (Eigen::Index b = 0; b < kw; ++b) acc += X(r + kh - 1 - a, c + kw - 1 - b) * Y(a, b);
      out(r, c) = acc;
    }
  return out;
}

}  // namespace

TEST(Prox, L0NonnegExamples) {
  EXPECT_EQ(prox::l0_nonneg_columns(vec({-1, 2, 0.5}), 3, 1), vec({0, 2, 0}));
  EXPECT_EQ(prox::l0_nonneg_columns(vec({0, 2, 0.5}), 3, 2), vec({0, 2, 0.5}));
  EXPECT_EQ(prox::l0_nonneg_columns(vec({1, 1, 0}), 3, 1), vec({1, 0, 0}));
  // two columns, processed independently
  EXPECT_EQ(prox::l0_nonneg_columns(vec({3, 1, -2, 0, 5, 4}), 3, 1), vec({3, 0, 0, 0, 5, 0}));
  EXPECT_THROW(prox::l0_nonneg_columns(vec({1, 2}), 2, 0), std::invalid_argument);
  EXPECT_THROW(prox::l0_nonneg_columns(vec({1, 2, 3}), 2, 1), std::invalid_argument);
}

TEST(Prox, L0NonnegAgreesWithOracleAndIsFeasible) {
  CounterRng r(1, Stream::test);
  for (int t = 0; t < 300; ++t) {
    const Index dim = 1 + r.below(8), s = 1 + r.below(dim);
    Vec v = rvec(r, dim, -2, 2);
    if (t % 3 == 0) v = v.array().round();
    const Vec p = prox::l0_nonneg_columns(v, dim, s);
    EXPECT_EQ(p, bruteforce_prox_l0_nonneg(v, s));
    EXPECT_TRUE((p.array() >= 0).all());
    EXPECT_LE(static_cast<Index>((p.array() != 0).count()), s);
  }
}

TEST(Prox, NonnegAndSoftThreshold) {
  EXPECT_EQ(prox::nonneg(vec({-1, 2})), vec({0, 2}));
  EXPECT_EQ(prox::nonneg(Vec::Zero(3)), Vec::Zero(3));
  EXPECT_EQ(prox::soft_threshold(vec({3, -0.5}), 1.0), vec({2, 0}));
  EXPECT_EQ(prox::soft_threshold(vec({3, -0.5}), 0.0), vec({3, -0.5}));
  EXPECT_EQ(prox::soft_threshold(vec({3, -0.5}), 3.0), Vec::Zero(2));
}

TEST(Prox, ProjectBoxL1Examples) {
  EXPECT_EQ(prox::project_box_l1(vec({0.2, 0.3})), vec({0.2, 0.3}));
  EXPECT_EQ(prox::project_box_l1(vec({0.9, 0.05})), vec({0.9, 0.05}));
  const Vec p = prox::project_box_l1(vec({2, 2}));
  EXPECT_NEAR(p[0], 0.5, 1e-11);
  EXPECT_NEAR(p[1], 0.5, 1e-11);
  EXPECT_LE(p.sum(), 1.0);
}

TEST(Prox, ProjectBoxL1AgainstGrid) {
  // Minimize ||p - v||^2 over a fine grid of the feasible set in 2-D.
  CounterRng r(2, Stream::test);
  const int N = 400;
  for (int t = 0; t < 20; ++t) {
    const Vec v = rvec(r, 2, -0.5, 2.0);
    double best = kInf;
    Vec arg;
    for (int i = 0; i <= N; ++i)
      for (int j = 0; i + j <= N; ++j) {
        const Vec q = vec({double(i) / N, double(j) / N});
        const double d = (q - v).squaredNorm();
        if (d < best) best = d, arg = q;
      }
    const Vec p = prox::project_box_l1(v);
    EXPECT_LE((p - v).squaredNorm(), best + 1e-12);
    EXPECT_LT((p - arg).norm(), 2.0 / N);
    EXPECT_LE(p.sum(), 1.0);
    EXPECT_TRUE((p.array() >= 0).all() && (p.array() <= 1).all());
  }
}

TEST(Factorization, ComponentMeanIsFrobeniusLoss) {
  CounterRng r(3, Stream::test);
  const SparsePcaProblem p(rmat(r, 7, 5), 2, 0.1, 0.2);
  for (int t = 0; t < 50; ++t) {
    const Vec x = rvec(r, p.dim_x()), y = rvec(r, p.dim_y());
    const double mono = p.monolithic_loss(x, y);
    EXPECT_NEAR(smooth_value(p, x, y), mono, 1e-10 * std::max(1.0, mono));
  }
}

TEST(Factorization, ZeroAtExactFactorization) {
  CounterRng r(4, Stream::test);
  const Eigen::MatrixXd X = rmat(r, 6, 2), Y = rmat(r, 2, 4);
  const SparseNmfProblem p(X * Y, 2, 6);
  const Iterate z{Eigen::Map<const Vec>(X.data(), X.size()), Eigen::Map<const Vec>(Y.data(), Y.size())};
  EXPECT_NEAR(objective(p, z), 0.0, 1e-24);
  EXPECT_LT(full_grad_x(p, z.x, z.y).norm(), 1e-12);
  EXPECT_LT(full_grad_y(p, z.x, z.y).norm(), 1e-12);
}

TEST(Factorization, HandComputedYGradient) {
  // X = I (2x2), Y = 0, A = I: component 0 has residual e_1, gradient -2 d e_1 in column 0.
  const SparsePcaProblem p(Eigen::MatrixXd::Identity(2, 2), 2, 0, 0);
  const Vec x = vec({1, 0, 0, 1});
  const Vec g = p.component_grad_y(0, x, Vec::Zero(4));
  EXPECT_EQ(g, vec({-4, 0, 0, 0}));
}

TEST(Factorization, PcaObjectiveExamples) {
  const SparsePcaProblem p(Eigen::MatrixXd::Zero(2, 2), 1, 1.0, 1.0);
  Iterate z{Vec::Zero(2), Vec::Zero(2)};
  EXPECT_EQ(objective(p, z), 0.0);
  z.x[0] = 2.0;
  EXPECT_EQ(objective(p, z), 2.0);
}

TEST(Factorization, NmfRegularizers) {
  const SparseNmfProblem p(Eigen::MatrixXd::Ones(3, 2), 1, 1);
  EXPECT_EQ(p.reg_x(vec({1, 0, 0})), 0.0);
  EXPECT_EQ(p.reg_x(vec({1, 1, 0})), kInf);
  EXPECT_EQ(p.reg_x(vec({-1, 0, 0})), kInf);
  EXPECT_EQ(p.reg_y(vec({-1, 0})), kInf);
  EXPECT_THROW(SparseNmfProblem(Eigen::MatrixXd::Ones(3, 2), 1, 4), std::invalid_argument);
  EXPECT_THROW(SparseNmfProblem(Eigen::MatrixXd::Ones(3, 2), 3, 1), std::invalid_argument);
}

TEST(Factorization, FiniteDifferences) {
  CounterRng r(5, Stream::test);
  const SparseNmfProblem nmf(rmat(r, 6, 4), 2, 3);
  const SparsePcaProblem pca(rmat(r, 5, 6), 3, 0.1, 0.1);
  for (int t = 0; t < 10; ++t) {
    EXPECT_LE(fd_gradient_check(nmf, Iterate{rvec(r, nmf.dim_x(), 0, 1), rvec(r, nmf.dim_y(), 0, 1)}), 1e-5);
    EXPECT_LE(fd_gradient_check(pca, Iterate{rvec(r, pca.dim_x()), rvec(r, pca.dim_y())}), 1e-5);
  }
}

TEST(Factorization, CurvatureIsBatchHessian) {
  // For the bilinear loss, the x-block Hessian of the batch mean is linear: compare
  // the curvature action with a difference of batch gradients.
  CounterRng r(6, Stream::test);
  const SparsePcaProblem p(rmat(r, 4, 5), 2, 0, 0);
  const Vec x = rvec(r, p.dim_x()), y = rvec(r, p.dim_y()), v = rvec(r, p.dim_x());
  const Batch b{1, 3};
  const Vec diff = batch_grad_x(p, b, x + v, y) - batch_grad_x(p, b, x, y);
  EXPECT_LT((p.curvature_x(b, x, y, v) - diff).norm(), 1e-10);
  const Vec w = rvec(r, p.dim_y());
  const Vec diff_y = batch_grad_y(p, b, x, y + w) - batch_grad_y(p, b, x, y);
  EXPECT_LT((p.curvature_y(b, x, y, w) - diff_y).norm(), 1e-10);
}

TEST(Convolution, IdentityKernelAndConstantImage) {
  CounterRng r(7, Stream::test);
  const Image X = rimg(r, 5, 6);
  EXPECT_EQ(convolve_valid(X, Image::Ones(1, 1)), X);
  const Image C = Image::Constant(6, 6, 0.3);
  Image Y = rimg(r, 3, 2);
  Y /= Y.sum();
  const Image out = convolve_valid(C, Y);
  EXPECT_EQ(out.rows(), 4);
  EXPECT_EQ(out.cols(), 5);
  EXPECT_LT((out.array() - 0.3).abs().maxCoeff(), 1e-15);
  EXPECT_THROW(convolve_valid(Image::Ones(2, 2), Image::Ones(3, 1)), std::invalid_argument);
}

TEST(Convolution, MatchesNaiveLoop) {
  CounterRng r(8, Stream::test);
  for (int t = 0; t < 5; ++t) {
    const Image X = rimg(r, 4, 4), Y = rimg(r, 2, 2);
    EXPECT_LT((convolve_valid(X, Y) - naive_conv(X, Y)).cwiseAbs().maxCoeff(), 1e-14);
  }
  const Image X = rimg(r, 9, 7), Y = rimg(r, 3, 4);
  EXPECT_LT((convolve_valid(X, Y) - naive_conv(X, Y)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Convolution, AdjointIdentities) {
  CounterRng r(9, Stream::test);
  for (int t = 0; t < 10; ++t) {
    const Image X = rimg(r, 8, 9), Y = rimg(r, 3, 2);
    const Image U = rimg(r, 6, 8);
    const Tile all{0, 6, 0, 8};
    const double lhs = (convolve_valid(X, Y).array() * U.array()).sum();
    const double a = (X.array() * adjoint_image(U, Y, all).array()).sum();
    const double b = (Y.array() * adjoint_kernel(U, X, 3, 2, all).array()).sum();
    EXPECT_NEAR(lhs, a, 1e-10);
    EXPECT_NEAR(lhs, b, 1e-10);
  }
}

TEST(Convolution, ForwardDifferenceAdjoint) {
  CounterRng r(10, Stream::test);
  const Image X = rimg(r, 5, 4), gh = rimg(r, 5, 4), gv = rimg(r, 5, 4);
  const auto [h, v] = forward_differences(X);
  EXPECT_EQ(h.col(3), Vec::Zero(5));
  EXPECT_EQ(v.row(4), Eigen::RowVectorXd::Zero(4));
  EXPECT_DOUBLE_EQ(h(1, 2), X(1, 3) - X(1, 2));
  EXPECT_DOUBLE_EQ(v(1, 2), X(2, 2) - X(1, 2));
  const double lhs = (h.array() * gh.array()).sum() + (v.array() * gv.array()).sum();
  EXPECT_NEAR(lhs, (X.array() * forward_differences_adjoint(gh, gv).array()).sum(), 1e-12);
}

TEST(Deblur, TilesCoverOutputOnce) {
  const auto tiles = bid_component_split(32, 32, 16);
  ASSERT_EQ(tiles.size(), 16u);
  Eigen::MatrixXi hits = Eigen::MatrixXi::Zero(32, 32);
  for (const Tile& t : tiles) {
    EXPECT_EQ(t.pixels(), 64u);
    hits.block(t.r0, t.c0, t.r1 - t.r0, t.c1 - t.c0).array() += 1;
  }
  EXPECT_TRUE((hits.array() == 1).all());
  const auto odd = bid_component_split(7, 5, 6);
  Index total = 0;
  for (const Tile& t : odd) total += t.pixels();
  EXPECT_EQ(total, 35u);
  EXPECT_EQ(bid_component_split(4, 4, 1).size(), 1u);
  EXPECT_THROW(bid_component_split(2, 2, 9), std::invalid_argument);
}

TEST(Deblur, ComponentMeanIsMonolithic) {
  CounterRng r(11, Stream::test);
  for (Index tiles : {1, 4, 6}) {
    const BlindDeblurProblem p(rimg(r, 10, 12), 3, 3, 5e-4, 1e3, tiles);
    for (int t = 0; t < 50; ++t) {
      const Vec x = rvec(r, p.dim_x(), 0, 1), y = rvec(r, p.dim_y(), 0, 0.2);
      const double mono = p.monolithic_smooth(x, y);
      EXPECT_NEAR(smooth_value(p, x, y), mono, 1e-10 * std::max(1.0, mono));
    }
  }
}

TEST(Deblur, ZeroGradientsAtConsistentConstantImage) {
  const Image X = Image::Constant(8, 8, 0.4);
  const Image Y = Image::Constant(3, 3, 1.0 / 9.0);
  const BlindDeblurProblem p(convolve_valid(X, Y), 3, 3, 0.1, 10.0, 4);
  const Vec x = flat(X), y = flat(Y);
  EXPECT_LT(full_grad_x(p, x, y).norm(), 1e-12);
  EXPECT_LT(full_grad_y(p, x, y).norm(), 1e-12);
}

TEST(Deblur, SmallThetaRegularizerGradientIsQuadratic) {
  CounterRng r(12, Stream::test);
  const double lambda = 0.7, theta = 1e-8;
  const BlindDeblurProblem p(rimg(r, 6, 6), 2, 2, lambda, theta, 1);
  const Image X = rimg(r, 7, 7);
  const auto [h, v] = forward_differences(X);
  const Image expect = 2.0 * lambda * theta * forward_differences_adjoint(h, v);
  EXPECT_LT((p.regularizer_grad(X) - expect).cwiseAbs().maxCoeff(), 1e-6 * expect.cwiseAbs().maxCoeff());
}

TEST(Deblur, FiniteDifferences) {
  CounterRng r(13, Stream::test);
  const BlindDeblurProblem p(rimg(r, 6, 6), 3, 3, 0.01, 50.0, 4);
  for (int t = 0; t < 10; ++t) {
    const Iterate z{rvec(r, p.dim_x(), 0, 1), prox::project_box_l1(rvec(r, p.dim_y(), 0, 0.3))};
    EXPECT_LE(fd_gradient_check(p, z), 1e-5);
  }
}

TEST(Deblur, ConstraintsAndProx) {
  const BlindDeblurProblem p(Image::Zero(4, 4), 2, 2, 0.1, 1.0, 1);
  EXPECT_EQ(p.reg_y(vec({0.25, 0.25, 0.25, 0.25})), 0.0);
  EXPECT_EQ(p.reg_y(vec({0.5, 0.5, 0.5, 0})), kInf);
  EXPECT_EQ(p.reg_x(Vec::Constant(25, 1.5)), kInf);
  EXPECT_EQ(p.prox_x(1.0, Vec::Constant(25, 1.5)), Vec::Ones(25));
  EXPECT_LE(p.prox_y(1.0, vec({3, 3, 3, 3})).sum(), 1.0);
}

TEST(Deblur, CurvatureBoundsLocalSecondDifference) {
  // The data term is quadratic in the kernel: the y curvature equals the
  // change of the batch gradient exactly.
  CounterRng r(14, Stream::test);
  const BlindDeblurProblem p(rimg(r, 8, 8), 3, 3, 0.01, 10.0, 4);
  const Vec x = rvec(r, p.dim_x(), 0, 1), y = rvec(r, p.dim_y(), 0, 0.1), w = rvec(r, p.dim_y());
  const Batch b{0, 2};
  const Vec diff = batch_grad_y(p, b, x, y + w) - batch_grad_y(p, b, x, y);
  EXPECT_LT((p.curvature_y(b, x, y, w) - diff).norm(), 1e-9 * diff.norm());
}

TEST(LeastSquares, SeparableMeanWeightsAreOne) {
  const auto p = LeastSquaresProblem::separable(vec({1, 2}), vec({3}), 7, 1);
  const Iterate z{vec({0, 0}), vec({0})};
  EXPECT_NEAR(smooth_value(p, z.x, z.y), 0.5 * (1 + 4 + 9), 1e-12);
  EXPECT_NEAR(p.exact_lipschitz_x(), 1.0, 1e-12);
}
