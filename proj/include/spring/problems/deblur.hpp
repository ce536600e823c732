#pragma once

#include "spring/core.hpp"
#include "spring/prox.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace spring {

/// Row-major image; flat vectors map onto it directly.
using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ImageMap = Eigen::Map<const Image>;

/// Half-open rectangle of output pixels.
struct Tile {
  Index r0, r1, c0, c1;
  Index pixels() const { return (r1 - r0) * (c1 - c0); }
};

/// Valid-region 2D convolution restricted to `region` of the output
/// (out(r, c) = sum_{a,b} X(r + kh-1-a, c + kw-1-b) Y(a, b)). Pixels outside
/// the region are zero.
inline Image convolve_valid(const Image& X, const Image& Y, const Tile& region) {
  const Index kh = static_cast<Index>(Y.rows());
  const Index kw = static_cast<Index>(Y.cols());
  if (kh > static_cast<Index>(X.rows()) || kw > static_cast<Index>(X.cols())) {
    throw std::invalid_argument("convolution: kernel larger than image");
  }
  Image out = Image::Zero(X.rows() - Y.rows() + 1, X.cols() - Y.cols() + 1);
  for (Index r = region.r0; r < region.r1; ++r) {
    for (Index c = region.c0; c < region.c1; ++c) {
      double acc = 0.0;
      for (Index a = 0; a < kh; ++a)
        for (Index b = 0; b < kw; ++b) acc += X(r + kh - 1 - a, c + kw - 1 - b) * Y(a, b);
      out(r, c) = acc;
    }
  }
  return out;
}

inline Image convolve_valid(const Image& X, const Image& Y) {
  return convolve_valid(X, Y, Tile{0, static_cast<Index>(X.rows() - Y.rows() + 1), 0,
                                   static_cast<Index>(X.cols() - Y.cols() + 1)});
}

/// Adjoint of X -> X (*) Y applied to U (output-sized), restricted to `region` of U.
inline Image adjoint_image(const Image& U, const Image& Y, const Tile& region) {
  const Index kh = static_cast<Index>(Y.rows());
  const Index kw = static_cast<Index>(Y.cols());
  Image out = Image::Zero(U.rows() + Y.rows() - 1, U.cols() + Y.cols() - 1);
  for (Index r = region.r0; r < region.r1; ++r)
    for (Index c = region.c0; c < region.c1; ++c) {
      const double u = U(r, c);
      if (u == 0.0) continue;
      for (Index a = 0; a < kh; ++a)
        for (Index b = 0; b < kw; ++b) out(r + kh - 1 - a, c + kw - 1 - b) += u * Y(a, b);
    }
  return out;
}

/// Adjoint of Y -> X (*) Y applied to U, restricted to `region` of U.
inline Image adjoint_kernel(const Image& U, const Image& X, Index kh, Index kw, const Tile& region) {
  Image out = Image::Zero(static_cast<Eigen::Index>(kh), static_cast<Eigen::Index>(kw));
  for (Index r = region.r0; r < region.r1; ++r)
    for (Index c = region.c0; c < region.c1; ++c) {
      const double u = U(r, c);
      if (u == 0.0) continue;
      for (Index a = 0; a < kh; ++a)
        for (Index b = 0; b < kw; ++b) out(a, b) += u * X(r + kh - 1 - a, c + kw - 1 - b);
    }
  return out;
}

/// Horizontal and vertical forward differences; entries that would reach past
/// the last column / row are zero. Returns (horizontal, vertical).
inline std::pair<Image, Image> forward_differences(const Image& X) {
  Image h = Image::Zero(X.rows(), X.cols());
  Image v = Image::Zero(X.rows(), X.cols());
  if (X.cols() > 1) h.leftCols(X.cols() - 1) = X.rightCols(X.cols() - 1) - X.leftCols(X.cols() - 1);
  if (X.rows() > 1) v.topRows(X.rows() - 1) = X.bottomRows(X.rows() - 1) - X.topRows(X.rows() - 1);
  return {h, v};
}

/// D^T (gh, gv).
inline Image forward_differences_adjoint(const Image& gh, const Image& gv) {
  Image out = Image::Zero(gh.rows(), gh.cols());
  const auto W = gh.cols();
  const auto H = gh.rows();
  if (W > 1) {
    out.rightCols(W - 1) += gh.leftCols(W - 1);
    out.leftCols(W - 1) -= gh.leftCols(W - 1);
  }
  if (H > 1) {
    out.bottomRows(H - 1) += gv.topRows(H - 1);
    out.topRows(H - 1) -= gv.topRows(H - 1);
  }
  return out;
}

/// Partition an out_h x out_w pixel grid into n_blocks contiguous tiles laid out
/// on a gr x gc grid (gr the largest divisor of n_blocks not above its square root).
inline std::vector<Tile> bid_component_split(Index out_h, Index out_w, Index n_blocks) {
  if (n_blocks < 1) throw std::invalid_argument("tile split: need at least one tile");
  Index gr = 1;
  for (Index d = 1; d * d <= n_blocks; ++d)
    if (n_blocks % d == 0) gr = d;
  Index gc = n_blocks / gr;
  if (out_h < gr || out_w < gc) {
    if (out_h >= gc && out_w >= gr) {
      std::swap(gr, gc);
    } else {
      throw std::invalid_argument("tile split: more tiles than pixels along an axis");
    }
  }
  std::vector<Tile> tiles;
  for (Index i = 0; i < gr; ++i)
    for (Index j = 0; j < gc; ++j)
      tiles.push_back({i * out_h / gr, (i + 1) * out_h / gr, j * out_w / gc, (j + 1) * out_w / gc});
  return tiles;
}

/// Blind deconvolution
///   min_{X,Y} ||Z - X (*) Y||^2 + lambda sum_r log(1 + theta [D X]_r^2)
///   s.t. 0 <= X <= 1, 0 <= Y <= 1, ||Y||_1 <= 1.
/// x is the latent image (Z padded by the kernel support), y the kernel, both
/// row-major. Component t is the squared residual over tile t, scaled by the
/// number of tiles, plus the full (smooth) image regularizer, so the component
/// mean is the whole smooth objective.
class BlindDeblurProblem {
 public:
  BlindDeblurProblem(Image Z, Index kernel_h, Index kernel_w, double lambda, double theta, Index n_blocks)
      : Z_(std::move(Z)), kh_(kernel_h), kw_(kernel_w), lambda_(lambda), theta_(theta) {
    if (kh_ < 1 || kw_ < 1) throw std::invalid_argument("deblur: empty kernel");
    if (kh_ > static_cast<Index>(Z_.rows()) || kw_ > static_cast<Index>(Z_.cols())) {
      throw std::invalid_argument("deblur: kernel must be smaller than the image");
    }
    if (!(lambda_ > 0.0) || !(theta_ > 0.0)) throw std::invalid_argument("deblur: lambda and theta must be positive");
    tiles_ = bid_component_split(static_cast<Index>(Z_.rows()), static_cast<Index>(Z_.cols()), n_blocks);
  }

  Index num_components() const { return tiles_.size(); }
  Index dim_x() const { return image_h() * image_w(); }
  Index dim_y() const { return kh_ * kw_; }
  Index image_h() const { return static_cast<Index>(Z_.rows()) + kh_ - 1; }
  Index image_w() const { return static_cast<Index>(Z_.cols()) + kw_ - 1; }
  Index kernel_h() const { return kh_; }
  Index kernel_w() const { return kw_; }
  double lambda() const { return lambda_; }
  double theta() const { return theta_; }
  const Image& observed() const { return Z_; }
  const std::vector<Tile>& tiles() const { return tiles_; }

  Image image(const Vec& x) const { return ImageMap(x.data(), static_cast<Eigen::Index>(image_h()), static_cast<Eigen::Index>(image_w())); }
  Image kernel(const Vec& y) const { return ImageMap(y.data(), static_cast<Eigen::Index>(kh_), static_cast<Eigen::Index>(kw_)); }

  double component_value(Index t, const Vec& x, const Vec& y) const {
    check(x, y);
    const Tile& tile = tiles_.at(t);
    const Image R = tile_residual(tile, image(x), kernel(y));
    return scale() * R.squaredNorm() + regularizer(image(x));
  }

  Vec component_grad_x(Index t, const Vec& x, const Vec& y) const {
    check(x, y);
    const Tile& tile = tiles_.at(t);
    const Image X = image(x);
    const Image Yk = kernel(y);
    Image g = (-2.0 * scale()) * adjoint_image(tile_residual(tile, X, Yk), Yk, tile);
    g += regularizer_grad(X);
    return Eigen::Map<const Vec>(g.data(), g.size());
  }

  Vec component_grad_y(Index t, const Vec& x, const Vec& y) const {
    check(x, y);
    const Tile& tile = tiles_.at(t);
    const Image X = image(x);
    Image g = (-2.0 * scale()) * adjoint_kernel(tile_residual(tile, X, kernel(y)), X, kh_, kw_, tile);
    return Eigen::Map<const Vec>(g.data(), g.size());
  }

  double reg_x(const Vec& x) const { return (x.array() < 0.0).any() || (x.array() > 1.0).any() ? kInf : 0.0; }
  double reg_y(const Vec& y) const {
    if ((y.array() < 0.0).any() || (y.array() > 1.0).any()) return kInf;
    return y.sum() <= 1.0 ? 0.0 : kInf;
  }
  Vec prox_x(double gamma, const Vec& v) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
    return prox::clip(v, 0.0, 1.0);
  }
  Vec prox_y(double gamma, const Vec& v) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: step must be positive");
    return prox::project_box_l1(v, 1.0);
  }

  /// PSD curvature bound of the batch-mean x-gradient: data term Gauss-Newton
  /// part plus lambda D^T diag(2 theta / (1 + theta (DX)^2)) D, which dominates the
  /// absolute curvature of log(1 + theta v^2).
  Vec curvature_x(std::span<const Index> batch, const Vec& x, const Vec& y, const Vec& v) const {
    const Image X = image(x);
    const Image Yk = kernel(y);
    const Image V = image(v);
    Image out = Image::Zero(X.rows(), X.cols());
    const double s = 2.0 * scale() / static_cast<double>(batch.size());
    for (Index t : batch) {
      const Tile& tile = tiles_.at(t);
      out += s * adjoint_image(convolve_valid(V, Yk, tile), Yk, tile);
    }
    const auto [dh, dv] = forward_differences(X);
    const auto [vh, vv] = forward_differences(V);
    const auto weight = [&](const Image& d) {
      return ((2.0 * theta_) / (1.0 + theta_ * d.array().square())).matrix();
    };
    const Image wh = weight(dh).cwiseProduct(vh);
    const Image wv = weight(dv).cwiseProduct(vv);
    out += lambda_ * forward_differences_adjoint(wh, wv);
    return Eigen::Map<const Vec>(out.data(), out.size());
  }

  /// Batch-mean Hessian of the data term in the kernel.
  Vec curvature_y(std::span<const Index> batch, const Vec& x, const Vec&, const Vec& v) const {
    const Image X = image(x);
    const Image V = kernel(v);
    Image out = Image::Zero(static_cast<Eigen::Index>(kh_), static_cast<Eigen::Index>(kw_));
    const double s = 2.0 * scale() / static_cast<double>(batch.size());
    for (Index t : batch) {
      const Tile& tile = tiles_.at(t);
      out += s * adjoint_kernel(convolve_valid(X, V, tile), X, kh_, kw_, tile);
    }
    return Eigen::Map<const Vec>(out.data(), out.size());
  }

  /// ||Z - X (*) Y||^2 + lambda sum phi(DX) evaluated without the tile split.
  double monolithic_smooth(const Vec& x, const Vec& y) const {
    const Image X = image(x);
    return (Z_ - convolve_valid(X, kernel(y))).squaredNorm() + regularizer(X);
  }

  double regularizer(const Image& X) const {
    const auto [h, v] = forward_differences(X);
    return lambda_ * ((1.0 + theta_ * h.array().square()).log().sum() + (1.0 + theta_ * v.array().square()).log().sum());
  }

  Image regularizer_grad(const Image& X) const {
    const auto [h, v] = forward_differences(X);
    const auto psi = [&](const Image& d) {
      return ((2.0 * theta_) * d.array() / (1.0 + theta_ * d.array().square())).matrix();
    };
    return lambda_ * forward_differences_adjoint(psi(h), psi(v));
  }

 private:
  double scale() const { return static_cast<double>(tiles_.size()); }

  void check(const Vec& x, const Vec& y) const {
    if (static_cast<Index>(x.size()) != dim_x() || static_cast<Index>(y.size()) != dim_y()) {
      throw std::invalid_argument("deblur: dimension mismatch");
    }
  }

  Image tile_residual(const Tile& tile, const Image& X, const Image& Y) const {
    Image R = convolve_valid(X, Y, tile);
    for (Index r = tile.r0; r < tile.r1; ++r)
      for (Index c = tile.c0; c < tile.c1; ++c) R(r, c) = Z_(r, c) - R(r, c);
    return R;
  }

  Image Z_;
  Index kh_;
  Index kw_;
  double lambda_;
  double theta_;
  std::vector<Tile> tiles_;
};

}  // namespace spring
