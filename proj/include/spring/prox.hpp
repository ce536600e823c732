#pragma once

#include "spring/core.hpp"

#include <algorithm>
#include <numeric>

namespace spring::prox {

/// Entrywise max(0, v).
inline Vec nonneg(const Vec& v) { return v.cwiseMax(0.0); }

/// Entrywise soft threshold by tau >= 0 (prox of tau * ||.||_1).
inline Vec soft_threshold(const Vec& v, double tau) {
  if (tau < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - tau;
    out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
  }
  return out;
}

/// Clip every entry to [lo, hi].
inline Vec clip(const Vec& v, double lo, double hi) { return v.cwiseMax(lo).cwiseMin(hi); }

/// Projection of one column onto {p >= 0, ||p||_0 <= s}: clamp negatives, keep
/// the s largest remaining entries. Ties go to the lowest index.
inline void l0_nonneg_column(const double* in, double* out, Index len, Index s) {
  std::vector<Index> order(len);
  std::iota(order.begin(), order.end(), Index{0});
  const Index keep = std::min(s, len);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](Index a, Index b) {
                      const double va = std::max(in[a], 0.0);
                      const double vb = std::max(in[b], 0.0);
                      return va > vb || (va == vb && a < b);
                    });
  for (Index i = 0; i < len; ++i) out[i] = 0.0;
  for (Index k = 0; k < keep; ++k) out[order[k]] = std::max(in[order[k]], 0.0);
}

/// Column-wise l0-nonneg projection of a column-major rows x cols matrix stored
/// flat in v.
inline Vec l0_nonneg_columns(const Vec& v, Index rows, Index s) {
  if (s < 1) throw std::invalid_argument("l0_nonneg_columns: sparsity level must be >= 1");
  if (rows == 0 || static_cast<Index>(v.size()) % rows != 0) {
    throw std::invalid_argument("l0_nonneg_columns: size is not a multiple of the row count");
  }
  Vec out(v.size());
  const Index cols = static_cast<Index>(v.size()) / rows;
  for (Index c = 0; c < cols; ++c) l0_nonneg_column(v.data() + c * rows, out.data() + c * rows, rows, s);
  return out;
}

/// Euclidean projection onto {p : 0 <= p <= 1 entrywise, sum(p) <= bound}.
/// Clips to the box; if the sum still exceeds `bound`, bisects on the shift t
/// solving sum(clip(v - t, 0, 1)) = bound to 1e-12 in t. The returned point is
/// taken from the feasible end of the bracket, so its sum never exceeds `bound`.
inline Vec project_box_l1(const Vec& v, double bound = 1.0) {
  const auto shifted_sum = [&](double t) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::clamp(v[i] - t, 0.0, 1.0);
    return acc;
  };
  if (shifted_sum(0.0) <= bound) return clip(v, 0.0, 1.0);
  double lo = 0.0;
  double hi = std::max(v.maxCoeff(), 0.0);
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (shifted_sum(mid) > bound) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i] - hi, 0.0, 1.0);
  return out;
}

}  // namespace spring::prox
