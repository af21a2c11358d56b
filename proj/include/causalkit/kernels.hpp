#pragma once

// Kernel functions, Gram matrices, centering and the median heuristic.
//
// The Gaussian kernel is exp(-||a - b||^2 / sigma^2), with sigma^2 (not
// 2 sigma^2) in the denominator. Grids and the median heuristic assume this
// convention.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/error.hpp"

namespace causalkit {

enum class KernelKind { Linear, Gaussian };

inline std::string to_string(KernelKind k) { return k == KernelKind::Linear ? "linear" : "gaussian"; }

struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  double sigma = 1.0;  // ignored for Linear

  static KernelSpec linear() { return {KernelKind::Linear, 1.0}; }
  static KernelSpec gaussian(double sigma) { return {KernelKind::Gaussian, sigma}; }

  void validate() const {
    if (kind == KernelKind::Gaussian && !(sigma > 0.0 && std::isfinite(sigma)))
      fail(Errc::InvalidArgument, "Gaussian kernel width must be positive");
  }
};

template <typename A, typename B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size())
    fail(Errc::DimensionMismatch, "kernel arguments of size " + std::to_string(a.size()) + " and " +
                                      std::to_string(b.size()));
  if (spec.kind == KernelKind::Linear) return a.dot(b);
  return std::exp(-(a - b).squaredNorm() / (spec.sigma * spec.sigma));
}

struct GramMatrix {
  Eigen::MatrixXd values;
  bool centered = false;

  Eigen::Index size() const { return values.rows(); }
};

// k(new_rows_i, train_rows_j), an r x m block.
inline Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& new_rows,
                                  const Eigen::MatrixXd& train_rows) {
  spec.validate();
  if (new_rows.cols() != train_rows.cols())
    fail(Errc::DimensionMismatch, "row dimension " + std::to_string(new_rows.cols()) + " vs " +
                                      std::to_string(train_rows.cols()));
  if (spec.kind == KernelKind::Linear) return new_rows * train_rows.transpose();
  const double inv_s2 = 1.0 / (spec.sigma * spec.sigma);
  Eigen::MatrixXd k(new_rows.rows(), train_rows.rows());
  for (Eigen::Index j = 0; j < train_rows.rows(); ++j)
    for (Eigen::Index i = 0; i < new_rows.rows(); ++i)
      k(i, j) = std::exp(-(new_rows.row(i) - train_rows.row(j)).squaredNorm() * inv_s2);
  return k;
}

inline GramMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& rows) {
  spec.validate();
  const Eigen::Index m = rows.rows();
  GramMatrix g;
  if (spec.kind == KernelKind::Linear) {
    g.values = rows * rows.transpose();
    // the product is symmetric up to rounding in blocked kernels; make it exact
    g.values = (0.5 * (g.values + g.values.transpose())).eval();
    return g;
  }
  const double inv_s2 = 1.0 / (spec.sigma * spec.sigma);
  g.values.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    g.values(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < m; ++i) {
      const double v = std::exp(-(rows.row(i) - rows.row(j)).squaredNorm() * inv_s2);
      g.values(i, j) = v;
      g.values(j, i) = v;
    }
  }
  return g;
}

// H K H with H = I - 11'/m, on a raw matrix.
inline Eigen::MatrixXd center_values(const Eigen::MatrixXd& k) {
  const Eigen::RowVectorXd col_means = k.colwise().mean();
  const Eigen::VectorXd row_means = k.rowwise().mean();
  const double grand = k.mean();
  Eigen::MatrixXd c = k;
  c.rowwise() -= col_means;
  c.colwise() -= row_means;
  c.array() += grand;
  return c;
}

inline GramMatrix center(const GramMatrix& g) {
  if (g.centered) fail(Errc::AlreadyCentered, "Gram matrix is already centered");
  return GramMatrix{center_values(g.values), true};
}

enum class MedianMode { Distance, SquaredDistance };

// Median of the m(m-1)/2 pairwise distances (i < j, zeros included). An even
// count averages the two central values.
inline double median_heuristic(const Eigen::MatrixXd& rows, MedianMode mode = MedianMode::Distance) {
  const Eigen::Index m = rows.rows();
  if (m < 2) fail(Errc::InvalidArgument, "median heuristic needs at least 2 rows");
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double d2 = (rows.row(i) - rows.row(j)).squaredNorm();
      pool.push_back(mode == MedianMode::Distance ? std::sqrt(d2) : d2);
    }
  const std::size_t k = pool.size();
  const auto mid = pool.begin() + static_cast<std::ptrdiff_t>(k / 2);
  std::nth_element(pool.begin(), mid, pool.end());
  double med = *mid;
  if (k % 2 == 0) med = 0.5 * (med + *std::max_element(pool.begin(), mid));
  if (!(med > 0.0)) fail(Errc::AllPointsIdentical, "median pairwise distance is zero");
  return med;
}

}  // namespace causalkit
