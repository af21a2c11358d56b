#pragma once

// Seeded generators for the two benchmark systems: eight correlated Gaussian
// series with lagged couplings, and the nonlinear trivariate chain
//   x_t = a x_{t-1} + e_x
//   y_t = b y_{t-1} + d x_{t-1}^2 + e_y
//   z_t = c z_{t-1} + e y_{t-1} + e_z

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/embedding.hpp"
#include "causalkit/error.hpp"
#include "causalkit/panel.hpp"

namespace causalkit {

// lag_map(r, c) = k means "column c causes row r at lag k"; negative entries
// are the transposed view, 0 is instantaneous coupling, empty is no relation.
using LagMap = std::vector<std::vector<std::optional<int>>>;

inline Eigen::MatrixXd default_benchmark_correlation() {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(8, 8, 0.1);
  auto block = [&](int lo, int hi) {
    for (int i = lo; i <= hi; ++i)
      for (int j = lo; j <= hi; ++j) c(i, j) = 0.7;
  };
  block(0, 1);
  block(2, 3);
  block(4, 7);
  c.diagonal().setOnes();
  return c;
}

inline LagMap default_benchmark_lag_map() {
  LagMap m(8, std::vector<std::optional<int>>(8));
  auto set = [&](int cause, int effect, int lag) {
    m[static_cast<std::size_t>(effect)][static_cast<std::size_t>(cause)] = lag;
    m[static_cast<std::size_t>(cause)][static_cast<std::size_t>(effect)] = -lag;
  };
  set(0, 1, 0);
  set(2, 3, 1);
  set(4, 5, 1);
  set(4, 6, 2);
  set(4, 7, 3);
  set(5, 6, 1);
  set(5, 7, 2);
  set(6, 7, 1);
  return m;
}

struct LinearBenchmarkSpec {
  std::size_t length = 250;
  Eigen::MatrixXd correlation = default_benchmark_correlation();
  LagMap lag_map = default_benchmark_lag_map();
  std::uint64_t seed = 0;
};

// Per-series delays realising the lag map: shift[r] - shift[c] = lag_map(r, c),
// normalised so the smallest delay is 0.
inline std::vector<int> series_delays(const LagMap& map) {
  const std::size_t k = map.size();
  for (const auto& row : map)
    if (row.size() != k) fail(Errc::InvalidArgument, "lag map must be square");
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c) {
      const auto& a = map[r][c];
      const auto& b = map[c][r];
      if (a.has_value() != b.has_value() || (a && *a != -*b))
        fail(Errc::InvalidArgument, "lag map is not antisymmetric at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
    }
  std::vector<std::optional<int>> delay(k);
  for (std::size_t root = 0; root < k; ++root) {
    if (delay[root]) continue;
    delay[root] = 0;
    std::deque<std::size_t> queue{root};
    while (!queue.empty()) {
      const std::size_t r = queue.front();
      queue.pop_front();
      for (std::size_t c = 0; c < k; ++c) {
        if (!map[r][c] || r == c) continue;
        const int want = *delay[r] - *map[r][c];
        if (!delay[c]) {
          delay[c] = want;
          queue.push_back(c);
        } else if (*delay[c] != want) {
          fail(Errc::InvalidArgument, "lag map is inconsistent around series " + std::to_string(c));
        }
      }
    }
  }
  int lo = 0;
  for (const auto& d : delay) lo = std::min(lo, *d);
  std::vector<int> out;
  for (const auto& d : delay) out.push_back(*d - lo);
  return out;
}

// Symmetric square root of a correlation matrix.
inline Eigen::MatrixXd correlation_root(const Eigen::MatrixXd& corr) {
  if (corr.rows() != corr.cols()) fail(Errc::InvalidArgument, "correlation matrix must be square");
  if (!corr.isApprox(corr.transpose(), 1e-12)) fail(Errc::InvalidArgument, "correlation matrix must be symmetric");
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
    fail(Errc::InvalidArgument, "correlation matrix must have a unit diagonal");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    fail(Errc::NotPositiveDefinite, "correlation matrix is not positive definite");
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

inline TimeSeriesPanel generate_linear_benchmark(const LinearBenchmarkSpec& spec) {
  const auto k = spec.correlation.rows();
  if (static_cast<Eigen::Index>(spec.lag_map.size()) != k)
    fail(Errc::InvalidArgument, "lag map and correlation matrix sizes differ");
  if (spec.length < 1) fail(Errc::InvalidArgument, "length must be >= 1");
  const Eigen::MatrixXd root = correlation_root(spec.correlation);
  const std::vector<int> delay = series_delays(spec.lag_map);
  const int extra = *std::max_element(delay.begin(), delay.end());
  const auto rows = static_cast<Eigen::Index>(spec.length) + extra;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd draws(rows, k);
  Eigen::VectorXd e(k);
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) e(j) = normal(rng);
    draws.row(t) = (root * e).transpose();
  }

  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> cols;
  for (Eigen::Index j = 0; j < k; ++j) {
    names.push_back("ts" + std::to_string(j + 1));
    // a series delayed by s reads draws from row (extra - s + t)
    const Eigen::VectorXd shifted = shift_column(draws.col(j), -(extra - delay[static_cast<std::size_t>(j)]));
    cols.emplace_back(shifted.head(static_cast<Eigen::Index>(spec.length)));
  }
  return TimeSeriesPanel(std::move(names), std::move(cols));
}

struct NonlinearBenchmarkSpec {
  std::size_t length = 500;
  double a = 0.2, b = 0.5, c = 0.8, d = 0.8, e = 0.7;
  double noise_std = 1.0;
  std::size_t burn_in = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(std::abs(a) < 1.0 && std::abs(b) < 1.0 && std::abs(c) < 1.0))
      fail(Errc::InvalidArgument, "autoregressive coefficients a, b, c must lie in (-1, 1)");
    if (noise_std < 0.0) fail(Errc::InvalidArgument, "noise_std must be >= 0");
    if (length < 1) fail(Errc::InvalidArgument, "length must be >= 1");
  }
};

inline TimeSeriesPanel generate_nonlinear_benchmark(const NonlinearBenchmarkSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(spec.length);
  Eigen::VectorXd xs(n), ys(n), zs(n);
  double x = 0.0, y = 0.0, z = 0.0;
  const std::size_t total = spec.burn_in + spec.length;
  for (std::size_t t = 0; t < total; ++t) {
    const double ex = spec.noise_std * normal(rng);
    const double ey = spec.noise_std * normal(rng);
    const double ez = spec.noise_std * normal(rng);
    const double nx = spec.a * x + ex;
    const double ny = spec.b * y + spec.d * x * x + ey;
    const double nz = spec.c * z + spec.e * y + ez;
    x = nx;
    y = ny;
    z = nz;
    if (t >= spec.burn_in) {
      const auto i = static_cast<Eigen::Index>(t - spec.burn_in);
      xs(i) = x;
      ys(i) = y;
      zs(i) = z;
    }
  }
  return TimeSeriesPanel({"x", "y", "z"}, {xs, ys, zs});
}

}  // namespace causalkit
