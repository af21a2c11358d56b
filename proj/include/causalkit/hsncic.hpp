#pragma once

// Hilbert-Schmidt normalised conditional independence criterion (HSNCIC)
// and the biased HSIC estimator.
//
//   HSNCIC_n = Tr[R_xz R_yz - 2 R_xz R_yz R_z + R_xz R_z R_yz R_z]
//   R_u      = K_u (K_u + n lambda I)^{-1},  K_u a centred Gaussian Gram.
//
// Since K_u and (K_u + n lambda I)^{-1} commute, R_u = I - n lambda (K_u + n lambda I)^{-1}
// and is symmetric.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/embedding.hpp"
#include "causalkit/error.hpp"
#include "causalkit/kernels.hpp"
#include "causalkit/panel.hpp"

namespace causalkit {

inline constexpr double kDefaultHsncicLambda = 1e-3;

struct OperatorRegularizer {
  double lambda = kDefaultHsncicLambda;

  void validate() const {
    if (!(lambda > 0.0)) fail(Errc::InvalidArgument, "HSNCIC regulariser must be positive");
  }
};

// Per-block Gaussian widths; unset entries use the median heuristic on that
// block's rows. For hsncic the blocks are (XZ), (YZ) and Z; for hsic only the
// first two are used (X and Y).
struct HsicKernelPolicy {
  std::optional<double> sigma_x;
  std::optional<double> sigma_y;
  std::optional<double> sigma_z;
};

struct HsncicValue {
  double value = 0.0;
  Eigen::Index n = 0;
  double lambda = 0.0;
  double sigma_x = 0.0;  // width used for (XZ)
  double sigma_y = 0.0;  // width used for (YZ)
  double sigma_z = 0.0;  // width used for Z, 0 when Z is empty
};

namespace detail {

inline Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (b.cols() == 0) return a;
  if (a.cols() == 0) return b;
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

inline double resolve_sigma(const std::optional<double>& given, const Eigen::MatrixXd& rows) {
  if (given) {
    if (!(*given > 0.0)) fail(Errc::InvalidArgument, "kernel width must be positive");
    return *given;
  }
  return median_heuristic(rows);
}

inline Eigen::MatrixXd centred_gaussian_gram(const Eigen::MatrixXd& rows, double sigma) {
  return center(gram(KernelSpec::gaussian(sigma), rows)).values;
}

// R = K (K + n lambda I)^{-1} for a centred Gram K.
inline Eigen::MatrixXd shrinkage_operator(const Eigen::MatrixXd& k, double lambda) {
  const Eigen::Index n = k.rows();
  const double reg = static_cast<double>(n) * lambda;
  Eigen::MatrixXd a = k;
  a.diagonal().array() += reg;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) fail(Errc::SolveFailure, "centred Gram plus n*lambda*I is not positive definite");
  Eigen::MatrixXd r = -reg * llt.solve(Eigen::MatrixXd::Identity(n, n));
  r.diagonal().array() += 1.0;
  return 0.5 * (r + r.transpose());
}

// Tr[A B] for symmetric B.
inline double trace_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b_sym) {
  return a.cwiseProduct(b_sym).sum();
}

}  // namespace detail

// Biased (V-statistic) HSIC: (1/n^2) Tr(K~x K~y) with centred Gaussian Grams.
inline double hsic(const Eigen::MatrixXd& x_rows, const Eigen::MatrixXd& y_rows, const HsicKernelPolicy& policy = {}) {
  if (x_rows.rows() != y_rows.rows())
    fail(Errc::DimensionMismatch, "x has " + std::to_string(x_rows.rows()) + " rows, y has " +
                                      std::to_string(y_rows.rows()));
  const Eigen::Index n = x_rows.rows();
  if (n < 2) fail(Errc::InvalidArgument, "HSIC needs at least 2 samples");
  // A constant block has no spread; its centred Gram is zero for any width.
  auto width = [](const std::optional<double>& s, const Eigen::MatrixXd& rows) {
    if (s) return detail::resolve_sigma(s, rows);
    try {
      return median_heuristic(rows);
    } catch (const Error& e) {
      if (e.code() == Errc::AllPointsIdentical) return 1.0;
      throw;
    }
  };
  const Eigen::MatrixXd kx = detail::centred_gaussian_gram(x_rows, width(policy.sigma_x, x_rows));
  const Eigen::MatrixXd ky = detail::centred_gaussian_gram(y_rows, width(policy.sigma_y, y_rows));
  const double nn = static_cast<double>(n);
  return detail::trace_product(kx, ky) / (nn * nn);
}

// Conditional criterion with X, Z fixed and Y varying: precomputes
// M = R_xz - 2 R_z R_xz + R_z R_xz R_z so that HSNCIC = Tr[M R_yz].
// Without Z the criterion degenerates to Tr[R_x R_y].
class HsncicStatistic {
 public:
  HsncicStatistic(Eigen::MatrixXd x_rows, Eigen::MatrixXd z_rows, OperatorRegularizer reg,
                  HsicKernelPolicy policy = {})
      : x_(std::move(x_rows)), z_(std::move(z_rows)), reg_(reg), policy_(policy) {
    reg_.validate();
    const Eigen::Index n = x_.rows();
    if (n < 2) fail(Errc::InvalidArgument, "HSNCIC needs at least 2 samples");
    if (z_.cols() > 0 && z_.rows() != n) fail(Errc::DimensionMismatch, "x and z row counts differ");
    const Eigen::MatrixXd xz = detail::hcat(x_, z_);
    sigma_xz_ = detail::resolve_sigma(policy_.sigma_x, xz);
    const Eigen::MatrixXd r_xz = detail::shrinkage_operator(detail::centred_gaussian_gram(xz, sigma_xz_), reg_.lambda);
    if (z_.cols() == 0) {
      m_ = r_xz;
      return;
    }
    sigma_z_ = detail::resolve_sigma(policy_.sigma_z, z_);
    const Eigen::MatrixXd r_z = detail::shrinkage_operator(detail::centred_gaussian_gram(z_, sigma_z_), reg_.lambda);
    const Eigen::MatrixXd rz_rxz = r_z * r_xz;
    m_ = r_xz - 2.0 * rz_rxz + rz_rxz * r_z;
  }

  HsncicValue operator()(const Eigen::MatrixXd& y_rows) const {
    if (y_rows.rows() != x_.rows()) fail(Errc::DimensionMismatch, "x and y row counts differ");
    const Eigen::MatrixXd yz = detail::hcat(y_rows, z_);
    const double sigma_yz = detail::resolve_sigma(policy_.sigma_y, yz);
    const Eigen::MatrixXd r_yz = detail::shrinkage_operator(detail::centred_gaussian_gram(yz, sigma_yz), reg_.lambda);
    // Tr[M R] with R symmetric: sum_ij M_ij R_ji = sum_ij M_ij R_ij
    return HsncicValue{detail::trace_product(m_, r_yz), x_.rows(), reg_.lambda, sigma_xz_, sigma_yz, sigma_z_};
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::MatrixXd z_;
  OperatorRegularizer reg_;
  HsicKernelPolicy policy_;
  double sigma_xz_ = 0.0;
  double sigma_z_ = 0.0;
  Eigen::MatrixXd m_;
};

inline HsncicValue hsncic(const Eigen::MatrixXd& x_rows, const Eigen::MatrixXd& y_rows, const Eigen::MatrixXd& z_rows,
                          const OperatorRegularizer& reg = {}, const HsicKernelPolicy& policy = {}) {
  if (x_rows.rows() != y_rows.rows() || (z_rows.cols() > 0 && z_rows.rows() != x_rows.rows()))
    fail(Errc::DimensionMismatch, "x, y and z must share the sample count");
  return HsncicStatistic(x_rows, z_rows, reg, policy)(y_rows);
}

// Causality wiring: X = target present values, Y = lagged cause block,
// Z = target's own past plus lagged side columns, all at spec's lags.
struct HsncicBlocks {
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
};

inline HsncicBlocks hsncic_blocks(const Eigen::VectorXd& target, const Eigen::MatrixXd& side, const LagSpec& spec) {
  LagSpec s = spec;
  s.include_present_y = false;
  s.validate();
  const ModelVariant v = side.cols() > 0 ? ModelVariant::XAndZ : ModelVariant::XOnly;
  const LagDesign d = build_design(target, Eigen::MatrixXd(), side, s, v);
  return HsncicBlocks{d.target, d.design};
}

// Lagged cause rows aligned with hsncic_blocks: for each lag ascending, the
// cause columns at t - lag.
inline Eigen::MatrixXd lagged_block(const Eigen::MatrixXd& series, const LagSpec& spec) {
  const Eigen::Index n = series.rows();
  const Eigen::Index p = spec.max_lag();
  if (n <= p) fail(Errc::InsufficientLength, "series length " + std::to_string(n) + " <= max lag");
  const Eigen::Index m = n - p;
  const Eigen::Index k = series.cols();
  Eigen::MatrixXd out(m, k * static_cast<Eigen::Index>(spec.lags.size()));
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index c = 0;
    for (int lag : spec.lags)
      for (Eigen::Index j = 0; j < k; ++j) out(i, c++) = series(i + p - lag, j);
  }
  return out;
}

inline HsncicValue hsncic_causality(const TimeSeriesPanel& panel, const std::string& target,
                                    const std::vector<std::string>& cause, const std::vector<std::string>& side,
                                    const LagSpec& spec, const OperatorRegularizer& reg = {},
                                    const HsicKernelPolicy& policy = {}) {
  if (cause.empty()) fail(Errc::EmptyVariantGroup, "cause list is empty");
  if (spec.lags.empty()) fail(Errc::InvalidArgument, "HSNCIC needs at least one positive lag");
  const HsncicBlocks b = hsncic_blocks(panel.column(target), columns_of(panel, side), spec);
  return hsncic(b.x, lagged_block(columns_of(panel, cause), spec), b.z, reg, policy);
}

}  // namespace causalkit
