#pragma once

// Lagged design matrices for the four nested regression models compared by
// Geweke-style measures.
//
// Row layout (fixed, so kernel values are reproducible):
//   [lag-0 block]  y_t (if include_present_y and the variant has y),
//                  z_t (if include_present_z and the variant has z)
//   then for each lag l in ascending order:
//                  x_{t-l}, y_{t-l}..., z_{t-l}...   (per variant)

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/error.hpp"
#include "causalkit/panel.hpp"

namespace causalkit {

struct LagSpec {
  std::vector<int> lags{1};
  bool include_present_y = false;
  // Conditions on Z^t instead of Z^{t-1} only (adds z_t to every model with z).
  bool include_present_z = false;

  static LagSpec single(int lag) { return LagSpec{{lag}, false, false}; }
  static LagSpec range(int first, int last) {
    LagSpec s{{}, false, false};
    for (int l = first; l <= last; ++l) s.lags.push_back(l);
    return s;
  }

  int max_lag() const { return lags.empty() ? 0 : lags.back(); }

  void validate() const {
    if (lags.empty() && !include_present_y)
      fail(Errc::InvalidArgument, "lag list is empty and present y is not requested");
    for (std::size_t i = 0; i < lags.size(); ++i) {
      if (lags[i] < 1) fail(Errc::InvalidArgument, "lags must be >= 1");
      if (i > 0 && lags[i] <= lags[i - 1]) fail(Errc::InvalidArgument, "lags must be strictly ascending");
    }
  }

  std::string to_string() const {
    std::string s;
    if (include_present_y) s = "0";
    for (int l : lags) s += (s.empty() ? "" : ",") + std::to_string(l);
    return s;
  }
};

enum class ModelVariant { XOnly, XAndY, XAndZ, XYAndZ };

constexpr bool has_y(ModelVariant v) { return v == ModelVariant::XAndY || v == ModelVariant::XYAndZ; }
constexpr bool has_z(ModelVariant v) { return v == ModelVariant::XAndZ || v == ModelVariant::XYAndZ; }

struct LagDesign {
  Eigen::VectorXd target;              // x at row_times
  Eigen::MatrixXd design;              // m x d regressor rows
  std::vector<std::size_t> row_times;  // positional time of each target sample

  Eigen::Index rows() const { return design.rows(); }
  Eigen::Index dims() const { return design.cols(); }
};

// Number of regressor columns for a design with ky cause and kz side series.
inline Eigen::Index design_dimension(const LagSpec& spec, ModelVariant variant, Eigen::Index ky, Eigen::Index kz) {
  const Eigen::Index ey = has_y(variant) ? ky : 0;
  const Eigen::Index ez = has_z(variant) ? kz : 0;
  Eigen::Index d = static_cast<Eigen::Index>(spec.lags.size()) * (1 + ey + ez);
  if (spec.include_present_y) d += ey;
  if (spec.include_present_z) d += ez;
  return d;
}

// Column-level entry point: x is the target series, y and z hold one series
// per column (n x ky, n x kz). Empty matrices mean "no such block".
inline LagDesign build_design(const Eigen::VectorXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& z,
                              const LagSpec& spec, ModelVariant variant) {
  spec.validate();
  const Eigen::Index n = x.size();
  if (has_y(variant) && y.cols() == 0) fail(Errc::EmptyVariantGroup, "variant needs cause columns");
  if (has_z(variant) && z.cols() == 0) fail(Errc::EmptyVariantGroup, "variant needs side columns");
  if ((y.cols() > 0 && y.rows() != n) || (z.cols() > 0 && z.rows() != n))
    fail(Errc::LengthMismatch, "target, cause and side series differ in length");
  const Eigen::Index p = spec.max_lag();
  if (n <= p) fail(Errc::InsufficientLength, "series length " + std::to_string(n) + " <= max lag " + std::to_string(p));

  const Eigen::Index m = n - p;
  const Eigen::Index ky = has_y(variant) ? y.cols() : 0;
  const Eigen::Index kz = has_z(variant) ? z.cols() : 0;
  const Eigen::Index d = design_dimension(spec, variant, y.cols(), z.cols());

  LagDesign out;
  out.target = x.tail(m);
  out.design.resize(m, d);
  out.row_times.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index t = i + p;
    out.row_times[static_cast<std::size_t>(i)] = static_cast<std::size_t>(t);
    Eigen::Index c = 0;
    if (spec.include_present_y)
      for (Eigen::Index k = 0; k < ky; ++k) out.design(i, c++) = y(t, k);
    if (spec.include_present_z)
      for (Eigen::Index k = 0; k < kz; ++k) out.design(i, c++) = z(t, k);
    for (int lag : spec.lags) {
      const Eigen::Index s = t - lag;
      out.design(i, c++) = x(s);
      for (Eigen::Index k = 0; k < ky; ++k) out.design(i, c++) = y(s, k);
      for (Eigen::Index k = 0; k < kz; ++k) out.design(i, c++) = z(s, k);
    }
  }
  return out;
}

inline Eigen::MatrixXd columns_of(const TimeSeriesPanel& panel, const std::vector<std::string>& names) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(panel.length()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = panel.column(names[j]);
  return out;
}

inline LagDesign build_design(const TimeSeriesPanel& panel, const std::string& target_col,
                              const std::vector<std::string>& y_cols, const std::vector<std::string>& z_cols,
                              const LagSpec& spec, ModelVariant variant) {
  return build_design(panel.column(target_col), columns_of(panel, y_cols), columns_of(panel, z_cols), spec, variant);
}

// Positional shift. For k >= 0 the result is series[0, n-k), meant to be
// paired with another series' [k, n): the pairing puts x_{t-k} next to y_t,
// so "x causes y at lag k". Negative k drops the first |k| values instead.
inline Eigen::VectorXd shift_column(const Eigen::VectorXd& series, int k) {
  const Eigen::Index n = series.size();
  const Eigen::Index a = k < 0 ? -static_cast<Eigen::Index>(k) : static_cast<Eigen::Index>(k);
  if (a >= n) fail(Errc::ShiftTooLarge, "shift " + std::to_string(k) + " for length " + std::to_string(n));
  return k >= 0 ? Eigen::VectorXd(series.head(n - a)) : Eigen::VectorXd(series.tail(n - a));
}

}  // namespace causalkit
