#pragma once

// Linear and kernelised Geweke indices. Both nested models are fitted by
// kernel ridge regression over the same rows, with the same kernel and
// regulariser; the index is ln(restricted_var / full_var) in nats.
//
// The linear measure is the Linear-kernel path with a small gamma.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/embedding.hpp"
#include "causalkit/error.hpp"
#include "causalkit/kernels.hpp"
#include "causalkit/krr.hpp"
#include "causalkit/panel.hpp"

namespace causalkit {

inline constexpr double kLinearGewekeGamma = 1e-8;

struct GewekeIndex {
  double value = 0.0;
  double restricted_var = 0.0;
  double full_var = 0.0;
  std::pair<ModelVariant, ModelVariant> variant_pair{ModelVariant::XOnly, ModelVariant::XAndY};
};

enum class GewekeMode { Causality, Instantaneous };

// In-sample kernel ridge residual variance of one design. A design without
// regressors predicts zero.
inline double design_residual_variance(const LagDesign& d, const KernelSpec& kernel, double gamma) {
  const double m = static_cast<double>(d.rows());
  if (d.dims() == 0) return d.target.squaredNorm() / m;
  return residual_variance(fit(gram(kernel, d.design), d.target, gamma));
}

inline GewekeIndex make_geweke_index(double restricted_var, double full_var, ModelVariant restricted,
                                     ModelVariant full) {
  constexpr double kFloor = 1e-15;
  if (full_var <= kFloor)
    fail(Errc::DegenerateVariance, "full model interpolates the target (variance " + std::to_string(full_var) +
                                       "); increase gamma");
  if (restricted_var <= kFloor)
    fail(Errc::DegenerateVariance, "restricted model interpolates the target; increase gamma");
  return GewekeIndex{std::log(restricted_var / full_var), restricted_var, full_var, {restricted, full}};
}

// Holds the restricted model, which does not depend on the cause, so repeated
// evaluations with surrogate cause columns only refit the full model.
class GewekeStatistic {
 public:
  GewekeStatistic(Eigen::VectorXd target, Eigen::MatrixXd side, LagSpec spec, KernelSpec kernel, double gamma,
                  GewekeMode mode)
      : target_(std::move(target)), side_(std::move(side)), spec_(std::move(spec)), kernel_(kernel), gamma_(gamma) {
    kernel_.validate();
    if (!(gamma_ > 0.0)) fail(Errc::InvalidArgument, "gamma must be positive");
    spec_.include_present_y = (mode == GewekeMode::Instantaneous);
    spec_.validate();
    restricted_ = side_.cols() > 0 ? ModelVariant::XAndZ : ModelVariant::XOnly;
    full_ = side_.cols() > 0 ? ModelVariant::XYAndZ : ModelVariant::XAndY;
    LagSpec restricted_spec = spec_;
    restricted_spec.include_present_y = false;
    // The restricted model must use the same rows as the full one.
    if (restricted_spec.lags.empty() && spec_.include_present_y) restricted_spec.include_present_y = true;
    const LagDesign d = build_design(target_, Eigen::MatrixXd(), side_, restricted_spec, restricted_);
    restricted_var_ = design_residual_variance(d, kernel_, gamma_);
  }

  const LagSpec& spec() const { return spec_; }
  double restricted_variance() const { return restricted_var_; }

  LagDesign full_design(const Eigen::MatrixXd& cause) const {
    if (cause.cols() == 0) fail(Errc::EmptyVariantGroup, "cause list is empty");
    return build_design(target_, cause, side_, spec_, full_);
  }

  GewekeIndex operator()(const Eigen::MatrixXd& cause) const {
    const double full_var = design_residual_variance(full_design(cause), kernel_, gamma_);
    return make_geweke_index(restricted_var_, full_var, restricted_, full_);
  }

 private:
  Eigen::VectorXd target_;
  Eigen::MatrixXd side_;
  LagSpec spec_;
  KernelSpec kernel_;
  double gamma_;
  ModelVariant restricted_ = ModelVariant::XOnly;
  ModelVariant full_ = ModelVariant::XAndY;
  double restricted_var_ = 0.0;
};

inline GewekeIndex geweke_causality(const TimeSeriesPanel& panel, const std::string& target,
                                    const std::vector<std::string>& cause, const std::vector<std::string>& side,
                                    const LagSpec& spec, const KernelSpec& kernel, double gamma) {
  if (cause.empty()) fail(Errc::EmptyVariantGroup, "cause list is empty");
  GewekeStatistic stat(panel.column(target), columns_of(panel, side), spec, kernel, gamma, GewekeMode::Causality);
  return stat(columns_of(panel, cause));
}

inline GewekeIndex geweke_instantaneous(const TimeSeriesPanel& panel, const std::string& target,
                                        const std::vector<std::string>& cause, const std::vector<std::string>& side,
                                        const LagSpec& spec, const KernelSpec& kernel, double gamma) {
  if (cause.empty()) fail(Errc::EmptyVariantGroup, "cause list is empty");
  GewekeStatistic stat(panel.column(target), columns_of(panel, side), spec, kernel, gamma,
                       GewekeMode::Instantaneous);
  return stat(columns_of(panel, cause));
}

}  // namespace causalkit
