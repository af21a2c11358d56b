#pragma once

// Kernel ridge regression in dual form:
//   alpha = (K + gamma m I)^{-1} x,   x_hat = K_new alpha.
// The regulariser is scaled by the sample count m.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "causalkit/error.hpp"
#include "causalkit/kernels.hpp"

namespace causalkit {

struct RidgeFit {
  Eigen::VectorXd alpha;
  double gamma = 0.0;
  GramMatrix gram;
  Eigen::VectorXd target;

  Eigen::Index samples() const { return alpha.size(); }
};

inline RidgeFit fit(const GramMatrix& gram, const Eigen::VectorXd& target, double gamma) {
  const Eigen::Index m = gram.size();
  if (gram.values.cols() != m || target.size() != m)
    fail(Errc::DimensionMismatch, "Gram is " + std::to_string(gram.values.rows()) + "x" +
                                      std::to_string(gram.values.cols()) + ", target has " +
                                      std::to_string(target.size()) + " entries");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail(Errc::InvalidArgument, "gamma must be positive");
  if (m == 0) fail(Errc::InvalidArgument, "empty training set");

  Eigen::MatrixXd a = gram.values;
  a.diagonal().array() += gamma * static_cast<double>(m);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    fail(Errc::SolveFailure, "K + gamma m I is not numerically positive definite (gamma=" + std::to_string(gamma) + ")");
  RidgeFit f{llt.solve(target), gamma, gram, target};
  if (!f.alpha.allFinite()) fail(Errc::SolveFailure, "non-finite dual weights");
  return f;
}

inline Eigen::VectorXd predict(const RidgeFit& f, const Eigen::MatrixXd& cross_gram) {
  if (cross_gram.cols() != f.samples())
    fail(Errc::DimensionMismatch, "cross Gram has " + std::to_string(cross_gram.cols()) + " columns, fit has " +
                                      std::to_string(f.samples()) + " samples");
  return cross_gram * f.alpha;
}

inline Eigen::VectorXd fitted_values(const RidgeFit& f) { return f.gram.values * f.alpha; }

// In-sample mean squared residual (1/m) ||K alpha - x||^2.
inline double residual_variance(const RidgeFit& f) {
  const Eigen::VectorXd r = fitted_values(f) - f.target;
  return r.squaredNorm() / static_cast<double>(f.samples());
}

}  // namespace causalkit
