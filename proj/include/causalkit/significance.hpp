#pragma once

// Permutation tests, p-values and rolling-window scans over any measure.
//
// The null distribution is built by shuffling the raw cause column(s) before
// lag embedding while the target and side columns keep their order.
//   p = (1/n_r) * #{ j : surrogate_j > observed }    (strict, no +1 smoothing)
// Permutation j is drawn from derive_seed(seed, j), so results are identical
// for any thread count or evaluation order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/embedding.hpp"
#include "causalkit/error.hpp"
#include "causalkit/geweke.hpp"
#include "causalkit/hsncic.hpp"
#include "causalkit/infotheory.hpp"
#include "causalkit/kernels.hpp"
#include "causalkit/panel.hpp"
#include "causalkit/parallel.hpp"

namespace causalkit {

enum class Measure { GewekeLinear, GewekeKernel, Hsncic, TransferEntropy, MutualInformation };

inline std::string to_string(Measure m) {
  switch (m) {
    case Measure::GewekeLinear: return "geweke-linear";
    case Measure::GewekeKernel: return "geweke-kernel";
    case Measure::Hsncic: return "hsncic";
    case Measure::TransferEntropy: return "transfer-entropy";
    case Measure::MutualInformation: return "mutual-information";
  }
  return "unknown";
}

inline Measure parse_measure(const std::string& s) {
  for (Measure m : {Measure::GewekeLinear, Measure::GewekeKernel, Measure::Hsncic, Measure::TransferEntropy,
                    Measure::MutualInformation})
    if (to_string(m) == s) return m;
  fail(Errc::InvalidArgument, "unknown measure '" + s + "'");
}

struct CausalityQuery {
  std::string target;
  std::vector<std::string> cause;
  std::vector<std::string> side;
  LagSpec lags;
  Measure measure = Measure::GewekeLinear;
  KernelSpec kernel = KernelSpec::linear();  // GewekeKernel only
  double gamma = kLinearGewekeGamma;         // both Geweke measures
  OperatorRegularizer hsncic_reg;
  HsicKernelPolicy hsncic_kernel;
  HistogramSpec histogram;

  void validate() const {
    if (target.empty()) fail(Errc::InvalidArgument, "target column is required");
    if (cause.empty()) fail(Errc::InvalidArgument, "at least one cause column is required");
    for (const auto& c : cause)
      if (c == target) fail(Errc::InvalidArgument, "cause and target must differ");
    switch (measure) {
      case Measure::GewekeLinear:
      case Measure::GewekeKernel:
        lags.validate();
        if (!(gamma > 0.0)) fail(Errc::InvalidArgument, "gamma must be positive");
        if (measure == Measure::GewekeKernel) kernel.validate();
        break;
      case Measure::Hsncic:
        if (lags.include_present_y || lags.lags.empty())
          fail(Errc::InvalidArgument, "hsncic needs positive lags and does not test instantaneous coupling");
        lags.validate();
        hsncic_reg.validate();
        break;
      case Measure::TransferEntropy:
        if (!side.empty()) fail(Errc::InvalidArgument, "transfer-entropy does not accept side columns");
        if (cause.size() != 1) fail(Errc::InvalidArgument, "transfer-entropy takes exactly one cause column");
        if (lags.include_present_y || lags.lags.size() != 1)
          fail(Errc::InvalidArgument, "transfer-entropy takes exactly one positive lag");
        histogram.validate();
        break;
      case Measure::MutualInformation:
        if (!side.empty()) fail(Errc::InvalidArgument, "mutual-information does not accept side columns");
        if (cause.size() != 1) fail(Errc::InvalidArgument, "mutual-information takes exactly one cause column");
        histogram.validate();
        break;
    }
  }
};

// Statistic over the cause columns (n x k) with everything else fixed.
using CauseStatistic = std::function<double(const Eigen::MatrixXd&)>;

inline CauseStatistic make_statistic(const CausalityQuery& q, const TimeSeriesPanel& panel) {
  q.validate();
  const Eigen::VectorXd x = panel.column(q.target);
  const Eigen::MatrixXd z = columns_of(panel, q.side);
  switch (q.measure) {
    case Measure::GewekeLinear:
    case Measure::GewekeKernel: {
      const KernelSpec k = q.measure == Measure::GewekeLinear ? KernelSpec::linear() : q.kernel;
      const GewekeMode mode = q.lags.include_present_y ? GewekeMode::Instantaneous : GewekeMode::Causality;
      auto stat = std::make_shared<GewekeStatistic>(x, z, q.lags, k, q.gamma, mode);
      return [stat](const Eigen::MatrixXd& c) { return (*stat)(c).value; };
    }
    case Measure::Hsncic: {
      const HsncicBlocks b = hsncic_blocks(x, z, q.lags);
      auto stat = std::make_shared<HsncicStatistic>(b.x, b.z, q.hsncic_reg, q.hsncic_kernel);
      const LagSpec lags = q.lags;
      return [stat, lags](const Eigen::MatrixXd& c) { return (*stat)(lagged_block(c, lags)).value; };
    }
    case Measure::TransferEntropy: {
      const int lag = q.lags.lags.front();
      const HistogramSpec h = q.histogram;
      return [x, lag, h](const Eigen::MatrixXd& c) { return transfer_entropy(x, c.col(0), lag, h); };
    }
    case Measure::MutualInformation: {
      const HistogramSpec h = q.histogram;
      return [x, h](const Eigen::MatrixXd& c) { return mutual_information(x, c.col(0), h); };
    }
  }
  fail(Errc::InvalidArgument, "unsupported measure");
}

inline double evaluate_measure(const CausalityQuery& q, const TimeSeriesPanel& panel) {
  return make_statistic(q, panel)(columns_of(panel, q.cause));
}

struct PermutationPlan {
  std::size_t n_r = 200;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_r < 1) fail(Errc::InvalidArgument, "permutation count must be >= 1");
  }
};

struct MeasureResult {
  double observed = 0.0;
  std::vector<double> surrogates;
  double p_value = 1.0;
  PermutationPlan plan;
};

inline double permutation_p_value(double observed, const std::vector<double>& surrogates) {
  if (surrogates.empty()) fail(Errc::InvalidArgument, "no surrogates");
  const auto exceed = std::count_if(surrogates.begin(), surrogates.end(), [&](double s) { return s > observed; });
  return static_cast<double>(exceed) / static_cast<double>(surrogates.size());
}

inline std::vector<Eigen::Index> random_permutation(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

inline MeasureResult permutation_test(const CauseStatistic& stat, const Eigen::MatrixXd& cause,
                                      const PermutationPlan& plan) {
  plan.validate();
  MeasureResult r;
  r.plan = plan;
  r.observed = stat(cause);
  r.surrogates.assign(plan.n_r, 0.0);
  parallel_for(plan.n_r, [&](std::size_t j) {
    const auto perm = random_permutation(cause.rows(), derive_seed(plan.seed, j));
    Eigen::MatrixXd shuffled(cause.rows(), cause.cols());
    for (Eigen::Index i = 0; i < cause.rows(); ++i) shuffled.row(i) = cause.row(perm[static_cast<std::size_t>(i)]);
    r.surrogates[j] = stat(shuffled);
  });
  r.p_value = permutation_p_value(r.observed, r.surrogates);
  return r;
}

inline MeasureResult permutation_test(const CausalityQuery& q, const TimeSeriesPanel& panel,
                                      const PermutationPlan& plan) {
  return permutation_test(make_statistic(q, panel), columns_of(panel, q.cause), plan);
}

struct WindowPlan {
  std::size_t window_length = 250;
  std::size_t step = 25;

  void validate() const {
    if (window_length < 1 || step < 1) fail(Errc::InvalidArgument, "window length and step must be >= 1");
  }
};

inline std::vector<std::size_t> window_starts(std::size_t length, const WindowPlan& w) {
  w.validate();
  if (w.window_length > length)
    fail(Errc::WindowTooLong, "window " + std::to_string(w.window_length) + " exceeds panel length " +
                                  std::to_string(length));
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + w.window_length <= length; s += w.step) starts.push_back(s);
  return starts;
}

struct WindowResult {
  std::size_t start = 0;
  std::size_t length = 0;
  MeasureResult result;
};

// Window k is tested with permutation seed derive_seed(plan.seed, k).
inline std::vector<WindowResult> rolling_scan(const CausalityQuery& q, const TimeSeriesPanel& panel,
                                              const WindowPlan& wplan, const PermutationPlan& pplan) {
  q.validate();
  const auto starts = window_starts(panel.length(), wplan);
  std::vector<WindowResult> out;
  out.reserve(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const TimeSeriesPanel w = window(panel, starts[k], wplan.window_length);
    PermutationPlan sub{pplan.n_r, derive_seed(pplan.seed, k)};
    out.push_back({starts[k], wplan.window_length, permutation_test(q, w, sub)});
  }
  return out;
}

// Entry (i, j) is the p-value for "column j causes column i"; the diagonal is
// NaN (not tested).
struct PValueMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd p_values;
  Eigen::MatrixXd observed;
};

inline PValueMatrix pvalue_matrix(const TimeSeriesPanel& panel, const std::vector<std::string>& columns,
                                  const CausalityQuery& base, const PermutationPlan& pplan) {
  if (columns.size() < 2) fail(Errc::InvalidArgument, "a p-value matrix needs at least 2 columns");
  const auto k = static_cast<Eigen::Index>(columns.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  PValueMatrix out{columns, Eigen::MatrixXd::Constant(k, k, nan), Eigen::MatrixXd::Constant(k, k, nan)};
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      CausalityQuery q = base;
      q.target = columns[static_cast<std::size_t>(i)];
      q.cause = {columns[static_cast<std::size_t>(j)]};
      q.side.clear();
      // seeds follow the column names so reordering columns reorders the matrix
      const std::uint64_t pair_seed =
          derive_seed(derive_seed(pplan.seed, stable_hash(q.target)), stable_hash(q.cause[0]));
      const MeasureResult r = permutation_test(q, panel, {pplan.n_r, pair_seed});
      out.p_values(i, j) = r.p_value;
      out.observed(i, j) = r.observed;
    }
  return out;
}

}  // namespace causalkit
