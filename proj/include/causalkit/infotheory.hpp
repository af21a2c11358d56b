#pragma once

// Plug-in (naive histogram) estimators: Shannon entropy, mutual information
// and bivariate transfer entropy, in nats. Every quantity derived from one
// sample set is computed from a single joint histogram and its
// marginalisations, never from separately binned data.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/error.hpp"

namespace causalkit {

enum class RangePolicy { SampleMinMax, Explicit };

struct HistogramSpec {
  int bins_per_dim = 4;
  RangePolicy range_policy = RangePolicy::SampleMinMax;
  std::vector<std::pair<double, double>> ranges;  // one (lo, hi) per dim when Explicit

  HistogramSpec() = default;
  explicit HistogramSpec(int bins, RangePolicy policy = RangePolicy::SampleMinMax,
                         std::vector<std::pair<double, double>> explicit_ranges = {})
      : bins_per_dim(bins), range_policy(policy), ranges(std::move(explicit_ranges)) {}

  void validate() const {
    if (bins_per_dim < 2) fail(Errc::InvalidArgument, "bins_per_dim must be >= 2");
  }
};

struct JointHistogram {
  std::size_t dims = 0;
  std::size_t bins = 0;                // per dimension
  std::vector<std::uint64_t> counts;  // row-major, last dimension fastest
  std::uint64_t total = 0;

  std::size_t cells() const { return counts.size(); }
};

inline JointHistogram histogram(const Eigen::MatrixXd& samples, const HistogramSpec& spec) {
  spec.validate();
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n < 1 || d < 1) fail(Errc::InvalidArgument, "histogram needs at least one sample and one dimension");
  if (spec.range_policy == RangePolicy::Explicit && static_cast<Eigen::Index>(spec.ranges.size()) != d)
    fail(Errc::InvalidArgument, "explicit ranges must be given for every dimension");

  const auto bins = static_cast<std::size_t>(spec.bins_per_dim);
  std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto u = static_cast<std::size_t>(j);
    if (spec.range_policy == RangePolicy::Explicit) {
      std::tie(lo[u], hi[u]) = spec.ranges[u];
      if (!(hi[u] >= lo[u])) fail(Errc::InvalidArgument, "explicit range has hi < lo");
    } else {
      lo[u] = samples.col(j).minCoeff();
      hi[u] = samples.col(j).maxCoeff();
    }
  }

  JointHistogram h;
  h.dims = static_cast<std::size_t>(d);
  h.bins = bins;
  std::size_t cells = 1;
  for (Eigen::Index j = 0; j < d; ++j) cells *= bins;
  h.counts.assign(cells, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t flat = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto u = static_cast<std::size_t>(j);
      const double v = samples(i, j);
      if (v < lo[u] || v > hi[u])
        fail(Errc::ExplicitRangeExcludesSample,
             "sample " + std::to_string(v) + " outside [" + std::to_string(lo[u]) + ", " + std::to_string(hi[u]) + "]");
      std::size_t b = 0;
      if (hi[u] > lo[u]) {
        b = static_cast<std::size_t>(std::floor((v - lo[u]) / (hi[u] - lo[u]) * static_cast<double>(bins)));
        if (b >= bins) b = bins - 1;  // right edge belongs to the last bin
      }
      flat = flat * bins + b;
    }
    ++h.counts[flat];
  }
  h.total = static_cast<std::uint64_t>(n);
  return h;
}

// Sums the joint over every axis not listed in `keep` (kept axes retain their
// original order).
inline JointHistogram marginalize(const JointHistogram& h, const std::vector<std::size_t>& keep) {
  JointHistogram out;
  out.dims = keep.size();
  out.bins = h.bins;
  out.total = h.total;
  std::size_t cells = 1;
  for (std::size_t k = 0; k < keep.size(); ++k) cells *= h.bins;
  out.counts.assign(cells, 0);
  std::vector<std::size_t> coord(h.dims);
  for (std::size_t flat = 0; flat < h.counts.size(); ++flat) {
    if (h.counts[flat] == 0) continue;
    std::size_t rem = flat;
    for (std::size_t a = h.dims; a-- > 0;) {
      coord[a] = rem % h.bins;
      rem /= h.bins;
    }
    std::size_t target = 0;
    for (std::size_t a : keep) {
      if (a >= h.dims) fail(Errc::InvalidArgument, "marginalisation axis out of range");
      target = target * h.bins + coord[a];
    }
    out.counts[target] += h.counts[flat];
  }
  return out;
}

// Plug-in Shannon entropy in nats, with 0 log 0 = 0.
inline double entropy(const JointHistogram& h) {
  if (h.total == 0) fail(Errc::InvalidArgument, "entropy of an empty histogram");
  const double n = static_cast<double>(h.total);
  double s = 0.0;
  for (auto c : h.counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      s -= p * std::log(p);
    }
  return s;
}

inline double mutual_information(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const HistogramSpec& spec = {}) {
  if (u.size() != v.size()) fail(Errc::LengthMismatch, "u and v differ in length");
  Eigen::MatrixXd s(u.size(), 2);
  s << u, v;
  const JointHistogram joint = histogram(s, spec);
  return entropy(marginalize(joint, {0})) + entropy(marginalize(joint, {1})) - entropy(joint);
}

// T_{y->x} with one own-past lag and the cause at `lag`, from the joint of
// (x_t, x_{t-1}, y_{t-lag}):
//   H(x_t, x_{t-1}) - H(x_{t-1}) - H(x_t, x_{t-1}, y_{t-lag}) + H(x_{t-1}, y_{t-lag})
inline Eigen::MatrixXd transfer_entropy_samples(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int lag) {
  if (x.size() != y.size()) fail(Errc::LengthMismatch, "x and y differ in length");
  if (lag < 1) fail(Errc::InvalidArgument, "transfer entropy lag must be >= 1");
  const Eigen::Index n = x.size();
  if (n <= lag) fail(Errc::LagTooLarge, "lag " + std::to_string(lag) + " >= series length " + std::to_string(n));
  const Eigen::Index m = n - lag;
  Eigen::MatrixXd s(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index t = i + lag;
    s(i, 0) = x(t);
    s(i, 1) = x(t - 1);
    s(i, 2) = y(t - lag);
  }
  return s;
}

inline double transfer_entropy(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int lag,
                               const HistogramSpec& spec = {}) {
  const JointHistogram joint = histogram(transfer_entropy_samples(x, y, lag), spec);
  return entropy(marginalize(joint, {0, 1})) - entropy(marginalize(joint, {1})) - entropy(joint) +
         entropy(marginalize(joint, {1, 2}));
}

}  // namespace causalkit
