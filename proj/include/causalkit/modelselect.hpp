#pragma once

// Randomised k-fold cross-validation of (gamma, sigma) for kernel ridge
// regression. The Gram matrix is computed once per sigma over all rows; each
// fold reads its train/train and validation/train blocks from it and reuses
// one eigendecomposition of the training block across the gamma sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalkit/embedding.hpp"
#include "causalkit/error.hpp"
#include "causalkit/kernels.hpp"
#include "causalkit/parallel.hpp"

namespace causalkit {

inline std::vector<double> dyadic_range(int lo_exp, int hi_exp) {
  std::vector<double> v;
  for (int e = lo_exp; e <= hi_exp; ++e) v.push_back(std::ldexp(1.0, e));
  return v;
}

struct CvGrid {
  std::vector<double> gammas = dyadic_range(-40, -26);
  std::vector<double> sigmas = dyadic_range(7, 13);
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  void validate() const {
    auto check = [](const std::vector<double>& v, const char* what) {
      if (v.empty()) fail(Errc::InvalidArgument, std::string(what) + " grid is empty");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) fail(Errc::InvalidArgument, std::string(what) + " grid values must be positive");
        if (i > 0 && !(v[i] > v[i - 1])) fail(Errc::InvalidArgument, std::string(what) + " grid must be ascending");
      }
    };
    check(gammas, "gamma");
    check(sigmas, "sigma");
    if (folds < 2) fail(Errc::InvalidArgument, "cross-validation needs at least 2 folds");
  }
};

struct CvReport {
  double best_gamma = 0.0;
  std::optional<double> best_sigma;  // empty for the linear kernel
  Eigen::MatrixXd score_surface;     // gammas x sigmas (x 1 for linear)
  std::vector<std::size_t> permutation;  // shuffled row order used to cut folds
  std::vector<std::size_t> fold_of_row;  // fold id of each design row
};

// Sizes differ by at most one; the first m % folds folds take the extra row.
inline std::vector<std::size_t> fold_sizes(std::size_t m, std::size_t folds) {
  std::vector<std::size_t> s(folds, m / folds);
  for (std::size_t k = 0; k < m % folds; ++k) ++s[k];
  return s;
}

inline std::vector<std::size_t> shuffled_rows(std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

inline std::vector<std::size_t> assign_folds(const std::vector<std::size_t>& permutation, std::size_t folds) {
  std::vector<std::size_t> fold_of(permutation.size());
  const auto sizes = fold_sizes(permutation.size(), folds);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < folds; ++k)
    for (std::size_t c = 0; c < sizes[k]; ++c) fold_of[permutation[pos++]] = k;
  return fold_of;
}

// Argmin over a scored grid; ties go to the larger gamma, then larger sigma.
struct GridChoice {
  std::size_t gamma_index = 0;
  std::size_t sigma_index = 0;
};

inline GridChoice argmin_on_grid(const Eigen::MatrixXd& surface) {
  GridChoice best;
  double best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (Eigen::Index g = 0; g < surface.rows(); ++g)
    for (Eigen::Index s = 0; s < surface.cols(); ++s) {
      const double v = surface(g, s);
      if (std::isnan(v)) fail(Errc::InvalidArgument, "NaN score on the grid");
      if (std::isinf(v)) continue;
      if (!found || v <= best_score) {
        best_score = v;
        best = {static_cast<std::size_t>(g), static_cast<std::size_t>(s)};
        found = true;
      }
    }
  if (!found) fail(Errc::SolveFailure, "every grid point failed to solve");
  return best;
}

// Scores every grid point with `score(gamma_index, sigma_index)`.
inline Eigen::MatrixXd score_grid(std::size_t n_gamma, std::size_t n_sigma,
                                  const std::function<double(std::size_t, std::size_t)>& score) {
  Eigen::MatrixXd surface(static_cast<Eigen::Index>(n_gamma), static_cast<Eigen::Index>(n_sigma));
  for (std::size_t g = 0; g < n_gamma; ++g)
    for (std::size_t s = 0; s < n_sigma; ++s) {
      double v = score(g, s);
      if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
      surface(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(s)) = v;
    }
  return surface;
}

namespace detail {

// Validation MSE for each gamma on one fold, from one eigendecomposition of
// the training block. A gamma whose regularised block is not positive
// definite scores +inf.
inline std::vector<double> fold_scores(const Eigen::MatrixXd& k_full, const std::vector<Eigen::Index>& train,
                                       const std::vector<Eigen::Index>& val, const Eigen::VectorXd& target,
                                       const std::vector<double>& gammas) {
  const auto nt = static_cast<Eigen::Index>(train.size());
  const auto nv = static_cast<Eigen::Index>(val.size());
  Eigen::MatrixXd k_tt(nt, nt), k_vt(nv, nt);
  Eigen::VectorXd x_t(nt), x_v(nv);
  for (Eigen::Index a = 0; a < nt; ++a) {
    x_t(a) = target(train[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < nt; ++b)
      k_tt(a, b) = k_full(train[static_cast<std::size_t>(a)], train[static_cast<std::size_t>(b)]);
  }
  for (Eigen::Index a = 0; a < nv; ++a) {
    x_v(a) = target(val[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < nt; ++b)
      k_vt(a, b) = k_full(val[static_cast<std::size_t>(a)], train[static_cast<std::size_t>(b)]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k_tt);
  std::vector<double> out(gammas.size(), std::numeric_limits<double>::infinity());
  if (eig.info() != Eigen::Success) return out;
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * x_t;
  const Eigen::MatrixXd kv_vecs = k_vt * eig.eigenvectors();
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    const Eigen::VectorXd denom = eig.eigenvalues().array() + gammas[g] * static_cast<double>(nt);
    if (denom.minCoeff() <= 0.0) continue;
    const Eigen::VectorXd pred = kv_vecs * proj.cwiseQuotient(denom);
    const double mse = (pred - x_v).squaredNorm() / static_cast<double>(nv);
    if (std::isfinite(mse)) out[g] = mse;
  }
  return out;
}

}  // namespace detail

inline CvReport cross_validate(const LagDesign& design, KernelKind kind, const CvGrid& grid) {
  grid.validate();
  const auto m = static_cast<std::size_t>(design.rows());
  if (m < grid.folds)
    fail(Errc::TooFewRows, std::to_string(m) + " rows for " + std::to_string(grid.folds) + " folds");

  CvReport report;
  report.permutation = shuffled_rows(m, grid.seed);
  report.fold_of_row = assign_folds(report.permutation, grid.folds);

  std::vector<std::vector<Eigen::Index>> train(grid.folds), val(grid.folds);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < grid.folds; ++k)
      (report.fold_of_row[i] == k ? val : train)[k].push_back(static_cast<Eigen::Index>(i));

  const std::vector<double> sigmas = kind == KernelKind::Linear ? std::vector<double>{1.0} : grid.sigmas;
  // per (sigma, fold): one score per gamma
  std::vector<std::vector<double>> per_task(sigmas.size() * grid.folds);
  std::vector<Eigen::MatrixXd> grams(sigmas.size());
  for (std::size_t s = 0; s < sigmas.size(); ++s)
    grams[s] = gram(KernelSpec{kind, sigmas[s]}, design.design).values;
  parallel_for(per_task.size(), [&](std::size_t task) {
    const std::size_t s = task / grid.folds;
    const std::size_t k = task % grid.folds;
    per_task[task] = detail::fold_scores(grams[s], train[k], val[k], design.target, grid.gammas);
  });

  report.score_surface = score_grid(grid.gammas.size(), sigmas.size(), [&](std::size_t g, std::size_t s) {
    double sum = 0.0;
    for (std::size_t k = 0; k < grid.folds; ++k) sum += per_task[s * grid.folds + k][g];
    return sum / static_cast<double>(grid.folds);
  });
  const GridChoice best = argmin_on_grid(report.score_surface);
  report.best_gamma = grid.gammas[best.gamma_index];
  if (kind == KernelKind::Gaussian) report.best_sigma = grid.sigmas[best.sigma_index];
  return report;
}

}  // namespace causalkit
