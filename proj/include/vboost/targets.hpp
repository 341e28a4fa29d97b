#pragma once

#include "vboost/common.hpp"

#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

namespace vboost {

// Unnormalized target log-density with analytic gradient. Built-ins fill in
// whatever reference information is known in closed form; estimators only
// rely on log_density/grad_log_density.
struct TargetModel {
  Eigen::Index dim = 0;
  std::function<double(const Vec&)> log_density;
  std::function<Vec(const Vec&)> grad_log_density;

  std::optional<Vec> ref_mean;
  std::optional<Mat> ref_cov;
  std::optional<double> log_normalizer;  // ln of the constant the density is off by
};

namespace detail {

struct DenseGaussian {
  Vec mean;
  Eigen::LLT<Mat> llt;
  double log_norm_const;  // -D/2 ln 2pi - 1/2 ln|Sigma|

  double log_pdf(const Vec& x) const {
    const Vec delta = x - mean;
    return log_norm_const - 0.5 * delta.dot(llt.solve(delta));
  }
  Vec grad_log_pdf(const Vec& x) const { return -llt.solve(x - mean); }
};

inline DenseGaussian make_dense_gaussian(Vec mean, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gauss_target: covariance is not SPD");
  double half_log_det = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    half_log_det += std::log(llt.matrixLLT()(i, i));
  const double log_norm =
      -0.5 * static_cast<double>(mean.size()) * std::log(2.0 * std::numbers::pi) -
      half_log_det;
  return DenseGaussian{std::move(mean), std::move(llt), log_norm};
}

}  // namespace detail

// Normalized multivariate normal target (log_normalizer = 0).
inline TargetModel gauss_target(Vec mean, Mat cov) {
  auto g = std::make_shared<detail::DenseGaussian>(
      detail::make_dense_gaussian(std::move(mean), cov));
  TargetModel t;
  t.dim = g->mean.size();
  t.log_density = [g](const Vec& x) { return g->log_pdf(x); };
  t.grad_log_density = [g](const Vec& x) { return g->grad_log_pdf(x); };
  t.ref_mean = g->mean;
  t.ref_cov = cov;
  t.log_normalizer = 0.0;
  return t;
}

// Normalized Gaussian mixture target from (weight, mean, dense covariance)
// triples. Gradient is the responsibility-weighted component gradient.
inline TargetModel gmm_target(const std::vector<double>& weights,
                              const std::vector<Vec>& means,
                              const std::vector<Mat>& covs) {
  if (weights.empty() || weights.size() != means.size() || means.size() != covs.size())
    throw std::invalid_argument("gmm_target: inconsistent component lists");
  const Eigen::Index d = means.front().size();

  auto comps = std::make_shared<std::vector<detail::DenseGaussian>>();
  auto logw = std::make_shared<std::vector<double>>();
  double wsum = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (weights[c] <= 0.0) throw std::invalid_argument("gmm_target: weights must be positive");
    wsum += weights[c];
    comps->push_back(detail::make_dense_gaussian(means[c], covs[c]));
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("gmm_target: weights must sum to 1");
  for (double w : weights) logw->push_back(std::log(w));

  TargetModel t;
  t.dim = d;
  t.log_density = [comps, logw](const Vec& x) {
    Vec lp(comps->size());
    for (std::size_t c = 0; c < comps->size(); ++c)
      lp[static_cast<Eigen::Index>(c)] = (*logw)[c] + (*comps)[c].log_pdf(x);
    return log_sum_exp(lp);
  };
  t.grad_log_density = [comps, logw, d](const Vec& x) {
    Vec lp(comps->size());
    for (std::size_t c = 0; c < comps->size(); ++c)
      lp[static_cast<Eigen::Index>(c)] = (*logw)[c] + (*comps)[c].log_pdf(x);
    const double total = log_sum_exp(lp);
    Vec grad = Vec::Zero(d);
    for (std::size_t c = 0; c < comps->size(); ++c)
      grad += std::exp(lp[static_cast<Eigen::Index>(c)] - total) *
              (*comps)[c].grad_log_pdf(x);
    return grad;
  };

  // closed-form mixture moments
  Vec mean = Vec::Zero(d);
  for (std::size_t c = 0; c < weights.size(); ++c) mean += weights[c] * means[c];
  Mat cov = Mat::Zero(d, d);
  for (std::size_t c = 0; c < weights.size(); ++c)
    cov += weights[c] * (covs[c] + means[c] * means[c].transpose());
  cov -= mean * mean.transpose();
  t.ref_mean = mean;
  t.ref_cov = cov;
  t.log_normalizer = 0.0;
  return t;
}

}  // namespace vboost
