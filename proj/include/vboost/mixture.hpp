#pragma once

#include "vboost/lowrank_gauss.hpp"
#include "vboost/rng.hpp"

#include <utility>
#include <vector>

namespace vboost {

// Finite mixture of LR+D Gaussian components. Weights live on the simplex;
// the boosting optimizer owns the unconstrained (logit) parameterization.
// Immutable after construction: extend() returns a new value.
struct MixtureApprox {
  Vec weights;                               // C, nonnegative, sums to 1
  std::vector<GaussianComponent> components;  // shared dimension D

  Eigen::Index dim() const { return components.front().dim(); }
  Eigen::Index size() const { return weights.size(); }
};

inline void validate(const MixtureApprox& mix) {
  if (mix.components.empty() || mix.weights.size() != static_cast<Eigen::Index>(mix.components.size()))
    throw std::invalid_argument("mixture needs C >= 1 components with matching weights");
  if (mix.weights.minCoeff() < 0.0 || std::abs(mix.weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixture weights must be a simplex (sum 1 within 1e-12)");
  for (const auto& c : mix.components)
    if (c.dim() != mix.dim() || c.cov.dim() != c.dim())
      throw std::invalid_argument("mixture components must share one dimension");
}

inline MixtureApprox single_component(GaussianComponent comp) {
  MixtureApprox mix;
  mix.weights = Vec::Ones(1);
  mix.components.push_back(std::move(comp));
  return mix;
}

// Marginal of the mixture on a subset of coordinates: same weights, each
// component restricted to (mean, dense covariance) on the index set.
struct MarginalMixture {
  Vec weights;
  std::vector<Vec> means;
  std::vector<Mat> covs;
};

namespace detail {

inline Vec component_log_pdfs(const MixtureApprox& mix, const Vec& x) {
  Vec lp(mix.size());
  for (Eigen::Index c = 0; c < mix.size(); ++c)
    lp[c] = log_pdf(mix.components[c], x);
  return lp;
}

}  // namespace detail

inline double mix_log_pdf(const MixtureApprox& mix, const Vec& x) {
  Vec lp = detail::component_log_pdfs(mix, x);
  for (Eigen::Index c = 0; c < mix.size(); ++c) lp[c] += std::log(mix.weights[c]);
  return log_sum_exp(lp);
}

inline Vec grad_x_mix_log_pdf(const MixtureApprox& mix, const Vec& x) {
  Vec lp = detail::component_log_pdfs(mix, x);
  for (Eigen::Index c = 0; c < mix.size(); ++c) lp[c] += std::log(mix.weights[c]);
  const double total = log_sum_exp(lp);
  Vec grad = Vec::Zero(mix.dim());
  for (Eigen::Index c = 0; c < mix.size(); ++c) {
    const double resp = std::exp(lp[c] - total);
    if (resp > 0.0) grad += resp * grad_x_log_pdf(mix.components[c], x);
  }
  return grad;
}

// One categorical draw per sample, then the component's sampling map with
// fresh standard normals. Stratified allocation belongs to the ELBO
// estimator, not here.
inline std::vector<Vec> mix_sample(const MixtureApprox& mix, int count, RngStream& rng) {
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int c = rng.categorical(mix.weights);
    const auto& comp = mix.components[c];
    const Vec z_lo = rng.normal_vec(comp.cov.rank());
    const Vec z_hi = rng.normal_vec(comp.dim());
    out.push_back(sample_map(comp, z_lo, z_hi));
  }
  return out;
}

inline Vec mix_mean(const MixtureApprox& mix) {
  Vec mean = Vec::Zero(mix.dim());
  for (Eigen::Index c = 0; c < mix.size(); ++c)
    mean += mix.weights[c] * mix.components[c].mean;
  return mean;
}

// Exact mixture covariance, sum_c w_c (Sigma_c + mu_c mu_c^T) - mu mu^T.
inline Mat mix_cov(const MixtureApprox& mix) {
  const Vec mean = mix_mean(mix);
  Mat cov = Mat::Zero(mix.dim(), mix.dim());
  for (Eigen::Index c = 0; c < mix.size(); ++c) {
    const auto& comp = mix.components[c];
    cov += mix.weights[c] * dense(comp.cov);
    cov += mix.weights[c] * comp.mean * comp.mean.transpose();
  }
  cov -= mean * mean.transpose();
  return cov;
}

inline Vec mix_cov_diag(const MixtureApprox& mix) {
  const Vec mean = mix_mean(mix);
  Vec diag = Vec::Zero(mix.dim());
  for (Eigen::Index c = 0; c < mix.size(); ++c) {
    const auto& comp = mix.components[c];
    diag += mix.weights[c] *
            (comp.cov.factors.array().square().rowwise().sum() +
             comp.cov.log_diag.array().exp() + comp.mean.array().square())
                .matrix();
  }
  return diag - mean.cwiseAbs2();
}

inline MarginalMixture marginal(const MixtureApprox& mix, const std::vector<int>& dims) {
  if (dims.empty()) throw std::invalid_argument("marginal: empty index set");
  for (int d : dims)
    if (d < 0 || d >= mix.dim())
      throw std::out_of_range("marginal: index " + std::to_string(d) + " out of range");
  MarginalMixture out;
  out.weights = mix.weights;
  const int k = static_cast<int>(dims.size());
  for (const auto& comp : mix.components) {
    const Mat full = dense(comp.cov);
    Vec m(k);
    Mat s(k, k);
    for (int i = 0; i < k; ++i) {
      m[i] = comp.mean[dims[i]];
      for (int j = 0; j < k; ++j) s(i, j) = full(dims[i], dims[j]);
    }
    out.means.push_back(std::move(m));
    out.covs.push_back(std::move(s));
  }
  return out;
}

// New mixture (1 - rho) q + rho q_new. Existing components are copied
// verbatim; only the scalar weight scaling changes.
inline MixtureApprox extend(const MixtureApprox& mix, GaussianComponent new_comp,
                            double rho_new) {
  if (!(rho_new >= 0.0 && rho_new <= 1.0))
    throw std::invalid_argument("extend: mixing weight outside [0, 1]");
  if (new_comp.dim() != mix.dim())
    throw std::invalid_argument("extend: dimension mismatch");
  MixtureApprox out;
  out.weights = Vec(mix.size() + 1);
  out.weights.head(mix.size()) = (1.0 - rho_new) * mix.weights;
  out.weights[mix.size()] = rho_new;
  out.components = mix.components;
  out.components.push_back(std::move(new_comp));
  return out;
}

}  // namespace vboost
