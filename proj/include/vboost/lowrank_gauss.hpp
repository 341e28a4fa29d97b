#pragma once

#include "vboost/common.hpp"

#include <cmath>
#include <numbers>

namespace vboost {

// Covariance of the form
//
//   Sigma = factors * factors^T + diag(exp(log_diag))
//
// with factors D x r. The diagonal is parameterized by its log, so Sigma is
// symmetric positive definite for any finite parameter values; rank 0 is an
// empty factor block and every operation degrades to the diagonal formulas.
// Determinants and inverses only ever touch an r x r inner matrix
//   M = I_r + factors^T * diag(exp(-log_diag)) * factors,
// which is SPD by construction, so a plain Cholesky suffices.
struct LowRankDiagCov {
  Mat factors;   // D x r
  Vec log_diag;  // D

  Eigen::Index dim() const { return log_diag.size(); }
  Eigen::Index rank() const { return factors.cols(); }
};

inline LowRankDiagCov diag_cov(Vec log_diag) {
  const Eigen::Index d = log_diag.size();
  return LowRankDiagCov{Mat(d, 0), std::move(log_diag)};
}

struct GaussianComponent {
  Vec mean;
  LowRankDiagCov cov;

  Eigen::Index dim() const { return mean.size(); }
};

// Gradient of some scalar objective with respect to (mean, factors, log_diag).
struct ComponentGradient {
  Vec d_mean;
  Mat d_factors;
  Vec d_log_diag;
};

inline ComponentGradient zero_gradient(Eigen::Index dim, Eigen::Index rank) {
  return ComponentGradient{Vec::Zero(dim), Mat::Zero(dim, rank), Vec::Zero(dim)};
}

namespace detail {

// Cholesky of the inner r x r matrix M = I + F^T A F, A = diag(exp(-v)).
inline Eigen::LLT<Mat> inner_llt(const LowRankDiagCov& cov, const Vec& inv_diag) {
  const Mat scaled = inv_diag.asDiagonal() * cov.factors;  // A F
  Mat m = Mat::Identity(cov.rank(), cov.rank());
  m.noalias() += cov.factors.transpose() * scaled;
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "lowrank inner Cholesky failed; exp(log_diag) likely overflowed");
  return llt;
}

}  // namespace detail

// ln|Sigma| = sum(log_diag) + ln|I + F^T A F|, cost O(D r^2 + r^3).
inline double log_det(const LowRankDiagCov& cov) {
  const Vec inv_diag = (-cov.log_diag.array()).exp();
  const auto llt = detail::inner_llt(cov, inv_diag);
  double inner = 0.0;
  for (Eigen::Index i = 0; i < cov.rank(); ++i)
    inner += std::log(llt.matrixLLT()(i, i));
  return cov.log_diag.sum() + 2.0 * inner;
}

// Sigma^{-1} y by the Woodbury identity, cost O(D r + r^3).
inline Vec solve(const LowRankDiagCov& cov, const Vec& y) {
  const Vec inv_diag = (-cov.log_diag.array()).exp();
  const auto llt = detail::inner_llt(cov, inv_diag);
  const Vec t = inv_diag.cwiseProduct(y);  // A y
  const Vec u = llt.solve(cov.factors.transpose() * t);
  return t - inv_diag.cwiseProduct(cov.factors * u);
}

// Explicit D x D covariance. Test/oracle surface only; nothing on the
// estimation path materializes this for the sampling or density formulas.
inline Mat dense(const LowRankDiagCov& cov) {
  Mat out = cov.factors * cov.factors.transpose();
  out.diagonal() += cov.log_diag.array().exp().matrix();
  return out;
}

inline double log_pdf(const GaussianComponent& comp, const Vec& x) {
  const Vec delta = x - comp.mean;
  const double quad = delta.dot(solve(comp.cov, delta));
  return -0.5 * log_det(comp.cov) -
         0.5 * static_cast<double>(comp.dim()) * std::log(2.0 * std::numbers::pi) -
         0.5 * quad;
}

inline Vec grad_x_log_pdf(const GaussianComponent& comp, const Vec& x) {
  return -solve(comp.cov, x - comp.mean);
}

// Deterministic sampling map x = F z_lo + mean + exp(log_diag / 2) .* z_hi.
// With z_lo, z_hi standard normal the result is distributed as the component.
inline Vec sample_map(const GaussianComponent& comp, const Vec& z_lo, const Vec& z_hi) {
  return comp.cov.factors * z_lo + comp.mean +
         (comp.cov.log_diag.array() / 2.0).exp().matrix().cwiseProduct(z_hi);
}

// Chain rule through sample_map: given upstream = d(objective)/dx evaluated at
// x = sample_map(comp, z_lo, z_hi), returns the parameter gradient.
inline ComponentGradient pathwise_param_grad(const GaussianComponent& comp,
                                             const Vec& z_lo, const Vec& z_hi,
                                             const Vec& upstream) {
  ComponentGradient g;
  g.d_mean = upstream;
  g.d_factors = upstream * z_lo.transpose();
  g.d_log_diag = 0.5 * upstream.array() * (comp.cov.log_diag.array() / 2.0).exp() *
                 z_hi.array();
  return g;
}

// Gradient of ln q(x; mean, factors, log_diag) with respect to the parameters
// at fixed x. Writing s = Sigma^{-1}(x - mean):
//   d/d mean     =  s
//   d/d factors  =  s (F^T s)^T - Sigma^{-1} F
//   d/d log_diag = (-1/2 diag(Sigma^{-1}) + 1/2 s.^2) .* exp(log_diag)
inline ComponentGradient direct_param_grad_log_pdf(const GaussianComponent& comp,
                                                   const Vec& x) {
  const LowRankDiagCov& cov = comp.cov;
  const Vec inv_diag = (-cov.log_diag.array()).exp();
  const auto llt = detail::inner_llt(cov, inv_diag);
  const Mat scaled = inv_diag.asDiagonal() * cov.factors;  // T = A F

  const Vec delta = x - comp.mean;
  const Vec t = inv_diag.cwiseProduct(delta);
  const Vec s = t - inv_diag.cwiseProduct(
                        cov.factors * llt.solve(cov.factors.transpose() * t));

  // Sigma^{-1} F = T - T M^{-1} (F^T T)
  const Mat gram = cov.factors.transpose() * scaled;  // F^T A F
  const Mat sinv_factors = scaled - scaled * llt.solve(gram);

  // diag(Sigma^{-1}) = a - rowwise quadratic form of T against M^{-1}
  const Mat u = llt.solve(scaled.transpose());  // M^{-1} T^T, r x D
  const Vec diag_sinv =
      inv_diag - scaled.cwiseProduct(u.transpose()).rowwise().sum();

  ComponentGradient g;
  g.d_mean = s;
  g.d_factors = s * (cov.factors.transpose() * s).transpose() - sinv_factors;
  g.d_log_diag = (0.5 * s.array().square() - 0.5 * diag_sinv.array()) *
                 cov.log_diag.array().exp();
  return g;
}

}  // namespace vboost
