#pragma once

#include "vboost/driver.hpp"
#include "vboost/lowrank_gauss.hpp"
#include "vboost/mixture.hpp"
#include "vboost/rng.hpp"

#include <cmath>
#include <functional>

namespace vboost_test {

using vboost::Mat;
using vboost::Vec;

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, vboost::RngStream& rng,
                         double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline vboost::LowRankDiagCov random_cov(Eigen::Index dim, Eigen::Index rank,
                                         vboost::RngStream& rng, double factor_scale = 0.7,
                                         double log_diag_scale = 0.5) {
  return vboost::LowRankDiagCov{
      random_matrix(dim, rank, rng, factor_scale),
      log_diag_scale * rng.normal_vec(dim)};
}

inline vboost::GaussianComponent random_component(Eigen::Index dim, Eigen::Index rank,
                                                  vboost::RngStream& rng,
                                                  double mean_scale = 1.0) {
  return vboost::GaussianComponent{mean_scale * rng.normal_vec(dim),
                                   random_cov(dim, rank, rng)};
}

inline vboost::MixtureApprox random_mixture(Eigen::Index dim, int n_components,
                                            Eigen::Index rank, vboost::RngStream& rng) {
  vboost::MixtureApprox mix;
  Vec w(n_components);
  for (int c = 0; c < n_components; ++c) {
    w[c] = 0.2 + rng.uniform();
    mix.components.push_back(random_component(dim, rank, rng));
  }
  mix.weights = w / w.sum();
  return mix;
}

// random SPD matrix with O(1) variances
inline Mat random_spd(Eigen::Index dim, vboost::RngStream& rng) {
  const Mat w = random_matrix(dim, dim, rng, 0.4);
  Mat s = w * w.transpose();
  for (Eigen::Index i = 0; i < dim; ++i) s(i, i) += 0.5 + rng.uniform();
  return s;
}

// central finite differences of a scalar function of a flat vector
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double step = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

// dense-matrix oracles, deliberately on a different algorithmic path
// (LU / dense Cholesky) than the low-rank formulas they check
inline double dense_log_det_oracle(const Mat& sigma) {
  Eigen::PartialPivLU<Mat> lu(sigma);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i)
    log_det += std::log(std::abs(lu.matrixLU()(i, i)));
  return log_det;
}

inline Vec dense_solve_oracle(const Mat& sigma, const Vec& y) {
  return Eigen::PartialPivLU<Mat>(sigma).solve(y);
}

inline double dense_log_pdf_oracle(const Vec& mean, const Mat& sigma, const Vec& x) {
  Eigen::LLT<Mat> llt(sigma);
  double half_log_det = 0.0;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i)
    half_log_det += std::log(llt.matrixLLT()(i, i));
  const Vec delta = x - mean;
  return -half_log_det -
         0.5 * sigma.rows() * std::log(2.0 * std::numbers::pi) -
         0.5 * delta.dot(llt.solve(delta));
}

}  // namespace vboost_test
