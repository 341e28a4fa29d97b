#pragma once

#include "vboost/metropolis.hpp"
#include "vboost/mixture.hpp"
#include "vboost/quadrature.hpp"

#include <string>
#include <vector>

namespace vboost {

// One row of a moment-comparison table: a fitted-mixture statistic against
// its oracle estimate. Rows cover all marginal means, marginal standard
// deviations, and pairwise covariances (D + D + D(D-1)/2 in total).
struct MomentRow {
  std::string id;
  double vb_value = 0.0;
  double oracle_value = 0.0;
  double oracle_se = 0.0;
};

namespace detail {

template <typename OracleFn>
std::vector<MomentRow> moment_rows(const MixtureApprox& mix, OracleFn&& oracle) {
  const Eigen::Index dim = mix.dim();
  const Vec vb_mean = mix_mean(mix);
  const Mat vb_cov = mix_cov(mix);
  std::vector<MomentRow> rows;
  for (Eigen::Index d = 0; d < dim; ++d) {
    auto [val, se] = oracle(std::string("mean"), d, d);
    rows.push_back({"mean[" + std::to_string(d) + "]", vb_mean[d], val, se});
  }
  for (Eigen::Index d = 0; d < dim; ++d) {
    auto [val, se] = oracle(std::string("sd"), d, d);
    rows.push_back({"sd[" + std::to_string(d) + "]", std::sqrt(vb_cov(d, d)), val, se});
  }
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      auto [val, se] = oracle(std::string("cov"), i, j);
      rows.push_back({"cov[" + std::to_string(i) + "," + std::to_string(j) + "]",
                      vb_cov(i, j), val, se});
    }
  return rows;
}

}  // namespace detail

// Oracle side from an MCMC chain. Every statistic is reduced to the mean of
// a derived scalar series so its SE follows from that series' ESS; the SE of
// a standard deviation uses the delta method.
inline std::vector<MomentRow> moment_table(const MixtureApprox& mix, const MhChain& chain) {
  const Vec chain_means = chain.samples.colwise().mean();
  return detail::moment_rows(mix, [&](const std::string& kind, Eigen::Index i,
                                      Eigen::Index j) {
    if (kind == "mean") return chain_mean_se(chain.samples.col(i));
    const Vec ci = chain.samples.col(i).array() - chain_means[i];
    if (kind == "sd") {
      auto [var, var_se] = chain_mean_se(ci.cwiseAbs2());
      const double sd = std::sqrt(var);
      return std::make_pair(sd, var_se / (2.0 * sd));
    }
    const Vec cj = chain.samples.col(j).array() - chain_means[j];
    return chain_mean_se(ci.cwiseProduct(cj));
  });
}

// Oracle side from quadrature (1D/2D targets). Quadrature values carry no
// sampling noise; the quoted SE is a small numerical-tolerance stand-in.
inline std::vector<MomentRow> moment_table(const MixtureApprox& mix,
                                           const QuadratureMoments& moments) {
  return detail::moment_rows(mix, [&](const std::string& kind, Eigen::Index i,
                                      Eigen::Index j) {
    double val = 0.0;
    if (kind == "mean") val = moments.mean[i];
    else if (kind == "sd") val = std::sqrt(moments.cov(i, i));
    else val = moments.cov(i, j);
    return std::make_pair(val, 1e-7 * std::max(1.0, std::abs(val)));
  });
}

}  // namespace vboost
