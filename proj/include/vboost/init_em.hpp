#pragma once

#include "vboost/elbo.hpp"
#include "vboost/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace vboost {

// Importance-weighted sample: rows of `points` with self-normalized weights.
struct WeightedSample {
  Mat points;   // L x D
  Vec weights;  // sums to 1

  Eigen::Index count() const { return points.rows(); }
};

struct EmConfig {
  int max_iters = 100;
  double loglik_tol = 1e-6;
  double outlier_multiplier = 10.0;  // w > c/L flags an outlier
  double outlier_var_scale = 1.0;
  double variance_floor = 1e-8;
};

// Draws L samples from the mixture and attaches self-normalized importance
// weights exp(ln pi - ln q), computed with a max shift.
inline WeightedSample importance_weights(const TargetModel& target,
                                         const MixtureApprox& mix, int count,
                                         RngStream& rng) {
  if (count < 2) throw std::invalid_argument("importance_weights: need L >= 2");
  WeightedSample ws;
  ws.points = Mat(count, mix.dim());
  Vec log_w(count);
  const std::vector<Vec> draws = mix_sample(mix, count, rng);
  for (int i = 0; i < count; ++i) {
    ws.points.row(i) = draws[i];
    log_w[i] = target.log_density(draws[i]) - mix_log_pdf(mix, draws[i]);
  }
  const double shift = log_w.maxCoeff();
  if (!std::isfinite(shift))
    throw InitError("importance weights degenerate: no finite log-weight");
  ws.weights = (log_w.array() - shift).exp();
  const double total = ws.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw InitError("importance weights degenerate: zero total weight");
  ws.weights /= total;
  return ws;
}

// Indices with w > multiplier / L; scale-free under self-normalization.
inline std::vector<int> outlier_indices(const WeightedSample& ws, double multiplier) {
  if (!(multiplier > 1.0))
    throw std::invalid_argument("outlier_indices: need multiplier > 1");
  const double cutoff = multiplier / static_cast<double>(ws.count());
  std::vector<int> out;
  for (Eigen::Index i = 0; i < ws.count(); ++i)
    if (ws.weights[i] > cutoff) out.push_back(static_cast<int>(i));
  return out;
}

// Re-weighting proposal: the current mixture with mass p0 = 1 - sum of
// outlier weights, plus one diagonal Gaussian per outlier sample whose
// variance is var_scale times the diagonal of the mixture covariance.
inline MixtureApprox build_iw_proposal(const MixtureApprox& mix, const WeightedSample& ws,
                                       const std::vector<int>& outliers,
                                       double var_scale) {
  double outlier_mass = 0.0;
  for (int i : outliers) outlier_mass += ws.weights[i];
  const double base_mass = 1.0 - outlier_mass;
  if (!(base_mass > 0.0))
    throw InitError("re-weighting proposal has no mass left on the base mixture; "
                    "outlier multiplier is too small");
  const Vec outlier_log_var = (var_scale * mix_cov_diag(mix).array()).log();

  MixtureApprox proposal;
  proposal.weights = Vec(mix.size() + static_cast<Eigen::Index>(outliers.size()));
  proposal.weights.head(mix.size()) = base_mass * mix.weights;
  proposal.components = mix.components;
  for (std::size_t k = 0; k < outliers.size(); ++k) {
    proposal.weights[mix.size() + static_cast<Eigen::Index>(k)] = ws.weights[outliers[k]];
    proposal.components.push_back(
        GaussianComponent{ws.points.row(outliers[k]).transpose(), diag_cov(outlier_log_var)});
  }
  return proposal;
}

struct EmResult {
  GaussianComponent comp;  // diagonal (rank 0)
  double rho = 0.0;        // fitted free-block weight, clipped to [0.05, 0.95]
  std::vector<double> loglik_trace;
};

// Weighted EM on a two-block mixture: the background (clamped, treated as one
// opaque density) and one free diagonal Gaussian. E-step splits
// responsibility between the blocks; the M-step is closed-form weighted ML
// for the free block's mean/variance and for both block weights. Passing
// background = nullptr fits the single free block by weighted ML directly.
inline EmResult weighted_em(const Mat& points, const Vec& weights,
                            const MixtureApprox* background, const EmConfig& cfg = {}) {
  const Eigen::Index count = points.rows();
  const Eigen::Index dim = points.cols();
  if (weights.size() != count)
    throw std::invalid_argument("weighted_em: weights/points mismatch");
  if ((weights.array() > 0.0).count() < 2)
    throw InitError("weighted_em: need at least 2 effective points");

  // initialize the free block at the weighted sample moments
  Vec mean = points.transpose() * weights;
  Vec var(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const auto centered = points.col(d).array() - mean[d];
    var[d] = std::max(cfg.variance_floor, (weights.array() * centered.square()).sum());
  }

  if (background == nullptr) {
    EmResult result{
        GaussianComponent{std::move(mean), diag_cov(var.array().log().matrix())}, 0.95, {}};
    double ll = 0.0;
    for (Eigen::Index i = 0; i < count; ++i)
      ll += weights[i] * log_pdf(result.comp, points.row(i).transpose());
    result.loglik_trace.push_back(ll);
    return result;
  }

  Vec bg_log_pdf(count);
  for (Eigen::Index i = 0; i < count; ++i)
    bg_log_pdf[i] = mix_log_pdf(*background, points.row(i).transpose());

  double weight_free = 0.5;
  double prev_ll = -std::numeric_limits<double>::infinity();
  EmResult result;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const GaussianComponent free_comp{mean, diag_cov(var.array().log().matrix())};
    // E-step: responsibility of the free block per point, plus the weighted
    // two-block log-likelihood
    Vec resp(count);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      const double a = std::log1p(-weight_free) + bg_log_pdf[i];
      const double b = std::log(weight_free) + log_pdf(free_comp, points.row(i).transpose());
      const double total = log_sum_exp2(a, b);
      resp[i] = std::exp(b - total);
      ll += weights[i] * total;
    }
    result.loglik_trace.push_back(ll);

    // M-step with importance weights folded into the responsibilities
    const Vec wr = weights.cwiseProduct(resp);
    const double mass = wr.sum();
    if (!(mass > 0.0))
      throw InitError("weighted_em: free block lost all responsibility");
    mean = points.transpose() * wr / mass;
    for (Eigen::Index d = 0; d < dim; ++d) {
      const auto centered = points.col(d).array() - mean[d];
      var[d] = std::max(cfg.variance_floor, (wr.array() * centered.square()).sum() / mass);
    }
    weight_free = mass;

    if (iter > 0 && ll - prev_ll < cfg.loglik_tol) break;
    prev_ll = ll;
  }
  result.comp = GaussianComponent{std::move(mean), diag_cov(var.array().log().matrix())};
  result.rho = std::clamp(weight_free, 0.05, 0.95);
  return result;
}

namespace detail {

inline Mat small_random_factors(Eigen::Index dim, Eigen::Index rank, RngStream& rng) {
  Mat f(dim, rank);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) f(i, j) = 0.01 * rng.normal();
  return f;
}

}  // namespace detail

// Importance-weighted initialization of a new component, end to end:
// weights -> outliers -> re-weighting proposal -> second weighted sample ->
// weighted EM against the clamped current mixture. The rank-r factor block is
// seeded with small noise (EM only produces a diagonal).
inline std::pair<GaussianComponent, double> init_component(const TargetModel& target,
                                                           const MixtureApprox& mix,
                                                           int count, Eigen::Index rank,
                                                           const EmConfig& cfg,
                                                           RngStream& rng) {
  if (count < 10) throw std::invalid_argument("init_component: need L >= 10");
  const WeightedSample first = importance_weights(target, mix, count, rng);
  const std::vector<int> outliers = outlier_indices(first, cfg.outlier_multiplier);
  const MixtureApprox proposal =
      build_iw_proposal(mix, first, outliers, cfg.outlier_var_scale);
  const WeightedSample resampled = importance_weights(target, proposal, count, rng);
  EmResult em = weighted_em(resampled.points, resampled.weights, &mix, cfg);
  GaussianComponent comp = std::move(em.comp);
  comp.cov.factors = detail::small_random_factors(comp.dim(), rank, rng);
  return {std::move(comp), em.rho};
}

// Cheap alternative initializer: place the new component on the
// maximum-weight importance sample (first index wins ties), with the
// diagonal of the mixture covariance as its variance.
inline GaussianComponent max_weight_init(const TargetModel& target,
                                         const MixtureApprox& mix, int count,
                                         Eigen::Index rank, RngStream& rng) {
  if (count < 1) throw std::invalid_argument("max_weight_init: need L >= 1");
  Vec location;
  if (count == 1) {
    location = mix_sample(mix, 1, rng).front();
  } else {
    const WeightedSample ws = importance_weights(target, mix, count, rng);
    Eigen::Index best = 0;
    ws.weights.maxCoeff(&best);
    location = ws.points.row(best).transpose();
  }
  GaussianComponent comp{std::move(location),
                         diag_cov(mix_cov_diag(mix).array().log().matrix())};
  comp.cov.factors = detail::small_random_factors(comp.dim(), rank, rng);
  return comp;
}

}  // namespace vboost
