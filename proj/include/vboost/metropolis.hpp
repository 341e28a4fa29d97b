#pragma once

#include "vboost/rng.hpp"
#include "vboost/targets.hpp"

#include <cmath>
#include <vector>

namespace vboost {

// Post-burn-in samples of a random-walk Metropolis chain, one row per draw.
struct MhChain {
  Mat samples;
  double acceptance_rate = 0.0;
  Vec proposal_scale;
};

// Effective sample size by the initial-positive-sequence truncation of the
// autocovariances: sum adjacent pairs of autocovariances until a pair goes
// nonpositive.
inline double effective_sample_size(const Vec& series) {
  const Eigen::Index n = series.size();
  if (n < 4) return static_cast<double>(n);
  const Vec centered = series.array() - series.mean();
  const double gamma0 = centered.squaredNorm() / n;
  if (!(gamma0 > 0.0)) return static_cast<double>(n);

  auto gamma = [&](Eigen::Index lag) {
    return centered.head(n - lag).dot(centered.tail(n - lag)) / n;
  };
  double asym_var = -gamma0;
  const Eigen::Index max_lag = n / 3;
  bool any_pair = false;
  for (Eigen::Index m = 0; 2 * m + 1 <= max_lag; ++m) {
    const double pair = gamma(2 * m) + gamma(2 * m + 1);
    if (pair <= 0.0) break;
    asym_var += 2.0 * pair;
    any_pair = true;
  }
  if (!any_pair || asym_var <= 0.0) return static_cast<double>(n);
  return std::min(static_cast<double>(n), n * gamma0 / asym_var);
}

// Mean of a (possibly autocorrelated) scalar series with its ESS-based SE.
inline std::pair<double, double> chain_mean_se(const Vec& series) {
  const double mean = series.mean();
  const double var = (series.array() - mean).square().sum() / series.size();
  const double ess = effective_sample_size(series);
  return {mean, std::sqrt(var / ess)};
}

// Random-walk Metropolis with a Gaussian proposal. The per-coordinate
// proposal scale is tuned during burn-in: a global factor chases acceptance
// rate 0.3, and the per-coordinate shape follows the running standard
// deviations of the chain. The scale is frozen after burn-in.
inline MhChain rwm_sample(const TargetModel& target, long n_steps, long burn_in,
                          double initial_scale, RngStream& rng) {
  if (n_steps <= burn_in)
    throw std::invalid_argument("rwm_sample: need n_steps > burn_in");
  const Eigen::Index dim = target.dim;
  Vec x = Vec::Zero(dim);
  double lp = target.log_density(x);
  if (!std::isfinite(lp))
    throw EstimatorError("rwm_sample: non-finite log-density at the start point");

  double log_scale = std::log(initial_scale);
  Vec shape = Vec::Ones(dim);
  Vec scale = std::exp(log_scale) * shape;

  // Welford accumulators over the burn-in trajectory
  Vec run_mean = Vec::Zero(dim), run_m2 = Vec::Zero(dim);
  long run_n = 0;
  const long window = 200;
  long window_accepts = 0;

  MhChain chain;
  chain.samples = Mat(n_steps - burn_in, dim);
  long kept = 0, accepts_post = 0;

  for (long step = 0; step < n_steps; ++step) {
    Vec prop = x;
    for (Eigen::Index d = 0; d < dim; ++d) prop[d] += scale[d] * rng.normal();
    const double lp_prop = target.log_density(prop);
    const bool accept = std::isfinite(lp_prop) &&
                        (lp_prop - lp >= 0.0 || std::log(rng.uniform()) < lp_prop - lp);
    if (accept) {
      x = prop;
      lp = lp_prop;
    }

    if (step < burn_in) {
      window_accepts += accept ? 1 : 0;
      ++run_n;
      const Vec delta = x - run_mean;
      run_mean += delta / run_n;
      run_m2 += delta.cwiseProduct(x - run_mean);
      if ((step + 1) % window == 0) {
        const double rate = static_cast<double>(window_accepts) / window;
        log_scale += rate - 0.3;
        window_accepts = 0;
        if (run_n > 4 * window) {
          Vec sd = (run_m2 / (run_n - 1)).cwiseSqrt().cwiseMax(1e-6);
          shape = sd / std::exp(sd.array().log().mean());  // geometric mean 1
        }
        scale = std::exp(log_scale) * shape;
      }
    } else {
      accepts_post += accept ? 1 : 0;
      chain.samples.row(kept++) = x;
    }
  }
  chain.acceptance_rate = static_cast<double>(accepts_post) / (n_steps - burn_in);
  chain.proposal_scale = scale;
  return chain;
}

}  // namespace vboost
