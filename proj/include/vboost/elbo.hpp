#pragma once

#include "vboost/mixture.hpp"
#include "vboost/targets.hpp"

#include <cmath>
#include <utility>

namespace vboost {

// Monte Carlo estimate of E_q[ln pi(x) - ln q(x)] in nats.
struct ElboEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
};

// Parameters optimized when a component is added: the new component itself
// plus the mixing weight through its logit (rho = logistic(rho_logit)).
struct BoostParams {
  GaussianComponent comp;
  double rho_logit = 0.0;
};

inline double mixing_weight(const BoostParams& params) {
  return logistic(params.rho_logit);
}

struct BoostGradient {
  ComponentGradient comp_grad;
  double d_rho_logit = 0.0;
};

namespace detail {

inline void accumulate(ComponentGradient& acc, double scale, const ComponentGradient& g) {
  acc.d_mean += scale * g.d_mean;
  acc.d_factors += scale * g.d_factors;
  acc.d_log_diag += scale * g.d_log_diag;
}

inline double checked_log_density(const TargetModel& target, const Vec& x) {
  const double lp = target.log_density(x);
  if (!std::isfinite(lp))
    throw EstimatorError("target log-density non-finite at " + format_point(x));
  return lp;
}

inline Vec checked_grad_log_density(const TargetModel& target, const Vec& x) {
  Vec g = target.grad_log_density(x);
  if (!all_finite(g))
    throw EstimatorError("target gradient non-finite at " + format_point(x));
  return g;
}

// Stratified pass over the mixture: n fresh samples from every component, in
// component order, reduced in a fixed order. Returns the weight-combined mean
// and its standard error. `term(c, x)` may accumulate gradient state in its
// closure; its return value is the per-sample objective term.
template <typename TermFn>
std::pair<double, double> stratified_terms(const MixtureApprox& mix, int n,
                                           RngStream& rng, TermFn&& term) {
  double value = 0.0;
  double variance = 0.0;
  for (Eigen::Index c = 0; c < mix.size(); ++c) {
    const GaussianComponent& comp = mix.components[c];
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec z_lo = rng.normal_vec(comp.cov.rank());
      const Vec z_hi = rng.normal_vec(comp.dim());
      const double y = term(static_cast<int>(c), sample_map(comp, z_lo, z_hi));
      sum += y;
      sum_sq += y * y;
    }
    const double mean = sum / n;
    const double s2 = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
    value += mix.weights[c] * mean;
    variance += mix.weights[c] * mix.weights[c] * s2 / n;
  }
  return {value, std::sqrt(variance)};
}

}  // namespace detail

// Stratified ELBO estimator: n_per_component samples from each component,
// per-component averages combined with the mixture weights.
inline ElboEstimate elbo_estimate(const TargetModel& target, const MixtureApprox& mix,
                                  int n_per_component, RngStream& rng) {
  if (n_per_component < 2)
    throw std::invalid_argument("elbo_estimate: need n_per_component >= 2");
  auto [value, se] = detail::stratified_terms(
      mix, n_per_component, rng, [&](int, const Vec& x) {
        return detail::checked_log_density(target, x) - mix_log_pdf(mix, x);
      });
  return ElboEstimate{value, se, n_per_component * mix.size()};
}

// Pathwise estimate of the first-component objective and its gradient.
// Per sample, with x = sample_map(comp, z): the pathwise term pushes
// grad ln pi(x) - grad_x ln q(x) through the sampling map; the direct
// -d/d(lambda) ln q term has zero expectation but is kept per-sample.
inline std::pair<ElboEstimate, ComponentGradient> first_component_grad(
    const TargetModel& target, const GaussianComponent& comp, int n, RngStream& rng) {
  if (n < 2) throw std::invalid_argument("first_component_grad: need n >= 2");
  ComponentGradient grad = zero_gradient(comp.dim(), comp.cov.rank());
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec z_lo = rng.normal_vec(comp.cov.rank());
    const Vec z_hi = rng.normal_vec(comp.dim());
    const Vec x = sample_map(comp, z_lo, z_hi);
    const double lp = detail::checked_log_density(target, x);
    const double y = lp - log_pdf(comp, x);
    sum += y;
    sum_sq += y * y;

    const Vec upstream =
        detail::checked_grad_log_density(target, x) - grad_x_log_pdf(comp, x);
    detail::accumulate(grad, 1.0 / n, pathwise_param_grad(comp, z_lo, z_hi, upstream));
    detail::accumulate(grad, -1.0 / n, direct_param_grad_log_pdf(comp, x));
  }
  const double mean = sum / n;
  const double s2 = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
  return {ElboEstimate{mean, std::sqrt(s2 / n), n}, std::move(grad)};
}

// Boosting objective for one added component,
//
//   L(rho, lambda) = (1-rho) E_{q^C}[ln pi - ln q^{C+1}]
//                  +    rho  E_{q_new}[ln pi - ln q^{C+1}],
//
// with q^{C+1} = (1-rho) q^C + rho q_new. The existing mixture contributes
// fixed samples (drawn first, stratified exactly like elbo_estimate, so the
// rho = 0 substitution reproduces that estimate bitwise); the new component
// contributes pathwise samples. Gradients are with respect to the new
// component parameters and rho_logit.
inline std::pair<ElboEstimate, BoostGradient> boost_grad(
    const TargetModel& target, const MixtureApprox& fixed_mix,
    const BoostParams& params, int n_new, int n_old, RngStream& rng) {
  if (n_new < 2 || n_old < 2)
    throw std::invalid_argument("boost_grad: need n_new, n_old >= 2");
  const GaussianComponent& comp = params.comp;
  const double rho = mixing_weight(params);
  const double log_rho = -softplus(-params.rho_logit);
  const double log_1m_rho = -softplus(params.rho_logit);
  // rho (1-rho), the logistic chain factor; folded into the per-sample rho
  // terms in log space so nothing overflows near rho = 0 or 1
  const double log_chain = log_rho + log_1m_rho;

  ComponentGradient comp_grad = zero_gradient(comp.dim(), comp.cov.rank());
  double d_rho_scaled_old = 0.0;  // E_old[dy/drho] * rho(1-rho), accumulated
  double d_rho_scaled_new = 0.0;

  auto blended_log_pdf = [&](double lq_mix, double lq_new) {
    return log_sum_exp2(log_1m_rho + lq_mix, log_rho + lq_new);
  };

  auto [old_value, old_se] = detail::stratified_terms(
      fixed_mix, n_old, rng, [&](int c, const Vec& x) {
        const double lp = detail::checked_log_density(target, x);
        const double lq_mix = mix_log_pdf(fixed_mix, x);
        const double lq_new = log_pdf(comp, x);
        const double lq_blend = blended_log_pdf(lq_mix, lq_new);
        const double resp_new = std::exp(log_rho + lq_new - lq_blend);
        if (resp_new > 0.0)
          detail::accumulate(comp_grad,
                             -(1.0 - rho) * fixed_mix.weights[c] * resp_new / n_old,
                             direct_param_grad_log_pdf(comp, x));
        d_rho_scaled_old += fixed_mix.weights[c] / n_old *
                            (std::exp(lq_mix - lq_blend + log_chain) -
                             std::exp(lq_new - lq_blend + log_chain));
        return lp - lq_blend;
      });

  double sum = 0.0, sum_sq = 0.0;
  for (int j = 0; j < n_new; ++j) {
    const Vec z_lo = rng.normal_vec(comp.cov.rank());
    const Vec z_hi = rng.normal_vec(comp.dim());
    const Vec x = sample_map(comp, z_lo, z_hi);
    const double lp = detail::checked_log_density(target, x);
    const double lq_mix = mix_log_pdf(fixed_mix, x);
    const double lq_new = log_pdf(comp, x);
    const double lq_blend = blended_log_pdf(lq_mix, lq_new);
    const double y = lp - lq_blend;
    sum += y;
    sum_sq += y * y;

    const double resp_old = std::exp(log_1m_rho + lq_mix - lq_blend);
    const double resp_new = std::exp(log_rho + lq_new - lq_blend);
    Vec grad_blend = resp_new * grad_x_log_pdf(comp, x);
    if (resp_old > 0.0) grad_blend += resp_old * grad_x_mix_log_pdf(fixed_mix, x);
    const Vec upstream = detail::checked_grad_log_density(target, x) - grad_blend;
    detail::accumulate(comp_grad, rho / n_new,
                       pathwise_param_grad(comp, z_lo, z_hi, upstream));
    detail::accumulate(comp_grad, -rho * resp_new / n_new,
                       direct_param_grad_log_pdf(comp, x));
    d_rho_scaled_new += (std::exp(lq_mix - lq_blend + log_chain) -
                         std::exp(lq_new - lq_blend + log_chain)) /
                        n_new;
  }
  const double new_value = sum / n_new;
  const double new_s2 = std::max(0.0, (sum_sq - n_new * new_value * new_value) / (n_new - 1));

  const double value = (1.0 - rho) * old_value + rho * new_value;
  const double se = std::sqrt((1.0 - rho) * (1.0 - rho) * old_se * old_se +
                              rho * rho * new_s2 / n_new);
  const double chain = rho * (1.0 - rho);
  BoostGradient grad{std::move(comp_grad),
                     (new_value - old_value) * chain +
                         (1.0 - rho) * d_rho_scaled_old + rho * d_rho_scaled_new};
  const long total = n_new + n_old * fixed_mix.size();
  return {ElboEstimate{value, se, total}, std::move(grad)};
}

}  // namespace vboost
