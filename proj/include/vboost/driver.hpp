#pragma once

#include "vboost/adam.hpp"
#include "vboost/elbo.hpp"
#include "vboost/init_em.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace vboost {

enum class InitMethod { alg1, max_weight };

struct VBoostConfig {
  int max_components = 2;

  // rank policy: either a fixed rank, or a sweep ending at the first rank
  // whose marginal-variance percent change drops below tau
  int rank = 0;
  bool rank_sweep = false;
  double tau = 0.05;
  int max_rank = 8;

  int steps_first = 2000;
  int steps_stage = 1000;
  int n_new = 400;  // pathwise samples per gradient step
  int n_old = 400;  // samples per existing component per gradient step
  double step_size = 0.01;
  int record_every = 10;

  InitMethod init_method = InitMethod::alg1;
  int init_samples = 1000;  // L in the initialization procedure
  EmConfig em;

  std::uint64_t seed = 0;
  int eval_samples = 10000;  // per component, evaluation-grade estimates
};

inline void validate(const VBoostConfig& cfg) {
  if (cfg.max_components < 1 || cfg.rank < 0 || cfg.max_rank < 0 ||
      cfg.steps_first < 1 || cfg.steps_stage < 1 || cfg.n_new < 2 || cfg.n_old < 2 ||
      cfg.init_samples < 10 || cfg.eval_samples < 2 || cfg.record_every < 1)
    throw ConfigError("vboost config: counts must be positive (n_new/n_old >= 2, L >= 10)");
  if (cfg.rank_sweep && !(cfg.tau > 0.0 && cfg.tau <= 1.0))
    throw ConfigError("vboost config: tau must lie in (0, 1]");
  if (!(cfg.step_size > 0.0))
    throw ConfigError("vboost config: step size must be positive");
}

// --- flat parameter packing -------------------------------------------------

inline Eigen::Index flat_size(Eigen::Index dim, Eigen::Index rank) {
  return 2 * dim + dim * rank;
}

inline Vec flatten(const GaussianComponent& comp) {
  const Eigen::Index d = comp.dim(), r = comp.cov.rank();
  Vec out(flat_size(d, r));
  out.head(d) = comp.mean;
  out.segment(d, d * r) = Eigen::Map<const Vec>(comp.cov.factors.data(), d * r);
  out.tail(d) = comp.cov.log_diag;
  return out;
}

inline Vec flatten(const ComponentGradient& grad) {
  const Eigen::Index d = grad.d_mean.size(), r = grad.d_factors.cols();
  Vec out(flat_size(d, r));
  out.head(d) = grad.d_mean;
  out.segment(d, d * r) = Eigen::Map<const Vec>(grad.d_factors.data(), d * r);
  out.tail(d) = grad.d_log_diag;
  return out;
}

inline GaussianComponent unflatten_component(const Vec& flat, Eigen::Index dim,
                                             Eigen::Index rank) {
  GaussianComponent comp;
  comp.mean = flat.head(dim);
  comp.cov.factors = Eigen::Map<const Mat>(flat.segment(dim, dim * rank).data(), dim, rank);
  comp.cov.log_diag = flat.tail(dim);
  return comp;
}

// --- per-stage results -------------------------------------------------------

struct StageFit {
  MixtureApprox mix;
  FitTrace trace;
};

struct StageRecord {
  int stage = 0;          // 1-based; stage 1 is the first component
  int n_components = 0;
  int rank = 0;
  ElboEstimate eval;      // evaluation-grade, fresh seed
};

struct RankRecord {
  int rank = 0;
  double mean_marginal_variance = 0.0;
  double pct_change = std::numeric_limits<double>::quiet_NaN();  // vs previous rank
};

struct RankSelection {
  int selected_rank = 0;
  bool hit_max_rank = false;
  std::vector<MixtureApprox> fits;      // one single-component fit per probed rank
  std::vector<RankRecord> records;
};

struct VBoostResult {
  MixtureApprox mixture;
  std::vector<FitTrace> traces;        // one per stage
  std::vector<StageRecord> stages;
  RankSelection rank_selection;        // empty unless a sweep ran
  int rank = 0;
};

namespace detail {

enum : std::uint64_t { kSeedInit = 1, kSeedOpt = 2, kSeedEval = 3, kSeedSweep = 4 };

inline std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t purpose, int stage) {
  return derive_seed(seed, (purpose << 24) | static_cast<std::uint64_t>(stage));
}

}  // namespace detail

// Seeded jitter on the first component's initial mean. An exactly centered
// start sits on a stable stationary point of symmetric multi-modal targets
// (the variance inflates to cover all modes before the mean can break the
// symmetry), so the fit can never lock onto a mode without it.
inline constexpr double kFirstMeanJitter = 0.5;

// Fits a single rank-r component to the target (the C = 1 objective),
// starting from a jittered mean, unit diagonal, and small random factors.
inline StageFit fit_first(const TargetModel& target, int rank, const VBoostConfig& cfg) {
  validate(cfg);
  if (rank > target.dim) throw ConfigError("fit_first: rank exceeds target dimension");
  const Eigen::Index d = target.dim;
  RngStream init_rng(detail::stage_seed(cfg.seed, detail::kSeedInit, 1 + (rank << 8)));
  GaussianComponent comp{kFirstMeanJitter * init_rng.normal_vec(d),
                         LowRankDiagCov{detail::small_random_factors(d, rank, init_rng),
                                        Vec::Zero(d)}};

  StochasticObjective objective = [&](const Vec& flat, RngStream& rng) {
    const GaussianComponent c = unflatten_component(flat, d, rank);
    auto [estimate, grad] = first_component_grad(target, c, cfg.n_new, rng);
    return std::make_pair(estimate, flatten(grad));
  };
  RngStream opt_rng(detail::stage_seed(cfg.seed, detail::kSeedOpt, 1 + (rank << 8)));
  auto [flat, trace] = fit(objective, flatten(comp), cfg.steps_first, opt_rng,
                           cfg.record_every, cfg.step_size);
  return StageFit{single_component(unflatten_component(flat, d, rank)), std::move(trace)};
}

// Mean over dimensions of |var_b - var_a| / var_a, the sweep's stopping
// statistic, from the fitted marginal variances.
inline double marginal_variance_pct_change(const MixtureApprox& fit_a,
                                           const MixtureApprox& fit_b) {
  if (fit_a.dim() != fit_b.dim())
    throw std::invalid_argument("marginal_variance_pct_change: dimension mismatch");
  const Vec var_a = mix_cov_diag(fit_a);
  const Vec var_b = mix_cov_diag(fit_b);
  return ((var_b - var_a).cwiseAbs().array() / var_a.array()).mean();
}

// Fits single components at rank 0, 1, 2, ... and stops at the first rank r
// whose increment to r+1 moves the marginal variances by less than tau on
// average. Hitting max_rank without triggering returns max_rank with a flag.
inline RankSelection select_rank(const TargetModel& target, const VBoostConfig& cfg) {
  validate(cfg);
  if (target.dim > 1 && cfg.max_rank > target.dim)
    throw ConfigError("select_rank: max_rank exceeds target dimension");
  RankSelection sel;
  sel.fits.push_back(fit_first(target, 0, cfg).mix);
  sel.records.push_back({0, mix_cov_diag(sel.fits[0]).mean(),
                         std::numeric_limits<double>::quiet_NaN()});
  if (target.dim == 1 || cfg.max_rank == 0) {
    sel.selected_rank = 0;  // degenerate sweep: nothing beyond the diagonal
    return sel;
  }
  for (int rank = 0; rank < cfg.max_rank; ++rank) {
    sel.fits.push_back(fit_first(target, rank + 1, cfg).mix);
    const double pct = marginal_variance_pct_change(sel.fits[rank], sel.fits[rank + 1]);
    sel.records.push_back({rank + 1, mix_cov_diag(sel.fits[rank + 1]).mean(), pct});
    if (pct < cfg.tau) {
      sel.selected_rank = rank;
      return sel;
    }
  }
  sel.selected_rank = cfg.max_rank;
  sel.hit_max_rank = true;
  return sel;
}

// One boosting stage: initialize (lambda, rho) for a new component, optimize
// the added-component objective, and fold the result into the mixture. The
// existing components are carried over bit-identically.
inline StageFit add_component(const TargetModel& target, const MixtureApprox& mix,
                              int rank, const VBoostConfig& cfg, int stage) {
  validate(cfg);
  const Eigen::Index d = mix.dim();
  RngStream init_rng(detail::stage_seed(cfg.seed, detail::kSeedInit, stage));

  GaussianComponent comp;
  double rho0 = 1.0 / static_cast<double>(mix.size() + 1);
  if (cfg.init_method == InitMethod::alg1) {
    try {
      std::tie(comp, rho0) =
          init_component(target, mix, cfg.init_samples, rank, cfg.em, init_rng);
    } catch (const InitError&) {
      comp = max_weight_init(target, mix, cfg.init_samples, rank, init_rng);
    }
  } else {
    comp = max_weight_init(target, mix, cfg.init_samples, rank, init_rng);
  }
  rho0 = std::clamp(rho0, 0.05, 0.95);

  StochasticObjective objective = [&](const Vec& flat, RngStream& rng) {
    BoostParams p{unflatten_component(flat.head(flat.size() - 1), d, rank),
                  flat[flat.size() - 1]};
    auto [estimate, grad] = boost_grad(target, mix, p, cfg.n_new, cfg.n_old, rng);
    Vec flat_grad(flat.size());
    flat_grad.head(flat.size() - 1) = flatten(grad.comp_grad);
    flat_grad[flat.size() - 1] = grad.d_rho_logit;
    return std::make_pair(estimate, std::move(flat_grad));
  };

  Vec flat0(flat_size(d, rank) + 1);
  flat0.head(flat_size(d, rank)) = flatten(comp);
  flat0[flat0.size() - 1] = logit(rho0);
  RngStream opt_rng(detail::stage_seed(cfg.seed, detail::kSeedOpt, stage));
  auto [flat, trace] = fit(objective, std::move(flat0), cfg.steps_stage, opt_rng,
                           cfg.record_every, cfg.step_size);

  GaussianComponent fitted = unflatten_component(flat.head(flat.size() - 1), d, rank);
  const double rho = logistic(flat[flat.size() - 1]);
  return StageFit{extend(mix, std::move(fitted), rho), std::move(trace)};
}

// The whole boosting loop: optional rank sweep, first-component fit at the
// chosen rank, then one added component per stage with evaluation-grade ELBO
// estimates along the way.
inline VBoostResult run(const TargetModel& target, const VBoostConfig& cfg) {
  validate(cfg);
  VBoostResult result;
  int rank = cfg.rank;
  if (cfg.rank_sweep) {
    VBoostConfig sweep_cfg = cfg;
    sweep_cfg.max_rank = std::min<int>(cfg.max_rank, static_cast<int>(target.dim));
    result.rank_selection = select_rank(target, sweep_cfg);
    rank = result.rank_selection.selected_rank;
  }
  result.rank = rank;

  auto eval_stage = [&](const MixtureApprox& mix, int stage) {
    RngStream eval_rng(detail::stage_seed(cfg.seed, detail::kSeedEval, stage));
    return elbo_estimate(target, mix, cfg.eval_samples, eval_rng);
  };

  try {
    StageFit first = fit_first(target, rank, cfg);
    result.mixture = std::move(first.mix);
    result.traces.push_back(std::move(first.trace));
    result.stages.push_back({1, 1, rank, eval_stage(result.mixture, 1)});

    for (int stage = 2; stage <= cfg.max_components; ++stage) {
      StageFit next = add_component(target, result.mixture, rank, cfg, stage);
      result.mixture = std::move(next.mix);
      result.traces.push_back(std::move(next.trace));
      result.stages.push_back(
          {stage, static_cast<int>(result.mixture.size()), rank,
           eval_stage(result.mixture, stage)});
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    const int failed_stage = static_cast<int>(result.stages.size()) + 1;
    throw std::runtime_error("boosting stage " + std::to_string(failed_stage) +
                             " failed: " + e.what());
  }
  return result;
}

}  // namespace vboost
