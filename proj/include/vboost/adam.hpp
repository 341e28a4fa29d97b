#pragma once

#include "vboost/elbo.hpp"
#include "vboost/rng.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace vboost {

// Adaptive-moment ascent state over a flattened parameter vector. The moment
// decay defaults follow the optimizer's standard values; the step size is a
// run-level knob.
struct AdamState {
  Vec first_moment;
  Vec second_moment;
  long step_count = 0;
  double step_size = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam_state(Eigen::Index n, double step_size = 0.001) {
  AdamState s;
  s.first_moment = Vec::Zero(n);
  s.second_moment = Vec::Zero(n);
  s.step_size = step_size;
  return s;
}

// One bias-corrected ascent step. Rejects non-finite gradients, naming the
// step at which they appeared.
inline std::pair<AdamState, Vec> adam_step(const AdamState& state, const Vec& params,
                                           const Vec& grad) {
  if (params.size() != grad.size() || params.size() != state.first_moment.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!all_finite(grad))
    throw EstimatorError("non-finite gradient at step " +
                         std::to_string(state.step_count + 1));
  AdamState next = state;
  next.step_count = state.step_count + 1;
  next.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  next.second_moment = state.beta2 * state.second_moment.array().matrix() +
                       (1.0 - state.beta2) * grad.cwiseAbs2();
  const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(next.step_count));
  const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(next.step_count));
  const Vec step = (next.first_moment / corr1).array() /
                   ((next.second_moment / corr2).array().sqrt() + state.epsilon);
  return {std::move(next), params + state.step_size * step};
}

struct TraceRecord {
  long step = 0;
  double objective = 0.0;
  double objective_se = 0.0;
  double grad_norm = 0.0;
};

using FitTrace = std::vector<TraceRecord>;

// A stochastic objective: returns the estimate and the ascent gradient for
// the given flat parameter vector, advancing the supplied random stream.
using StochasticObjective =
    std::function<std::pair<ElboEstimate, Vec>(const Vec&, RngStream&)>;

// Runs exactly n_steps ascent steps; deterministic given the rng seed.
inline std::pair<Vec, FitTrace> fit(const StochasticObjective& objective, Vec params,
                                    int n_steps, RngStream& rng, int record_every = 10,
                                    double step_size = 0.001) {
  if (n_steps < 1) throw std::invalid_argument("fit: need n_steps >= 1");
  AdamState state = make_adam_state(params.size(), step_size);
  FitTrace trace;
  for (int step = 1; step <= n_steps; ++step) {
    auto [estimate, grad] = objective(params, rng);
    auto [next_state, next_params] = adam_step(state, params, grad);
    if (!all_finite(next_params))
      throw EstimatorError("parameters became non-finite at step " + std::to_string(step));
    state = std::move(next_state);
    params = std::move(next_params);
    if (step == 1 || step % record_every == 0 || step == n_steps) {
      if (trace.empty() || trace.back().step != step)
        trace.push_back({step, estimate.value, estimate.std_error, grad.norm()});
    }
  }
  return {std::move(params), std::move(trace)};
}

}  // namespace vboost
