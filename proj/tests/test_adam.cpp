#include "helpers.hpp"
#include "vboost/adam.hpp"
#include "vboost/driver.hpp"
#include "vboost/targets.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vboost;

TEST_CASE("adam_step leaves params alone on zero gradient", "[adam]") {
  const Vec params = Vec::Constant(3, 1.5);
  auto [state, next] = adam_step(make_adam_state(3), params, Vec::Zero(3));
  CHECK((next - params).norm() == 0.0);
  CHECK(state.step_count == 1);
}

TEST_CASE("adam_step first-step size equals the step size", "[adam]") {
  Vec params = Vec::Zero(1), grad = Vec::Constant(1, 5.0);
  auto [state, next] = adam_step(make_adam_state(1), params, grad);
  // bias correction makes the first step alpha * g / (|g| + eps)
  CHECK_THAT(next[0], Catch::Matchers::WithinAbs(0.001, 1e-8));

  grad[0] = -5.0;
  auto [s2, down] = adam_step(make_adam_state(1), params, grad);
  CHECK_THAT(down[0], Catch::Matchers::WithinAbs(-0.001, 1e-8));
}

TEST_CASE("adam_step rejects non-finite gradients with the step index", "[adam]") {
  AdamState state = make_adam_state(2);
  state.step_count = 41;
  Vec grad = Vec::Zero(2);
  grad[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(state, Vec::Zero(2), grad);
    FAIL("expected EstimatorError");
  } catch (const EstimatorError& e) {
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
  CHECK_THROWS_AS(adam_step(state, Vec::Zero(3), Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("adam drains a quadratic bowl", "[adam]") {
  Vec p(2);
  p << 3.0, -2.0;
  AdamState state = make_adam_state(2);
  for (int step = 0; step < 10000; ++step) {
    auto [s, next] = adam_step(state, p, -p);  // ascent on -||p||^2/2
    state = std::move(s);
    p = std::move(next);
  }
  CHECK(p.norm() <= 1e-3);
}

TEST_CASE("fit with one step equals one adam_step", "[adam]") {
  StochasticObjective objective = [](const Vec& p, RngStream&) {
    return std::make_pair(ElboEstimate{-0.5 * p.squaredNorm(), 0.0, 2}, Vec(-p));
  };
  Vec p0(2);
  p0 << 1.0, -4.0;
  RngStream rng(91);
  auto [p1, trace] = fit(objective, p0, 1, rng);
  auto [state, direct] = adam_step(make_adam_state(2), p0, -p0);
  CHECK((p1 - direct).norm() == 0.0);
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].step == 1);
  CHECK(trace[0].grad_norm == p0.norm());
}

TEST_CASE("fit traces are deterministic given the seed", "[adam]") {
  StochasticObjective objective = [](const Vec& p, RngStream& rng) {
    const double noise = rng.normal();
    return std::make_pair(ElboEstimate{noise, 1.0, 2},
                          Vec(-p + Vec::Constant(p.size(), 0.1 * noise)));
  };
  const Vec p0 = Vec::Constant(3, 2.0);
  RngStream rng_a(17), rng_b(17);
  auto [pa, trace_a] = fit(objective, p0, 250, rng_a, 10);
  auto [pb, trace_b] = fit(objective, p0, 250, rng_b, 10);
  CHECK((pa - pb).norm() == 0.0);
  REQUIRE(trace_a.size() == trace_b.size());
  for (std::size_t i = 0; i < trace_a.size(); ++i) {
    CHECK(trace_a[i].step == trace_b[i].step);
    CHECK(trace_a[i].objective == trace_b[i].objective);
    CHECK(trace_a[i].grad_norm == trace_b[i].grad_norm);
  }
  // monotone recorded step indices
  for (std::size_t i = 1; i < trace_a.size(); ++i)
    CHECK(trace_a[i].step > trace_a[i - 1].step);
}

TEST_CASE("fit recovers a 1D Gaussian target", "[adam]") {
  // stochastic ELBO ascent on a single diagonal component
  const auto target = gauss_target(Vec::Constant(1, 1.5),
                                   Mat::Constant(1, 1, std::exp(0.6)));
  StochasticObjective objective = [&](const Vec& p, RngStream& rng) {
    const GaussianComponent comp = unflatten_component(p, 1, 0);
    auto [est, grad] = first_component_grad(target, comp, 400, rng);
    return std::make_pair(est, flatten(grad));
  };
  RngStream rng(92);
  auto [p, trace] = fit(objective, Vec::Zero(2), 2000, rng, 100, 0.01);
  CHECK(std::abs(p[0] - 1.5) <= 0.05);  // mean
  CHECK(std::abs(p[1] - 0.6) <= 0.05);  // log-variance
}

TEST_CASE("fit propagates estimator failures", "[adam]") {
  StochasticObjective objective = [](const Vec& p, RngStream&) {
    return std::make_pair(ElboEstimate{0.0, 0.0, 2},
                          Vec(Vec::Constant(p.size(),
                                            std::numeric_limits<double>::infinity())));
  };
  RngStream rng(93);
  CHECK_THROWS_AS(fit(objective, Vec::Zero(2), 10, rng), EstimatorError);
  StochasticObjective fine = [](const Vec& p, RngStream&) {
    return std::make_pair(ElboEstimate{0.0, 0.0, 2}, Vec(-p));
  };
  CHECK_THROWS_AS(fit(fine, Vec::Zero(2), 0, rng), std::invalid_argument);
}
