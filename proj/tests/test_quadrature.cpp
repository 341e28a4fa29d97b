#include "helpers.hpp"
#include "vboost/quadrature.hpp"
#include "vboost/targets.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vboost;

TEST_CASE("quadrature recovers the standard normal exactly enough", "[quadrature]") {
  const auto target = gauss_target(Vec::Zero(1), Mat::Identity(1, 1));
  const auto q = quadrature_moments(target, grid_1d(-10, 10, 2001));
  CHECK(std::abs(q.log_normalizer) <= 1e-8);
  CHECK(std::abs(q.mean[0]) <= 1e-9);
  CHECK(std::abs(q.cov(0, 0) - 1.0) <= 1e-6);
}

TEST_CASE("quadrature normalizer tracks an unnormalized density", "[quadrature]") {
  const auto std1 = gauss_target(Vec::Zero(1), Mat::Identity(1, 1));
  const auto doubled = quadrature_moments_of(
      grid_1d(-10, 10, 2001),
      [&](const Vec& x) { return std::log(2.0) + std1.log_density(x); }, 1);
  CHECK_THAT(doubled.log_normalizer, Catch::Matchers::WithinAbs(std::log(2.0), 1e-8));
}

TEST_CASE("quadrature matches analytic mixture moments", "[quadrature]") {
  const Vec m1 = Vec::Constant(1, -2.0), m2 = Vec::Constant(1, 2.0);
  const Mat v = 0.25 * Mat::Identity(1, 1);
  const auto gmm = gmm_target({0.4, 0.6}, {m1, m2}, {v, v});
  const auto q = quadrature_moments(gmm, grid_1d(-12, 12, 4001));
  CHECK(std::abs(q.mean[0] - gmm.ref_mean.value()[0]) <= 1e-6);
  CHECK(std::abs(q.cov(0, 0) - gmm.ref_cov.value()(0, 0)) <= 1e-6);

  // 2D tensor grid
  Vec c1(2), c2(2);
  c1 << -1.0, 0.5;
  c2 << 1.0, -0.5;
  const auto gmm2 = gmm_target({0.5, 0.5}, {c1, c2},
                               {Mat::Identity(2, 2), 0.5 * Mat::Identity(2, 2)});
  const auto q2 = quadrature_moments(gmm2, grid_2d(-11, 11, -11, 11, 401));
  CHECK((q2.mean - gmm2.ref_mean.value()).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((q2.cov - gmm2.ref_cov.value()).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("kl_q_to_target closed forms", "[quadrature]") {
  const auto std1 = gauss_target(Vec::Zero(1), Mat::Identity(1, 1));
  const auto grid = grid_1d(-14, 14, 4001);

  const auto same = single_component(
      GaussianComponent{Vec::Zero(1), diag_cov(Vec::Zero(1))});
  CHECK(std::abs(kl_q_to_target(same, std1, grid)) <= 1e-8);

  const auto wide = single_component(
      GaussianComponent{Vec::Zero(1), diag_cov(Vec::Constant(1, std::log(4.0)))});
  CHECK_THAT(kl_q_to_target(wide, std1, grid),
             Catch::Matchers::WithinAbs(0.5 * (4.0 - 1.0 - std::log(4.0)), 1e-8));

  const auto shifted = single_component(
      GaussianComponent{Vec::Constant(1, 1.3), diag_cov(Vec::Zero(1))});
  CHECK_THAT(kl_q_to_target(shifted, std1, grid),
             Catch::Matchers::WithinAbs(0.5 * 1.3 * 1.3, 1e-8));
}

TEST_CASE("quadrature is stable under grid refinement", "[quadrature]") {
  const Vec m1 = Vec::Constant(1, -1.0), m2 = Vec::Constant(1, 1.5);
  const Mat v = 0.6 * Mat::Identity(1, 1);
  const auto gmm = gmm_target({0.3, 0.7}, {m1, m2}, {v, v});
  const auto coarse = quadrature_moments(gmm, grid_1d(-13, 13, 2001));
  const auto fine = quadrature_moments(gmm, grid_1d(-13, 13, 4001));
  CHECK(std::abs(coarse.log_normalizer - fine.log_normalizer) <= 1e-8);
  CHECK(std::abs(coarse.mean[0] - fine.mean[0]) <= 1e-8);
  CHECK(std::abs(coarse.cov(0, 0) - fine.cov(0, 0)) <= 1e-8);
}

TEST_CASE("quadrature grid validation and boundary detection", "[quadrature]") {
  CHECK_THROWS_AS(validate(grid_1d(-1, 1, 10)), std::invalid_argument);   // even
  CHECK_THROWS_AS(validate(grid_1d(-1, 1, 9)), std::invalid_argument);    // too few
  CHECK_THROWS_AS(validate(grid_1d(1, -1, 101)), std::invalid_argument);  // reversed
  CHECK_THROWS_AS(
      validate(grid_1d(-std::numeric_limits<double>::infinity(), 1, 101)),
      std::invalid_argument);

  const auto target = gauss_target(Vec::Zero(1), Mat::Identity(1, 1));
  CHECK_THROWS_AS(quadrature_moments(target, grid_1d(-1.5, 1.5, 101)), GridError);
  CHECK_THROWS_AS(quadrature_moments(target, grid_1d(5, 9, 101)), GridError);
}
