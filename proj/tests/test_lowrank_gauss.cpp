#include "helpers.hpp"
#include "vboost/lowrank_gauss.hpp"
#include "vboost/quadrature.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vboost;
using vboost_test::dense_log_det_oracle;
using vboost_test::dense_log_pdf_oracle;
using vboost_test::dense_solve_oracle;
using vboost_test::fd_gradient;
using vboost_test::random_component;
using vboost_test::random_cov;
using vboost_test::rel_err;

TEST_CASE("log_det on identity and scalar covariances", "[lowrank]") {
  CHECK(log_det(diag_cov(Vec::Zero(2))) == 0.0);

  LowRankDiagCov cov{Mat::Ones(1, 1), Vec::Zero(1)};  // Sigma = [[2]]
  CHECK_THAT(log_det(cov), Catch::Matchers::WithinAbs(std::log(2.0), 1e-15));
}

TEST_CASE("log_det matches dense LU oracle", "[lowrank]") {
  RngStream rng(11);
  const auto cov = random_cov(5, 2, rng);
  const double expected = dense_log_det_oracle(dense(cov));
  CHECK(std::abs(log_det(cov) - expected) <= 1e-12 * (1.0 + std::abs(expected)));
}

TEST_CASE("solve on trivial covariances", "[lowrank]") {
  RngStream rng(12);
  const Vec y = rng.normal_vec(4);
  CHECK((solve(diag_cov(Vec::Zero(4)), y) - y).norm() == 0.0);

  LowRankDiagCov cov{Mat::Ones(1, 1), Vec::Zero(1)};
  Vec y1(1);
  y1 << 4.0;
  CHECK_THAT(solve(cov, y1)[0], Catch::Matchers::WithinAbs(2.0, 1e-15));
}

TEST_CASE("solve matches dense linear-solve oracle", "[lowrank]") {
  RngStream rng(13);
  const auto cov = random_cov(8, 3, rng);
  const Vec y = rng.normal_vec(8);
  const Vec expected = dense_solve_oracle(dense(cov), y);
  CHECK((solve(cov, y) - expected).norm() <= 1e-10 * y.norm());
}

TEST_CASE("log_det and solve track dense oracles across sizes", "[lowrank]") {
  RngStream rng(14);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform_int(0, 62));
    const int r = static_cast<int>(rng.uniform_int(0, std::min(8, d)));
    const auto cov = random_cov(d, r, rng);
    const Mat full = dense(cov);
    const double expected_ld = dense_log_det_oracle(full);
    CHECK(std::abs(log_det(cov) - expected_ld) <= 1e-10 * (1.0 + std::abs(expected_ld)));
    const Vec y = rng.normal_vec(d);
    CHECK((solve(cov, y) - dense_solve_oracle(full, y)).norm() <= 1e-10 * y.norm());
  }
}

TEST_CASE("dense form is exact and symmetric", "[lowrank]") {
  CHECK(dense(diag_cov(Vec::Zero(2))).isApprox(Mat::Identity(2, 2)));

  LowRankDiagCov scalar{Mat::Ones(1, 1), Vec::Zero(1)};
  CHECK(dense(scalar)(0, 0) == 2.0);

  RngStream rng(15);
  const auto cov = random_cov(7, 3, rng);
  const Mat full = dense(cov);
  CHECK((full - full.transpose()).norm() == 0.0);
}

TEST_CASE("dense covariance admits a Cholesky factorization", "[lowrank]") {
  RngStream rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_int(0, 63));
    const int r = static_cast<int>(rng.uniform_int(0, std::min<int>(8, d)));
    Eigen::LLT<Mat> llt(dense(random_cov(d, r, rng, 1.5, 1.0)));
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("log_pdf closed-form values", "[lowrank]") {
  GaussianComponent std2{Vec::Zero(2), diag_cov(Vec::Zero(2))};
  CHECK_THAT(log_pdf(std2, Vec::Zero(2)),
             Catch::Matchers::WithinAbs(-std::log(2.0 * std::numbers::pi), 1e-12));

  RngStream rng(17);
  const auto comp = random_component(4, 2, rng);
  const double at_mean = log_pdf(comp, comp.mean);
  CHECK_THAT(at_mean, Catch::Matchers::WithinAbs(
                          -0.5 * log_det(comp.cov) -
                              2.0 * std::log(2.0 * std::numbers::pi),
                          1e-12));
}

TEST_CASE("log_pdf matches dense Cholesky density", "[lowrank]") {
  RngStream rng(18);
  const auto comp = random_component(6, 2, rng);
  const Vec x = rng.normal_vec(6);
  const double expected = dense_log_pdf_oracle(comp.mean, dense(comp.cov), x);
  CHECK(std::abs(log_pdf(comp, x) - expected) <= 1e-10);
}

TEST_CASE("exp(log_pdf) integrates to one", "[lowrank]") {
  RngStream rng(19);
  const GaussianComponent c1{0.3 * rng.normal_vec(1), random_cov(1, 1, rng)};
  const auto q1 = quadrature_moments_of(
      grid_1d(-14, 14, 4001), [&](const Vec& x) { return log_pdf(c1, x); }, 1);
  CHECK_THAT(q1.log_normalizer, Catch::Matchers::WithinAbs(0.0, 1e-6));

  const GaussianComponent c2{0.3 * rng.normal_vec(2), random_cov(2, 1, rng)};
  const auto q2 = quadrature_moments_of(
      grid_2d(-14, 14, -14, 14, 801), [&](const Vec& x) { return log_pdf(c2, x); }, 2);
  CHECK_THAT(q2.log_normalizer, Catch::Matchers::WithinAbs(0.0, 1e-6));
}

TEST_CASE("grad_x_log_pdf basics and finite differences", "[lowrank]") {
  RngStream rng(20);
  const auto comp = random_component(5, 2, rng);
  CHECK(grad_x_log_pdf(comp, comp.mean).norm() == 0.0);

  GaussianComponent scalar{Vec::Zero(1), diag_cov(Vec::Zero(1))};
  Vec x1(1);
  x1 << 3.0;
  CHECK_THAT(grad_x_log_pdf(scalar, x1)[0], Catch::Matchers::WithinAbs(-3.0, 1e-12));

  const Vec x = rng.normal_vec(5);
  const Vec fd = fd_gradient([&](const Vec& p) { return log_pdf(comp, p); }, x);
  CHECK((grad_x_log_pdf(comp, x) - fd).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("sample_map deterministic structure", "[lowrank]") {
  RngStream rng(21);
  const auto comp = random_component(4, 2, rng);
  CHECK((sample_map(comp, Vec::Zero(2), Vec::Zero(4)) - comp.mean).norm() == 0.0);

  GaussianComponent identity{rng.normal_vec(3), diag_cov(Vec::Zero(3))};
  const Vec z = rng.normal_vec(3);
  CHECK((sample_map(identity, Vec(0), z) - (identity.mean + z)).norm() == 0.0);
}

TEST_CASE("sample_map reproduces mean and covariance", "[lowrank]") {
  RngStream rng(22);
  const auto comp = random_component(4, 2, rng);
  const Mat sigma = dense(comp.cov);
  const int n = 1000000;

  Mat sum_outer = Mat::Zero(4, 4);
  Mat sum_outer_sq = Mat::Zero(4, 4);  // entrywise second moments, for MC SEs
  Vec sum = Vec::Zero(4);
  for (int i = 0; i < n; ++i) {
    const Vec x = sample_map(comp, rng.normal_vec(2), rng.normal_vec(4));
    const Vec d = x - comp.mean;
    sum += x;
    const Mat outer = d * d.transpose();
    sum_outer += outer;
    sum_outer_sq += outer.cwiseAbs2();
  }
  const Vec mean = sum / n;
  const Mat cov = sum_outer / n;
  for (int i = 0; i < 4; ++i) {
    const double mean_se = std::sqrt(sigma(i, i) / n);
    CHECK(std::abs(mean[i] - comp.mean[i]) <= 3.0 * mean_se);
    for (int j = 0; j < 4; ++j) {
      const double var_of_entry = sum_outer_sq(i, j) / n - cov(i, j) * cov(i, j);
      const double se = std::sqrt(var_of_entry / n);
      CHECK(std::abs(cov(i, j) - sigma(i, j)) <= 3.0 * se);
    }
  }
}

TEST_CASE("pathwise_param_grad trivial identities", "[lowrank]") {
  RngStream rng(23);
  const auto comp = random_component(4, 2, rng);
  const Vec z_lo = rng.normal_vec(2), z_hi = rng.normal_vec(4);

  const auto zero = pathwise_param_grad(comp, z_lo, z_hi, Vec::Zero(4));
  CHECK(zero.d_mean.norm() == 0.0);
  CHECK(zero.d_factors.norm() == 0.0);
  CHECK(zero.d_log_diag.norm() == 0.0);

  const Vec upstream = rng.normal_vec(4);
  CHECK((pathwise_param_grad(comp, z_lo, z_hi, upstream).d_mean - upstream).norm() == 0.0);
}

TEST_CASE("pathwise_param_grad matches finite differences", "[lowrank]") {
  RngStream rng(24);
  const int d = 4, r = 2;
  const auto comp = random_component(d, r, rng);
  const Vec z_lo = rng.normal_vec(r), z_hi = rng.normal_vec(d);

  // h(x) = 0.5 ||x||^2 through the sampling map, as a function of flat params
  auto h_of_params = [&](const Vec& flat) {
    const auto c = unflatten_component(flat, d, r);
    return 0.5 * sample_map(c, z_lo, z_hi).squaredNorm();
  };
  const Vec x0 = sample_map(comp, z_lo, z_hi);
  const Vec analytic = flatten(pathwise_param_grad(comp, z_lo, z_hi, x0));
  const Vec fd = fd_gradient(h_of_params, flatten(comp));
  for (Eigen::Index i = 0; i < fd.size(); ++i) CHECK(rel_err(analytic[i], fd[i]) <= 1e-6);
}

TEST_CASE("direct_param_grad_log_pdf at the mean and in 1D", "[lowrank]") {
  RngStream rng(25);
  const auto comp = random_component(4, 2, rng);
  const auto at_mean = direct_param_grad_log_pdf(comp, comp.mean);
  CHECK(at_mean.d_mean.norm() == 0.0);

  // quadratic term vanishes at x = mean: d/dv ln q = -1/2 d(log_det)/dv
  const Vec fd_logdet = fd_gradient(
      [&](const Vec& v) {
        return log_det(LowRankDiagCov{comp.cov.factors, v});
      },
      comp.cov.log_diag);
  CHECK((at_mean.d_log_diag + 0.5 * fd_logdet).cwiseAbs().maxCoeff() <= 1e-6);

  // D=1, r=0: d/dv ln q = -1/2 + 1/2 e^{-v} (x-mu)^2 = 0 at v=0, x-mu=1
  GaussianComponent scalar{Vec::Zero(1), diag_cov(Vec::Zero(1))};
  Vec x1(1);
  x1 << 1.0;
  CHECK_THAT(direct_param_grad_log_pdf(scalar, x1).d_log_diag[0],
             Catch::Matchers::WithinAbs(0.0, 1e-14));
}

TEST_CASE("direct_param_grad_log_pdf matches finite differences", "[lowrank]") {
  RngStream rng(26);
  const int d = 5, r = 2;
  const auto comp = random_component(d, r, rng);
  const Vec x = comp.mean + rng.normal_vec(d);

  const Vec analytic = flatten(direct_param_grad_log_pdf(comp, x));
  const Vec fd = fd_gradient(
      [&](const Vec& flat) { return log_pdf(unflatten_component(flat, d, r), x); },
      flatten(comp));
  for (Eigen::Index i = 0; i < fd.size(); ++i) CHECK(rel_err(analytic[i], fd[i]) <= 1e-6);
}

TEST_CASE("rank-0 gradients agree with finite differences", "[lowrank]") {
  RngStream rng(27);
  const int d = 3;
  const auto comp = random_component(d, 0, rng);
  const Vec x = rng.normal_vec(d);
  const Vec analytic = flatten(direct_param_grad_log_pdf(comp, x));
  const Vec fd = fd_gradient(
      [&](const Vec& flat) { return log_pdf(unflatten_component(flat, d, 0), x); },
      flatten(comp));
  for (Eigen::Index i = 0; i < fd.size(); ++i) CHECK(rel_err(analytic[i], fd[i]) <= 1e-6);
}
