#pragma once

#include "vboost/rng.hpp"
#include "vboost/targets.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace vboost {

// Per-player success counts for the hierarchical binomial model.
struct BinomialData {
  std::vector<std::string> names;
  std::vector<long> hits;
  std::vector<long> at_bats;

  int players() const { return static_cast<int>(hits.size()); }
};

struct PoissonGlmData {
  Mat counts;     // E x P, nonnegative
  Mat exposures;  // E x P, >= 1

  int groups() const { return static_cast<int>(counts.rows()); }
  int cells() const { return static_cast<int>(counts.cols()); }
};

// CSV with required header `name,hits,at_bats`. Malformed rows and
// hits > at_bats are reported with their line number.
inline BinomialData load_binomial_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "name,hits,at_bats")
    throw ConfigError(path + ": expected header 'name,hits,at_bats', got '" + line + "'");

  BinomialData data;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, hits_s, bats_s;
    if (!std::getline(ss, name, ',') || !std::getline(ss, hits_s, ',') ||
        !std::getline(ss, bats_s))
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 3 columns");
    long hits = 0, bats = 0;
    try {
      hits = std::stol(hits_s);
      bats = std::stol(bats_s);
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": non-numeric count");
    }
    if (bats < 1 || hits < 0 || hits > bats)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": need 0 <= hits <= at_bats and at_bats >= 1 (row '" + name + "')");
    data.names.push_back(name);
    data.hits.push_back(hits);
    data.at_bats.push_back(bats);
  }
  if (data.players() == 0) throw ConfigError(path + ": no data rows");
  return data;
}

namespace detail {

// Hierarchical binomial posterior on the unconstrained space
//   u = (u_phi, u_kappa, u_1..u_J),  D = J + 2
// with phi = logistic(u_phi), kappa = 1 + exp(u_kappa) (Pareto support),
// theta_j = logistic(u_j). Log-Jacobians: u - 2 softplus(u) for each logistic
// coordinate and u_kappa for the shifted exponential.
struct HierBinomial {
  std::vector<long> hits;
  std::vector<long> at_bats;
  bool include_likelihood = true;

  static constexpr double kParetoAlpha = 1.5;

  double log_density(const Vec& u) const {
    const int j_count = static_cast<int>(hits.size());
    const double u_phi = u[0], u_kappa = u[1];
    const double phi = logistic(u_phi);
    const double kappa = 1.0 + std::exp(u_kappa);
    const double a = phi * kappa;
    const double b = (1.0 - phi) * kappa;

    // Pareto(1, alpha) prior on kappa plus its log-Jacobian; the uniform
    // prior on phi contributes only its Jacobian.
    double lp = std::log(kParetoAlpha) - (kParetoAlpha + 1.0) * std::log(kappa) + u_kappa;
    lp += u_phi - 2.0 * softplus(u_phi);

    const double log_beta_norm =
        std::lgamma(a) + std::lgamma(b) - std::lgamma(kappa);
    for (int j = 0; j < j_count; ++j) {
      const double uj = u[2 + j];
      const double log_theta = -softplus(-uj);
      const double log_1m_theta = -softplus(uj);
      double apow = a - 1.0, bpow = b - 1.0;
      if (include_likelihood) {
        apow += static_cast<double>(hits[j]);
        bpow += static_cast<double>(at_bats[j] - hits[j]);
        lp += std::lgamma(static_cast<double>(at_bats[j]) + 1.0) -
              std::lgamma(static_cast<double>(hits[j]) + 1.0) -
              std::lgamma(static_cast<double>(at_bats[j] - hits[j]) + 1.0);
      }
      lp += apow * log_theta + bpow * log_1m_theta - log_beta_norm;
      lp += uj - 2.0 * softplus(uj);
    }
    return lp;
  }

  Vec grad_log_density(const Vec& u) const {
    const int j_count = static_cast<int>(hits.size());
    const double u_phi = u[0], u_kappa = u[1];
    const double phi = logistic(u_phi);
    const double kappa = 1.0 + std::exp(u_kappa);
    const double a = phi * kappa;
    const double b = (1.0 - phi) * kappa;
    const double psi_a = boost::math::digamma(a);
    const double psi_b = boost::math::digamma(b);
    const double psi_ab = boost::math::digamma(kappa);

    Vec g(u.size());
    double d_phi = 0.0;    // d lp / d phi (constrained)
    double d_kappa = 0.0;  // d lp / d kappa (constrained)
    d_kappa += -(kParetoAlpha + 1.0) / kappa;

    for (int j = 0; j < j_count; ++j) {
      const double uj = u[2 + j];
      const double theta = logistic(uj);
      const double log_theta = -softplus(-uj);
      const double log_1m_theta = -softplus(uj);
      double apow = a - 1.0, bpow = b - 1.0;
      if (include_likelihood) {
        apow += static_cast<double>(hits[j]);
        bpow += static_cast<double>(at_bats[j] - hits[j]);
      }
      g[2 + j] = apow * (1.0 - theta) - bpow * theta + 1.0 - 2.0 * theta;
      d_phi += kappa * (log_theta - log_1m_theta - psi_a + psi_b);
      d_kappa += phi * log_theta + (1.0 - phi) * log_1m_theta -
                 phi * psi_a - (1.0 - phi) * psi_b + psi_ab;
    }

    g[0] = d_phi * phi * (1.0 - phi) + 1.0 - 2.0 * phi;
    g[1] = d_kappa * (kappa - 1.0) + 1.0;
    return g;
  }
};

}  // namespace detail

inline TargetModel hierarchical_binomial(const BinomialData& data,
                                         bool include_likelihood = true) {
  auto model = std::make_shared<detail::HierBinomial>();
  model->hits = data.hits;
  model->at_bats = data.at_bats;
  model->include_likelihood = include_likelihood;
  TargetModel t;
  t.dim = data.players() + 2;
  t.log_density = [model](const Vec& u) { return model->log_density(u); };
  t.grad_log_density = [model](const Vec& u) { return model->grad_log_density(u); };
  return t;
}

namespace detail {

// Multi-level Poisson GLM posterior, parameters
//   x = (mu, ln s2_alpha, ln s2_beta, alpha_1..E, beta_1..P),  D = 3 + E + P.
// Group variances enter by their logs directly (that is how the model states
// their priors), so no Jacobian terms appear.
struct MultilevelPoisson {
  Mat counts;
  Mat exposures;
  Mat log_count_factorials;  // lgamma(Y + 1), cached

  double log_density(const Vec& x) const {
    const int e_count = static_cast<int>(counts.rows());
    const int p_count = static_cast<int>(counts.cols());
    const double mu = x[0], ls2a = x[1], ls2b = x[2];
    const double inv_s2a = std::exp(-ls2a);
    const double inv_s2b = std::exp(-ls2b);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

    double lp = -(mu * mu + ls2a * ls2a + ls2b * ls2b) / 200.0 -
                3.0 * (half_log_2pi + std::log(10.0));
    for (int e = 0; e < e_count; ++e) {
      const double alpha = x[3 + e];
      lp += -half_log_2pi - 0.5 * ls2a - 0.5 * alpha * alpha * inv_s2a;
    }
    for (int p = 0; p < p_count; ++p) {
      const double beta = x[3 + e_count + p];
      lp += -half_log_2pi - 0.5 * ls2b - 0.5 * beta * beta * inv_s2b;
    }
    for (int e = 0; e < e_count; ++e) {
      const double alpha = x[3 + e];
      for (int p = 0; p < p_count; ++p) {
        const double beta = x[3 + e_count + p];
        const double log_rate = mu + alpha + beta + std::log(exposures(e, p));
        lp += counts(e, p) * log_rate - std::exp(log_rate) - log_count_factorials(e, p);
      }
    }
    return lp;
  }

  Vec grad_log_density(const Vec& x) const {
    const int e_count = static_cast<int>(counts.rows());
    const int p_count = static_cast<int>(counts.cols());
    const double mu = x[0], ls2a = x[1], ls2b = x[2];
    const double inv_s2a = std::exp(-ls2a);
    const double inv_s2b = std::exp(-ls2b);

    Vec g = Vec::Zero(x.size());
    g[0] = -mu / 100.0;
    g[1] = -ls2a / 100.0;
    g[2] = -ls2b / 100.0;
    for (int e = 0; e < e_count; ++e) {
      const double alpha = x[3 + e];
      g[3 + e] -= alpha * inv_s2a;
      g[1] += -0.5 + 0.5 * alpha * alpha * inv_s2a;
    }
    for (int p = 0; p < p_count; ++p) {
      const double beta = x[3 + e_count + p];
      g[3 + e_count + p] -= beta * inv_s2b;
      g[2] += -0.5 + 0.5 * beta * beta * inv_s2b;
    }
    for (int e = 0; e < e_count; ++e) {
      const double alpha = x[3 + e];
      for (int p = 0; p < p_count; ++p) {
        const double beta = x[3 + e_count + p];
        const double resid =
            counts(e, p) - exposures(e, p) * std::exp(mu + alpha + beta);
        g[0] += resid;
        g[3 + e] += resid;
        g[3 + e_count + p] += resid;
      }
    }
    return g;
  }
};

}  // namespace detail

inline TargetModel multilevel_poisson(const PoissonGlmData& data) {
  if (data.counts.rows() != data.exposures.rows() ||
      data.counts.cols() != data.exposures.cols())
    throw std::invalid_argument("multilevel_poisson: counts/exposures shape mismatch");
  if (data.counts.minCoeff() < 0.0 || data.exposures.minCoeff() < 1.0)
    throw std::invalid_argument("multilevel_poisson: need counts >= 0, exposures >= 1");
  auto model = std::make_shared<detail::MultilevelPoisson>();
  model->counts = data.counts;
  model->exposures = data.exposures;
  model->log_count_factorials =
      data.counts.unaryExpr([](double y) { return std::lgamma(y + 1.0); });
  TargetModel t;
  t.dim = 3 + data.groups() + data.cells();
  t.log_density = [model](const Vec& x) { return model->log_density(x); };
  t.grad_log_density = [model](const Vec& x) { return model->grad_log_density(x); };
  return t;
}

struct PoissonGenParams {
  double mu = -1.0;
  double sigma_alpha = 0.5;
  double sigma_beta = 0.5;
  long exposure_min = 50;
  long exposure_max = 500;
};

// Draws a synthetic dataset from the model's own generative process.
inline PoissonGlmData gen_poisson_data(std::uint64_t seed, int e_count, int p_count,
                                       const PoissonGenParams& params = {}) {
  if (e_count < 1 || p_count < 1)
    throw std::invalid_argument("gen_poisson_data: need E >= 1, P >= 1");
  RngStream rng(seed);
  Vec alpha(e_count), beta(p_count);
  for (int e = 0; e < e_count; ++e) alpha[e] = params.sigma_alpha * rng.normal();
  for (int p = 0; p < p_count; ++p) beta[p] = params.sigma_beta * rng.normal();

  PoissonGlmData data;
  data.counts = Mat(e_count, p_count);
  data.exposures = Mat(e_count, p_count);
  for (int e = 0; e < e_count; ++e) {
    for (int p = 0; p < p_count; ++p) {
      const double n = static_cast<double>(
          rng.uniform_int(params.exposure_min, params.exposure_max));
      const double rate = n * std::exp(params.mu + alpha[e] + beta[p]);
      data.exposures(e, p) = n;
      data.counts(e, p) = static_cast<double>(rng.poisson(rate));
    }
  }
  return data;
}

}  // namespace vboost
