#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vboost {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised when a config file (or CLI flag set) is invalid. The CLI maps this
// to exit code 1; everything else that escapes maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a Monte Carlo estimator hits a non-finite target evaluation or
// a non-finite gradient.
class EstimatorError : public std::runtime_error {
public:
  explicit EstimatorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when component initialization cannot produce a usable component.
class InitError : public std::runtime_error {
public:
  explicit InitError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a quadrature grid leaves too much mass at its boundary.
class GridError : public std::runtime_error {
public:
  explicit GridError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double softplus(double x) {
  // log(1 + e^x) without overflow; for large x the correction underflows.
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(e^a + e^b), exact when one argument is -inf.
inline double log_sum_exp2(double a, double b) {
  if (a >= b) return a + std::log1p(std::exp(b - a));
  return b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline std::string format_point(const Vec& x, int max_coords = 4) {
  std::string s = "(";
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < std::min(n, max_coords); ++i) {
    if (i) s += ", ";
    s += std::to_string(x[i]);
  }
  if (n > max_coords) s += ", ...";
  s += ")";
  return s;
}

}  // namespace vboost
