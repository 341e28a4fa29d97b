#pragma once

#include "vboost/mixture.hpp"
#include "vboost/targets.hpp"

#include <cmath>
#include <vector>

namespace vboost {

// Tensor-product trapezoid grid over 1 or 2 dimensions. Counts are kept odd
// so the grid always carries a center point.
struct QuadratureGrid {
  std::vector<std::pair<double, double>> bounds;
  std::vector<int> counts;

  int dims() const { return static_cast<int>(bounds.size()); }
};

inline QuadratureGrid grid_1d(double lo, double hi, int count) {
  return QuadratureGrid{{{lo, hi}}, {count}};
}

inline QuadratureGrid grid_2d(double lo0, double hi0, double lo1, double hi1, int count) {
  return QuadratureGrid{{{lo0, hi0}, {lo1, hi1}}, {count, count}};
}

inline void validate(const QuadratureGrid& grid) {
  if (grid.dims() < 1 || grid.dims() > 2 ||
      grid.counts.size() != grid.bounds.size())
    throw std::invalid_argument("quadrature grid must be 1D or 2D");
  for (std::size_t d = 0; d < grid.bounds.size(); ++d) {
    const auto [lo, hi] = grid.bounds[d];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw std::invalid_argument("quadrature grid bounds must be finite and ordered");
    if (grid.counts[d] < 11 || grid.counts[d] % 2 == 0)
      throw std::invalid_argument("quadrature grid counts must be odd and >= 11");
  }
}

struct QuadratureMoments {
  double log_normalizer = 0.0;
  Vec mean;
  Mat cov;
};

namespace detail {

template <typename LogDensityFn>
void for_each_node(const QuadratureGrid& grid, LogDensityFn&& visit) {
  const int d0 = grid.counts[0];
  const double lo0 = grid.bounds[0].first;
  const double h0 = (grid.bounds[0].second - lo0) / (d0 - 1);
  if (grid.dims() == 1) {
    Vec x(1);
    for (int i = 0; i < d0; ++i) {
      x[0] = lo0 + i * h0;
      const double w = h0 * ((i == 0 || i == d0 - 1) ? 0.5 : 1.0);
      visit(x, w, i == 0 || i == d0 - 1);
    }
    return;
  }
  const int d1 = grid.counts[1];
  const double lo1 = grid.bounds[1].first;
  const double h1 = (grid.bounds[1].second - lo1) / (d1 - 1);
  Vec x(2);
  for (int i = 0; i < d0; ++i) {
    x[0] = lo0 + i * h0;
    const double wi = h0 * ((i == 0 || i == d0 - 1) ? 0.5 : 1.0);
    for (int j = 0; j < d1; ++j) {
      x[1] = lo1 + j * h1;
      const double wj = h1 * ((j == 0 || j == d1 - 1) ? 0.5 : 1.0);
      visit(x, wi * wj, i == 0 || i == d0 - 1 || j == 0 || j == d1 - 1);
    }
  }
}

}  // namespace detail

// Trapezoid-rule normalizer and moments of an unnormalized log-density.
// Fails if more than 1e-8 of the mass sits on the boundary ring.
template <typename LogDensityFn>
QuadratureMoments quadrature_moments_of(const QuadratureGrid& grid, LogDensityFn&& lpdf,
                                        int dim) {
  validate(grid);
  if (dim != grid.dims())
    throw std::invalid_argument("quadrature grid dimension mismatch");

  // max-shifted first pass for a stable normalizer
  double shift = -std::numeric_limits<double>::infinity();
  detail::for_each_node(grid, [&](const Vec& x, double w, bool) {
    shift = std::max(shift, lpdf(x) + std::log(w));
  });
  if (!std::isfinite(shift))
    throw GridError("quadrature: log-density non-finite over the whole grid");

  double total = 0.0, boundary = 0.0;
  Vec mean = Vec::Zero(dim);
  Mat second = Mat::Zero(dim, dim);
  detail::for_each_node(grid, [&](const Vec& x, double w, bool on_boundary) {
    const double p = std::exp(lpdf(x) + std::log(w) - shift);
    total += p;
    if (on_boundary) boundary += p;
    mean += p * x;
    second += p * x * x.transpose();
  });
  if (boundary > 1e-8 * total)
    throw GridError("quadrature grid too small: boundary mass fraction " +
                    std::to_string(boundary / total));
  mean /= total;
  QuadratureMoments out;
  out.log_normalizer = shift + std::log(total);
  out.mean = mean;
  out.cov = second / total - mean * mean.transpose();
  return out;
}

inline QuadratureMoments quadrature_moments(const TargetModel& target,
                                            const QuadratureGrid& grid) {
  return quadrature_moments_of(grid, [&](const Vec& x) { return target.log_density(x); },
                               static_cast<int>(target.dim));
}

// KL(q || pi) in nats by quadrature, with pi normalized on the same grid.
inline double kl_q_to_target(const MixtureApprox& mix, const TargetModel& target,
                             const QuadratureGrid& grid) {
  const double log_z = quadrature_moments(target, grid).log_normalizer;
  double kl = 0.0, q_mass = 0.0, q_boundary = 0.0;
  detail::for_each_node(grid, [&](const Vec& x, double w, bool on_boundary) {
    const double lq = mix_log_pdf(mix, x);
    const double q = std::exp(lq);
    if (q > 0.0) kl += w * q * (lq - (target.log_density(x) - log_z));
    q_mass += w * q;
    if (on_boundary) q_boundary += w * q;
  });
  if (q_boundary > 1e-8 * q_mass)
    throw GridError("quadrature grid too small for the mixture: boundary mass fraction " +
                    std::to_string(q_boundary / q_mass));
  return kl;
}

}  // namespace vboost
