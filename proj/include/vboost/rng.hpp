#pragma once

#include "vboost/common.hpp"

#include <cstdint>
#include <random>

namespace vboost {

// splitmix64 step; used to derive independent stream seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  return mix_seed(mix_seed(seed) ^ mix_seed(label * 0x9e3779b97f4a7c15ULL + 1));
}

// A seeded random stream. Every estimator takes one of these explicitly;
// repeated runs of the same binary with the same seed are byte-identical.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }

  double normal() { return normal_(engine_); }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // inclusive bounds
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uniform_int_distribution<std::int64_t> d(lo, hi);
    return d(engine_);
  }

  std::int64_t poisson(double mean) {
    std::poisson_distribution<std::int64_t> d(mean);
    return d(engine_);
  }

  // index drawn from the categorical distribution given by `probs` (sums to 1)
  int categorical(const Vec& probs) {
    const double u = uniform();
    double acc = 0.0;
    for (Eigen::Index c = 0; c < probs.size(); ++c) {
      acc += probs[c];
      if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(probs.size() - 1);
  }

private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vboost
