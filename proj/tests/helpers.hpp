#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "cfrf/common.hpp"

namespace cfrf::testing {

// Simple iid covariate matrix for unit fixtures.
inline Matrix random_matrix(std::size_t n, std::size_t p, std::uint64_t seed) {
  Matrix x(n, p);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < n; ++i) x(i, j) = normal(rng);
  return x;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / a.size());
}

}  // namespace cfrf::testing
