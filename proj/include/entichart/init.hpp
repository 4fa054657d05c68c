#pragma once

#include "entichart/tape.hpp"

#include <cmath>
#include <random>

namespace entichart::ad {

/// uniform(-√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out))).
inline Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

inline Matrix uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

}  // namespace entichart::ad
