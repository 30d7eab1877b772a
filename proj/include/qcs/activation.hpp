#pragma once

#include <cmath>

#include "qcs/normal.hpp"

namespace qcs {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double silu(double x) { return x * sigmoid(x); }

// Exact form x * Phi(x), not the tanh approximation.
inline double gelu(double x) { return x * normal_cdf(x); }

}  // namespace qcs
