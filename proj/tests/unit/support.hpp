#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

// |a - b| <= tol * max(|a|, |b|), with tol also acting as the absolute
// floor when both are tiny.
inline ::testing::AssertionResult RelNear(double a, double b, double tol) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
  if (std::fabs(a - b) <= tol * scale || std::fabs(a - b) <= tol * 1e-300) {
    return ::testing::AssertionSuccess();
  }
  return ::testing::AssertionFailure() << a << " vs " << b << " (rel " << std::fabs(a - b) / scale
                                       << " > " << tol << ")";
}
