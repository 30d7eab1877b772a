#pragma once

// Standard normal special functions used by the quantized likelihood.
//
// Everything here works in log space once a standardized bound leaves the
// central region, so interval probabilities and their score stay finite
// for |t| well past the point where Phi(t) underflows (t < -38).

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "qcs/error.hpp"

namespace qcs {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934381868;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736405617640;

// Switch point between direct CDF evaluation and the tail expansion.
inline constexpr double kTailThreshold = 8.0;

inline double normal_pdf(double t) {
  if (std::isinf(t)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * t * t);
}

inline double normal_log_pdf(double t) {
  if (std::isinf(t)) return -std::numeric_limits<double>::infinity();
  return -0.5 * t * t - kLogSqrt2Pi;
}

// erfc keeps full relative precision in the lower tail.
inline double normal_cdf(double t) {
  return 0.5 * std::erfc(-t * std::numbers::sqrt2 * 0.5);
}

namespace detail {

// R(x) = Phi(-x) / phi(x) for x >= kTailThreshold, from Laplace's continued
// fraction x + 1/(x + 2/(x + 3/(x + ...))) evaluated bottom-up. At x = 8 the
// truncation error of 64 terms is far below double rounding.
inline double tail_ratio(double x) {
  constexpr int kTerms = 64;
  double f = x;
  for (int k = kTerms; k >= 1; --k) f = x + k / f;
  return 1.0 / f;
}

}  // namespace detail

// log Phi(t), finite for every finite t.
inline double normal_log_cdf(double t) {
  if (std::isnan(t)) return t;
  if (t == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  if (t < -kTailThreshold) return normal_log_pdf(t) + std::log(detail::tail_ratio(-t));
  if (t > 0.0) return std::log1p(-normal_cdf(-t));
  return std::log(normal_cdf(t));
}

// Mills ratio M(t) = phi(t) / Phi(t).
inline double mills_ratio(double t) {
  if (std::isnan(t)) throw InputError("mills_ratio: NaN argument");
  if (t == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::infinity();
  if (t < -kTailThreshold) return 1.0 / detail::tail_ratio(-t);
  if (t > kTailThreshold) return normal_pdf(t);
  return normal_pdf(t) / normal_cdf(t);
}

// log(Phi(b) - Phi(a)) and the standardized score (phi(a) - phi(b)) / (Phi(b) - Phi(a))
// for a < b, either bound possibly infinite.
//
// Same-sign finite bounds are folded onto the lower tail and differenced in
// log space; bounds straddling zero add two erf terms of equal sign. The score
// anchors on whichever bound has the larger density so the remaining factor
// is -expm1(...) in (-1, 0] and never overflows.
struct IntervalMass {
  double log_prob;
  double score;
};

inline IntervalMass standard_interval_mass(double a, double b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (a == -inf && b == inf) return {0.0, 0.0};
  if (a == -inf) return {normal_log_cdf(b), -mills_ratio(b)};
  if (b == inf) return {normal_log_cdf(-a), mills_ratio(-a)};

  double log_prob;
  double lo = a;
  double hi = b;
  if (lo > 0.0) {
    lo = -b;
    hi = -a;
  }
  if (hi <= 0.0) {
    const double log_hi = normal_log_cdf(hi);
    const double log_lo = normal_log_cdf(lo);
    log_prob = log_hi + std::log(-std::expm1(log_lo - log_hi));
  } else {
    constexpr double inv_sqrt2 = 0.5 * std::numbers::sqrt2;
    log_prob = std::log(0.5 * (std::erf(hi * inv_sqrt2) - std::erf(lo * inv_sqrt2)));
  }

  double score;
  if (std::fabs(a) <= std::fabs(b)) {
    // phi(a) - phi(b) = phi(a) * (1 - exp((a^2 - b^2) / 2))
    score = std::exp(normal_log_pdf(a) - log_prob) * -std::expm1(0.5 * (a - b) * (a + b));
  } else {
    score = -std::exp(normal_log_pdf(b) - log_prob) * -std::expm1(0.5 * (b - a) * (b + a));
  }
  return {log_prob, score};
}

}  // namespace qcs
