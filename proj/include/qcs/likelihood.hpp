#pragma once

// Noise-perturbed quantized likelihood and its measurement-domain score.
//
// With effective scale eps_i = sqrt(sigma^2 + beta^2 d_i), the probability of
// codeword y_i given z_i is the Gaussian mass of its cell,
//   p = Phi((u - z) / eps) - Phi((l - z) / eps),
// and d/dz log p = (phi(l~) - phi(u~)) / (Phi(u~) - Phi(l~)) / eps. The 1-bit
// cells (-inf, 0) and [0, inf) reduce this to (y / eps) M(y z / eps) with M the
// Mills ratio. All evaluation goes through standard_interval_mass so the far
// tails never subtract two underflowed CDFs.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "qcs/error.hpp"
#include "qcs/normal.hpp"
#include "qcs/quantizer.hpp"
#include "qcs/sensing.hpp"

namespace qcs {

// Per-measurement smoothing standard deviation for one stage.
class EffectiveScale {
 public:
  explicit EffectiveScale(Vector eps) : eps_(std::move(eps)) {
    for (Eigen::Index i = 0; i < eps_.size(); ++i) {
      if (!(eps_[i] > 0.0) || !std::isfinite(eps_[i])) {
        throw DegenerateScaleError("effective scale: eps[" + std::to_string(i) +
                                   "] must be finite and > 0");
      }
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(eps_.size()); }
  double operator[](std::size_t i) const { return eps_[static_cast<Eigen::Index>(i)]; }
  const Vector& values() const { return eps_; }

 private:
  Vector eps_;
};

inline EffectiveScale effective_scale(double sigma, double beta, const Vector& d) {
  if (!(sigma >= 0.0) || !(beta >= 0.0)) {
    throw ParameterError("effective_scale: sigma and beta must be >= 0");
  }
  Vector eps(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] >= 0.0)) throw ParameterError("effective_scale: d must be >= 0");
    const double var = sigma * sigma + beta * beta * d[i];
    if (!(var > 0.0)) {
      throw DegenerateScaleError("effective_scale: sigma = beta^2 d = 0 at measurement " +
                                 std::to_string(i) + " (hard quantization has no smooth likelihood)");
    }
    eps[i] = std::sqrt(var);
  }
  return EffectiveScale(std::move(eps));
}

namespace detail {

inline IntervalMass element_mass(double z, const IntervalBounds& cell, double eps) {
  if (!(eps > 0.0)) throw DegenerateScaleError("likelihood: eps must be > 0");
  if (!std::isfinite(z)) throw InputError("likelihood: non-finite z");
  return standard_interval_mass((cell.lower - z) / eps, (cell.upper - z) / eps);
}

inline void require_record_length(const Vector& z, const MeasurementRecord& record,
                                  const EffectiveScale& eps, const char* op) {
  require_dims(static_cast<std::size_t>(z.size()) == record.size() && eps.size() == record.size(),
               std::string(op) + ": z (" + std::to_string(z.size()) + "), record (" +
                   std::to_string(record.size()) + ") and eps (" + std::to_string(eps.size()) +
                   ") lengths differ");
}

}  // namespace detail

inline double log_likelihood_element(double z, const IntervalBounds& cell, double eps) {
  return detail::element_mass(z, cell, eps).log_prob;
}

inline double grad_element(double z, const IntervalBounds& cell, double eps) {
  return detail::element_mass(z, cell, eps).score / eps;
}

inline Vector grad_measurement(const Vector& z, const MeasurementRecord& record,
                               const EffectiveScale& eps) {
  detail::require_record_length(z, record, eps, "grad_measurement");
  Vector g(z.size());
  for (std::size_t i = 0; i < record.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    g[k] = grad_element(z[k], interval_of(record.indices[i], record.spec), eps[i]);
  }
  return g;
}

// mu = x + lambda * M^T grad_z log p(y | Mx).
inline Vector likelihood_projection(const Vector& x, const SensingOperator& op,
                                    const MeasurementRecord& record, double lambda,
                                    const EffectiveScale& eps) {
  if (!std::isfinite(lambda)) throw ParameterError("likelihood_projection: lambda must be finite");
  const Vector g = grad_measurement(op.apply(x), record, eps);
  return x + lambda * op.apply_transpose(g);
}

// Mean negative log-likelihood over the measurements.
inline double nll(const MeasurementRecord& record, const Vector& z, const EffectiveScale& eps) {
  detail::require_record_length(z, record, eps, "nll");
  if (record.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    total -= log_likelihood_element(z[k], interval_of(record.indices[i], record.spec), eps[i]);
  }
  return total / static_cast<double>(record.size());
}

}  // namespace qcs
