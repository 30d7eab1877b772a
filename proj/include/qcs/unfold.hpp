#pragma once

// K-stage deterministic reconstruction.
//
// Stage k computes eps_k = sqrt(sigma^2 + beta_k^2 d), takes the likelihood
// step mu = x + lambda_k M^T grad_z log p(y | Mx; eps_k) and refines mu. The
// L2 baseline swaps the likelihood step for mu = x + lambda_k M^T (y_hat - Mx)
// with y_hat the codeword values.
//
// The per-stage NLL trace is always evaluated at the final stage's scale
// eps_K, so entries from different stages are comparable. Monotone mode
// halves lambda_k (at most max_halvings times) until that NLL does not
// increase, and otherwise keeps the previous iterate.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qcs/error.hpp"
#include "qcs/likelihood.hpp"
#include "qcs/nelder_mead.hpp"
#include "qcs/refine.hpp"
#include "qcs/sensing.hpp"

namespace qcs {

inline constexpr double kNllLossWeight = 0.05;

struct StageSchedule {
  std::vector<double> lambdas;
  std::vector<double> betas;

  std::size_t stages() const { return lambdas.size(); }

  void validate() const {
    if (lambdas.empty()) throw ParameterError("schedule: K must be >= 1");
    if (betas.size() != lambdas.size()) {
      throw ParameterError("schedule: lambdas and betas lengths differ");
    }
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      if (!std::isfinite(lambdas[k])) throw ParameterError("schedule: lambda must be finite");
      if (!(betas[k] >= 0.0) || !std::isfinite(betas[k])) {
        throw ParameterError("schedule: beta must be finite and >= 0");
      }
    }
  }

  // lambda_k = 0.5, beta_k = 0.1 (K - k + 1) / K for k = 1..K.
  static StageSchedule default_for(std::size_t stages) {
    if (stages == 0) throw ParameterError("schedule: K must be >= 1");
    StageSchedule s;
    const auto kk = static_cast<double>(stages);
    for (std::size_t k = 1; k <= stages; ++k) {
      s.lambdas.push_back(0.5);
      s.betas.push_back(0.1 * (kk - static_cast<double>(k) + 1.0) / kk);
    }
    return s;
  }
};

enum class InitMode { zeros, backprojection };
enum class DataStep { likelihood, vanilla };

struct ReconstructOptions {
  InitMode init = InitMode::zeros;
  bool monotone = false;
  int max_halvings = 20;
};

struct ReconstructionResult {
  Vector estimate;
  std::vector<double> nll_trace;
  std::vector<double> residual_trace;
};

// zeros, or M^T y_hat / max_i d_i.
inline Vector initial_estimate(const MeasurementRecord& record, const SensingOperator& op,
                               InitMode mode) {
  if (mode == InitMode::zeros) return Vector::Zero(static_cast<Eigen::Index>(op.cols()));
  const double scale = op.row_gram_diag().maxCoeff();
  return op.apply_transpose(record.dequantized()) / scale;
}

namespace detail {

inline EffectiveScale stage_scale(double sigma, double beta, const Vector& d, std::size_t stage) {
  try {
    return effective_scale(sigma, beta, d);
  } catch (const DegenerateScaleError& e) {
    throw DegenerateScaleError("stage " + std::to_string(stage) + ": " + e.what());
  }
}

inline void check_problem(const MeasurementRecord& record, const SensingOperator& op,
                          const StageSchedule& schedule) {
  schedule.validate();
  require_dims(record.size() == op.rows(), "reconstruct: record has " +
                                               std::to_string(record.size()) +
                                               " measurements, operator has " +
                                               std::to_string(op.rows()) + " rows");
}

// data_direction(x, eps) returns v with the stage update mu = x + lambda v.
template <typename Direction>
ReconstructionResult run_stages(const MeasurementRecord& record, const SensingOperator& op,
                                const StageSchedule& schedule, const Refinement& refinement,
                                const ReconstructOptions& options, Direction&& data_direction) {
  check_problem(record, op, schedule);
  const std::size_t stages = schedule.stages();
  const Vector d = op.row_gram_diag();
  const EffectiveScale eval_eps = stage_scale(record.sigma, schedule.betas.back(), d, stages);

  ReconstructionResult result;
  result.nll_trace.reserve(stages);
  result.residual_trace.reserve(stages);
  auto score = [&](const Vector& v) {
    return v.allFinite() ? nll(record, op.apply(v), eval_eps) : std::numeric_limits<double>::infinity();
  };
  Vector x = initial_estimate(record, op, options.init);
  double current_nll = score(x);

  for (std::size_t k = 0; k < stages; ++k) {
    const EffectiveScale eps = stage_scale(record.sigma, schedule.betas[k], d, k + 1);
    double lambda = schedule.lambdas[k];
    if (!std::isfinite(lambda)) throw ParameterError("reconstruct: lambda must be finite");
    // The update direction does not depend on lambda, so backtracking reuses it.
    const Vector direction = data_direction(x, eps);
    Vector candidate = refinement.apply(x + lambda * direction);
    double candidate_nll = score(candidate);
    if (options.monotone) {
      for (int h = 0; h < options.max_halvings && !(candidate_nll <= current_nll); ++h) {
        lambda *= 0.5;
        candidate = refinement.apply(x + lambda * direction);
        candidate_nll = score(candidate);
      }
      if (!(candidate_nll <= current_nll)) {
        candidate = x;
        candidate_nll = current_nll;
      }
    } else if (!candidate.allFinite()) {
      throw StabilityError("stage " + std::to_string(k + 1) +
                           ": iterate diverged to non-finite values; lower lambda or use monotone mode");
    }
    result.residual_trace.push_back((candidate - x).norm());
    result.nll_trace.push_back(candidate_nll);
    x = std::move(candidate);
    current_nll = candidate_nll;
  }
  result.estimate = std::move(x);
  return result;
}

}  // namespace detail

inline ReconstructionResult reconstruct(const MeasurementRecord& record, const SensingOperator& op,
                                        const StageSchedule& schedule, const Refinement& refinement,
                                        const ReconstructOptions& options = {}) {
  return detail::run_stages(record, op, schedule, refinement, options,
                            [&](const Vector& x, const EffectiveScale& eps) {
                              return Vector(op.apply_transpose(grad_measurement(op.apply(x), record, eps)));
                            });
}

inline ReconstructionResult vanilla_reconstruct(const MeasurementRecord& record,
                                                const SensingOperator& op,
                                                const StageSchedule& schedule,
                                                const Refinement& refinement,
                                                const ReconstructOptions& options = {}) {
  const Vector y_hat = record.dequantized();
  return detail::run_stages(record, op, schedule, refinement, options,
                            [&](const Vector& x, const EffectiveScale&) {
                              return Vector(op.apply_transpose(y_hat - op.apply(x)));
                            });
}

inline ReconstructionResult run_reconstruction(DataStep step, const MeasurementRecord& record,
                                               const SensingOperator& op,
                                               const StageSchedule& schedule,
                                               const Refinement& refinement,
                                               const ReconstructOptions& options = {}) {
  return step == DataStep::likelihood ? reconstruct(record, op, schedule, refinement, options)
                                      : vanilla_reconstruct(record, op, schedule, refinement, options);
}

// |estimate - truth|_2 + 0.05 * NLL(y | M estimate; eps_final).
inline double composite_loss(const Vector& estimate, const Vector& ground_truth,
                             const MeasurementRecord& record, const SensingOperator& op,
                             const EffectiveScale& eps_final) {
  detail::require_dims(estimate.size() == ground_truth.size(),
                       "composite_loss: estimate and ground truth lengths differ");
  return (estimate - ground_truth).norm() + kNllLossWeight * nll(record, op.apply(estimate), eps_final);
}

// ---------------------------------------------------------------------------
// Schedule calibration

struct TrainingPair {
  Vector signal;
  MeasurementRecord record;
};

struct CalibrationOptions {
  std::size_t budget = 200;
  double initial_step = 0.5;  // in log space
  ReconstructOptions reconstruct;
  DataStep step = DataStep::likelihood;
};

struct CalibrationResult {
  StageSchedule schedule;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t evaluations = 0;
};

// Mean composite loss of a schedule over the training pairs; eps_final uses
// beta_K. Failed reconstructions (degenerate or diverged) score +inf.
inline double schedule_loss(const std::vector<TrainingPair>& pairs, const SensingOperator& op,
                            const StageSchedule& schedule, const Refinement& refinement,
                            const ReconstructOptions& options, DataStep step = DataStep::likelihood) {
  if (pairs.empty()) throw InputError("schedule_loss: empty training set");
  const Vector d = op.row_gram_diag();
  double total = 0.0;
  try {
    for (const auto& pair : pairs) {
      const auto result = run_reconstruction(step, pair.record, op, schedule, refinement, options);
      if (!result.estimate.allFinite()) return std::numeric_limits<double>::infinity();
      const EffectiveScale eps = effective_scale(pair.record.sigma, schedule.betas.back(), d);
      total += composite_loss(result.estimate, pair.signal, pair.record, op, eps);
    }
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
  return total / static_cast<double>(pairs.size());
}

// Nelder-Mead over (log lambda_k, log beta_k), started from the default
// schedule. Deterministic: the search has no random component.
inline CalibrationResult calibrate(const std::vector<TrainingPair>& pairs, const SensingOperator& op,
                                   std::size_t stages, const Refinement& refinement,
                                   const CalibrationOptions& options) {
  if (pairs.empty()) throw InputError("calibrate: empty training set");
  if (options.budget == 0) throw ParameterError("calibrate: budget must be >= 1");
  const StageSchedule start = StageSchedule::default_for(stages);

  auto decode = [stages](const std::vector<double>& theta) {
    StageSchedule s;
    for (std::size_t k = 0; k < stages; ++k) {
      s.lambdas.push_back(std::exp(theta[k]));
      s.betas.push_back(std::exp(theta[stages + k]));
    }
    return s;
  };
  std::vector<double> theta0;
  for (double l : start.lambdas) theta0.push_back(std::log(l));
  for (double b : start.betas) theta0.push_back(std::log(b));

  double start_loss = std::numeric_limits<double>::quiet_NaN();
  auto objective = [&](const std::vector<double>& theta) {
    const double loss =
        schedule_loss(pairs, op, decode(theta), refinement, options.reconstruct, options.step);
    if (std::isnan(start_loss)) start_loss = loss;
    return loss;
  };
  const NelderMeadResult nm =
      nelder_mead(objective, theta0, {options.budget, options.initial_step, 1e-10});

  CalibrationResult out;
  out.schedule = decode(nm.best);
  out.final_loss = nm.best_value;
  out.evaluations = nm.evaluations;
  out.initial_loss = start_loss;  // the first evaluation is always the starting schedule
  return out;
}

}  // namespace qcs
