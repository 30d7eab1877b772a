#pragma once

// Dense sensing operators and the quantized forward model y = Q(Mx + n).

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qcs/error.hpp"
#include "qcs/quantizer.hpp"

namespace qcs {

using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class SensingOperator {
 public:
  explicit SensingOperator(RowMajorMatrix entries, std::uint64_t seed = 0)
      : entries_(std::move(entries)), seed_(seed) {
    if (entries_.rows() == 0 || entries_.cols() == 0) {
      throw ParameterError("sensing operator: dimensions must be positive");
    }
    if (!entries_.allFinite()) throw InputError("sensing operator: non-finite entry");
  }

  static SensingOperator identity(std::size_t n) {
    return SensingOperator(RowMajorMatrix::Identity(static_cast<Eigen::Index>(n),
                                                    static_cast<Eigen::Index>(n)));
  }

  std::size_t rows() const { return static_cast<std::size_t>(entries_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(entries_.cols()); }
  std::uint64_t seed() const { return seed_; }
  const RowMajorMatrix& entries() const { return entries_; }

  Vector apply(const Vector& x) const {
    detail::require_dims(static_cast<std::size_t>(x.size()) == cols(),
                         "apply: signal length " + std::to_string(x.size()) + " != N = " +
                             std::to_string(cols()));
    return entries_ * x;
  }

  Vector apply_transpose(const Vector& g) const {
    detail::require_dims(static_cast<std::size_t>(g.size()) == rows(),
                         "apply_transpose: vector length " + std::to_string(g.size()) +
                             " != M = " + std::to_string(rows()));
    return entries_.transpose() * g;
  }

  // Diagonal of M M^T.
  Vector row_gram_diag() const { return entries_.rowwise().squaredNorm(); }

 private:
  RowMajorMatrix entries_;
  std::uint64_t seed_;
};

// I.i.d. N(0, 1/m) entries drawn row-major from mt19937_64(seed). Columns have
// unit expected squared norm; rows have expected squared norm n/m.
inline SensingOperator gaussian_operator(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw ParameterError("gaussian_operator: m and n must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  RowMajorMatrix entries(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < entries.cols(); ++j) entries(i, j) = normal(rng);
  }
  return SensingOperator(std::move(entries), seed);
}

struct MeasurementRecord {
  std::vector<CodewordIndex> indices;
  QuantizerSpec spec = QuantizerSpec::sign();
  double sigma = 0.0;
  std::uint64_t noise_seed = 0;
  std::uint64_t operator_seed = 0;

  std::size_t size() const { return indices.size(); }

  std::vector<IntervalBounds> intervals() const {
    std::vector<IntervalBounds> out;
    out.reserve(indices.size());
    for (auto c : indices) out.push_back(interval_of(c, spec));
    return out;
  }

  // Codeword values y_i; the linear data term of the L2 baseline.
  Vector dequantized() const {
    Vector out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = codeword_value(indices[i], spec);
    }
    return out;
  }
};

// y_i = Q(z_i + n_i), n_i = sigma * xi_i with xi drawn from mt19937_64(noise_seed)
// regardless of sigma, so a given seed always consumes the same stream.
inline MeasurementRecord simulate(const Vector& x, const SensingOperator& op, double sigma,
                                  const QuantizerSpec& spec, std::uint64_t noise_seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("simulate: sigma must be >= 0");
  if (!x.allFinite()) throw InputError("simulate: non-finite signal entry");
  const Vector z = op.apply(x);

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MeasurementRecord record;
  record.spec = spec;
  record.sigma = sigma;
  record.noise_seed = noise_seed;
  record.operator_seed = op.seed();
  record.indices.reserve(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double noise = sigma * normal(rng);
    record.indices.push_back(quantize(z[i] + noise, spec));
  }
  return record;
}

}  // namespace qcs
