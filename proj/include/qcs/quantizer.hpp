#pragma once

// Uniform mid-rise quantizers with saturating outer cells.
//
// Codeword r (base-1) of a Q-bit quantizer with step D sits at
//   q_r = (2r - 2^Q - 1) * D / 2,
// and owns the half-open cell [q_r - D/2, q_r + D/2). The lowest cell is open
// below and the highest is open above, so the cells partition the real line.
// The 1-bit quantizer is the sign function with codewords {-1, +1}; zero maps
// to +1.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qcs/error.hpp"

namespace qcs {

class QuantizerSpec {
 public:
  static constexpr int kMaxBits = 8;

  QuantizerSpec(int bits, double step) : bits_(bits), step_(step) {
    if (bits < 1 || bits > kMaxBits) {
      throw ParameterError("quantizer: bits must lie in [1, 8], got " + std::to_string(bits));
    }
    if (bits > 1 && !(step > 0.0 && std::isfinite(step))) {
      throw ParameterError("quantizer: step must be finite and > 0");
    }
  }

  static QuantizerSpec sign() { return QuantizerSpec(1, 1.0); }

  int bits() const { return bits_; }
  // Unused for the 1-bit quantizer.
  double step() const { return step_; }
  std::size_t levels() const { return std::size_t{1} << bits_; }

  bool operator==(const QuantizerSpec&) const = default;

 private:
  int bits_;
  double step_;
};

struct CodewordIndex {
  std::uint16_t value = 0;

  bool operator==(const CodewordIndex&) const = default;
};

struct IntervalBounds {
  double lower;
  double upper;

  bool contains(double v) const { return v >= lower && v < upper; }
  bool operator==(const IntervalBounds&) const = default;
};

namespace detail {

inline void check_index(CodewordIndex c, const QuantizerSpec& spec) {
  if (c.value >= spec.levels()) {
    throw ParameterError("codeword index " + std::to_string(c.value) + " out of range for " +
                         std::to_string(spec.bits()) + "-bit quantizer");
  }
}

// Cell boundary between codeword index k-1 and k, k in [1, levels-1].
inline double cell_edge(std::size_t k, const QuantizerSpec& spec) {
  const double half = static_cast<double>(spec.levels() / 2);
  return (static_cast<double>(k) - half) * spec.step();
}

}  // namespace detail

inline double codeword_value(CodewordIndex c, const QuantizerSpec& spec) {
  detail::check_index(c, spec);
  if (spec.bits() == 1) return c.value == 0 ? -1.0 : 1.0;
  const double r = static_cast<double>(c.value) + 1.0;
  return (2.0 * r - static_cast<double>(spec.levels()) - 1.0) * spec.step() * 0.5;
}

inline std::vector<double> codewords(const QuantizerSpec& spec) {
  std::vector<double> out(spec.levels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = codeword_value(CodewordIndex{static_cast<std::uint16_t>(i)}, spec);
  }
  return out;
}

inline IntervalBounds interval_of(CodewordIndex c, const QuantizerSpec& spec) {
  detail::check_index(c, spec);
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (spec.bits() == 1) return c.value == 0 ? IntervalBounds{-inf, 0.0} : IntervalBounds{0.0, inf};
  const std::size_t k = c.value;
  const double lower = k == 0 ? -inf : detail::cell_edge(k, spec);
  const double upper = k + 1 == spec.levels() ? inf : detail::cell_edge(k + 1, spec);
  return {lower, upper};
}

inline CodewordIndex quantize(double v, const QuantizerSpec& spec) {
  if (!std::isfinite(v)) throw InputError("quantize: non-finite value");
  if (spec.bits() == 1) return CodewordIndex{static_cast<std::uint16_t>(v >= 0.0 ? 1 : 0)};

  const auto top = static_cast<long long>(spec.levels()) - 1;
  const double guess = std::floor(v / spec.step()) + static_cast<double>(spec.levels() / 2);
  long long k = guess < 0.0 ? 0 : (guess > static_cast<double>(top) ? top : static_cast<long long>(guess));
  // v / step can round across an edge; settle against the exact cell bounds.
  while (k > 0 && v < detail::cell_edge(static_cast<std::size_t>(k), spec)) --k;
  while (k < top && v >= detail::cell_edge(static_cast<std::size_t>(k + 1), spec)) ++k;
  return CodewordIndex{static_cast<std::uint16_t>(k)};
}

}  // namespace qcs
