#pragma once

// Spectral state-space mixer.
//
// Each half-spectrum bin w of group g is driven through the stable complex
// recurrence s_{j+1} = A s_j + B X, s_0 = 0, A = exp(-delta) exp(i theta), and
// read out as C s_J. The J-step recurrence collapses to the diagonal filter
//   D = C B (1 - A^J) / (1 - A),
// to which a rank-R projection/broadcast term couples the bins:
//   Y(w) = D(w) X(w) + warmup * alpha_g * sum_r U_r(w) <V_r, X>.
// Transforms are unnormalized forward and 1/(H W) inverse.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "qcs/activation.hpp"
#include "qcs/error.hpp"
#include "qcs/fft.hpp"
#include "qcs/tensor.hpp"

namespace qcs {

using Complex = std::complex<double>;

inline std::size_t half_width(std::size_t width) { return width / 2 + 1; }

struct HalfSpectrum {
  ComplexTensor data;  // (batch, channels, H, W/2 + 1)
  std::size_t full_width = 0;

  std::size_t bins() const { return data.height() * data.width(); }
};

struct SpectralParams {
  std::size_t groups = 1;
  std::size_t height = 0;
  std::size_t width = 0;  // full spatial width W
  int steps = 1;          // J
  // Indexed [g * bins + w].
  std::vector<double> delta;
  std::vector<double> theta;
  std::vector<Complex> b;
  std::vector<Complex> c;

  std::size_t bins() const { return height * half_width(width); }

  static SpectralParams uniform(std::size_t groups, std::size_t height, std::size_t width, int steps,
                                double delta, double theta, Complex b, Complex c) {
    SpectralParams p;
    p.groups = groups;
    p.height = height;
    p.width = width;
    p.steps = steps;
    const std::size_t n = groups * p.bins();
    p.delta.assign(n, delta);
    p.theta.assign(n, theta);
    p.b.assign(n, b);
    p.c.assign(n, c);
    return p;
  }

  void validate() const {
    if (groups == 0 || height == 0 || width == 0) {
      throw ParameterError("spectral params: groups and grid must be positive");
    }
    if (steps < 1) throw ParameterError("spectral params: steps J must be >= 1");
    const std::size_t n = groups * bins();
    if (delta.size() != n || theta.size() != n || b.size() != n || c.size() != n) {
      throw DimensionError("spectral params: expected " + std::to_string(n) + " entries per field");
    }
    for (double d : delta) {
      if (!(d >= 0.0)) throw StabilityError("spectral params: delta must be >= 0");
    }
  }
};

struct LowRankCoupling {
  std::size_t groups = 1;
  std::size_t rank = 0;
  std::size_t bins = 0;
  // Indexed [(g * rank + r) * bins + w].
  std::vector<Complex> u;
  std::vector<Complex> v;
  std::vector<double> alpha;  // per group
  double warmup = 1.0;        // lambda(t) in [0, 1]

  static LowRankCoupling none(std::size_t groups, std::size_t bins) {
    LowRankCoupling k;
    k.groups = groups;
    k.bins = bins;
    k.alpha.assign(groups, 0.0);
    return k;
  }

  void validate() const {
    if (groups == 0) throw ParameterError("low-rank coupling: groups must be positive");
    if (!(warmup >= 0.0 && warmup <= 1.0)) {
      throw ParameterError("low-rank coupling: warmup must lie in [0, 1]");
    }
    const std::size_t n = groups * rank * bins;
    if (u.size() != n || v.size() != n || alpha.size() != groups) {
      throw DimensionError("low-rank coupling: basis or alpha sizes inconsistent with (G, R, L)");
    }
  }
};

// ---------------------------------------------------------------------------
// Transforms

inline HalfSpectrum forward_rfft2(const RealTensor& x) {
  const std::size_t h_len = x.height();
  const std::size_t w_len = x.width();
  if (h_len == 0 || w_len == 0) throw DimensionError("forward_rfft2: empty spatial grid");
  const std::size_t wf = half_width(w_len);

  HalfSpectrum out{ComplexTensor(x.batch(), x.channels(), h_len, wf), w_len};
  std::vector<Complex> row(w_len), col(h_len);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const double* src = x.plane(b, c);
      Complex* dst = out.data.plane(b, c);
      for (std::size_t h = 0; h < h_len; ++h) {
        for (std::size_t w = 0; w < w_len; ++w) row[w] = src[h * w_len + w];
        fft::transform(row, false);
        std::copy_n(row.begin(), wf, dst + h * wf);
      }
      for (std::size_t w = 0; w < wf; ++w) {
        for (std::size_t h = 0; h < h_len; ++h) col[h] = dst[h * wf + w];
        fft::transform(col, false);
        for (std::size_t h = 0; h < h_len; ++h) dst[h * wf + w] = col[h];
      }
    }
  }
  return out;
}

// Columns 0 and W/2 (W even) are the only half-spectrum columns whose
// conjugate partners are also stored; within them bin (h, w) must equal
// conj(bin (H - h mod H, w)). Averaging each pair is the orthogonal projection
// onto Hermitian-consistent half-spectra and zeroes the imaginary part of
// the self-conjugate bins (h in {0, H/2}).
inline HalfSpectrum hermitian_project(const HalfSpectrum& y) {
  HalfSpectrum out = y;
  const std::size_t h_len = y.data.height();
  const std::size_t wf = y.data.width();
  std::vector<std::size_t> cols{0};
  if (y.full_width % 2 == 0 && y.full_width / 2 != 0) cols.push_back(y.full_width / 2);
  for (std::size_t b = 0; b < y.data.batch(); ++b) {
    for (std::size_t c = 0; c < y.data.channels(); ++c) {
      const Complex* src = y.data.plane(b, c);
      Complex* dst = out.data.plane(b, c);
      for (std::size_t w : cols) {
        if (w >= wf) continue;
        for (std::size_t h = 0; h < h_len; ++h) {
          const std::size_t partner = (h_len - h) % h_len;
          dst[h * wf + w] = 0.5 * (src[h * wf + w] + std::conj(src[partner * wf + w]));
        }
      }
    }
  }
  return out;
}

// Half-spectrum to real signal. Unstored bins are filled by conjugate symmetry,
// so the result is the real signal whose spectrum is hermitian_project(y).
inline RealTensor inverse_rfft2(const HalfSpectrum& y) {
  const std::size_t h_len = y.data.height();
  const std::size_t w_len = y.full_width;
  const std::size_t wf = y.data.width();
  if (h_len == 0 || w_len == 0 || wf != half_width(w_len)) {
    throw DimensionError("inverse_rfft2: half-spectrum width " + std::to_string(wf) +
                         " inconsistent with full width " + std::to_string(w_len));
  }
  RealTensor out(y.data.batch(), y.data.channels(), h_len, w_len);
  const double scale = 1.0 / static_cast<double>(h_len * w_len);
  std::vector<Complex> work(h_len * wf), col(h_len), row(w_len);
  for (std::size_t b = 0; b < y.data.batch(); ++b) {
    for (std::size_t c = 0; c < y.data.channels(); ++c) {
      const Complex* src = y.data.plane(b, c);
      for (std::size_t w = 0; w < wf; ++w) {
        for (std::size_t h = 0; h < h_len; ++h) col[h] = src[h * wf + w];
        fft::transform(col, true);
        for (std::size_t h = 0; h < h_len; ++h) work[h * wf + w] = col[h];
      }
      double* dst = out.plane(b, c);
      for (std::size_t h = 0; h < h_len; ++h) {
        for (std::size_t w = 0; w < w_len; ++w) {
          row[w] = w < wf ? work[h * wf + w] : std::conj(work[h * wf + (w_len - w)]);
        }
        fft::transform(row, true);
        for (std::size_t w = 0; w < w_len; ++w) dst[h * w_len + w] = row[w].real() * scale;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal response

inline constexpr double kThetaLimit = std::numbers::pi - 1e-6;

inline Complex transition(double delta, double theta) {
  if (!(delta >= 0.0)) throw StabilityError("transition: delta must be >= 0");
  const double angle = std::clamp(theta, -kThetaLimit, kThetaLimit);
  return std::polar(std::exp(-delta), angle);
}

// sum_{j=0}^{J-1} A^j. Near A = 1 the closed form (1 - A^J) / (1 - A) cancels,
// so while J |A - 1| < 1 the sum is taken as the binomial series
// sum_k C(J, k+1) h^k in h = A - 1 instead; it is exactly J at A = 1.
inline Complex geometric_gain(Complex a, int steps) {
  if (steps < 1) throw ParameterError("geometric_gain: J must be >= 1");
  const Complex h = a - 1.0;
  const auto j_len = static_cast<double>(steps);
  if (std::abs(h) * j_len < 1.0) {
    Complex term = j_len;
    Complex sum = term;
    for (int k = 1; k < steps; ++k) {
      term *= h * (j_len - k) / static_cast<double>(k + 1);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  Complex power = 1.0;
  Complex base = a;
  for (unsigned e = static_cast<unsigned>(steps); e != 0; e >>= 1) {
    if (e & 1u) power *= base;
    base *= base;
  }
  return (1.0 - power) / (1.0 - a);
}

// D_g(w) for every group and bin, indexed like the params.
inline std::vector<Complex> filter_response(const SpectralParams& params) {
  params.validate();
  std::vector<Complex> d(params.delta.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Complex a = transition(params.delta[i], params.theta[i]);
    d[i] = params.c[i] * params.b[i] * geometric_gain(a, params.steps);
  }
  return d;
}

namespace detail {

inline void require_grouping(const HalfSpectrum& x, std::size_t groups, std::size_t bins,
                             const char* op) {
  if (groups == 0 || x.data.channels() % groups != 0) {
    throw DimensionError(std::string(op) + ": " + std::to_string(groups) +
                         " groups do not divide " + std::to_string(x.data.channels()) +
                         " channels");
  }
  if (x.bins() != bins) {
    throw DimensionError(std::string(op) + ": spectrum has " + std::to_string(x.bins()) +
                         " bins, parameters expect " + std::to_string(bins));
  }
}

}  // namespace detail

inline HalfSpectrum diagonal_filter(const HalfSpectrum& x, const SpectralParams& params) {
  if (x.full_width != params.width || x.data.height() != params.height) {
    throw DimensionError("diagonal_filter: spectrum grid does not match parameter grid");
  }
  detail::require_grouping(x, params.groups, params.bins(), "diagonal_filter");
  const std::vector<Complex> d = filter_response(params);
  const std::size_t bins = params.bins();
  const std::size_t per_group = x.data.channels() / params.groups;

  HalfSpectrum out = x;
  for (std::size_t b = 0; b < x.data.batch(); ++b) {
    for (std::size_t c = 0; c < x.data.channels(); ++c) {
      const Complex* dg = d.data() + (c / per_group) * bins;
      Complex* plane = out.data.plane(b, c);
      for (std::size_t w = 0; w < bins; ++w) plane[w] *= dg[w];
    }
  }
  return out;
}

// Projection/broadcast increment; never forms an L x L operator.
inline HalfSpectrum lowrank_couple(const HalfSpectrum& x, const LowRankCoupling& coupling) {
  coupling.validate();
  detail::require_grouping(x, coupling.groups, coupling.bins, "lowrank_couple");
  HalfSpectrum out{ComplexTensor(x.data.shape()), x.full_width};
  if (coupling.rank == 0 || coupling.warmup == 0.0) return out;

  const std::size_t bins = coupling.bins;
  const std::size_t per_group = x.data.channels() / coupling.groups;
  for (std::size_t b = 0; b < x.data.batch(); ++b) {
    for (std::size_t c = 0; c < x.data.channels(); ++c) {
      const std::size_t g = c / per_group;
      const double scale = coupling.warmup * coupling.alpha[g];
      const Complex* src = x.data.plane(b, c);
      Complex* dst = out.data.plane(b, c);
      for (std::size_t r = 0; r < coupling.rank; ++r) {
        const Complex* u = coupling.u.data() + (g * coupling.rank + r) * bins;
        const Complex* v = coupling.v.data() + (g * coupling.rank + r) * bins;
        Complex proj = 0.0;
        for (std::size_t w = 0; w < bins; ++w) proj += std::conj(v[w]) * src[w];
        proj *= scale;
        for (std::size_t w = 0; w < bins; ++w) dst[w] += u[w] * proj;
      }
    }
  }
  return out;
}

// Diagonal filter plus low-rank coupling.
inline HalfSpectrum spectral_mix(const HalfSpectrum& x, const SpectralParams& params,
                                 const LowRankCoupling& coupling) {
  HalfSpectrum y = diagonal_filter(x, params);
  const HalfSpectrum inc = lowrank_couple(x, coupling);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data.data()[i] += inc.data.data()[i];
  return y;
}

// IFFT(Pi_H(Y)) gated element-wise by SiLU(gate).
inline RealTensor hermitian_project_and_invert(const HalfSpectrum& y, const RealTensor& gate) {
  const std::array<std::size_t, 4> expected{y.data.batch(), y.data.channels(), y.data.height(),
                                            y.full_width};
  if (gate.shape() != expected) {
    throw DimensionError("hermitian_project_and_invert: gate shape " + shape_string(gate.shape()) +
                         " != output shape " + shape_string(expected));
  }
  RealTensor out = inverse_rfft2(hermitian_project(y));
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= silu(gate.data()[i]);
  return out;
}

}  // namespace qcs
