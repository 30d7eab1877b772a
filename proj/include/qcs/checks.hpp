#pragma once

// Self-check suites behind `qcs gradcheck` and `qcs ssmcheck`. Each check
// compares the production path against a slow, independently written
// reference and reports the worst mismatch seen.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qcs/likelihood.hpp"
#include "qcs/quantizer.hpp"
#include "qcs/spectral.hpp"
#include "qcs/tensor.hpp"

namespace qcs::checks {

struct CheckReport {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t trials = 0;
  std::size_t non_finite = 0;

  bool passed() const { return non_finite == 0 && max_error <= tolerance; }
};

namespace detail {

inline double relative(double err, double scale) { return scale > 0.0 ? err / scale : err; }

inline void record(CheckReport& r, double err) {
  ++r.trials;
  if (!std::isfinite(err)) {
    ++r.non_finite;
  } else {
    r.max_error = std::max(r.max_error, err);
  }
}

inline Complex random_complex(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double re = n(rng);
  return {re, n(rng)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Likelihood gradient vs central differences

struct GradcheckOptions {
  std::vector<int> bits{1, 2, 3};
  double delta = 0.5;
  std::size_t trials = 10000;  // per bit depth
  double eps_min = 1e-3;
  double eps_max = 10.0;
  double max_ratio = 40.0;  // |z| / eps
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
};

// Draws z, eps (log-uniform) and a random cell; half of the z draws are
// uniform in |z|/eps <= max_ratio, the other half land near the cell. FD step
// is 1e-6 eps; mismatch is |analytic - FD| / max(1, |analytic|).
inline CheckReport gradcheck(const GradcheckOptions& o) {
  if (!(o.eps_min > 0.0) || !(o.eps_max >= o.eps_min)) {
    throw ParameterError("gradcheck: need 0 < eps_min <= eps_max");
  }
  CheckReport report{"likelihood gradient vs central differences", 0.0, o.tolerance, 0, 0};
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(o.eps_min);
  const double log_hi = std::log(o.eps_max);

  for (int bits : o.bits) {
    const QuantizerSpec spec(bits, o.delta);
    for (std::size_t t = 0; t < o.trials; ++t) {
      const double eps = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
      const auto idx = static_cast<std::uint16_t>(
          std::min<double>(std::floor(unit(rng) * spec.levels()), spec.levels() - 1));
      const IntervalBounds cell = interval_of(CodewordIndex{idx}, spec);
      const double limit = o.max_ratio * eps;
      double z;
      if (t % 2 == 0) {
        z = limit * (2.0 * unit(rng) - 1.0);
      } else {
        const double lo = std::isfinite(cell.lower) ? cell.lower : cell.upper - spec.step();
        const double hi = std::isfinite(cell.upper) ? cell.upper : cell.lower + spec.step();
        const double span = hi - lo;
        z = std::clamp(lo - span + 3.0 * span * unit(rng), -limit, limit);
      }
      const double h = 1e-6 * eps;
      const double analytic = grad_element(z, cell, eps);
      const double fd = (log_likelihood_element(z + h, cell, eps) -
                         log_likelihood_element(z - h, cell, eps)) /
                        (2.0 * h);
      const double value = log_likelihood_element(z, cell, eps);
      if (!std::isfinite(analytic) || !std::isfinite(value)) {
        detail::record(report, std::numeric_limits<double>::infinity());
        continue;
      }
      detail::record(report, std::fabs(analytic - fd) / std::max(1.0, std::fabs(analytic)));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Spectral references

// Runs s_{j+1} = A s_j + B x from s_0 = 0 for J steps and reads out C s_J, with
// x = 1; A is formed directly from (delta, theta) with the same clamp.
inline Complex recurrence_oracle(double delta, double theta, Complex b, Complex c, int steps) {
  const double angle = std::clamp(theta, -kThetaLimit, kThetaLimit);
  const Complex a = std::exp(-delta) * Complex(std::cos(angle), std::sin(angle));
  Complex s = 0.0;
  for (int j = 0; j < steps; ++j) s = a * s + b;
  return c * s;
}

// Full H x W spectrum of a half spectrum, completing the missing columns by
// X(h, w) = conj X(-h, -w).
inline std::vector<Complex> full_spectrum(const Complex* half, std::size_t h_len, std::size_t w_len) {
  const std::size_t wf = half_width(w_len);
  std::vector<Complex> full(h_len * w_len);
  for (std::size_t h = 0; h < h_len; ++h) {
    for (std::size_t w = 0; w < w_len; ++w) {
      full[h * w_len + w] = w < wf ? half[h * wf + w]
                                   : std::conj(half[((h_len - h) % h_len) * wf + (w_len - w)]);
    }
  }
  return full;
}

// Direct O((HW)^2) inverse DFT with 1/(HW) scaling.
inline std::vector<Complex> naive_idft2(const std::vector<Complex>& spec, std::size_t h_len,
                                        std::size_t w_len) {
  std::vector<Complex> out(h_len * w_len);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t m = 0; m < h_len; ++m) {
    for (std::size_t n = 0; n < w_len; ++n) {
      Complex acc = 0.0;
      for (std::size_t h = 0; h < h_len; ++h) {
        for (std::size_t w = 0; w < w_len; ++w) {
          const double phase = two_pi * (static_cast<double>((h * m) % h_len) / h_len +
                                         static_cast<double>((w * n) % w_len) / w_len);
          acc += spec[h * w_len + w] * Complex(std::cos(phase), std::sin(phase));
        }
      }
      out[m * w_len + n] = acc / static_cast<double>(h_len * w_len);
    }
  }
  return out;
}

// Direct forward DFT of a real plane, half spectrum only.
inline std::vector<Complex> naive_rdft2(const double* x, std::size_t h_len, std::size_t w_len) {
  const std::size_t wf = half_width(w_len);
  std::vector<Complex> out(h_len * wf);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t h = 0; h < h_len; ++h) {
    for (std::size_t w = 0; w < wf; ++w) {
      Complex acc = 0.0;
      for (std::size_t m = 0; m < h_len; ++m) {
        for (std::size_t n = 0; n < w_len; ++n) {
          const double phase = -two_pi * (static_cast<double>((h * m) % h_len) / h_len +
                                          static_cast<double>((w * n) % w_len) / w_len);
          acc += x[m * w_len + n] * Complex(std::cos(phase), std::sin(phase));
        }
      }
      out[h * wf + w] = acc;
    }
  }
  return out;
}

// Dense (Diag(D) + warmup * alpha * sum_r u_r v_r^H) x for one group.
inline std::vector<Complex> dense_lowrank_oracle(const std::vector<Complex>& d,
                                                 const std::vector<Complex>& u,
                                                 const std::vector<Complex>& v, std::size_t rank,
                                                 double scale, const std::vector<Complex>& x) {
  const std::size_t n = x.size();
  std::vector<Complex> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = d[i];
  for (std::size_t r = 0; r < rank; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) m[i * n + j] += scale * u[r * n + i] * std::conj(v[r * n + j]);
    }
  }
  std::vector<Complex> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i] += m[i * n + j] * x[j];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Spectral mixer suites

struct SsmcheckOptions {
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t rank = 3;
  std::vector<int> steps{1, 2, 7, 64};
  std::size_t trials = 100;
  std::uint64_t seed = 0;
};

inline SpectralParams random_spectral_params(std::size_t height, std::size_t width, int steps,
                                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SpectralParams p;
  p.height = height;
  p.width = width;
  p.steps = steps;
  const std::size_t n = p.bins();
  for (std::size_t i = 0; i < n; ++i) {
    p.delta.push_back(2.0 * unit(rng));
    p.theta.push_back(std::numbers::pi * (2.0 * unit(rng) - 1.0));
    p.b.push_back(detail::random_complex(rng));
    p.c.push_back(detail::random_complex(rng));
  }
  return p;
}

// Closed-form gain against the J-step recurrence. Besides generic draws every
// trial also covers A within 1e-7 of 1 and A = 1 exactly.
inline CheckReport check_closed_form(const SsmcheckOptions& o) {
  CheckReport report{"closed-form filter vs J-step recurrence", 0.0, 1e-10, 0, 0};
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int steps : o.steps) {
    for (std::size_t t = 0; t < o.trials; ++t) {
      SpectralParams p = random_spectral_params(o.height, o.width, steps, rng);
      // Limit cases: |1 - A| below 1e-7, then A = 1.
      p.delta[0] = 5e-8 * unit(rng);
      p.theta[0] = 5e-8 * (2.0 * unit(rng) - 1.0);
      p.delta[1] = 0.0;
      p.theta[1] = 0.0;
      p.b[1] = 1.0;
      p.c[1] = 1.0;
      const std::vector<Complex> d = filter_response(p);
      if (d[1] != Complex(static_cast<double>(steps), 0.0)) {
        detail::record(report, std::numeric_limits<double>::infinity());
      }
      for (std::size_t i = 0; i < d.size(); ++i) {
        const Complex ref = recurrence_oracle(p.delta[i], p.theta[i], p.b[i], p.c[i], steps);
        detail::record(report, detail::relative(std::abs(d[i] - ref), std::abs(ref)));
      }
    }
  }
  return report;
}

// Hermitian-projected inverse against a direct complex IDFT of the completed
// spectrum: the IDFT's imaginary part must vanish and its real part must
// equal inverse_rfft2. Both residues are relative to the output norm.
inline CheckReport check_hermitian_realness(const SsmcheckOptions& o) {
  CheckReport report{"hermitian inverse realness vs complex IDFT", 0.0, 1e-10, 0, 0};
  std::mt19937_64 rng(o.seed + 1);
  for (std::size_t t = 0; t < o.trials; ++t) {
    HalfSpectrum y{ComplexTensor(1, 1, o.height, half_width(o.width)), o.width};
    for (auto& z : y.data.data()) z = detail::random_complex(rng);
    const HalfSpectrum proj = hermitian_project(y);
    const RealTensor fast = inverse_rfft2(proj);
    const auto ref = naive_idft2(full_spectrum(proj.data.plane(0, 0), o.height, o.width), o.height,
                                 o.width);
    double norm = 0.0, imag = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      norm += std::norm(ref[i]);
      imag += ref[i].imag() * ref[i].imag();
      diff += (ref[i].real() - fast.data()[i]) * (ref[i].real() - fast.data()[i]);
    }
    norm = std::sqrt(norm);
    detail::record(report, detail::relative(std::max(std::sqrt(imag), std::sqrt(diff)), norm));
  }
  return report;
}

inline RealTensor circular_shift(const RealTensor& x, std::size_t dh, std::size_t dw) {
  RealTensor out(x.shape());
  const std::size_t hh = x.height();
  const std::size_t ww = x.width();
  for (std::size_t b = 0; b < x.batch(); ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      for (std::size_t h = 0; h < hh; ++h) {
        for (std::size_t w = 0; w < ww; ++w) out(b, c, (h + dh) % hh, (w + dw) % ww) = x(b, c, h, w);
      }
    }
  }
  return out;
}

inline RealTensor diagonal_operator(const RealTensor& x, const SpectralParams& p) {
  return inverse_rfft2(hermitian_project(diagonal_filter(forward_rfft2(x), p)));
}

// The diagonal-only mixer commutes with circular shifts, checked on the
// requested grid and on 8x8 and 16x16.
inline CheckReport check_shift_equivariance(const SsmcheckOptions& o) {
  CheckReport report{"diagonal mixer shift equivariance", 0.0, 1e-8, 0, 0};
  std::mt19937_64 rng(o.seed + 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> grids{{8, 8}, {16, 16}};
  if (std::find(grids.begin(), grids.end(), std::pair{o.height, o.width}) == grids.end()) {
    grids.emplace_back(o.height, o.width);
  }
  for (auto [hh, ww] : grids) {
    for (int steps : o.steps) {
      for (std::size_t t = 0; t < o.trials / 4 + 1; ++t) {
        const SpectralParams p = random_spectral_params(hh, ww, steps, rng);
        RealTensor x(1, 2, hh, ww);
        for (auto& v : x.data()) v = normal(rng);
        const std::size_t dh = rng() % hh;
        const std::size_t dw = rng() % ww;
        const RealTensor a = circular_shift(diagonal_operator(x, p), dh, dw);
        const RealTensor b = diagonal_operator(circular_shift(x, dh, dw), p);
        double diff = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          diff += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
          norm += a.data()[i] * a.data()[i];
        }
        detail::record(report, detail::relative(std::sqrt(diff), std::sqrt(norm)));
      }
    }
  }
  return report;
}

// Projection/broadcast against the dense L x L operator, ranks {1, R}.
inline CheckReport check_lowrank(const SsmcheckOptions& o) {
  CheckReport report{"low-rank coupling vs dense oracle", 0.0, 1e-10, 0, 0};
  std::mt19937_64 rng(o.seed + 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> ranks{1};
  if (o.rank != 1) ranks.push_back(o.rank);
  for (std::size_t rank : ranks) {
    for (int steps : o.steps) {
      for (std::size_t t = 0; t < o.trials / 4 + 1; ++t) {
        const std::size_t groups = 2;
        SpectralParams p;
        p.groups = groups;
        p.height = o.height;
        p.width = o.width;
        p.steps = steps;
        LowRankCoupling k;
        k.groups = groups;
        k.rank = rank;
        k.bins = p.bins();
        k.warmup = unit(rng);
        for (std::size_t g = 0; g < groups; ++g) {
          const SpectralParams one = random_spectral_params(o.height, o.width, steps, rng);
          p.delta.insert(p.delta.end(), one.delta.begin(), one.delta.end());
          p.theta.insert(p.theta.end(), one.theta.begin(), one.theta.end());
          p.b.insert(p.b.end(), one.b.begin(), one.b.end());
          p.c.insert(p.c.end(), one.c.begin(), one.c.end());
          k.alpha.push_back(2.0 * unit(rng) - 1.0);
        }
        for (std::size_t i = 0; i < groups * rank * k.bins; ++i) {
          k.u.push_back(detail::random_complex(rng));
          k.v.push_back(detail::random_complex(rng));
        }
        HalfSpectrum x{ComplexTensor(1, 2 * groups, o.height, half_width(o.width)), o.width};
        for (auto& z : x.data.data()) z = detail::random_complex(rng);

        const HalfSpectrum y = spectral_mix(x, p, k);
        const std::vector<Complex> d = filter_response(p);
        const std::size_t bins = k.bins;
        for (std::size_t c = 0; c < x.data.channels(); ++c) {
          const std::size_t g = c / 2;
          const std::vector<Complex> dg(d.begin() + g * bins, d.begin() + (g + 1) * bins);
          const std::vector<Complex> ug(k.u.begin() + g * rank * bins,
                                        k.u.begin() + (g + 1) * rank * bins);
          const std::vector<Complex> vg(k.v.begin() + g * rank * bins,
                                        k.v.begin() + (g + 1) * rank * bins);
          const std::vector<Complex> xc(x.data.plane(0, c), x.data.plane(0, c) + bins);
          const auto ref = dense_lowrank_oracle(dg, ug, vg, rank, k.warmup * k.alpha[g], xc);
          double diff = 0.0, norm = 0.0;
          for (std::size_t w = 0; w < bins; ++w) {
            diff += std::norm(ref[w] - y.data.plane(0, c)[w]);
            norm += std::norm(ref[w]);
          }
          detail::record(report, detail::relative(std::sqrt(diff), std::sqrt(norm)));
        }
      }
    }
  }
  return report;
}

inline std::vector<CheckReport> ssmcheck(const SsmcheckOptions& o) {
  if (o.height == 0 || o.width == 0) throw ParameterError("ssmcheck: grid must be positive");
  if (o.steps.empty()) throw ParameterError("ssmcheck: need at least one J");
  for (int j : o.steps) {
    if (j < 1) throw ParameterError("ssmcheck: J must be >= 1");
  }
  if (o.rank == 0) throw ParameterError("ssmcheck: rank must be >= 1");
  return {check_closed_form(o), check_hermitian_realness(o), check_shift_equivariance(o),
          check_lowrank(o)};
}

}  // namespace qcs::checks
