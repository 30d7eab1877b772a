#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "qcs/error.hpp"
#include "qcs/refine.hpp"
#include "qcs/sensing.hpp"

namespace qcs {

inline constexpr double kPsnrReportCap = 99.0;

struct MetricReport {
  double psnr = 0.0;  // capped at kPsnrReportCap
  double ssim = 0.0;
  double cosine = 0.0;
  double mse = 0.0;
};

inline double mse(const Vector& x, const Vector& ref) {
  detail::require_dims(x.size() == ref.size(), "mse: length mismatch");
  if (x.size() == 0) return 0.0;
  return (x - ref).squaredNorm() / static_cast<double>(x.size());
}

// +inf when x == ref.
inline double psnr(const Vector& x, const Vector& ref, double peak = 1.0) {
  if (!(peak > 0.0)) throw ParameterError("psnr: peak must be > 0");
  const double err = mse(x, ref);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / err);
}

inline double cosine_similarity(const Vector& x, const Vector& ref) {
  detail::require_dims(x.size() == ref.size(), "cosine_similarity: length mismatch");
  const double ref_max = ref.size() ? ref.cwiseAbs().maxCoeff() : 0.0;
  if (ref_max == 0.0) throw InputError("cosine_similarity: zero reference");
  const double x_max = x.cwiseAbs().maxCoeff();
  if (x_max == 0.0) return 0.0;
  // Scaled to unit max-norm against overflow; sqrt(xx * rr) rather than a
  // product of norms makes cosine(x, x) exactly 1.
  const Vector xs = x / x_max;
  const Vector rs = ref / ref_max;
  return std::clamp(xs.dot(rs) / std::sqrt(xs.squaredNorm() * rs.squaredNorm()), -1.0, 1.0);
}

namespace detail {

// Normalized 1D Gaussian taps of the given length centred on (len - 1) / 2.
inline std::vector<double> gaussian_taps(std::size_t len, double sigma) {
  std::vector<double> taps(len);
  const double centre = 0.5 * static_cast<double>(len - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = static_cast<double>(i) - centre;
    taps[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

}  // namespace detail

// Mean single-scale SSIM over all fully-contained 11x11 Gaussian windows
// (sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1), averaged over channels.
// A dimension smaller than 11 shrinks the window to that dimension.
inline double ssim(const Vector& x, const Vector& ref, const ImageShape& shape) {
  detail::require_dims(x.size() == ref.size() && static_cast<std::size_t>(x.size()) == shape.size(),
                       "ssim: image sizes differ from shape");
  constexpr std::size_t kWindow = 11;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const std::size_t wh = std::min(kWindow, shape.height);
  const std::size_t ww = std::min(kWindow, shape.width);
  const auto gh = detail::gaussian_taps(wh, 1.5);
  const auto gw = detail::gaussian_taps(ww, 1.5);
  auto at = [&](const Vector& v, std::size_t h, std::size_t w, std::size_t c) {
    return v[static_cast<Eigen::Index>((h * shape.width + w) * shape.channels + c)];
  };

  double total = 0.0;
  for (std::size_t c = 0; c < shape.channels; ++c) {
    double channel_sum = 0.0;
    std::size_t windows = 0;
    for (std::size_t h0 = 0; h0 + wh <= shape.height; ++h0) {
      for (std::size_t w0 = 0; w0 + ww <= shape.width; ++w0) {
        double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < wh; ++i) {
          for (std::size_t j = 0; j < ww; ++j) {
            const double g = gh[i] * gw[j];
            const double a = at(x, h0 + i, w0 + j, c);
            const double b = at(ref, h0 + i, w0 + j, c);
            mx += g * a;
            my += g * b;
            sxx += g * a * a;
            syy += g * b * b;
            sxy += g * (a * b);
          }
        }
        const double vx = sxx - mx * mx;
        const double vy = syy - my * my;
        const double mxy = mx * my;  // keep every term symmetric in (x, ref)
        const double cov = sxy - mxy;
        channel_sum += ((2.0 * mxy + c1) * (2.0 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    }
    total += channel_sum / static_cast<double>(windows);
  }
  return total / static_cast<double>(shape.channels);
}

inline MetricReport evaluate(const Vector& x, const Vector& ref, const ImageShape& shape,
                             double peak = 1.0) {
  MetricReport r;
  r.mse = mse(x, ref);
  r.psnr = std::min(psnr(x, ref, peak), kPsnrReportCap);
  r.ssim = ssim(x, ref, shape);
  r.cosine = cosine_similarity(x, ref);
  return r;
}

}  // namespace qcs
