#pragma once

// Refinement operators applied after each likelihood projection. Signals are
// stored (H, W, channels) row-major with interleaved channels; plain 1D
// signals use the shape (1, N, 1).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <variant>

#include "qcs/dmb.hpp"
#include "qcs/error.hpp"
#include "qcs/sensing.hpp"

namespace qcs {

struct ImageShape {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }
  static ImageShape flat(std::size_t n) { return {1, n, 1}; }
  bool operator==(const ImageShape&) const = default;
};

struct IdentityRefine {};

// Orthonormal 2D DCT-II per channel, soft shrinkage by tau, inverse.
struct DctSoftThreshold {
  double tau = 0.0;
};

// ROF denoising min_u 0.5 |u - f|^2 + weight * TV(u) by Chambolle's dual
// projection iteration.
struct TvRefine {
  double weight = 0.0;
  int iterations = 0;
};

// One DMB forward pass. The signal's channels are zero-padded up to the
// block's channel count and the leading channels are read back.
struct DmbRefine {
  std::shared_ptr<const DMBParams> params;
};

using RefinementKind = std::variant<IdentityRefine, DctSoftThreshold, TvRefine, DmbRefine>;

namespace detail {

inline Eigen::MatrixXd dct_matrix(std::size_t n) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (std::size_t i = 0; i < n; ++i) {
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          s * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                       static_cast<double>(k) / (2.0 * nn));
    }
  }
  return m;
}

inline Eigen::MatrixXd channel_plane(const Vector& x, const ImageShape& s, std::size_t c) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(s.height), static_cast<Eigen::Index>(s.width));
  for (std::size_t h = 0; h < s.height; ++h) {
    for (std::size_t w = 0; w < s.width; ++w) {
      p(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w)) =
          x[static_cast<Eigen::Index>((h * s.width + w) * s.channels + c)];
    }
  }
  return p;
}

inline void store_plane(Vector& x, const ImageShape& s, std::size_t c, const Eigen::MatrixXd& p) {
  for (std::size_t h = 0; h < s.height; ++h) {
    for (std::size_t w = 0; w < s.width; ++w) {
      x[static_cast<Eigen::Index>((h * s.width + w) * s.channels + c)] =
          p(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
    }
  }
}

inline double soft(double v, double tau) {
  const double mag = std::fabs(v) - tau;
  return mag > 0.0 ? std::copysign(mag, v) : 0.0;
}

inline Eigen::MatrixXd tv_denoise(const Eigen::MatrixXd& f, double weight, int iterations) {
  if (weight == 0.0 || iterations == 0) return f;
  const Eigen::Index hh = f.rows();
  const Eigen::Index ww = f.cols();
  constexpr double kTau = 0.125;
  Eigen::MatrixXd px = Eigen::MatrixXd::Zero(hh, ww);
  Eigen::MatrixXd py = Eigen::MatrixXd::Zero(hh, ww);
  Eigen::MatrixXd div(hh, ww);

  auto divergence = [&] {
    for (Eigen::Index i = 0; i < hh; ++i) {
      for (Eigen::Index j = 0; j < ww; ++j) {
        double d = 0.0;
        if (i < hh - 1) d += px(i, j);
        if (i > 0) d -= px(i - 1, j);
        if (j < ww - 1) d += py(i, j);
        if (j > 0) d -= py(i, j - 1);
        div(i, j) = d;
      }
    }
  };

  for (int it = 0; it < iterations; ++it) {
    divergence();
    const Eigen::MatrixXd term = div - f / weight;
    for (Eigen::Index i = 0; i < hh; ++i) {
      for (Eigen::Index j = 0; j < ww; ++j) {
        const double gx = i < hh - 1 ? term(i + 1, j) - term(i, j) : 0.0;
        const double gy = j < ww - 1 ? term(i, j + 1) - term(i, j) : 0.0;
        const double denom = 1.0 + kTau * std::sqrt(gx * gx + gy * gy);
        px(i, j) = (px(i, j) + kTau * gx) / denom;
        py(i, j) = (py(i, j) + kTau * gy) / denom;
      }
    }
  }
  divergence();
  return f - weight * div;
}

}  // namespace detail

class Refinement {
 public:
  Refinement() = default;
  Refinement(RefinementKind kind, ImageShape shape) : kind_(std::move(kind)), shape_(shape) {
    validate();
  }

  const RefinementKind& kind() const { return kind_; }
  const ImageShape& shape() const { return shape_; }

  Vector apply(const Vector& x) const {
    if (std::holds_alternative<IdentityRefine>(kind_)) return x;
    detail::require_dims(static_cast<std::size_t>(x.size()) == shape_.size(),
                         "refinement: signal length " + std::to_string(x.size()) +
                             " != image size " + std::to_string(shape_.size()));
    if (const auto* dct = std::get_if<DctSoftThreshold>(&kind_)) return apply_dct(x, dct->tau);
    if (const auto* tv = std::get_if<TvRefine>(&kind_)) return apply_tv(x, *tv);
    return apply_dmb(x, *std::get<DmbRefine>(kind_).params);
  }

 private:
  void validate() const {
    if (const auto* dct = std::get_if<DctSoftThreshold>(&kind_)) {
      if (!(dct->tau >= 0.0)) throw ParameterError("dct refinement: tau must be >= 0");
    } else if (const auto* tv = std::get_if<TvRefine>(&kind_)) {
      if (!(tv->weight >= 0.0) || tv->iterations < 0) {
        throw ParameterError("tv refinement: weight and iterations must be >= 0");
      }
    } else if (const auto* dmb = std::get_if<DmbRefine>(&kind_)) {
      if (!dmb->params) throw ParameterError("dmb refinement: missing parameters");
      const DMBParams& p = *dmb->params;
      if (p.height != shape_.height || p.width != shape_.width || p.channels < shape_.channels) {
        throw ConsistencyError("dmb refinement: block grid (" + std::to_string(p.height) + "x" +
                               std::to_string(p.width) + ", C=" + std::to_string(p.channels) +
                               ") cannot host image shape (" + std::to_string(shape_.height) +
                               "x" + std::to_string(shape_.width) +
                               ", C=" + std::to_string(shape_.channels) + ")");
      }
    }
  }

  Vector apply_dct(const Vector& x, double tau) const {
    const Eigen::MatrixXd ch = detail::dct_matrix(shape_.height);
    const Eigen::MatrixXd cw = detail::dct_matrix(shape_.width);
    Vector out(x.size());
    for (std::size_t c = 0; c < shape_.channels; ++c) {
      Eigen::MatrixXd coef = ch * detail::channel_plane(x, shape_, c) * cw.transpose();
      coef = coef.unaryExpr([tau](double v) { return detail::soft(v, tau); });
      detail::store_plane(out, shape_, c, ch.transpose() * coef * cw);
    }
    return out;
  }

  Vector apply_tv(const Vector& x, const TvRefine& tv) const {
    Vector out(x.size());
    for (std::size_t c = 0; c < shape_.channels; ++c) {
      detail::store_plane(out, shape_, c,
                          detail::tv_denoise(detail::channel_plane(x, shape_, c), tv.weight,
                                             tv.iterations));
    }
    return out;
  }

  Vector apply_dmb(const Vector& x, const DMBParams& p) const {
    FeatureMap f(1, p.channels, shape_.height, shape_.width);
    for (std::size_t c = 0; c < shape_.channels; ++c) {
      const Eigen::MatrixXd plane = detail::channel_plane(x, shape_, c);
      for (std::size_t h = 0; h < shape_.height; ++h) {
        for (std::size_t w = 0; w < shape_.width; ++w) {
          f(0, c, h, w) = plane(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
        }
      }
    }
    const FeatureMap y = dmb_forward(f, p);
    Vector out(x.size());
    for (std::size_t c = 0; c < shape_.channels; ++c) {
      for (std::size_t h = 0; h < shape_.height; ++h) {
        for (std::size_t w = 0; w < shape_.width; ++w) {
          out[static_cast<Eigen::Index>((h * shape_.width + w) * shape_.channels + c)] = y(0, c, h, w);
        }
      }
    }
    return out;
  }

  RefinementKind kind_ = IdentityRefine{};
  ImageShape shape_;
};

}  // namespace qcs
