#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "qcs/dmb.hpp"
#include "support.hpp"

namespace {

qcs::FeatureMap random_map(std::size_t b, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  qcs::FeatureMap x(b, c, h, w);
  for (auto& v : x.data()) v = n(rng);
  return x;
}

double max_abs_diff(const qcs::FeatureMap& a, const qcs::FeatureMap& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

// Straightforward re-implementations used as oracles.

qcs::FeatureMap ref_layer_norm(const qcs::FeatureMap& x, const qcs::LayerNormParams& p) {
  qcs::FeatureMap out(x.shape());
  const std::size_t ch = x.channels();
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t h = 0; h < x.height(); ++h)
      for (std::size_t w = 0; w < x.width(); ++w) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t c = 0; c < ch; ++c) s += x(b, c, h, w);
        const double mean = s / ch;
        for (std::size_t c = 0; c < ch; ++c) s2 += (x(b, c, h, w) - mean) * (x(b, c, h, w) - mean);
        const double sd = std::sqrt(s2 / ch + 1e-5);
        for (std::size_t c = 0; c < ch; ++c) out(b, c, h, w) = p.scale[c] * (x(b, c, h, w) - mean) / sd + p.shift[c];
      }
  return out;
}

// Same summation order as the documented scan, so equality is exact.
qcs::FeatureMap ref_scan(const qcs::FeatureMap& z, const qcs::SpatialSSMParams& p) {
  const std::size_t ch = z.channels(), s_dim = p.state_dim();
  qcs::FeatureMap y(z.shape());
  for (std::size_t b = 0; b < z.batch(); ++b) {
    std::vector<double> h(s_dim, 0.0);
    for (std::size_t r = 0; r < z.height(); ++r) {
      for (std::size_t col = 0; col < z.width(); ++col) {
        for (std::size_t c = 0; c < ch; ++c) {
          double acc = 0.0;
          for (std::size_t s = 0; s < s_dim; ++s) acc += p.c(c, s) * h[s];
          y(b, c, r, col) = acc + p.d_skip[c] * z(b, c, r, col);
        }
        std::vector<double> next(s_dim);
        for (std::size_t s = 0; s < s_dim; ++s) {
          double a = 0.0, bb = 0.0;
          for (std::size_t k = 0; k < s_dim; ++k) a += p.a(s, k) * h[k];
          for (std::size_t c = 0; c < ch; ++c) bb += p.b(s, c) * z(b, c, r, col);
          next[s] = a + bb;
        }
        h = next;
      }
    }
  }
  return y;
}

qcs::FeatureMap ref_ffb(const qcs::FeatureMap& x, const qcs::FeatureFusionParams& f) {
  const std::size_t ch = x.channels();
  const long hh = long(x.height()), ww = long(x.width());
  auto pw = [&](const qcs::FeatureMap& in, const qcs::RowMajorMatrix& k) {
    qcs::FeatureMap out(in.shape());
    for (std::size_t b = 0; b < in.batch(); ++b)
      for (std::size_t o = 0; o < ch; ++o)
        for (long h = 0; h < hh; ++h)
          for (long w = 0; w < ww; ++w) {
            double acc = 0.0;
            for (std::size_t c = 0; c < ch; ++c) acc += k(o, c) * in(b, c, h, w);
            out(b, o, h, w) = acc;
          }
    return out;
  };
  const auto t = pw(x, f.pointwise_in);
  qcs::FeatureMap g(x.shape());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (long h = 0; h < hh; ++h)
        for (long w = 0; w < ww; ++w) {
          double acc = 0.0;
          for (long i = 0; i < 3; ++i)
            for (long j = 0; j < 3; ++j) {
              const long sh = h + i - 1, sw = w + j - 1;
              if (sh >= 0 && sh < hh && sw >= 0 && sw < ww) acc += f.depthwise(c, i * 3 + j) * t(b, c, sh, sw);
            }
          g(b, c, h, w) = 0.5 * acc * std::erfc(-acc / std::sqrt(2.0));
        }
  return pw(g, f.pointwise_out);
}

qcs::FeatureMap ref_forward(const qcs::FeatureMap& x, const qcs::DMBParams& p) {
  const auto ln = ref_layer_norm(x, p.norm);
  auto spa = ref_scan(ln, p.spatial);
  for (std::size_t i = 0; i < spa.size(); ++i) {
    const double v = ln.data()[i];
    spa.data()[i] *= v / (1.0 + std::exp(-v));
  }
  const auto spe = qcs::spectral_branch(ln, p.spectral, p.coupling);
  qcs::FeatureMap y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = p.w1 * spa.data()[i] + p.w2 * spe.data()[i] + x.data()[i];
  const auto f = ref_ffb(y, p.ffb);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += f.data()[i];
  return y;
}

TEST(Activation, ReferenceValues) {
  EXPECT_TRUE(RelNear(qcs::silu(1.0), 0.7310585786300049, 1e-15));
  EXPECT_TRUE(RelNear(qcs::gelu(1.0), 0.8413447460685429, 1e-15));
  EXPECT_EQ(qcs::silu(0.0), 0.0);
  EXPECT_EQ(qcs::gelu(0.0), 0.0);
  EXPECT_TRUE(std::isfinite(qcs::silu(-800.0)));
  EXPECT_TRUE(RelNear(qcs::silu(-40.0), -40.0 * 4.248354255291589e-18, 1e-12));
}

TEST(LayerNorm, ConstantTokensMapToShift) {
  qcs::FeatureMap x(1, 3, 2, 2, 7.5);
  const qcs::LayerNormParams p{{2.0, 3.0, 4.0}, {0.1, -0.2, 0.3}};
  const auto y = qcs::layer_norm(x, p);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y.plane(0, c)[i], p.shift[c]);
}

TEST(LayerNorm, MatchesLoopOracle) {
  const auto x = random_map(2, 5, 3, 4, 1);
  const qcs::LayerNormParams p{{1.0, 0.5, 2.0, -1.0, 0.3}, {0.0, 1.0, -1.0, 0.2, 0.0}};
  EXPECT_LE(max_abs_diff(qcs::layer_norm(x, p), ref_layer_norm(x, p)), 1e-13);
  EXPECT_THROW(qcs::layer_norm(x, {{1.0}, {0.0}}), qcs::DimensionError);
}

qcs::SpatialSSMParams scalar_ssm(double a, double b, double c, double d) {
  qcs::SpatialSSMParams p;
  p.a = qcs::RowMajorMatrix::Constant(1, 1, a);
  p.b = qcs::RowMajorMatrix::Constant(1, 1, b);
  p.c = qcs::RowMajorMatrix::Constant(1, 1, c);
  p.d_skip = qcs::Vector::Constant(1, d);
  return p;
}

TEST(SpatialScan, ReadoutPrecedesStateUpdate) {
  qcs::FeatureMap z(1, 1, 1, 3);
  z(0, 0, 0, 0) = 1.0;
  const auto y = qcs::scan_outputs(z, scalar_ssm(0.5, 1.0, 1.0, 0.0));
  EXPECT_EQ(y(0, 0, 0, 0), 0.0);
  EXPECT_EQ(y(0, 0, 0, 1), 1.0);
  EXPECT_EQ(y(0, 0, 0, 2), 0.5);
}

TEST(SpatialScan, RowMajorTokenOrderAndSkip) {
  qcs::FeatureMap z(1, 1, 2, 2);
  z(0, 0, 0, 0) = 1.0;
  z(0, 0, 1, 0) = 2.0;
  const auto y = qcs::scan_outputs(z, scalar_ssm(0.5, 1.0, 1.0, 3.0));
  // tokens (1, 0, 2, 0): y = (3, 1, 0.5 + 6, 0.25 + 2)
  EXPECT_EQ(y(0, 0, 0, 0), 3.0);
  EXPECT_EQ(y(0, 0, 0, 1), 1.0);
  EXPECT_EQ(y(0, 0, 1, 0), 6.5);
  EXPECT_EQ(y(0, 0, 1, 1), 2.25);
}

TEST(SpatialScan, BitIdenticalToNaiveOracle) {
  const auto p = qcs::random_dmb_params({.channels = 4, .state_dim = 3, .height = 5, .width = 6}, 2);
  const auto z = random_map(2, 4, 5, 6, 3);
  const auto y = qcs::scan_outputs(z, p.spatial);
  const auto ref = ref_scan(z, p.spatial);
  for (std::size_t i = 0; i < y.size(); ++i) ASSERT_EQ(y.data()[i], ref.data()[i]) << i;
}

TEST(SpatialScan, StatesResetPerBatchItem) {
  const auto p = qcs::random_dmb_params({.channels = 2, .state_dim = 2, .height = 3, .width = 3}, 4);
  const auto z = random_map(2, 2, 3, 3, 5);
  qcs::FeatureMap second(1, 2, 3, 3);
  std::copy(z.plane(1, 0), z.plane(1, 0) + 18, second.data().begin());
  const auto y = qcs::scan_outputs(z, p.spatial);
  const auto y2 = qcs::scan_outputs(second, p.spatial);
  for (std::size_t i = 0; i < 18; ++i) EXPECT_EQ(y.plane(1, 0)[i], y2.data()[i]);
}

TEST(SpatialSSM, EnforceStabilityCapsSpectralRadius) {
  qcs::SpatialSSMParams p;
  p.a = qcs::RowMajorMatrix{{0.0, 2.0}, {2.0, 0.0}};
  p.b = qcs::RowMajorMatrix::Zero(2, 1);
  p.c = qcs::RowMajorMatrix::Zero(1, 2);
  p.d_skip = qcs::Vector::Zero(1);
  EXPECT_NEAR(p.spectral_radius(), 2.0, 1e-14);
  p.enforce_stability();
  EXPECT_NEAR(p.spectral_radius(), 1.0, 1e-14);
  EXPECT_NEAR(p.a(0, 1), 1.0, 1e-14);
  p.a *= 0.5;
  const qcs::RowMajorMatrix before = p.a;
  p.enforce_stability();
  EXPECT_EQ(p.a, before);
}

TEST(FeatureFusion, DepthwiseZeroPadding) {
  qcs::FeatureMap x(1, 1, 3, 3, 1.0);
  const qcs::RowMajorMatrix taps = qcs::RowMajorMatrix::Ones(1, 9);
  const auto y = qcs::depthwise_conv3x3(x, taps);
  EXPECT_EQ(y(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y(0, 0, 0, 1), 6.0);
  EXPECT_EQ(y(0, 0, 1, 1), 9.0);
  EXPECT_THROW(qcs::depthwise_conv3x3(x, qcs::RowMajorMatrix::Ones(1, 4)), qcs::DimensionError);
}

TEST(FeatureFusion, PointwiseMixesChannels) {
  const auto x = random_map(1, 2, 2, 2, 6);
  const qcs::RowMajorMatrix k{{1.0, 2.0}, {0.0, -1.0}, {0.5, 0.5}};
  const auto y = qcs::pointwise_conv(x, k);
  ASSERT_EQ(y.channels(), 3u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(y.plane(0, 0)[i], x.plane(0, 0)[i] + 2.0 * x.plane(0, 1)[i]);
    EXPECT_EQ(y.plane(0, 1)[i], -x.plane(0, 1)[i]);
  }
}

TEST(DmbForward, ResidualIdentityIsExact) {
  const qcs::DMBLayout layout{.channels = 4, .state_dim = 3, .groups = 2, .rank = 2, .steps = 3, .height = 8, .width = 8};
  const auto p = qcs::residual_identity_params(layout, 7);
  const auto x = random_map(2, 4, 8, 8, 8);
  const auto y = qcs::dmb_forward(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(y.data()[i], x.data()[i]);
}

TEST(DmbForward, PreservesShape) {
  const qcs::DMBLayout layout{.channels = 8, .state_dim = 4, .groups = 2, .rank = 3, .steps = 2, .height = 16, .width = 16};
  const auto p = qcs::random_dmb_params(layout, 9);
  const auto x = random_map(2, 8, 16, 16, 10);
  const auto y = qcs::dmb_forward(x, p);
  EXPECT_EQ(y.shape(), x.shape());
  for (double v : y.data()) ASSERT_TRUE(std::isfinite(v));
}

TEST(DmbForward, MatchesCompositionOracle) {
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {6, 7}}) {
    qcs::DMBLayout layout{.channels = 4, .state_dim = 3, .groups = 2, .rank = 2, .steps = 5, .height = h, .width = w};
    auto p = qcs::random_dmb_params(layout, 11);
    // Larger weights so every branch contributes visibly.
    p.w1 = 0.7;
    p.w2 = -1.3;
    p.ffb.pointwise_in *= 20.0;
    p.ffb.depthwise *= 20.0;
    p.ffb.pointwise_out *= 20.0;
    const auto x = random_map(2, 4, h, w, 12);
    const auto y = qcs::dmb_forward(x, p);
    const auto ref = ref_forward(x, p);
    EXPECT_LE(max_abs_diff(y, ref), 1e-12);
    EXPECT_GT(max_abs_diff(y, x), 1e-3);
  }
}

TEST(DmbForward, Deterministic) {
  const auto p = qcs::random_dmb_params({.channels = 4, .groups = 2, .rank = 1, .steps = 2}, 13);
  const auto x = random_map(1, 4, 8, 8, 14);
  const auto a = qcs::dmb_forward(x, p);
  const auto b = qcs::dmb_forward(x, p);
  EXPECT_EQ(a.data(), b.data());
  EXPECT_EQ(qcs::random_dmb_params({.channels = 4}, 15).spatial.a, qcs::random_dmb_params({.channels = 4}, 15).spatial.a);
}

TEST(DmbForward, ShapeMismatchIsDimensionError) {
  const auto p = qcs::random_dmb_params({.channels = 4}, 16);
  EXPECT_THROW(qcs::dmb_forward(random_map(1, 3, 8, 8, 1), p), qcs::DimensionError);
  EXPECT_THROW(qcs::dmb_forward(random_map(1, 4, 8, 7, 1), p), qcs::DimensionError);
}

TEST(DmbForward, RandomTransitionsAreStable) {
  const auto p = qcs::random_dmb_params({.channels = 4, .state_dim = 8, .groups = 4, .rank = 2, .steps = 64}, 17);
  EXPECT_LE(p.spatial.spectral_radius(), 1.0 + 1e-12);
  for (std::size_t i = 0; i < p.spectral.delta.size(); ++i) {
    EXPECT_LE(std::abs(qcs::transition(p.spectral.delta[i], p.spectral.theta[i])), 1.0);
  }
}

}  // namespace
