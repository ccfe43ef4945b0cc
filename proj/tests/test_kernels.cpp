#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "voxelpipe/grad_check.hpp"
#include "voxelpipe/kernels.hpp"
#include "voxelpipe/reference.hpp"
#include "voxelpipe/rng.hpp"
#include "voxelpipe/tensor.hpp"

using namespace voxelpipe;

namespace {

Tensor64 random_tensor(std::vector<std::int64_t> shape, DetRng& rng, double bound = 1.0) {
  Tensor64 t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

double weighted_sum(const Tensor64& y, const Tensor64& r) {
  double s = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) s += y.data[i] * r.data[i];
  return s;
}

double max_abs_diff(const Tensor64& a, const Tensor64& b) {
  EXPECT_EQ(a.shape, b.shape);
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST(LinearTest, IdentityWeightsZeroBias) {
  Tensor64 x({2, 3});
  x.data = {1, 2, 3, 4, 5, 6};
  Tensor64 w({3, 3});
  for (int i = 0; i < 3; ++i) w.data[i * 3 + i] = 1.0;
  const Tensor64 y = linear(x, w, Tensor64{});
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(y.data[i], x.data[i]);
}

TEST(LinearTest, HandAffine) {
  Tensor64 x({1, 2});
  x.data = {1, 2};
  Tensor64 w({2, 2});
  w.data = {1, 0, 0, 1};
  Tensor64 b({2});
  b.data = {1, 1};
  const Tensor64 y = linear(x, w, b);
  EXPECT_DOUBLE_EQ(y.data[0], 2.0);
  EXPECT_DOUBLE_EQ(y.data[1], 3.0);
}

TEST(LinearTest, GradientsMatchCentralDifferences) {
  DetRng rng(1);
  Tensor64 x = random_tensor({3, 5}, rng);
  Tensor64 w = random_tensor({5, 4}, rng);
  Tensor64 b = random_tensor({4}, rng);
  const Tensor64 r = random_tensor({3, 4}, rng);
  auto loss = [&] { return weighted_sum(linear(x, w, b), r); };
  Tensor64 gx = zeros_like(x), gw = zeros_like(w), gb = zeros_like(b);
  linear_backward(x, w, r, &gx, &gw, &gb);
  x.grad = gx.data;
  w.grad = gw.data;
  b.grad = gb.data;
  const GradCheckResult res = check_gradients(loss, {{"x", &x}, {"w", &w}, {"b", &b}});
  EXPECT_LE(res.max_rel_err, 1e-4) << res.worst;
}

TEST(BatchNormTest, EvalModeCenteredConstantGivesZeros) {
  Tensor64 x({4, 3});
  for (auto& v : x.data) v = 5.0;
  BnParams<double> p = BnParams<double>::identity(3);
  for (auto& v : p.running_mean.data) v = 5.0;
  const Tensor64 y = batchnorm_rows(x, p, false, nullptr, nullptr);
  for (double v : y.data) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(BatchNormTest, TrainModeNormalizesPerChannel) {
  DetRng rng(2);
  Tensor64 x = random_tensor({64, 5}, rng, 3.0);  // var well above eps
  BnParams<double> p = BnParams<double>::identity(5);
  BnCache<double> cache;
  const Tensor64 y = batchnorm_rows(x, p, true, nullptr, &cache);
  for (int c = 0; c < 5; ++c) {
    double sum = 0, sumsq = 0;
    for (int i = 0; i < 64; ++i) {
      sum += y.data[i * 5 + c];
      sumsq += y.data[i * 5 + c] * y.data[i * 5 + c];
    }
    const double mean = sum / 64;
    const double var = sumsq / 64 - mean * mean;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(BatchNormTest, GradientsMatchCentralDifferences) {
  DetRng rng(3);
  Tensor64 x = random_tensor({6, 4}, rng, 2.0);
  BnParams<double> p = BnParams<double>::identity(4);
  for (auto& v : p.gamma.data) v = rng.uniform(0.5, 1.5);
  for (auto& v : p.beta.data) v = rng.uniform(-0.5, 0.5);
  const Tensor64 r = random_tensor({6, 4}, rng);
  auto loss = [&] {
    BnCache<double> c;
    return weighted_sum(batchnorm_rows(x, p, true, nullptr, &c), r);
  };
  BnCache<double> cache;
  batchnorm_rows(x, p, true, nullptr, &cache);
  Tensor64 gx = zeros_like(x);
  Tensor64 ggamma({4}), gbeta({4});
  batchnorm_rows_backward(r, p, cache, &gx, &ggamma, &gbeta);
  x.grad = gx.data;
  p.gamma.grad = ggamma.data;
  p.beta.grad = gbeta.data;
  const GradCheckResult res =
      check_gradients(loss, {{"x", &x}, {"gamma", &p.gamma}, {"beta", &p.beta}});
  EXPECT_LE(res.max_rel_err, 1e-4) << res.worst;
}

TEST(BatchNormTest, SpatialLayoutGradients) {
  DetRng rng(4);
  Tensor64 x = random_tensor({3, 4, 4}, rng, 2.0);
  BnParams<double> p = BnParams<double>::identity(3);
  const Tensor64 r = random_tensor({3, 4, 4}, rng);
  auto loss = [&] {
    BnCache<double> c;
    return weighted_sum(batchnorm_spatial(x, p, true, &c), r);
  };
  BnCache<double> cache;
  batchnorm_spatial(x, p, true, &cache);
  Tensor64 gx = zeros_like(x);
  Tensor64 ggamma({3}), gbeta({3});
  batchnorm_spatial_backward(r, p, cache, &gx, &ggamma, &gbeta);
  x.grad = gx.data;
  p.gamma.grad = ggamma.data;
  p.beta.grad = gbeta.data;
  const GradCheckResult res =
      check_gradients(loss, {{"x", &x}, {"gamma", &p.gamma}, {"beta", &p.beta}});
  EXPECT_LE(res.max_rel_err, 1e-4) << res.worst;
}

TEST(ReluTest, ClampsNegativesKeepsPositives) {
  Tensor64 x({3});
  x.data = {-1.0, 0.0, 2.0};
  const Tensor64 y = relu(x);
  EXPECT_DOUBLE_EQ(y.data[0], 0.0);
  EXPECT_DOUBLE_EQ(y.data[1], 0.0);
  EXPECT_DOUBLE_EQ(y.data[2], 2.0);
}

TEST(MaxPoolTest, InvariantToRowPermutation) {
  DetRng rng(5);
  Tensor64 x = random_tensor({1, 6, 4}, rng);
  Tensor64 shuffled = x;
  const int perm[6] = {3, 0, 5, 1, 4, 2};
  for (int t = 0; t < 6; ++t) {
    for (int c = 0; c < 4; ++c) {
      shuffled.data[perm[t] * 4 + c] = x.data[t * 4 + c];
    }
  }
  std::vector<std::int32_t> arg1, arg2;
  const Tensor64 a = maxpool_over_axis(x, 1, &arg1);
  const Tensor64 b = maxpool_over_axis(shuffled, 1, &arg2);
  for (std::int64_t i = 0; i < a.numel(); ++i) EXPECT_DOUBLE_EQ(a.data[i], b.data[i]);
}

TEST(ScalarLossTest, SmoothL1AtKnownPoints) {
  EXPECT_DOUBLE_EQ(smooth_l1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(smooth_l1(1.0), 0.5);
  EXPECT_DOUBLE_EQ(smooth_l1(-1.0), 0.5);
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(3.0), 2.5);  // |u| - 0.5 beyond the quadratic zone
  EXPECT_DOUBLE_EQ(smooth_l1_grad(0.5), 0.5);
  EXPECT_DOUBLE_EQ(smooth_l1_grad(3.0), 1.0);
  EXPECT_DOUBLE_EQ(smooth_l1_grad(-3.0), -1.0);
}

TEST(ScalarLossTest, BceWithLogitsAtKnownPoints) {
  EXPECT_NEAR(bce_with_logits(0.0, 1.0), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_with_logits(0.0, 0.0), std::log(2.0), 1e-12);
  // Large logits stay finite under the fused form.
  EXPECT_TRUE(std::isfinite(bce_with_logits(80.0, 0.0)));
  EXPECT_TRUE(std::isfinite(bce_with_logits(-80.0, 1.0)));
  EXPECT_NEAR(bce_with_logits_grad(0.0, 1.0), -0.5, 1e-12);
  EXPECT_NEAR(bce_with_logits_grad(0.0, 0.0), 0.5, 1e-12);
}

TEST(ScalarLossTest, BceGradientMatchesCentralDifference) {
  for (double logit : {-3.0, -0.7, 0.0, 1.3, 4.0}) {
    for (double target : {0.0, 1.0}) {
      const double h = 1e-6;
      const double numeric =
          (bce_with_logits(logit + h, target) - bce_with_logits(logit - h, target)) / (2 * h);
      EXPECT_NEAR(bce_with_logits_grad(logit, target), numeric, 1e-6);
    }
  }
}

TEST(SoftmaxTest, PairSumsToOneAndMatchesSigmoid) {
  Tensor64 logits({2, 3});  // axis 0 holds the (negative, positive) pair
  logits.data = {0.3, -0.7, 40.0, 2.0, 1.0, -40.0};
  const Tensor64 p = softmax2(logits);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(p.data[j] + p.data[3 + j], 1.0, 1e-12);
    // softmax over (a, b) equals sigmoid(b - a) on the positive slot
    const double a = logits.data[j], b = logits.data[3 + j];
    EXPECT_NEAR(p.data[3 + j], 1.0 / (1.0 + std::exp(a - b)), 1e-12);
  }
}

TEST(Conv2dTest, MatchesNaiveOracle) {
  DetRng rng(6);
  const Conv2dSpec specs[] = {{3, 3, 1, 1, 1, 1}, {3, 3, 2, 2, 1, 1}, {1, 1, 1, 1, 0, 0}};
  for (const auto& spec : specs) {
    Tensor64 x = random_tensor({3, 9, 7}, rng);
    Tensor64 w = random_tensor({4, 3, spec.kh, spec.kw}, rng);
    Tensor64 b = random_tensor({4}, rng);
    const Tensor64 fast = conv2d(x, w, b, spec);
    const Tensor64 slow = reference::conv2d_naive(x, w, spec);
    ASSERT_EQ(fast.shape, slow.shape);
    for (std::int64_t i = 0; i < fast.numel(); ++i) {
      const std::int64_t plane = fast.shape[1] * fast.shape[2];
      EXPECT_NEAR(fast.data[i], slow.data[i] + b.data[i / plane], 1e-9);
    }
  }
}

TEST(Conv3dTest, MatchesNaiveOracle) {
  DetRng rng(7);
  const Conv3dSpec spec{3, 3, 3, 2, 1, 1, 1, 1, 1};
  Tensor64 x = random_tensor({2, 6, 5, 5}, rng);
  Tensor64 w = random_tensor({3, 2, 3, 3, 3}, rng);
  const Tensor64 fast = conv3d(x, w, Tensor64{}, spec);
  const Tensor64 slow = reference::conv3d_naive(x, w, spec);
  EXPECT_LE(max_abs_diff(fast, slow), 1e-9);
}

TEST(Conv3dTest, UnitKernelIsPerVoxelLinear) {
  DetRng rng(8);
  Tensor64 x = random_tensor({3, 2, 4, 4}, rng);
  Tensor64 w = random_tensor({5, 3, 1, 1, 1}, rng);
  const Conv3dSpec spec{1, 1, 1, 1, 1, 1, 0, 0, 0};
  const Tensor64 y = conv3d(x, w, Tensor64{}, spec);
  const std::int64_t vol = 2 * 4 * 4;
  for (std::int64_t co = 0; co < 5; ++co) {
    for (std::int64_t v = 0; v < vol; ++v) {
      double expected = 0;
      for (std::int64_t ci = 0; ci < 3; ++ci) {
        expected += w.data[co * 3 + ci] * x.data[ci * vol + v];
      }
      EXPECT_NEAR(y.data[co * vol + v], expected, 1e-12);
    }
  }
}

TEST(Conv3dTest, MiddleDepthChain) {
  EXPECT_EQ(conv_out_extent(10, 3, 2, 1), 5);
  EXPECT_EQ(conv_out_extent(5, 3, 1, 0), 3);
  EXPECT_EQ(conv_out_extent(3, 3, 2, 1), 2);
}

TEST(Deconv2dTest, MatchesNaiveOracleAndExtent) {
  DetRng rng(9);
  const Conv2dSpec spec{4, 4, 2, 2, 1, 1};
  Tensor64 x = random_tensor({3, 5, 6}, rng);
  Tensor64 w = random_tensor({3, 2, 4, 4}, rng);
  const Tensor64 fast = deconv2d(x, w, Tensor64{}, spec);
  const Tensor64 slow = reference::deconv2d_naive(x, w, spec);
  EXPECT_EQ(fast.shape[1], deconv_out_extent(5, 4, 2, 1));
  EXPECT_EQ(fast.shape[2], deconv_out_extent(6, 4, 2, 1));
  EXPECT_LE(max_abs_diff(fast, slow), 1e-9);
}

TEST(Conv2dTest, GradientsMatchCentralDifferences) {
  DetRng rng(10);
  const Conv2dSpec spec{3, 3, 2, 2, 1, 1};
  Tensor64 x = random_tensor({2, 6, 6}, rng);
  Tensor64 w = random_tensor({3, 2, 3, 3}, rng);
  Tensor64 b = random_tensor({3}, rng);
  Tensor64 r;
  auto loss = [&] { return weighted_sum(conv2d(x, w, b, spec), r); };
  {
    const Tensor64 y = conv2d(x, w, b, spec);
    DetRng rng2(11);
    r = random_tensor(y.shape, rng2);
  }
  Tensor64 gx = zeros_like(x), gw = zeros_like(w), gb = zeros_like(b);
  conv2d_backward(x, w, r, spec, &gx, &gw, &gb);
  x.grad = gx.data;
  w.grad = gw.data;
  b.grad = gb.data;
  const GradCheckResult res = check_gradients(loss, {{"x", &x}, {"w", &w}, {"b", &b}});
  EXPECT_LE(res.max_rel_err, 1e-4) << res.worst;
}

TEST(Conv3dTest, GradientsMatchCentralDifferencesOn2x4x4x4) {
  DetRng rng(12);
  const Conv3dSpec spec{3, 3, 3, 2, 1, 1, 1, 1, 1};
  Tensor64 x = random_tensor({2, 4, 4, 4}, rng);
  Tensor64 w = random_tensor({2, 2, 3, 3, 3}, rng);
  Tensor64 b = random_tensor({2}, rng);
  Tensor64 r;
  auto loss = [&] { return weighted_sum(conv3d(x, w, b, spec), r); };
  {
    const Tensor64 y = conv3d(x, w, b, spec);
    DetRng rng2(13);
    r = random_tensor(y.shape, rng2);
  }
  Tensor64 gx = zeros_like(x), gw = zeros_like(w), gb = zeros_like(b);
  conv3d_backward(x, w, r, spec, &gx, &gw, &gb);
  x.grad = gx.data;
  w.grad = gw.data;
  b.grad = gb.data;
  const GradCheckResult res = check_gradients(loss, {{"x", &x}, {"w", &w}, {"b", &b}});
  EXPECT_LE(res.max_rel_err, 1e-4) << res.worst;
}

TEST(Deconv2dTest, GradientsMatchCentralDifferences) {
  DetRng rng(14);
  const Conv2dSpec spec{4, 4, 2, 2, 1, 1};
  Tensor64 x = random_tensor({2, 4, 4}, rng);
  Tensor64 w = random_tensor({2, 3, 4, 4}, rng);
  Tensor64 b = random_tensor({3}, rng);
  Tensor64 r;
  auto loss = [&] { return weighted_sum(deconv2d(x, w, b, spec), r); };
  {
    const Tensor64 y = deconv2d(x, w, b, spec);
    DetRng rng2(15);
    r = random_tensor(y.shape, rng2);
  }
  Tensor64 gx = zeros_like(x), gw = zeros_like(w), gb = zeros_like(b);
  deconv2d_backward(x, w, r, spec, &gx, &gw, &gb);
  x.grad = gx.data;
  w.grad = gw.data;
  b.grad = gb.data;
  const GradCheckResult res = check_gradients(loss, {{"x", &x}, {"w", &w}, {"b", &b}});
  EXPECT_LE(res.max_rel_err, 1e-4) << res.worst;
}

TEST(MaskedMaxTest, GradientsRouteToArgmaxRows) {
  DetRng rng(16);
  Tensor64 x = random_tensor({2, 4, 3}, rng);
  const std::vector<std::int32_t> counts = {3, 1};
  std::vector<std::int32_t> argmax;
  const Tensor64 y = masked_max_rows(x, counts, &argmax);
  DetRng rng2(17);
  const Tensor64 r = random_tensor(y.shape, rng2);
  auto loss = [&] {
    std::vector<std::int32_t> a;
    return weighted_sum(masked_max_rows(x, counts, &a), r);
  };
  Tensor64 gx = zeros_like(x);
  masked_max_rows_backward(r, argmax, 4, &gx);
  x.grad = gx.data;
  // Padding rows beyond the count must receive zero gradient.
  for (int t = 1; t < 4; ++t) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(gx.data[(1 * 4 + t) * 3 + c], 0.0);
    }
  }
  const GradCheckResult res = check_gradients(loss, {{"x", &x}});
  EXPECT_LE(res.max_rel_err, 1e-4) << res.worst;
}

TEST(GradCheckTest, QuadraticIsExactUpToRounding) {
  Tensor64 x({1});
  x.data = {3.0};
  x.grad = {6.0};  // analytic d(x^2)/dx at 3
  auto loss = [&] { return x.data[0] * x.data[0]; };
  const GradCheckResult res = check_gradients(loss, {{"x", &x}}, 1e-6);
  EXPECT_LE(res.max_abs_err, 1e-8);
}

TEST(GradCheckTest, ReluAwayFromKinkPasses) {
  Tensor64 x({2});
  x.data = {2.0, -2.0};
  x.grad = {1.0, 0.0};
  auto loss = [&] {
    double s = 0;
    for (double v : x.data) s += v > 0 ? v : 0.0;
    return s;
  };
  const GradCheckResult res = check_gradients(loss, {{"x", &x}}, 1e-6);
  EXPECT_LE(res.max_rel_err, 1e-6);
}

TEST(GradCheckTest, DetectsAWrongGradient) {
  Tensor64 x({1});
  x.data = {3.0};
  x.grad = {5.0};  // deliberately wrong; the harness must flag it
  auto loss = [&] { return x.data[0] * x.data[0]; };
  const GradCheckResult res = check_gradients(loss, {{"x", &x}}, 1e-6);
  EXPECT_FALSE(res.pass(1e-4));
  EXPECT_EQ(res.worst, "x[0]");
}
