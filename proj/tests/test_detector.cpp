#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "voxelpipe/detector.hpp"
#include "voxelpipe/network.hpp"
#include "voxelpipe/reference.hpp"
#include "voxelpipe/rng.hpp"

using namespace voxelpipe;

namespace {

Tensor64 random_tensor(std::vector<std::int64_t> shape, std::uint64_t seed) {
  DetRng rng(seed);
  Tensor64 t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Scalar eval-mode batchnorm + relu, applied per channel of a C x spatial
// tensor. Used to compose convolution oracles into full layer oracles.
Tensor64 bn_relu_eval(const Tensor64& x, const BnParams<double>& bn) {
  Tensor64 y = x;
  const std::int64_t c_ext = x.shape[0];
  const std::int64_t plane = x.numel() / c_ext;
  for (std::int64_t c = 0; c < c_ext; ++c) {
    const double inv = 1.0 / std::sqrt(bn.running_var.data[c] + bn.eps);
    for (std::int64_t i = 0; i < plane; ++i) {
      double v = (x.data[c * plane + i] - bn.running_mean.data[c]) * inv;
      v = v * bn.gamma.data[c] + bn.beta.data[c];
      y.data[c * plane + i] = v > 0 ? v : 0;
    }
  }
  return y;
}

double max_abs_diff(const Tensor64& a, const Tensor64& b) {
  EXPECT_EQ(a.shape, b.shape);
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST(MiddleTest, DepthChainMetadata) {
  EXPECT_EQ(middle_depth_out(10), 2);
  // Full car-size chain on paper: depth 10 -> 5 -> 3 -> 2 at 400 x 352.
  EXPECT_EQ(conv_out_extent(400, 3, 1, 1), 400);
  EXPECT_EQ(conv_out_extent(352, 3, 1, 1), 352);
}

TEST(MiddleTest, ZeroInputZeroBiasGivesZeroPreBnActivations) {
  // The middle convolutions carry no bias term, so a zero input must produce
  // exactly zero pre-normalization activations.
  DetRng rng(1);
  Tensor64 w = random_tensor({4, 3, 3, 3, 3}, 2);
  Tensor64 x({3, 6, 5, 5});
  const Conv3dSpec spec{3, 3, 3, 2, 1, 1, 1, 1, 1};
  const Tensor64 y = conv3d(x, w, Tensor64{}, spec);
  for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(MiddleTest, ReducedGridMatchesConvolutionOracle) {
  DetRng rng(3);
  MiddleNet<double> net;
  net.init(6, {4, 4, 4}, rng);
  Tensor64 x = random_tensor({6, 10, 8, 8}, 4);
  const Tensor64 fast = net.forward(x, false);
  // Oracle composition: naive convolution, then scalar batchnorm and relu
  // with each layer's own parameters.
  Tensor64 cur = x;
  const Conv3dSpec specs[3] = {{3, 3, 3, 2, 1, 1, 1, 1, 1},
                               {3, 3, 3, 1, 1, 1, 0, 1, 1},
                               {3, 3, 3, 2, 1, 1, 1, 1, 1}};
  for (int i = 0; i < 3; ++i) {
    cur = bn_relu_eval(reference::conv3d_naive(cur, net.convs[i].w, specs[i]), net.convs[i].bn);
  }
  ASSERT_EQ(fast.shape, cur.shape);
  EXPECT_EQ(fast.shape[1], 2);
  EXPECT_LE(max_abs_diff(fast, cur), 1e-5);
}

TEST(BevReshapeTest, MergesDepthIntoChannels) {
  Tensor64 x({3, 2, 4, 4});
  for (std::int64_t i = 0; i < x.numel(); ++i) x.data[i] = static_cast<double>(i);
  Tensor64 bev = reshape_to_bev(Tensor64(x));
  ASSERT_EQ(bev.shape, (std::vector<std::int64_t>{6, 4, 4}));
  // Element (c, d, h, w) must land at merged channel c * depth + d.
  for (std::int64_t c = 0; c < 3; ++c) {
    for (std::int64_t d = 0; d < 2; ++d) {
      for (std::int64_t hw = 0; hw < 16; ++hw) {
        EXPECT_EQ(bev.data[(c * 2 + d) * 16 + hw], x.data[((c * 2 + d) * 16) + hw]);
      }
    }
  }
  const Tensor64 back = split_from_bev(std::move(bev), 2);
  ASSERT_EQ(back.shape, x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(back.data[i], x.data[i]);
}

TEST(BevReshapeTest, CarConfigChannelArithmetic) {
  // 64 channels x depth 2 merge into the 128-channel bird's eye view map.
  EXPECT_EQ(64 * middle_depth_out(10), 128);
}

TEST(RpnTest, CarGeometry) {
  // Head maps sit at half the input resolution: 400 x 352 -> 200 x 176.
  EXPECT_EQ(conv_out_extent(400, 3, 2, 1), 200);
  EXPECT_EQ(conv_out_extent(352, 3, 2, 1), 176);
}

TEST(RpnTest, ReducedForwardShapes) {
  DetRng rng(5);
  RpnPlan plan;
  plan.channels = {8, 8, 8};
  plan.q = {1, 1, 1};
  plan.lateral_channels = 8;
  Rpn<double> rpn;
  rpn.init(6, plan, rng);
  const Tensor64 bev = random_tensor({6, 16, 16}, 6);
  auto [score, reg] = rpn.forward(bev, false);
  EXPECT_EQ(score.shape, (std::vector<std::int64_t>{2, 8, 8}));
  EXPECT_EQ(reg.shape, (std::vector<std::int64_t>{14, 8, 8}));
}

TEST(RpnTest, PedestrianVariantKeepsHalfResolution) {
  DetRng rng(7);
  RpnPlan plan;
  plan.block1_stride = 1;
  plan.channels = {4, 4, 4};
  plan.q = {1, 1, 1};
  plan.lateral_channels = 4;
  Rpn<double> rpn;
  rpn.init(4, plan, rng);
  const Tensor64 bev = random_tensor({4, 200, 240}, 8);
  auto [score, reg] = rpn.forward(bev, false);
  EXPECT_EQ(score.shape, (std::vector<std::int64_t>{2, 100, 120}));
  EXPECT_EQ(reg.shape, (std::vector<std::int64_t>{14, 100, 120}));
}

TEST(RpnTest, SoftmaxModeDoublesScoreChannels) {
  DetRng rng(9);
  RpnPlan plan;
  plan.channels = {4, 4, 4};
  plan.q = {1, 1, 1};
  plan.lateral_channels = 4;
  plan.softmax_score = true;
  Rpn<double> rpn;
  rpn.init(4, plan, rng);
  const Tensor64 bev = random_tensor({4, 8, 8}, 10);
  auto [score, reg] = rpn.forward(bev, false);
  EXPECT_EQ(score.shape[0], 4);
  EXPECT_EQ(reg.shape[0], 14);
}

TEST(RpnTest, ReducedForwardMatchesOracleComposition) {
  DetRng rng(11);
  RpnPlan plan;
  plan.channels = {6, 6, 6};
  plan.q = {1, 1, 1};
  plan.lateral_channels = 6;
  Rpn<double> rpn;
  rpn.init(5, plan, rng);
  const Tensor64 bev = random_tensor({5, 16, 16}, 12);
  auto [score, reg] = rpn.forward(bev, false);

  // Oracle: naive convolutions composed with scalar batchnorm and relu,
  // walking the same block / lateral / concat / head topology.
  auto conv_layer = [](const Tensor64& x, const ConvBnRelu2d<double>& layer) {
    return bn_relu_eval(reference::conv2d_naive(x, layer.w, layer.spec), layer.bn);
  };
  std::array<Tensor64, 3> ups;
  Tensor64 cur = bev;
  for (int bi = 0; bi < 3; ++bi) {
    for (const auto& layer : rpn.blocks[bi]) {
      cur = conv_layer(cur, layer);
    }
    const Lateral<double>& lat = rpn.laterals[bi];
    if (lat.downsamples) {
      ups[bi] = conv_layer(cur, lat.conv);
    } else {
      ups[bi] =
          bn_relu_eval(reference::deconv2d_naive(cur, lat.deconv.w, lat.deconv.spec),
                       lat.deconv.bn);
    }
  }
  Tensor64 concat({18, ups[0].shape[1], ups[0].shape[2]});
  const std::int64_t plane = ups[0].shape[1] * ups[0].shape[2];
  for (int bi = 0; bi < 3; ++bi) {
    std::copy(ups[bi].data.begin(), ups[bi].data.end(), concat.data.begin() + bi * 6 * plane);
  }
  Tensor64 oracle_score = reference::conv2d_naive(concat, rpn.score_head.w, rpn.score_head.spec);
  Tensor64 oracle_reg = reference::conv2d_naive(concat, rpn.reg_head.w, rpn.reg_head.spec);
  for (std::int64_t c = 0; c < oracle_score.shape[0]; ++c) {
    for (std::int64_t i = 0; i < plane; ++i) {
      oracle_score.data[c * plane + i] += rpn.score_head.b.data[c];
    }
  }
  for (std::int64_t c = 0; c < oracle_reg.shape[0]; ++c) {
    for (std::int64_t i = 0; i < plane; ++i) {
      oracle_reg.data[c * plane + i] += rpn.reg_head.b.data[c];
    }
  }
  EXPECT_LE(max_abs_diff(score, oracle_score), 1e-5);
  EXPECT_LE(max_abs_diff(reg, oracle_reg), 1e-5);
}

TEST(NetworkSpecTest, ConfigKeysAreApplied) {
  const Config cfg = Config::from_string(
      "vfe_channels = 7,8,32\n"
      "middle_channels = 16,16,16\n"
      "rpn_channels = 32,32,64\n"
      "rpn_q = 1,2,2\n"
      "rpn_lateral_channels = 64\n"
      "rpn_block1_stride = 1\n"
      "score_mode = softmax\n"
      "score_bias_init = -2.0\n"
      "init_seed = 9\n");
  GridDims grid;
  grid.d = 10;
  grid.h = 16;
  grid.w = 16;
  const NetworkSpec spec = network_spec_from_config(cfg, grid);
  EXPECT_EQ(spec.vfe_channels, (std::vector<int>{7, 8, 32}));
  EXPECT_EQ(spec.middle_channels[2], 16);
  EXPECT_EQ(spec.rpn.channels[2], 64);
  EXPECT_EQ(spec.rpn.q[1], 2);
  EXPECT_EQ(spec.rpn.lateral_channels, 64);
  EXPECT_EQ(spec.rpn.block1_stride, 1);
  EXPECT_TRUE(spec.rpn.softmax_score);
  EXPECT_DOUBLE_EQ(spec.rpn.score_bias_init, -2.0);
  EXPECT_EQ(spec.init_seed, 9u);
}

TEST(NetworkSpecTest, InvalidValuesThrow) {
  GridDims grid;
  grid.d = 10;
  grid.h = 16;
  grid.w = 16;
  EXPECT_THROW(
      network_spec_from_config(Config::from_string("rpn_block1_stride = 3\n"), grid),
      ConfigError);
  EXPECT_THROW(network_spec_from_config(Config::from_string("score_mode = maxent\n"), grid),
               ConfigError);
  EXPECT_THROW(network_spec_from_config(Config::from_string("middle_channels = 1,2\n"), grid),
               ConfigError);
}

TEST(NetworkTest, ReducedEndToEndShapes) {
  NetworkSpec spec;
  spec.grid.d = 10;
  spec.grid.h = 16;
  spec.grid.w = 16;
  spec.vfe_channels = {7, 4, 8};
  spec.middle_channels = {4, 4, 4};
  spec.rpn.channels = {8, 8, 8};
  spec.rpn.q = {1, 1, 1};
  spec.rpn.lateral_channels = 8;
  Network<float> net;
  net.init(spec);

  VoxelBuffers buffers;
  buffers.num_voxels = 3;
  buffers.t_max = 4;
  buffers.dims = spec.grid;
  buffers.features = Tensor({3, 4, 7});
  DetRng rng(13);
  for (auto& v : buffers.features.data) v = static_cast<float>(rng.uniform(-1, 1));
  buffers.counts = {4, 2, 1};
  buffers.coords = {0, 0, 0, 3, 7, 5, 9, 15, 15};
  const auto out = net.forward(buffers, false);
  EXPECT_EQ(out.score.shape, (std::vector<std::int64_t>{2, 8, 8}));
  EXPECT_EQ(out.reg.shape, (std::vector<std::int64_t>{14, 8, 8}));
}
