#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "voxelpipe/layers.hpp"

// Convolutional middle layers over the dense voxel grid, the depth-to-channel
// reshape, and the region proposal network with its two 1x1 heads.

namespace voxelpipe {

// Merges the channel and depth axes: (C, D, H, W) -> (C*D, H, W) with element
// (c, d, h, w) landing at merged channel c*D + d. Row-major layout makes this
// a pure relabeling of the same buffer.
template <typename S>
TensorT<S> reshape_to_bev(TensorT<S> x) {
  if (x.rank() != 4) {
    throw InvariantError("reshape_to_bev expects a C x D x H x W tensor");
  }
  TensorT<S> out;
  out.shape = {x.shape[0] * x.shape[1], x.shape[2], x.shape[3]};
  out.data = std::move(x.data);
  return out;
}

template <typename S>
TensorT<S> split_from_bev(TensorT<S> x, std::int64_t depth) {
  if (x.rank() != 3 || x.shape[0] % depth != 0) {
    throw InvariantError("split_from_bev: channel extent not divisible by depth");
  }
  TensorT<S> out;
  out.shape = {x.shape[0] / depth, depth, x.shape[1], x.shape[2]};
  out.data = std::move(x.data);
  return out;
}

template <typename S>
struct MiddleNet {
  std::array<ConvBnRelu3d<S>, 3> convs;

  void init(int c_in, const std::array<int, 3>& channels, DetRng& rng) {
    const Conv3dSpec spec1{3, 3, 3, 2, 1, 1, 1, 1, 1};
    const Conv3dSpec spec2{3, 3, 3, 1, 1, 1, 0, 1, 1};
    const Conv3dSpec spec3{3, 3, 3, 2, 1, 1, 1, 1, 1};
    convs[0].init(c_in, channels[0], spec1, rng);
    convs[1].init(channels[0], channels[1], spec2, rng);
    convs[2].init(channels[1], channels[2], spec3, rng);
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) {
    TensorT<S> cur = convs[0].forward(x, train);
    cur = convs[1].forward(cur, train);
    return convs[2].forward(cur, train);
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> g = convs[2].backward(grad_out);
    g = convs[1].backward(g);
    return convs[0].backward(g);
  }

  void collect(std::vector<NamedParam<S>>& out) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect("middle" + std::to_string(i + 1), out);
    }
  }
};

// Maps one block's output onto the shared H/2 x W/2 map. Factor is the block
// extent divided by the target extent: 1, 2, 4 use transposed convolutions
// (k 3/4/8, s 1/2/4, p 1/1/2); the stride-1 block-1 variant sits at 2x the
// target, so its lateral is a stride-2 convolution instead.
template <typename S>
struct Lateral {
  bool downsamples = false;
  ConvBnRelu2d<S> conv;
  DeconvBnRelu2d<S> deconv;

  void init(std::int64_t c_in, std::int64_t c_out, int up_factor, DetRng& rng) {
    switch (up_factor) {
      case -2:  // block extent is twice the target
        downsamples = true;
        conv.init(c_in, c_out, Conv2dSpec{3, 3, 2, 2, 1, 1}, rng);
        break;
      case 1:
        deconv.init(c_in, c_out, Conv2dSpec{3, 3, 1, 1, 1, 1}, rng);
        break;
      case 2:
        deconv.init(c_in, c_out, Conv2dSpec{4, 4, 2, 2, 1, 1}, rng);
        break;
      case 4:
        deconv.init(c_in, c_out, Conv2dSpec{8, 8, 4, 4, 2, 2}, rng);
        break;
      default:
        throw ConfigError("unsupported lateral resampling factor");
    }
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) {
    return downsamples ? conv.forward(x, train) : deconv.forward(x, train);
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    return downsamples ? conv.backward(grad_out) : deconv.backward(grad_out);
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    if (downsamples) {
      conv.collect(prefix, out);
    } else {
      deconv.collect(prefix, out);
    }
  }
};

struct RpnPlan {
  int block1_stride = 2;  // 1 for the pedestrian/cyclist variant
  std::array<int, 3> q{3, 5, 5};
  std::array<int, 3> channels{128, 128, 256};
  int lateral_channels = 256;
  bool softmax_score = false;  // 2 logits per anchor instead of 1
  double score_bias_init = 0.0;
  int anchors_per_cell = 2;
};

template <typename S>
struct Rpn {
  RpnPlan plan;
  std::array<std::vector<ConvBnRelu2d<S>>, 3> blocks;
  std::array<Lateral<S>, 3> laterals;
  ConvHead2d<S> score_head;
  ConvHead2d<S> reg_head;

  void init(int c_in, const RpnPlan& p, DetRng& rng) {
    plan = p;
    int cur = c_in;
    for (int bi = 0; bi < 3; ++bi) {
      auto& block = blocks[bi];
      block.clear();
      const int stride = bi == 0 ? plan.block1_stride : 2;
      block.emplace_back();
      block.back().init(cur, plan.channels[bi], Conv2dSpec{3, 3, stride, stride, 1, 1}, rng);
      for (int qi = 0; qi < plan.q[bi]; ++qi) {
        block.emplace_back();
        block.back().init(plan.channels[bi], plan.channels[bi], Conv2dSpec{3, 3, 1, 1, 1, 1},
                          rng);
      }
      cur = plan.channels[bi];
    }
    // Block extents relative to the H/2 x W/2 target: with block-1 stride 2
    // the chain sits at 1x, 2x, 4x coarser; with stride 1 everything shifts
    // one octave finer and block 1 must be downsampled.
    const bool fine = plan.block1_stride == 1;
    laterals[0].init(plan.channels[0], plan.lateral_channels, fine ? -2 : 1, rng);
    laterals[1].init(plan.channels[1], plan.lateral_channels, fine ? 1 : 2, rng);
    laterals[2].init(plan.channels[2], plan.lateral_channels, fine ? 2 : 4, rng);
    const int score_ch = plan.anchors_per_cell * (plan.softmax_score ? 2 : 1);
    score_head.init(3 * plan.lateral_channels, score_ch, rng, plan.score_bias_init);
    reg_head.init(3 * plan.lateral_channels, plan.anchors_per_cell * 7, rng);
  }

  std::pair<TensorT<S>, TensorT<S>> forward(const TensorT<S>& bev, bool train) {
    TensorT<S> cur = bev;
    std::array<TensorT<S>, 3> ups;
    for (int bi = 0; bi < 3; ++bi) {
      for (auto& layer : blocks[bi]) {
        cur = layer.forward(cur, train);
      }
      ups[bi] = laterals[bi].forward(cur, train);
    }
    for (int bi = 1; bi < 3; ++bi) {
      if (ups[bi].shape[1] != ups[0].shape[1] || ups[bi].shape[2] != ups[0].shape[2]) {
        throw InvariantError("lateral outputs disagree on the shared map extent");
      }
    }
    const std::int64_t lc = plan.lateral_channels;
    TensorT<S> concat({3 * lc, ups[0].shape[1], ups[0].shape[2]});
    const std::int64_t plane = ups[0].shape[1] * ups[0].shape[2];
    for (int bi = 0; bi < 3; ++bi) {
      std::copy(ups[bi].data.begin(), ups[bi].data.end(),
                concat.data.begin() + bi * lc * plane);
    }
    TensorT<S> score = score_head.forward(concat, train);
    TensorT<S> reg = reg_head.forward(concat, train);
    return {std::move(score), std::move(reg)};
  }

  TensorT<S> backward(const TensorT<S>& grad_score, const TensorT<S>& grad_reg) {
    TensorT<S> grad_concat = score_head.backward(grad_score);
    TensorT<S> grad_concat2 = reg_head.backward(grad_reg);
    for (std::int64_t i = 0; i < grad_concat.numel(); ++i) {
      grad_concat.data[i] += grad_concat2.data[i];
    }
    const std::int64_t lc = plan.lateral_channels;
    const std::int64_t plane = grad_concat.shape[1] * grad_concat.shape[2];
    // Walk blocks back to front; each block's output gradient is its lateral
    // contribution plus the gradient flowing back from the next block.
    TensorT<S> carried;
    for (int bi = 2; bi >= 0; --bi) {
      TensorT<S> slice({lc, grad_concat.shape[1], grad_concat.shape[2]});
      std::copy(grad_concat.data.begin() + bi * lc * plane,
                grad_concat.data.begin() + (bi + 1) * lc * plane, slice.data.begin());
      TensorT<S> g = laterals[bi].backward(slice);
      if (!carried.data.empty()) {
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          g.data[i] += carried.data[i];
        }
      }
      for (auto it = blocks[bi].rbegin(); it != blocks[bi].rend(); ++it) {
        g = it->backward(g);
      }
      carried = std::move(g);
    }
    return carried;
  }

  void collect(std::vector<NamedParam<S>>& out) {
    for (int bi = 0; bi < 3; ++bi) {
      for (std::size_t li = 0; li < blocks[bi].size(); ++li) {
        blocks[bi][li].collect(
            "rpn.block" + std::to_string(bi + 1) + ".conv" + std::to_string(li + 1), out);
      }
      laterals[bi].collect("rpn.lateral" + std::to_string(bi + 1), out);
    }
    score_head.collect("rpn.score", out);
    reg_head.collect("rpn.reg", out);
  }
};

}  // namespace voxelpipe
