#pragma once

#include <cstdint>
#include <vector>

#include "voxelpipe/config.hpp"
#include "voxelpipe/detector.hpp"
#include "voxelpipe/vfe.hpp"
#include "voxelpipe/voxel.hpp"

namespace voxelpipe {

struct NetworkSpec {
  GridDims grid;
  std::vector<int> vfe_channels{7, 32, 128};
  std::array<int, 3> middle_channels{64, 64, 64};
  RpnPlan rpn;
  std::uint64_t init_seed = 1;
};

// Depth extent after the three fixed middle convolutions (10 -> 5 -> 3 -> 2).
std::int64_t middle_depth_out(std::int64_t d);

// Reads vfe_channels, middle_channels, rpn_* and score_* keys; grid comes
// from the voxel configuration.
NetworkSpec network_spec_from_config(const Config& cfg, GridDims grid);

VoxelConfig voxel_config_from_config(const Config& cfg);

// The assembled detector: encoder, dense scatter, middle layers, RPN.
template <typename S>
struct Network {
  NetworkSpec spec;
  VfeStack<S> vfe;
  MiddleNet<S> middle;
  Rpn<S> rpn;

  std::vector<std::int32_t> coords_cache;
  std::int64_t depth_cache = 0;

  struct Output {
    TensorT<S> score;  // logits; 2 (or 4 in softmax mode) x H/2 x W/2
    TensorT<S> reg;    // 14 x H/2 x W/2
  };

  void init(const NetworkSpec& sp) {
    spec = sp;
    DetRng rng(sp.init_seed);
    vfe.init(sp.vfe_channels, rng);
    middle.init(sp.vfe_channels.back(), sp.middle_channels, rng);
    const std::int64_t d_out = middle_depth_out(sp.grid.d);
    rpn.init(static_cast<int>(sp.middle_channels[2] * d_out), sp.rpn, rng);
  }

  Output forward(const VoxelBuffers& buffers, bool train) {
    const std::int64_t nv = buffers.num_voxels;
    const std::int64_t t = buffers.t_max;
    TensorT<S> x({nv, t, 7});
    for (std::int64_t i = 0; i < nv * t * 7; ++i) {
      x.data[i] = static_cast<S>(buffers.features.data[i]);
    }
    std::vector<std::int32_t> counts(buffers.counts.begin(), buffers.counts.begin() + nv);
    TensorT<S> feat = vfe.forward(x, counts, train);
    std::vector<std::int32_t> coords(buffers.coords.begin(), buffers.coords.begin() + nv * 3);
    TensorT<S> dense = scatter_to_dense(feat, coords, spec.grid);
    TensorT<S> mid = middle.forward(dense, train);
    const std::int64_t depth = mid.shape[1];
    TensorT<S> bev = reshape_to_bev(std::move(mid));
    if (train) {
      coords_cache = std::move(coords);
      depth_cache = depth;
    }
    auto [score, reg] = rpn.forward(bev, train);
    return {std::move(score), std::move(reg)};
  }

  void backward(const TensorT<S>& grad_score, const TensorT<S>& grad_reg) {
    TensorT<S> gbev = rpn.backward(grad_score, grad_reg);
    TensorT<S> gmid = split_from_bev(std::move(gbev), depth_cache);
    TensorT<S> gdense = middle.backward(gmid);
    TensorT<S> gfeat = gather_from_dense(gdense, coords_cache);
    vfe.backward(gfeat);
  }

  std::vector<NamedParam<S>> params() {
    std::vector<NamedParam<S>> out;
    vfe.collect(out);
    middle.collect(out);
    rpn.collect(out);
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) {
      if (p.learnable) {
        p.value->ensure_grad();
        p.value->zero_grad();
      }
    }
  }
};

}  // namespace voxelpipe
