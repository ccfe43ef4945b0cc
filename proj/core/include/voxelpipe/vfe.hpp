#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxelpipe/layers.hpp"

// Stacked voxel feature encoding: each layer runs a pointwise FCN to half the
// output width, max-pools over the occupied rows of each voxel, and appends
// the pooled vector to every occupied row. Padded rows stay exactly zero.

namespace voxelpipe {

inline std::vector<std::uint8_t> occupancy_mask(const std::vector<std::int32_t>& counts,
                                                std::int64_t k, std::int64_t t) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(k * t), 0);
  for (std::int64_t vk = 0; vk < k; ++vk) {
    const std::int32_t c = counts[vk];
    for (std::int32_t i = 0; i < c && i < t; ++i) {
      mask[vk * t + i] = 1;
    }
  }
  return mask;
}

template <typename S>
struct VfeLayer {
  FcnRows<S> fcn;  // c_in -> c_out / 2
  std::int64_t c_out = 0;

  std::vector<std::int32_t> argmax;
  std::vector<std::int32_t> counts_cache;
  std::int64_t k_cache = 0, t_cache = 0;

  void init(std::int64_t c_in, std::int64_t out_channels, DetRng& rng) {
    if (out_channels % 2 != 0) {
      throw ConfigError("encoder layer output width must be even");
    }
    c_out = out_channels;
    fcn.init(c_in, out_channels / 2, rng);
  }

  // x: K x T x c_in with zero padded rows; returns K x T x c_out.
  TensorT<S> forward(const TensorT<S>& x, const std::vector<std::int32_t>& counts, bool train) {
    const std::int64_t k = x.shape[0];
    const std::int64_t t = x.shape[1];
    const std::int64_t half = c_out / 2;
    const auto mask = occupancy_mask(counts, k, t);
    TensorT<S> pw = fcn.forward(x, train, &mask);
    TensorT<S> agg = masked_max_rows(pw, counts, train ? &argmax : nullptr);
    TensorT<S> out({k, t, c_out});
    const S* pwp = pw.data.data();
    const S* aggp = agg.data.data();
    S* op = out.data.data();
    for (std::int64_t vk = 0; vk < k; ++vk) {
      const std::int32_t count = std::min<std::int32_t>(counts[vk], static_cast<std::int32_t>(t));
      for (std::int32_t row = 0; row < count; ++row) {
        S* orow = op + (vk * t + row) * c_out;
        const S* prow = pwp + (vk * t + row) * half;
        for (std::int64_t c = 0; c < half; ++c) {
          orow[c] = prow[c];
          orow[half + c] = aggp[vk * half + c];
        }
      }
    }
    if (train) {
      counts_cache = counts;
      k_cache = k;
      t_cache = t;
    }
    return out;
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    const std::int64_t half = c_out / 2;
    TensorT<S> grad_pw({k_cache, t_cache, half});
    const S* gp = grad_out.data.data();
    S* gpw = grad_pw.data.data();
    std::vector<S> grad_agg(static_cast<std::size_t>(k_cache * half), S(0));
    for (std::int64_t vk = 0; vk < k_cache; ++vk) {
      const std::int32_t count =
          std::min<std::int32_t>(counts_cache[vk], static_cast<std::int32_t>(t_cache));
      for (std::int32_t row = 0; row < count; ++row) {
        const S* grow = gp + (vk * t_cache + row) * c_out;
        S* prow = gpw + (vk * t_cache + row) * half;
        for (std::int64_t c = 0; c < half; ++c) {
          prow[c] += grow[c];
          grad_agg[vk * half + c] += grow[half + c];
        }
      }
    }
    for (std::int64_t vk = 0; vk < k_cache; ++vk) {
      for (std::int64_t c = 0; c < half; ++c) {
        const std::int32_t row = argmax[vk * half + c];
        if (row >= 0) {
          gpw[(vk * t_cache + row) * half + c] += grad_agg[vk * half + c];
        }
      }
    }
    return fcn.backward(grad_pw);
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    fcn.collect(prefix + ".fcn", out);
  }
};

// Final FCN to C followed by the per-voxel masked max: K x T x c_in -> K x C.
template <typename S>
struct VoxelFeatureHead {
  FcnRows<S> fcn;
  std::int64_t c = 0;

  std::vector<std::int32_t> argmax;
  std::int64_t k_cache = 0, t_cache = 0;

  void init(std::int64_t c_in, std::int64_t c_out, DetRng& rng) {
    c = c_out;
    fcn.init(c_in, c_out, rng);
  }

  TensorT<S> forward(const TensorT<S>& x, const std::vector<std::int32_t>& counts, bool train) {
    const auto mask = occupancy_mask(counts, x.shape[0], x.shape[1]);
    TensorT<S> pw = fcn.forward(x, train, &mask);
    if (train) {
      k_cache = x.shape[0];
      t_cache = x.shape[1];
    }
    return masked_max_rows(pw, counts, train ? &argmax : nullptr);
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> grad_pw({k_cache, t_cache, c});
    masked_max_rows_backward(grad_out, argmax, t_cache, &grad_pw);
    return fcn.backward(grad_pw);
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    fcn.collect(prefix + ".fcn", out);
  }
};

template <typename S>
struct VfeStack {
  std::vector<VfeLayer<S>> layers;
  VoxelFeatureHead<S> head;

  // channels such as {7, 32, 128}: VFE-1(7,32), VFE-2(32,128), head 128 -> 128.
  void init(const std::vector<int>& channels, DetRng& rng) {
    if (channels.size() < 2 || channels.front() != 7) {
      throw ConfigError("encoder channel list must start at 7 and name at least one layer");
    }
    layers.resize(channels.size() - 1);
    for (std::size_t i = 0; i + 1 < channels.size(); ++i) {
      layers[i].init(channels[i], channels[i + 1], rng);
    }
    head.init(channels.back(), channels.back(), rng);
  }

  TensorT<S> forward(const TensorT<S>& x, const std::vector<std::int32_t>& counts, bool train) {
    TensorT<S> cur = x;
    for (auto& layer : layers) {
      cur = layer.forward(cur, counts, train);
    }
    return head.forward(cur, counts, train);
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> g = head.backward(grad_out);
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
      g = it->backward(g);
    }
    return g;
  }

  void collect(std::vector<NamedParam<S>>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].collect("vfe" + std::to_string(i + 1), out);
    }
    head.collect("vfe_out", out);
  }
};

}  // namespace voxelpipe
