#pragma once

#include <string>
#include <vector>

#include "voxelpipe/errors.hpp"
#include "voxelpipe/kernels.hpp"
#include "voxelpipe/rng.hpp"
#include "voxelpipe/tensor.hpp"

// Layer objects own their parameters, parameter gradients, and the forward
// caches needed by backward. Forward with train=false skips caching, so pure
// inference never holds intermediate activations. A backward call is only
// valid after a train-mode forward of the same layer.

namespace voxelpipe {

template <typename S>
struct NamedParam {
  std::string name;
  TensorT<S>* value;
  bool learnable;  // running BN stats are checkpointed but not SGD-updated
};

template <typename S>
void fill_uniform(TensorT<S>& t, DetRng& rng, double bound) {
  for (auto& v : t.data) {
    v = static_cast<S>((rng.uniform01() * 2.0 - 1.0) * bound);
  }
}

// Fully connected network block from the feature-encoder stack:
// linear (no bias) + batchnorm over rows + ReLU, with an optional row mask.
template <typename S>
struct FcnRows {
  TensorT<S> w;  // c_in x c_out
  BnParams<S> bn;

  TensorT<S> in, lin, bn_out;
  BnCache<S> bn_cache;
  std::vector<std::uint8_t> mask;

  void init(std::int64_t c_in, std::int64_t c_out, DetRng& rng) {
    w = TensorT<S>({c_in, c_out});
    fill_uniform(w, rng, 1.0 / std::sqrt(static_cast<double>(c_in)));
    bn = BnParams<S>::identity(c_out);
  }

  TensorT<S> forward(const TensorT<S>& x, bool train,
                     const std::vector<std::uint8_t>* row_mask = nullptr) {
    TensorT<S> y = linear(x, w, TensorT<S>{});
    TensorT<S> normed =
        batchnorm_rows(y, bn, train, row_mask, train ? &bn_cache : nullptr);
    TensorT<S> out = relu(normed);
    if (train) {
      in = x;
      lin = std::move(y);
      bn_out = std::move(normed);
      mask = row_mask ? *row_mask : std::vector<std::uint8_t>{};
    }
    return out;
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> grad_bn = zeros_like(bn_out);
    relu_backward(bn_out, grad_out, &grad_bn);
    TensorT<S> grad_lin = zeros_like(lin);
    bn.gamma.ensure_grad();
    bn.beta.ensure_grad();
    TensorT<S> ggamma({bn.gamma.numel()});
    TensorT<S> gbeta({bn.beta.numel()});
    batchnorm_rows_backward(grad_bn, bn, bn_cache, &grad_lin, &ggamma, &gbeta);
    for (std::int64_t i = 0; i < ggamma.numel(); ++i) {
      bn.gamma.grad[i] += ggamma.data[i];
      bn.beta.grad[i] += gbeta.data[i];
    }
    TensorT<S> grad_in = zeros_like(in);
    w.ensure_grad();
    TensorT<S> gw(w.shape);
    linear_backward(in, w, grad_lin, &grad_in, &gw, nullptr);
    for (std::int64_t i = 0; i < gw.numel(); ++i) {
      w.grad[i] += gw.data[i];
    }
    return grad_in;
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    out.push_back({prefix + ".w", &w, true});
    out.push_back({prefix + ".bn.gamma", &bn.gamma, true});
    out.push_back({prefix + ".bn.beta", &bn.beta, true});
    out.push_back({prefix + ".bn.running_mean", &bn.running_mean, false});
    out.push_back({prefix + ".bn.running_var", &bn.running_var, false});
  }
};

namespace detail {

template <typename S>
void accumulate_param_grad(TensorT<S>& param, const TensorT<S>& g) {
  param.ensure_grad();
  for (std::int64_t i = 0; i < g.numel(); ++i) {
    param.grad[i] += g.data[i];
  }
}

}  // namespace detail

// conv3d (bias-free; the BN shift plays that role) + batchnorm + ReLU.
template <typename S>
struct ConvBnRelu3d {
  TensorT<S> w;
  BnParams<S> bn;
  Conv3dSpec spec;

  TensorT<S> in, conv_out, bn_out;
  BnCache<S> bn_cache;

  void init(std::int64_t c_in, std::int64_t c_out, const Conv3dSpec& s, DetRng& rng) {
    spec = s;
    w = TensorT<S>({c_out, c_in, s.kd, s.kh, s.kw});
    const double fan_in = static_cast<double>(c_in) * s.kd * s.kh * s.kw;
    fill_uniform(w, rng, 1.0 / std::sqrt(fan_in));
    bn = BnParams<S>::identity(c_out);
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) {
    TensorT<S> y = conv3d(x, w, TensorT<S>{}, spec);
    TensorT<S> normed = batchnorm_spatial(y, bn, train, train ? &bn_cache : nullptr);
    TensorT<S> out = relu(normed);
    if (train) {
      in = x;
      conv_out = std::move(y);
      bn_out = std::move(normed);
    }
    return out;
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> grad_bn = zeros_like(bn_out);
    relu_backward(bn_out, grad_out, &grad_bn);
    TensorT<S> grad_conv = zeros_like(conv_out);
    TensorT<S> ggamma({bn.gamma.numel()});
    TensorT<S> gbeta({bn.beta.numel()});
    batchnorm_spatial_backward(grad_bn, bn, bn_cache, &grad_conv, &ggamma, &gbeta);
    detail::accumulate_param_grad(bn.gamma, ggamma);
    detail::accumulate_param_grad(bn.beta, gbeta);
    TensorT<S> grad_in = zeros_like(in);
    TensorT<S> gw(w.shape);
    conv3d_backward(in, w, grad_conv, spec, &grad_in, &gw, nullptr);
    detail::accumulate_param_grad(w, gw);
    return grad_in;
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    out.push_back({prefix + ".w", &w, true});
    out.push_back({prefix + ".bn.gamma", &bn.gamma, true});
    out.push_back({prefix + ".bn.beta", &bn.beta, true});
    out.push_back({prefix + ".bn.running_mean", &bn.running_mean, false});
    out.push_back({prefix + ".bn.running_var", &bn.running_var, false});
  }
};

template <typename S>
struct ConvBnRelu2d {
  TensorT<S> w;
  BnParams<S> bn;
  Conv2dSpec spec;

  TensorT<S> in, conv_out, bn_out;
  BnCache<S> bn_cache;

  void init(std::int64_t c_in, std::int64_t c_out, const Conv2dSpec& s, DetRng& rng) {
    spec = s;
    w = TensorT<S>({c_out, c_in, s.kh, s.kw});
    const double fan_in = static_cast<double>(c_in) * s.kh * s.kw;
    fill_uniform(w, rng, 1.0 / std::sqrt(fan_in));
    bn = BnParams<S>::identity(c_out);
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) {
    TensorT<S> y = conv2d(x, w, TensorT<S>{}, spec);
    TensorT<S> normed = batchnorm_spatial(y, bn, train, train ? &bn_cache : nullptr);
    TensorT<S> out = relu(normed);
    if (train) {
      in = x;
      conv_out = std::move(y);
      bn_out = std::move(normed);
    }
    return out;
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> grad_bn = zeros_like(bn_out);
    relu_backward(bn_out, grad_out, &grad_bn);
    TensorT<S> grad_conv = zeros_like(conv_out);
    TensorT<S> ggamma({bn.gamma.numel()});
    TensorT<S> gbeta({bn.beta.numel()});
    batchnorm_spatial_backward(grad_bn, bn, bn_cache, &grad_conv, &ggamma, &gbeta);
    detail::accumulate_param_grad(bn.gamma, ggamma);
    detail::accumulate_param_grad(bn.beta, gbeta);
    TensorT<S> grad_in = zeros_like(in);
    TensorT<S> gw(w.shape);
    conv2d_backward(in, w, grad_conv, spec, &grad_in, &gw, nullptr);
    detail::accumulate_param_grad(w, gw);
    return grad_in;
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    out.push_back({prefix + ".w", &w, true});
    out.push_back({prefix + ".bn.gamma", &bn.gamma, true});
    out.push_back({prefix + ".bn.beta", &bn.beta, true});
    out.push_back({prefix + ".bn.running_mean", &bn.running_mean, false});
    out.push_back({prefix + ".bn.running_var", &bn.running_var, false});
  }
};

template <typename S>
struct DeconvBnRelu2d {
  TensorT<S> w;  // c_in x c_out x kh x kw
  BnParams<S> bn;
  Conv2dSpec spec;

  TensorT<S> in, conv_out, bn_out;
  BnCache<S> bn_cache;

  void init(std::int64_t c_in, std::int64_t c_out, const Conv2dSpec& s, DetRng& rng) {
    spec = s;
    w = TensorT<S>({c_in, c_out, s.kh, s.kw});
    const double fan_in = static_cast<double>(c_in) * s.kh * s.kw;
    fill_uniform(w, rng, 1.0 / std::sqrt(fan_in));
    bn = BnParams<S>::identity(c_out);
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) {
    TensorT<S> y = deconv2d(x, w, TensorT<S>{}, spec);
    TensorT<S> normed = batchnorm_spatial(y, bn, train, train ? &bn_cache : nullptr);
    TensorT<S> out = relu(normed);
    if (train) {
      in = x;
      conv_out = std::move(y);
      bn_out = std::move(normed);
    }
    return out;
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> grad_bn = zeros_like(bn_out);
    relu_backward(bn_out, grad_out, &grad_bn);
    TensorT<S> grad_conv = zeros_like(conv_out);
    TensorT<S> ggamma({bn.gamma.numel()});
    TensorT<S> gbeta({bn.beta.numel()});
    batchnorm_spatial_backward(grad_bn, bn, bn_cache, &grad_conv, &ggamma, &gbeta);
    detail::accumulate_param_grad(bn.gamma, ggamma);
    detail::accumulate_param_grad(bn.beta, gbeta);
    TensorT<S> grad_in = zeros_like(in);
    TensorT<S> gw(w.shape);
    deconv2d_backward(in, w, grad_conv, spec, &grad_in, &gw, nullptr);
    detail::accumulate_param_grad(w, gw);
    return grad_in;
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    out.push_back({prefix + ".w", &w, true});
    out.push_back({prefix + ".bn.gamma", &bn.gamma, true});
    out.push_back({prefix + ".bn.beta", &bn.beta, true});
    out.push_back({prefix + ".bn.running_mean", &bn.running_mean, false});
    out.push_back({prefix + ".bn.running_var", &bn.running_var, false});
  }
};

// Plain 1x1 convolution head with bias, no normalization or activation.
template <typename S>
struct ConvHead2d {
  TensorT<S> w;
  TensorT<S> b;
  Conv2dSpec spec;

  TensorT<S> in;

  void init(std::int64_t c_in, std::int64_t c_out, DetRng& rng, double bias_init = 0.0) {
    spec = Conv2dSpec{1, 1, 1, 1, 0, 0};
    w = TensorT<S>({c_out, c_in, 1, 1});
    fill_uniform(w, rng, 1.0 / std::sqrt(static_cast<double>(c_in)));
    b = TensorT<S>({c_out});
    for (auto& v : b.data) {
      v = static_cast<S>(bias_init);
    }
  }

  TensorT<S> forward(const TensorT<S>& x, bool train) {
    if (train) {
      in = x;
    }
    return conv2d(x, w, b, spec);
  }

  TensorT<S> backward(const TensorT<S>& grad_out) {
    TensorT<S> grad_in = zeros_like(in);
    TensorT<S> gw(w.shape);
    TensorT<S> gb(b.shape);
    conv2d_backward(in, w, grad_out, spec, &grad_in, &gw, &gb);
    detail::accumulate_param_grad(w, gw);
    detail::accumulate_param_grad(b, gb);
    return grad_in;
  }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) {
    out.push_back({prefix + ".w", &w, true});
    out.push_back({prefix + ".b", &b, true});
  }
};

}  // namespace voxelpipe
