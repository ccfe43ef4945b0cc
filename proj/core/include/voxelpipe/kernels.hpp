#pragma once

#include <cstdint>
#include <vector>

#include "voxelpipe/tensor.hpp"

// Differentiable kernels, each a pure forward function plus an explicit
// backward. Backward functions ACCUMULATE into the provided grad tensors so
// callers can sum gradients across a batch; zero them before the first call.
// All reductions run in a fixed order independent of the thread count.

namespace voxelpipe {

// y = x @ w + b over the last axis of x; w is c_in x c_out, b is c_out or empty.
template <typename S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b);

template <typename S>
void linear_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                     TensorT<S>* grad_x, TensorT<S>* grad_w, TensorT<S>* grad_b);

template <typename S>
struct BnParams {
  TensorT<S> gamma;
  TensorT<S> beta;
  TensorT<S> running_mean;
  TensorT<S> running_var;
  double eps = 1e-5;
  double momentum = 0.99;  // running = momentum * running + (1 - momentum) * batch

  static BnParams identity(std::int64_t channels) {
    BnParams p;
    p.gamma = TensorT<S>({channels});
    p.beta = TensorT<S>({channels});
    p.running_mean = TensorT<S>({channels});
    p.running_var = TensorT<S>({channels});
    for (std::int64_t c = 0; c < channels; ++c) {
      p.gamma.data[c] = S(1);
      p.running_var.data[c] = S(1);
    }
    return p;
  }
};

template <typename S>
struct BnCache {
  TensorT<S> xhat;
  std::vector<S> inv_std;              // per channel
  std::vector<std::uint8_t> row_mask;  // rows layout only; empty = all rows
  std::int64_t population = 0;         // rows (or spatial positions) normalized over
  bool train = false;
};

// Channel-last layout: x is ... x C, statistics taken over all leading axes.
// row_mask (optional) marks which flattened rows participate; masked-out rows
// get zero gradient and their forward output is left as scale/shift of xhat
// computed from the batch stats of the valid rows.
template <typename S>
TensorT<S> batchnorm_rows(const TensorT<S>& x, BnParams<S>& params, bool train,
                          const std::vector<std::uint8_t>* row_mask, BnCache<S>* cache);

template <typename S>
void batchnorm_rows_backward(const TensorT<S>& grad_y, const BnParams<S>& params,
                             const BnCache<S>& cache, TensorT<S>* grad_x, TensorT<S>* grad_gamma,
                             TensorT<S>* grad_beta);

// Channel-first layout: x is C x spatial..., statistics per channel over space.
template <typename S>
TensorT<S> batchnorm_spatial(const TensorT<S>& x, BnParams<S>& params, bool train,
                             BnCache<S>* cache);

template <typename S>
void batchnorm_spatial_backward(const TensorT<S>& grad_y, const BnParams<S>& params,
                                const BnCache<S>& cache, TensorT<S>* grad_x,
                                TensorT<S>* grad_gamma, TensorT<S>* grad_beta);

template <typename S>
TensorT<S> relu(const TensorT<S>& x);

template <typename S>
void relu_backward(const TensorT<S>& x, const TensorT<S>& grad_y, TensorT<S>* grad_x);

// Max over one axis; argmax (flat index along that axis, first maximum wins)
// is recorded for the backward scatter.
template <typename S>
TensorT<S> maxpool_over_axis(const TensorT<S>& x, int axis, std::vector<std::int32_t>* argmax);

template <typename S>
void maxpool_over_axis_backward(const TensorT<S>& grad_y, const TensorT<S>& x_shape_like, int axis,
                                const std::vector<std::int32_t>& argmax, TensorT<S>* grad_x);

// Per-voxel max over occupied rows: x is K x T x C, counts[k] in [0, T].
// A voxel with count 0 yields zeros and argmax -1.
template <typename S>
TensorT<S> masked_max_rows(const TensorT<S>& x, const std::vector<std::int32_t>& counts,
                           std::vector<std::int32_t>* argmax);

template <typename S>
void masked_max_rows_backward(const TensorT<S>& grad_y, const std::vector<std::int32_t>& argmax,
                              std::int64_t t, TensorT<S>* grad_x);

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x);

// Pairwise softmax over axis 0 of a 2 x ... tensor.
template <typename S>
TensorT<S> softmax2(const TensorT<S>& logits);

template <typename S>
void softmax2_backward(const TensorT<S>& y, const TensorT<S>& grad_y, TensorT<S>* grad_logits);

// Elementwise binary cross entropy on probabilities (reference form).
template <typename S>
S bce_loss(S p, S target);

// Numerically stable fused form on logits; backward is sigmoid(x) - target.
template <typename S>
S bce_with_logits(S logit, S target);

template <typename S>
S bce_with_logits_grad(S logit, S target);

// SmoothL1 with threshold 1: 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise.
template <typename S>
S smooth_l1(S diff);

template <typename S>
S smooth_l1_grad(S diff);

struct Conv2dSpec {
  int kh = 3, kw = 3;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
};

struct Conv3dSpec {
  int kd = 3, kh = 3, kw = 3;
  int sd = 1, sh = 1, sw = 1;
  int pd = 0, ph = 0, pw = 0;
};

// floor((in + 2p - k) / s) + 1; throws ConfigError when not positive.
std::int64_t conv_out_extent(std::int64_t in, int k, int s, int p);
// (in - 1) * s + k - 2p for the transposed convolution.
std::int64_t deconv_out_extent(std::int64_t in, int k, int s, int p);

// Cross-correlation, zero padding. x: C_in x H x W; w: C_out x C_in x kh x kw;
// b: C_out or empty.
template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                  const Conv2dSpec& spec);

template <typename S>
void conv2d_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                     const Conv2dSpec& spec, TensorT<S>* grad_x, TensorT<S>* grad_w,
                     TensorT<S>* grad_b);

// x: C_in x D x H x W; w: C_out x C_in x kd x kh x kw.
template <typename S>
TensorT<S> conv3d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                  const Conv3dSpec& spec);

template <typename S>
void conv3d_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                     const Conv3dSpec& spec, TensorT<S>* grad_x, TensorT<S>* grad_w,
                     TensorT<S>* grad_b);

// Transposed convolution; w: C_in x C_out x kh x kw.
template <typename S>
TensorT<S> deconv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                    const Conv2dSpec& spec);

template <typename S>
void deconv2d_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                       const Conv2dSpec& spec, TensorT<S>* grad_x, TensorT<S>* grad_w,
                       TensorT<S>* grad_b);

}  // namespace voxelpipe
