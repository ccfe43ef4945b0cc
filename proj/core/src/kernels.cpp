#include "voxelpipe/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "voxelpipe/errors.hpp"
#include "voxelpipe/parallel.hpp"

namespace voxelpipe {

namespace {

std::int64_t rows_for_lastdim(const std::vector<std::int64_t>& shape) {
  std::int64_t rows = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) {
    rows *= shape[i];
  }
  return rows;
}

// Valid output range [lo, hi] such that o * s + base stays inside [0, in).
void stride_span(std::int64_t in, std::int64_t out, int s, std::int64_t base, std::int64_t& lo,
                 std::int64_t& hi) {
  lo = base < 0 ? (-base + s - 1) / s : 0;
  hi = (in - 1 - base) / s;
  if (hi > out - 1) {
    hi = out - 1;
  }
}

}  // namespace

template <typename S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
  if (x.rank() < 1 || w.rank() != 2 || x.shape.back() != w.shape[0]) {
    throw InvariantError("linear: input/weight shape mismatch");
  }
  const std::int64_t c_in = w.shape[0];
  const std::int64_t c_out = w.shape[1];
  if (!b.data.empty() && b.numel() != c_out) {
    throw InvariantError("linear: bias length mismatch");
  }
  std::vector<std::int64_t> out_shape = x.shape;
  out_shape.back() = c_out;
  TensorT<S> y(out_shape);
  const std::int64_t rows = rows_for_lastdim(x.shape);
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* bp = b.data.empty() ? nullptr : b.data.data();
  S* yp = y.data.data();
  parallel_for(static_cast<std::size_t>(rows), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      S* yrow = yp + n * c_out;
      if (bp) {
        for (std::int64_t co = 0; co < c_out; ++co) {
          yrow[co] = bp[co];
        }
      }
      const S* xrow = xp + n * c_in;
      for (std::int64_t ci = 0; ci < c_in; ++ci) {
        const S xv = xrow[ci];
        if (xv == S(0)) {
          continue;  // padded voxel rows are all-zero; exact zeros contribute nothing
        }
        const S* wrow = wp + ci * c_out;
        for (std::int64_t co = 0; co < c_out; ++co) {
          yrow[co] += xv * wrow[co];
        }
      }
    }
  });
  return y;
}

template <typename S>
void linear_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                     TensorT<S>* grad_x, TensorT<S>* grad_w, TensorT<S>* grad_b) {
  const std::int64_t c_in = w.shape[0];
  const std::int64_t c_out = w.shape[1];
  const std::int64_t rows = rows_for_lastdim(x.shape);
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* gp = grad_y.data.data();
  if (grad_x) {
    S* gx = grad_x->data.data();
    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t n = lo; n < hi; ++n) {
        const S* grow = gp + n * c_out;
        S* gxrow = gx + n * c_in;
        for (std::int64_t ci = 0; ci < c_in; ++ci) {
          const S* wrow = wp + ci * c_out;
          S acc = S(0);
          for (std::int64_t co = 0; co < c_out; ++co) {
            acc += grow[co] * wrow[co];
          }
          gxrow[ci] += acc;
        }
      }
    });
  }
  if (grad_w) {
    S* gw = grad_w->data.data();
    parallel_for(static_cast<std::size_t>(c_in), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t ci = lo; ci < hi; ++ci) {
        S* gwrow = gw + ci * c_out;
        for (std::int64_t n = 0; n < rows; ++n) {
          const S xv = xp[n * c_in + ci];
          if (xv == S(0)) {
            continue;
          }
          const S* grow = gp + n * c_out;
          for (std::int64_t co = 0; co < c_out; ++co) {
            gwrow[co] += xv * grow[co];
          }
        }
      }
    });
  }
  if (grad_b && !grad_b->data.empty()) {
    S* gb = grad_b->data.data();
    for (std::int64_t n = 0; n < rows; ++n) {
      const S* grow = gp + n * c_out;
      for (std::int64_t co = 0; co < c_out; ++co) {
        gb[co] += grow[co];
      }
    }
  }
}

namespace {

// Shared normalization core once per-channel mean/var are known.
template <typename S>
void apply_norm(const TensorT<S>& x, const BnParams<S>& params, const std::vector<double>& mean,
                const std::vector<S>& inv_std, bool rows_layout, TensorT<S>& y,
                TensorT<S>& xhat) {
  const std::int64_t c_dim = rows_layout ? x.shape.back() : x.shape.front();
  const std::int64_t total = x.numel();
  const S* xp = x.data.data();
  S* yp = y.data.data();
  S* hp = xhat.data.data();
  const S* gp = params.gamma.data.data();
  const S* bp = params.beta.data.data();
  if (rows_layout) {
    const std::int64_t rows = total / c_dim;
    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t n = lo; n < hi; ++n) {
        const S* xrow = xp + n * c_dim;
        S* yrow = yp + n * c_dim;
        S* hrow = hp + n * c_dim;
        for (std::int64_t c = 0; c < c_dim; ++c) {
          const S h = static_cast<S>((xrow[c] - mean[c]) * inv_std[c]);
          hrow[c] = h;
          yrow[c] = gp[c] * h + bp[c];
        }
      }
    });
  } else {
    const std::int64_t m = total / c_dim;
    parallel_for(static_cast<std::size_t>(c_dim), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t c = lo; c < hi; ++c) {
        const S* xc = xp + c * m;
        S* yc = yp + c * m;
        S* hc = hp + c * m;
        const double mu = mean[c];
        const S is = inv_std[c];
        const S gamma = gp[c];
        const S beta = bp[c];
        for (std::int64_t i = 0; i < m; ++i) {
          const S h = static_cast<S>((xc[i] - mu) * is);
          hc[i] = h;
          yc[i] = gamma * h + beta;
        }
      }
    });
  }
}

}  // namespace

template <typename S>
TensorT<S> batchnorm_rows(const TensorT<S>& x, BnParams<S>& params, bool train,
                          const std::vector<std::uint8_t>* row_mask, BnCache<S>* cache) {
  const std::int64_t c_dim = x.shape.back();
  if (params.gamma.numel() != c_dim) {
    throw InvariantError("batchnorm_rows: channel count mismatch");
  }
  const std::int64_t rows = rows_for_lastdim(x.shape);
  if (row_mask && static_cast<std::int64_t>(row_mask->size()) != rows) {
    throw InvariantError("batchnorm_rows: mask length mismatch");
  }
  std::vector<double> mean(c_dim, 0.0);
  std::vector<S> inv_std(c_dim);
  std::int64_t m = 0;
  const S* xp = x.data.data();
  if (train) {
    std::vector<double> sum(c_dim, 0.0), sumsq(c_dim, 0.0);
    for (std::int64_t n = 0; n < rows; ++n) {
      if (row_mask && !(*row_mask)[n]) {
        continue;
      }
      ++m;
      const S* xrow = xp + n * c_dim;
      for (std::int64_t c = 0; c < c_dim; ++c) {
        const double v = xrow[c];
        sum[c] += v;
        sumsq[c] += v * v;
      }
    }
    if (m < 2) {
      throw InvariantError("batchnorm_rows: training statistics need at least 2 rows");
    }
    for (std::int64_t c = 0; c < c_dim; ++c) {
      mean[c] = sum[c] / m;
      const double var = std::max(0.0, sumsq[c] / m - mean[c] * mean[c]);
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(var + params.eps));
      params.running_mean.data[c] = static_cast<S>(params.momentum * params.running_mean.data[c] +
                                                   (1.0 - params.momentum) * mean[c]);
      params.running_var.data[c] = static_cast<S>(params.momentum * params.running_var.data[c] +
                                                  (1.0 - params.momentum) * var);
    }
  } else {
    m = row_mask ? static_cast<std::int64_t>(std::count(row_mask->begin(), row_mask->end(), 1))
                 : rows;
    for (std::int64_t c = 0; c < c_dim; ++c) {
      mean[c] = params.running_mean.data[c];
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(params.running_var.data[c] + params.eps));
    }
  }
  TensorT<S> y(x.shape);
  TensorT<S> xhat(x.shape);
  apply_norm(x, params, mean, inv_std, /*rows_layout=*/true, y, xhat);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->row_mask = row_mask ? *row_mask : std::vector<std::uint8_t>{};
    cache->population = m;
    cache->train = train;
  }
  return y;
}

template <typename S>
void batchnorm_rows_backward(const TensorT<S>& grad_y, const BnParams<S>& params,
                             const BnCache<S>& cache, TensorT<S>* grad_x, TensorT<S>* grad_gamma,
                             TensorT<S>* grad_beta) {
  const std::int64_t c_dim = grad_y.shape.back();
  const std::int64_t rows = rows_for_lastdim(grad_y.shape);
  const S* gp = grad_y.data.data();
  const S* hp = cache.xhat.data.data();
  const bool masked = !cache.row_mask.empty();
  std::vector<double> s_g(c_dim, 0.0), s_gh(c_dim, 0.0);
  for (std::int64_t n = 0; n < rows; ++n) {
    if (masked && !cache.row_mask[n]) {
      continue;
    }
    const S* grow = gp + n * c_dim;
    const S* hrow = hp + n * c_dim;
    for (std::int64_t c = 0; c < c_dim; ++c) {
      s_g[c] += grow[c];
      s_gh[c] += static_cast<double>(grow[c]) * hrow[c];
    }
  }
  if (grad_gamma) {
    for (std::int64_t c = 0; c < c_dim; ++c) {
      grad_gamma->data[c] += static_cast<S>(s_gh[c]);
    }
  }
  if (grad_beta) {
    for (std::int64_t c = 0; c < c_dim; ++c) {
      grad_beta->data[c] += static_cast<S>(s_g[c]);
    }
  }
  if (!grad_x) {
    return;
  }
  S* gx = grad_x->data.data();
  const S* gamma = params.gamma.data.data();
  const double m = static_cast<double>(cache.population);
  parallel_for(static_cast<std::size_t>(rows), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      if (masked && !cache.row_mask[n]) {
        continue;
      }
      const S* grow = gp + n * c_dim;
      const S* hrow = hp + n * c_dim;
      S* gxrow = gx + n * c_dim;
      for (std::int64_t c = 0; c < c_dim; ++c) {
        const double gi = static_cast<double>(grow[c]) * gamma[c];
        if (cache.train) {
          const double corr =
              gi - (gamma[c] * s_g[c] + gamma[c] * s_gh[c] * hrow[c]) / m;
          gxrow[c] += static_cast<S>(corr * cache.inv_std[c]);
        } else {
          gxrow[c] += static_cast<S>(gi * cache.inv_std[c]);
        }
      }
    }
  });
}

template <typename S>
TensorT<S> batchnorm_spatial(const TensorT<S>& x, BnParams<S>& params, bool train,
                             BnCache<S>* cache) {
  const std::int64_t c_dim = x.shape.front();
  if (params.gamma.numel() != c_dim) {
    throw InvariantError("batchnorm_spatial: channel count mismatch");
  }
  const std::int64_t m = x.numel() / c_dim;
  std::vector<double> mean(c_dim, 0.0);
  std::vector<S> inv_std(c_dim);
  const S* xp = x.data.data();
  if (train) {
    if (m < 2) {
      throw InvariantError("batchnorm_spatial: training statistics need at least 2 positions");
    }
    for (std::int64_t c = 0; c < c_dim; ++c) {
      const S* xc = xp + c * m;
      double sum = 0.0, sumsq = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        const double v = xc[i];
        sum += v;
        sumsq += v * v;
      }
      mean[c] = sum / m;
      const double var = std::max(0.0, sumsq / m - mean[c] * mean[c]);
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(var + params.eps));
      params.running_mean.data[c] = static_cast<S>(params.momentum * params.running_mean.data[c] +
                                                   (1.0 - params.momentum) * mean[c]);
      params.running_var.data[c] = static_cast<S>(params.momentum * params.running_var.data[c] +
                                                  (1.0 - params.momentum) * var);
    }
  } else {
    for (std::int64_t c = 0; c < c_dim; ++c) {
      mean[c] = params.running_mean.data[c];
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(params.running_var.data[c] + params.eps));
    }
  }
  TensorT<S> y(x.shape);
  TensorT<S> xhat(x.shape);
  apply_norm(x, params, mean, inv_std, /*rows_layout=*/false, y, xhat);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->row_mask.clear();
    cache->population = m;
    cache->train = train;
  }
  return y;
}

template <typename S>
void batchnorm_spatial_backward(const TensorT<S>& grad_y, const BnParams<S>& params,
                                const BnCache<S>& cache, TensorT<S>* grad_x,
                                TensorT<S>* grad_gamma, TensorT<S>* grad_beta) {
  const std::int64_t c_dim = grad_y.shape.front();
  const std::int64_t m = grad_y.numel() / c_dim;
  const S* gp = grad_y.data.data();
  const S* hp = cache.xhat.data.data();
  const S* gamma = params.gamma.data.data();
  parallel_for(static_cast<std::size_t>(c_dim), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t c = lo; c < hi; ++c) {
      const S* gc = gp + c * m;
      const S* hc = hp + c * m;
      double s_g = 0.0, s_gh = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        s_g += gc[i];
        s_gh += static_cast<double>(gc[i]) * hc[i];
      }
      if (grad_gamma) {
        grad_gamma->data[c] += static_cast<S>(s_gh);
      }
      if (grad_beta) {
        grad_beta->data[c] += static_cast<S>(s_g);
      }
      if (!grad_x) {
        continue;
      }
      S* gxc = grad_x->data.data() + c * m;
      const double g = gamma[c];
      const S is = cache.inv_std[c];
      if (cache.train) {
        const double mm = static_cast<double>(cache.population);
        for (std::int64_t i = 0; i < m; ++i) {
          const double corr = static_cast<double>(gc[i]) * g - (g * s_g + g * s_gh * hc[i]) / mm;
          gxc[i] += static_cast<S>(corr * is);
        }
      } else {
        for (std::int64_t i = 0; i < m; ++i) {
          gxc[i] += static_cast<S>(static_cast<double>(gc[i]) * g * is);
        }
      }
    }
  });
}

template <typename S>
TensorT<S> relu(const TensorT<S>& x) {
  TensorT<S> y(x.shape);
  const S* xp = x.data.data();
  S* yp = y.data.data();
  const std::int64_t n = x.numel();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      yp[i] = xp[i] > S(0) ? xp[i] : S(0);
    }
  });
  return y;
}

template <typename S>
void relu_backward(const TensorT<S>& x, const TensorT<S>& grad_y, TensorT<S>* grad_x) {
  const S* xp = x.data.data();
  const S* gp = grad_y.data.data();
  S* gx = grad_x->data.data();
  const std::int64_t n = x.numel();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      if (xp[i] > S(0)) {
        gx[i] += gp[i];
      }
    }
  });
}

template <typename S>
TensorT<S> maxpool_over_axis(const TensorT<S>& x, int axis, std::vector<std::int32_t>* argmax) {
  if (axis < 0 || axis >= static_cast<int>(x.rank())) {
    throw InvariantError("maxpool_over_axis: axis out of range");
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) {
    outer *= x.shape[i];
  }
  const std::int64_t a = x.shape[axis];
  for (std::size_t i = axis + 1; i < x.rank(); ++i) {
    inner *= x.shape[i];
  }
  std::vector<std::int64_t> out_shape;
  for (int i = 0; i < static_cast<int>(x.rank()); ++i) {
    if (i != axis) {
      out_shape.push_back(x.shape[i]);
    }
  }
  if (out_shape.empty()) {
    out_shape.push_back(1);
  }
  TensorT<S> y(out_shape);
  if (argmax) {
    argmax->assign(static_cast<std::size_t>(outer * inner), 0);
  }
  const S* xp = x.data.data();
  S* yp = y.data.data();
  parallel_for(static_cast<std::size_t>(outer), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t o = lo; o < hi; ++o) {
      for (std::int64_t i = 0; i < inner; ++i) {
        S best = xp[o * a * inner + i];
        std::int32_t best_j = 0;
        for (std::int64_t j = 1; j < a; ++j) {
          const S v = xp[(o * a + j) * inner + i];
          if (v > best) {
            best = v;
            best_j = static_cast<std::int32_t>(j);
          }
        }
        yp[o * inner + i] = best;
        if (argmax) {
          (*argmax)[o * inner + i] = best_j;
        }
      }
    }
  });
  return y;
}

template <typename S>
void maxpool_over_axis_backward(const TensorT<S>& grad_y, const TensorT<S>& x_shape_like, int axis,
                                const std::vector<std::int32_t>& argmax, TensorT<S>* grad_x) {
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) {
    outer *= x_shape_like.shape[i];
  }
  const std::int64_t a = x_shape_like.shape[axis];
  for (std::size_t i = axis + 1; i < x_shape_like.rank(); ++i) {
    inner *= x_shape_like.shape[i];
  }
  const S* gp = grad_y.data.data();
  S* gx = grad_x->data.data();
  parallel_for(static_cast<std::size_t>(outer), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t o = lo; o < hi; ++o) {
      for (std::int64_t i = 0; i < inner; ++i) {
        const std::int32_t j = argmax[o * inner + i];
        gx[(o * a + j) * inner + i] += gp[o * inner + i];
      }
    }
  });
}

template <typename S>
TensorT<S> masked_max_rows(const TensorT<S>& x, const std::vector<std::int32_t>& counts,
                           std::vector<std::int32_t>* argmax) {
  if (x.rank() != 3) {
    throw InvariantError("masked_max_rows expects a K x T x C tensor");
  }
  const std::int64_t k = x.shape[0];
  const std::int64_t t = x.shape[1];
  const std::int64_t c = x.shape[2];
  if (static_cast<std::int64_t>(counts.size()) < k) {
    throw InvariantError("masked_max_rows: counts shorter than voxel rows");
  }
  TensorT<S> y({k, c});
  if (argmax) {
    argmax->assign(static_cast<std::size_t>(k * c), -1);
  }
  const S* xp = x.data.data();
  S* yp = y.data.data();
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t lo, std::size_t hi) {
    std::vector<std::int32_t> local(argmax ? c : 0);
    for (std::size_t vk = lo; vk < hi; ++vk) {
      const std::int32_t count = std::min<std::int32_t>(counts[vk], static_cast<std::int32_t>(t));
      S* yrow = yp + vk * c;
      if (count <= 0) {
        continue;  // zero-filled output, argmax stays -1
      }
      const S* voxel = xp + vk * t * c;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        yrow[ch] = voxel[ch];
      }
      std::fill(local.begin(), local.end(), 0);
      for (std::int32_t row = 1; row < count; ++row) {
        const S* xrow = voxel + static_cast<std::int64_t>(row) * c;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          if (xrow[ch] > yrow[ch]) {
            yrow[ch] = xrow[ch];
            if (argmax) {
              local[ch] = row;
            }
          }
        }
      }
      if (argmax) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          (*argmax)[vk * c + ch] = local[ch];
        }
      }
    }
  });
  return y;
}

template <typename S>
void masked_max_rows_backward(const TensorT<S>& grad_y, const std::vector<std::int32_t>& argmax,
                              std::int64_t t, TensorT<S>* grad_x) {
  const std::int64_t k = grad_y.shape[0];
  const std::int64_t c = grad_y.shape[1];
  const S* gp = grad_y.data.data();
  S* gx = grad_x->data.data();
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t vk = lo; vk < hi; ++vk) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const std::int32_t row = argmax[vk * c + ch];
        if (row >= 0) {
          gx[(vk * t + row) * c + ch] += gp[vk * c + ch];
        }
      }
    }
  });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x) {
  TensorT<S> y(x.shape);
  const S* xp = x.data.data();
  S* yp = y.data.data();
  const std::int64_t n = x.numel();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const S v = xp[i];
      if (v >= S(0)) {
        yp[i] = S(1) / (S(1) + std::exp(-v));
      } else {
        const S e = std::exp(v);
        yp[i] = e / (S(1) + e);
      }
    }
  });
  return y;
}

template <typename S>
TensorT<S> softmax2(const TensorT<S>& logits) {
  if (logits.rank() < 1 || logits.shape.front() != 2) {
    throw InvariantError("softmax2 expects a 2 x ... tensor");
  }
  const std::int64_t m = logits.numel() / 2;
  TensorT<S> y(logits.shape);
  const S* xp = logits.data.data();
  S* yp = y.data.data();
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const S a = xp[i];
      const S b = xp[m + i];
      const S mx = a > b ? a : b;
      const S ea = std::exp(a - mx);
      const S eb = std::exp(b - mx);
      const S sum = ea + eb;
      yp[i] = ea / sum;
      yp[m + i] = eb / sum;
    }
  });
  return y;
}

template <typename S>
void softmax2_backward(const TensorT<S>& y, const TensorT<S>& grad_y, TensorT<S>* grad_logits) {
  const std::int64_t m = y.numel() / 2;
  const S* yp = y.data.data();
  const S* gp = grad_y.data.data();
  S* gx = grad_logits->data.data();
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const S dot = gp[i] * yp[i] + gp[m + i] * yp[m + i];
      gx[i] += yp[i] * (gp[i] - dot);
      gx[m + i] += yp[m + i] * (gp[m + i] - dot);
    }
  });
}

template <typename S>
S bce_loss(S p, S target) {
  return -(target * std::log(p) + (S(1) - target) * std::log(S(1) - p));
}

template <typename S>
S bce_with_logits(S logit, S target) {
  const S mx = logit > S(0) ? logit : S(0);
  return mx - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

template <typename S>
S bce_with_logits_grad(S logit, S target) {
  S sig;
  if (logit >= S(0)) {
    sig = S(1) / (S(1) + std::exp(-logit));
  } else {
    const S e = std::exp(logit);
    sig = e / (S(1) + e);
  }
  return sig - target;
}

template <typename S>
S smooth_l1(S diff) {
  const S ad = std::abs(diff);
  return ad < S(1) ? S(0.5) * diff * diff : ad - S(0.5);
}

template <typename S>
S smooth_l1_grad(S diff) {
  if (diff > S(1)) {
    return S(1);
  }
  if (diff < S(-1)) {
    return S(-1);
  }
  return diff;
}

std::int64_t conv_out_extent(std::int64_t in, int k, int s, int p) {
  if (k < 1 || s < 1 || p < 0) {
    throw ConfigError("convolution kernel/stride/padding out of range");
  }
  const std::int64_t out = (in + 2 * p - k) / s + 1;
  if (in + 2 * p < k || out < 1) {
    throw ConfigError("convolution output extent is not positive");
  }
  return out;
}

std::int64_t deconv_out_extent(std::int64_t in, int k, int s, int p) {
  if (k < 1 || s < 1 || p < 0) {
    throw ConfigError("deconvolution kernel/stride/padding out of range");
  }
  const std::int64_t out = (in - 1) * s + k - 2 * p;
  if (out < 1) {
    throw ConfigError("deconvolution output extent is not positive");
  }
  return out;
}

template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                  const Conv2dSpec& spec) {
  if (x.rank() != 3 || w.rank() != 4 || x.shape[0] != w.shape[1]) {
    throw InvariantError("conv2d: input/weight shape mismatch");
  }
  const std::int64_t c_in = x.shape[0], h = x.shape[1], wdt = x.shape[2];
  const std::int64_t c_out = w.shape[0];
  const std::int64_t oh = conv_out_extent(h, spec.kh, spec.sh, spec.ph);
  const std::int64_t ow = conv_out_extent(wdt, spec.kw, spec.sw, spec.pw);
  TensorT<S> y({c_out, oh, ow});
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* bp = b.data.empty() ? nullptr : b.data.data();
  S* yp = y.data.data();
  parallel_for(static_cast<std::size_t>(c_out), [&](std::size_t lo_co, std::size_t hi_co) {
    for (std::size_t co = lo_co; co < hi_co; ++co) {
      S* ychan = yp + co * oh * ow;
      if (bp) {
        const S bias = bp[co];
        for (std::int64_t i = 0; i < oh * ow; ++i) {
          ychan[i] = bias;
        }
      }
      for (std::int64_t ci = 0; ci < c_in; ++ci) {
        const S* xchan = xp + ci * h * wdt;
        for (int kh = 0; kh < spec.kh; ++kh) {
          for (int kw = 0; kw < spec.kw; ++kw) {
            const S wv = wp[((co * c_in + ci) * spec.kh + kh) * spec.kw + kw];
            const std::int64_t base_w = kw - spec.pw;
            std::int64_t wlo, whi;
            stride_span(wdt, ow, spec.sw, base_w, wlo, whi);
            for (std::int64_t oy = 0; oy < oh; ++oy) {
              const std::int64_t iy = oy * spec.sh - spec.ph + kh;
              if (iy < 0 || iy >= h) {
                continue;
              }
              const S* xrow = xchan + iy * wdt + base_w;
              S* yrow = ychan + oy * ow;
              if (spec.sw == 1) {
                for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                  yrow[ox] += wv * xrow[ox];
                }
              } else {
                for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                  yrow[ox] += wv * xrow[ox * spec.sw];
                }
              }
            }
          }
        }
      }
    }
  });
  return y;
}

template <typename S>
void conv2d_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                     const Conv2dSpec& spec, TensorT<S>* grad_x, TensorT<S>* grad_w,
                     TensorT<S>* grad_b) {
  const std::int64_t c_in = x.shape[0], h = x.shape[1], wdt = x.shape[2];
  const std::int64_t c_out = grad_y.shape[0], oh = grad_y.shape[1], ow = grad_y.shape[2];
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* gp = grad_y.data.data();
  if (grad_b && !grad_b->data.empty()) {
    for (std::int64_t co = 0; co < c_out; ++co) {
      const S* gchan = gp + co * oh * ow;
      S acc = S(0);
      for (std::int64_t i = 0; i < oh * ow; ++i) {
        acc += gchan[i];
      }
      grad_b->data[co] += acc;
    }
  }
  if (grad_w) {
    S* gw = grad_w->data.data();
    parallel_for(static_cast<std::size_t>(c_out), [&](std::size_t lo_co, std::size_t hi_co) {
      for (std::size_t co = lo_co; co < hi_co; ++co) {
        const S* gchan = gp + co * oh * ow;
        for (std::int64_t ci = 0; ci < c_in; ++ci) {
          const S* xchan = xp + ci * h * wdt;
          for (int kh = 0; kh < spec.kh; ++kh) {
            for (int kw = 0; kw < spec.kw; ++kw) {
              const std::int64_t base_w = kw - spec.pw;
              std::int64_t wlo, whi;
              stride_span(wdt, ow, spec.sw, base_w, wlo, whi);
              S acc = S(0);
              for (std::int64_t oy = 0; oy < oh; ++oy) {
                const std::int64_t iy = oy * spec.sh - spec.ph + kh;
                if (iy < 0 || iy >= h) {
                  continue;
                }
                const S* xrow = xchan + iy * wdt + base_w;
                const S* grow = gchan + oy * ow;
                if (spec.sw == 1) {
                  for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                    acc += grow[ox] * xrow[ox];
                  }
                } else {
                  for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                    acc += grow[ox] * xrow[ox * spec.sw];
                  }
                }
              }
              gw[((co * c_in + ci) * spec.kh + kh) * spec.kw + kw] += acc;
            }
          }
        }
      }
    });
  }
  if (grad_x) {
    S* gx = grad_x->data.data();
    parallel_for(static_cast<std::size_t>(c_in), [&](std::size_t lo_ci, std::size_t hi_ci) {
      for (std::size_t ci = lo_ci; ci < hi_ci; ++ci) {
        S* gxchan = gx + ci * h * wdt;
        for (std::int64_t co = 0; co < c_out; ++co) {
          const S* gchan = gp + co * oh * ow;
          for (int kh = 0; kh < spec.kh; ++kh) {
            for (int kw = 0; kw < spec.kw; ++kw) {
              const S wv = wp[((co * c_in + ci) * spec.kh + kh) * spec.kw + kw];
              const std::int64_t base_w = kw - spec.pw;
              std::int64_t wlo, whi;
              stride_span(wdt, ow, spec.sw, base_w, wlo, whi);
              for (std::int64_t oy = 0; oy < oh; ++oy) {
                const std::int64_t iy = oy * spec.sh - spec.ph + kh;
                if (iy < 0 || iy >= h) {
                  continue;
                }
                S* gxrow = gxchan + iy * wdt + base_w;
                const S* grow = gchan + oy * ow;
                if (spec.sw == 1) {
                  for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                    gxrow[ox] += wv * grow[ox];
                  }
                } else {
                  for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                    gxrow[ox * spec.sw] += wv * grow[ox];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
}

template <typename S>
TensorT<S> conv3d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                  const Conv3dSpec& spec) {
  if (x.rank() != 4 || w.rank() != 5 || x.shape[0] != w.shape[1]) {
    throw InvariantError("conv3d: input/weight shape mismatch");
  }
  const std::int64_t c_in = x.shape[0], d = x.shape[1], h = x.shape[2], wdt = x.shape[3];
  const std::int64_t c_out = w.shape[0];
  const std::int64_t od = conv_out_extent(d, spec.kd, spec.sd, spec.pd);
  const std::int64_t oh = conv_out_extent(h, spec.kh, spec.sh, spec.ph);
  const std::int64_t ow = conv_out_extent(wdt, spec.kw, spec.sw, spec.pw);
  TensorT<S> y({c_out, od, oh, ow});
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* bp = b.data.empty() ? nullptr : b.data.data();
  S* yp = y.data.data();
  const std::int64_t x_dhw = d * h * wdt;
  const std::int64_t y_dhw = od * oh * ow;
  parallel_for(static_cast<std::size_t>(c_out), [&](std::size_t lo_co, std::size_t hi_co) {
    for (std::size_t co = lo_co; co < hi_co; ++co) {
      S* ychan = yp + co * y_dhw;
      if (bp) {
        const S bias = bp[co];
        for (std::int64_t i = 0; i < y_dhw; ++i) {
          ychan[i] = bias;
        }
      }
      for (std::int64_t ci = 0; ci < c_in; ++ci) {
        const S* xchan = xp + ci * x_dhw;
        for (int kd = 0; kd < spec.kd; ++kd) {
          for (int kh = 0; kh < spec.kh; ++kh) {
            for (int kw = 0; kw < spec.kw; ++kw) {
              const S wv =
                  wp[(((co * c_in + ci) * spec.kd + kd) * spec.kh + kh) * spec.kw + kw];
              const std::int64_t base_w = kw - spec.pw;
              std::int64_t wlo, whi;
              stride_span(wdt, ow, spec.sw, base_w, wlo, whi);
              for (std::int64_t oz = 0; oz < od; ++oz) {
                const std::int64_t iz = oz * spec.sd - spec.pd + kd;
                if (iz < 0 || iz >= d) {
                  continue;
                }
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                  const std::int64_t iy = oy * spec.sh - spec.ph + kh;
                  if (iy < 0 || iy >= h) {
                    continue;
                  }
                  const S* xrow = xchan + (iz * h + iy) * wdt + base_w;
                  S* yrow = ychan + (oz * oh + oy) * ow;
                  if (spec.sw == 1) {
                    for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                      yrow[ox] += wv * xrow[ox];
                    }
                  } else {
                    for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                      yrow[ox] += wv * xrow[ox * spec.sw];
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  });
  return y;
}

template <typename S>
void conv3d_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                     const Conv3dSpec& spec, TensorT<S>* grad_x, TensorT<S>* grad_w,
                     TensorT<S>* grad_b) {
  const std::int64_t c_in = x.shape[0], d = x.shape[1], h = x.shape[2], wdt = x.shape[3];
  const std::int64_t c_out = grad_y.shape[0], od = grad_y.shape[1], oh = grad_y.shape[2],
                     ow = grad_y.shape[3];
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* gp = grad_y.data.data();
  const std::int64_t x_dhw = d * h * wdt;
  const std::int64_t y_dhw = od * oh * ow;
  if (grad_b && !grad_b->data.empty()) {
    for (std::int64_t co = 0; co < c_out; ++co) {
      const S* gchan = gp + co * y_dhw;
      S acc = S(0);
      for (std::int64_t i = 0; i < y_dhw; ++i) {
        acc += gchan[i];
      }
      grad_b->data[co] += acc;
    }
  }
  if (grad_w) {
    S* gw = grad_w->data.data();
    parallel_for(static_cast<std::size_t>(c_out), [&](std::size_t lo_co, std::size_t hi_co) {
      for (std::size_t co = lo_co; co < hi_co; ++co) {
        const S* gchan = gp + co * y_dhw;
        for (std::int64_t ci = 0; ci < c_in; ++ci) {
          const S* xchan = xp + ci * x_dhw;
          for (int kd = 0; kd < spec.kd; ++kd) {
            for (int kh = 0; kh < spec.kh; ++kh) {
              for (int kw = 0; kw < spec.kw; ++kw) {
                const std::int64_t base_w = kw - spec.pw;
                std::int64_t wlo, whi;
                stride_span(wdt, ow, spec.sw, base_w, wlo, whi);
                S acc = S(0);
                for (std::int64_t oz = 0; oz < od; ++oz) {
                  const std::int64_t iz = oz * spec.sd - spec.pd + kd;
                  if (iz < 0 || iz >= d) {
                    continue;
                  }
                  for (std::int64_t oy = 0; oy < oh; ++oy) {
                    const std::int64_t iy = oy * spec.sh - spec.ph + kh;
                    if (iy < 0 || iy >= h) {
                      continue;
                    }
                    const S* xrow = xchan + (iz * h + iy) * wdt + base_w;
                    const S* grow = gchan + (oz * oh + oy) * ow;
                    if (spec.sw == 1) {
                      for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                        acc += grow[ox] * xrow[ox];
                      }
                    } else {
                      for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                        acc += grow[ox] * xrow[ox * spec.sw];
                      }
                    }
                  }
                }
                gw[(((co * c_in + ci) * spec.kd + kd) * spec.kh + kh) * spec.kw + kw] += acc;
              }
            }
          }
        }
      }
    });
  }
  if (grad_x) {
    S* gx = grad_x->data.data();
    parallel_for(static_cast<std::size_t>(c_in), [&](std::size_t lo_ci, std::size_t hi_ci) {
      for (std::size_t ci = lo_ci; ci < hi_ci; ++ci) {
        S* gxchan = gx + ci * x_dhw;
        for (std::int64_t co = 0; co < c_out; ++co) {
          const S* gchan = gp + co * y_dhw;
          for (int kd = 0; kd < spec.kd; ++kd) {
            for (int kh = 0; kh < spec.kh; ++kh) {
              for (int kw = 0; kw < spec.kw; ++kw) {
                const S wv =
                    wp[(((co * c_in + ci) * spec.kd + kd) * spec.kh + kh) * spec.kw + kw];
                const std::int64_t base_w = kw - spec.pw;
                std::int64_t wlo, whi;
                stride_span(wdt, ow, spec.sw, base_w, wlo, whi);
                for (std::int64_t oz = 0; oz < od; ++oz) {
                  const std::int64_t iz = oz * spec.sd - spec.pd + kd;
                  if (iz < 0 || iz >= d) {
                    continue;
                  }
                  for (std::int64_t oy = 0; oy < oh; ++oy) {
                    const std::int64_t iy = oy * spec.sh - spec.ph + kh;
                    if (iy < 0 || iy >= h) {
                      continue;
                    }
                    S* gxrow = gxchan + (iz * h + iy) * wdt + base_w;
                    const S* grow = gchan + (oz * oh + oy) * ow;
                    if (spec.sw == 1) {
                      for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                        gxrow[ox] += wv * grow[ox];
                      }
                    } else {
                      for (std::int64_t ox = wlo; ox <= whi; ++ox) {
                        gxrow[ox * spec.sw] += wv * grow[ox];
                      }
                    }
                  }
                }
              }
            }
          }
        }
      }
    });
  }
}

template <typename S>
TensorT<S> deconv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                    const Conv2dSpec& spec) {
  if (x.rank() != 3 || w.rank() != 4 || x.shape[0] != w.shape[0]) {
    throw InvariantError("deconv2d: input/weight shape mismatch");
  }
  const std::int64_t c_in = x.shape[0], h = x.shape[1], wdt = x.shape[2];
  const std::int64_t c_out = w.shape[1];
  const std::int64_t oh = deconv_out_extent(h, spec.kh, spec.sh, spec.ph);
  const std::int64_t ow = deconv_out_extent(wdt, spec.kw, spec.sw, spec.pw);
  TensorT<S> y({c_out, oh, ow});
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* bp = b.data.empty() ? nullptr : b.data.data();
  S* yp = y.data.data();
  parallel_for(static_cast<std::size_t>(c_out), [&](std::size_t lo_co, std::size_t hi_co) {
    for (std::size_t co = lo_co; co < hi_co; ++co) {
      S* ychan = yp + co * oh * ow;
      if (bp) {
        const S bias = bp[co];
        for (std::int64_t i = 0; i < oh * ow; ++i) {
          ychan[i] = bias;
        }
      }
      for (std::int64_t ci = 0; ci < c_in; ++ci) {
        const S* xchan = xp + ci * h * wdt;
        for (int kh = 0; kh < spec.kh; ++kh) {
          for (int kw = 0; kw < spec.kw; ++kw) {
            const S wv = wp[((ci * c_out + co) * spec.kh + kh) * spec.kw + kw];
            const std::int64_t base_w = kw - spec.pw;
            std::int64_t wlo, whi;
            stride_span(ow, wdt, spec.sw, base_w, wlo, whi);  // input cols with in-range output
            for (std::int64_t iy = 0; iy < h; ++iy) {
              const std::int64_t oy = iy * spec.sh - spec.ph + kh;
              if (oy < 0 || oy >= oh) {
                continue;
              }
              const S* xrow = xchan + iy * wdt;
              S* yrow = ychan + oy * ow + base_w;
              if (spec.sw == 1) {
                for (std::int64_t ix = wlo; ix <= whi; ++ix) {
                  yrow[ix] += wv * xrow[ix];
                }
              } else {
                for (std::int64_t ix = wlo; ix <= whi; ++ix) {
                  yrow[ix * spec.sw] += wv * xrow[ix];
                }
              }
            }
          }
        }
      }
    }
  });
  return y;
}

template <typename S>
void deconv2d_backward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& grad_y,
                       const Conv2dSpec& spec, TensorT<S>* grad_x, TensorT<S>* grad_w,
                       TensorT<S>* grad_b) {
  const std::int64_t c_in = x.shape[0], h = x.shape[1], wdt = x.shape[2];
  const std::int64_t c_out = grad_y.shape[0], oh = grad_y.shape[1], ow = grad_y.shape[2];
  const S* xp = x.data.data();
  const S* wp = w.data.data();
  const S* gp = grad_y.data.data();
  if (grad_b && !grad_b->data.empty()) {
    for (std::int64_t co = 0; co < c_out; ++co) {
      const S* gchan = gp + co * oh * ow;
      S acc = S(0);
      for (std::int64_t i = 0; i < oh * ow; ++i) {
        acc += gchan[i];
      }
      grad_b->data[co] += acc;
    }
  }
  if (grad_w) {
    S* gw = grad_w->data.data();
    parallel_for(static_cast<std::size_t>(c_in), [&](std::size_t lo_ci, std::size_t hi_ci) {
      for (std::size_t ci = lo_ci; ci < hi_ci; ++ci) {
        const S* xchan = xp + ci * h * wdt;
        for (std::int64_t co = 0; co < c_out; ++co) {
          const S* gchan = gp + co * oh * ow;
          for (int kh = 0; kh < spec.kh; ++kh) {
            for (int kw = 0; kw < spec.kw; ++kw) {
              const std::int64_t base_w = kw - spec.pw;
              std::int64_t wlo, whi;
              stride_span(ow, wdt, spec.sw, base_w, wlo, whi);
              S acc = S(0);
              for (std::int64_t iy = 0; iy < h; ++iy) {
                const std::int64_t oy = iy * spec.sh - spec.ph + kh;
                if (oy < 0 || oy >= oh) {
                  continue;
                }
                const S* xrow = xchan + iy * wdt;
                const S* grow = gchan + oy * ow + base_w;
                if (spec.sw == 1) {
                  for (std::int64_t ix = wlo; ix <= whi; ++ix) {
                    acc += xrow[ix] * grow[ix];
                  }
                } else {
                  for (std::int64_t ix = wlo; ix <= whi; ++ix) {
                    acc += xrow[ix] * grow[ix * spec.sw];
                  }
                }
              }
              gw[((ci * c_out + co) * spec.kh + kh) * spec.kw + kw] += acc;
            }
          }
        }
      }
    });
  }
  if (grad_x) {
    S* gx = grad_x->data.data();
    parallel_for(static_cast<std::size_t>(c_in), [&](std::size_t lo_ci, std::size_t hi_ci) {
      for (std::size_t ci = lo_ci; ci < hi_ci; ++ci) {
        S* gxchan = gx + ci * h * wdt;
        for (std::int64_t co = 0; co < c_out; ++co) {
          const S* gchan = gp + co * oh * ow;
          for (int kh = 0; kh < spec.kh; ++kh) {
            for (int kw = 0; kw < spec.kw; ++kw) {
              const S wv = wp[((ci * c_out + co) * spec.kh + kh) * spec.kw + kw];
              const std::int64_t base_w = kw - spec.pw;
              std::int64_t wlo, whi;
              stride_span(ow, wdt, spec.sw, base_w, wlo, whi);
              for (std::int64_t iy = 0; iy < h; ++iy) {
                const std::int64_t oy = iy * spec.sh - spec.ph + kh;
                if (oy < 0 || oy >= oh) {
                  continue;
                }
                S* gxrow = gxchan + iy * wdt;
                const S* grow = gchan + oy * ow + base_w;
                if (spec.sw == 1) {
                  for (std::int64_t ix = wlo; ix <= whi; ++ix) {
                    gxrow[ix] += wv * grow[ix];
                  }
                } else {
                  for (std::int64_t ix = wlo; ix <= whi; ++ix) {
                    gxrow[ix] += wv * grow[ix * spec.sw];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
}

#define VOXELPIPE_INSTANTIATE(S)                                                                  \
  template TensorT<S> linear<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&);         \
  template void linear_backward<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,      \
                                   TensorT<S>*, TensorT<S>*, TensorT<S>*);                       \
  template TensorT<S> batchnorm_rows<S>(const TensorT<S>&, BnParams<S>&, bool,                   \
                                        const std::vector<std::uint8_t>*, BnCache<S>*);          \
  template void batchnorm_rows_backward<S>(const TensorT<S>&, const BnParams<S>&,                \
                                           const BnCache<S>&, TensorT<S>*, TensorT<S>*,          \
                                           TensorT<S>*);                                         \
  template TensorT<S> batchnorm_spatial<S>(const TensorT<S>&, BnParams<S>&, bool, BnCache<S>*);  \
  template void batchnorm_spatial_backward<S>(const TensorT<S>&, const BnParams<S>&,             \
                                              const BnCache<S>&, TensorT<S>*, TensorT<S>*,       \
                                              TensorT<S>*);                                      \
  template TensorT<S> relu<S>(const TensorT<S>&);                                                \
  template void relu_backward<S>(const TensorT<S>&, const TensorT<S>&, TensorT<S>*);             \
  template TensorT<S> maxpool_over_axis<S>(const TensorT<S>&, int, std::vector<std::int32_t>*);  \
  template void maxpool_over_axis_backward<S>(const TensorT<S>&, const TensorT<S>&, int,         \
                                              const std::vector<std::int32_t>&, TensorT<S>*);    \
  template TensorT<S> masked_max_rows<S>(const TensorT<S>&, const std::vector<std::int32_t>&,    \
                                         std::vector<std::int32_t>*);                            \
  template void masked_max_rows_backward<S>(const TensorT<S>&, const std::vector<std::int32_t>&, \
                                            std::int64_t, TensorT<S>*);                          \
  template TensorT<S> sigmoid<S>(const TensorT<S>&);                                             \
  template TensorT<S> softmax2<S>(const TensorT<S>&);                                            \
  template void softmax2_backward<S>(const TensorT<S>&, const TensorT<S>&, TensorT<S>*);         \
  template S bce_loss<S>(S, S);                                                                  \
  template S bce_with_logits<S>(S, S);                                                           \
  template S bce_with_logits_grad<S>(S, S);                                                      \
  template S smooth_l1<S>(S);                                                                    \
  template S smooth_l1_grad<S>(S);                                                               \
  template TensorT<S> conv2d<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,         \
                                const Conv2dSpec&);                                              \
  template void conv2d_backward<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,      \
                                   const Conv2dSpec&, TensorT<S>*, TensorT<S>*, TensorT<S>*);    \
  template TensorT<S> conv3d<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,         \
                                const Conv3dSpec&);                                              \
  template void conv3d_backward<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,      \
                                   const Conv3dSpec&, TensorT<S>*, TensorT<S>*, TensorT<S>*);    \
  template TensorT<S> deconv2d<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,       \
                                  const Conv2dSpec&);                                            \
  template void deconv2d_backward<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,    \
                                     const Conv2dSpec&, TensorT<S>*, TensorT<S>*, TensorT<S>*);

VOXELPIPE_INSTANTIATE(float)
VOXELPIPE_INSTANTIATE(double)

#undef VOXELPIPE_INSTANTIATE

}  // namespace voxelpipe
