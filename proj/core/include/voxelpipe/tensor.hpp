#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "voxelpipe/errors.hpp"

namespace voxelpipe {

// Dense row-major n-dimensional array, the sole currency of the kernel
// engine. `grad` is allocated only for tensors that participate in
// optimization (parameters, and loss inputs during training).
template <typename S>
struct TensorT {
  std::vector<std::int64_t> shape;
  std::vector<S> data;
  std::vector<S> grad;  // empty, or same length as data

  TensorT() = default;
  explicit TensorT(std::vector<std::int64_t> shp) : shape(std::move(shp)) {
    data.assign(static_cast<std::size_t>(numel()), S(0));
  }
  TensorT(std::vector<std::int64_t> shp, std::vector<S> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (static_cast<std::int64_t>(data.size()) != numel())
      throw InvariantError("tensor: data length does not match shape");
  }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
  }

  int rank() const { return static_cast<int>(shape.size()); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }
  void zero_grad() {
    if (!grad.empty()) grad.assign(grad.size(), S(0));
  }

  S& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  template <typename T>
  TensorT<T> cast() const {
    TensorT<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename S>
TensorT<S> zeros_like(const TensorT<S>& t) {
  return TensorT<S>(t.shape);
}

}  // namespace voxelpipe
