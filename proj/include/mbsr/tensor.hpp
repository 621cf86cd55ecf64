#pragma once

#include <cstddef>
#include <vector>

#include "mbsr/error.hpp"

namespace mbsr {

/// Activation tensor in channel-major CNHW layout: all samples of channel 0,
/// then channel 1, ... A 3x3 convolution over a whole batch is then a single
/// (Cout x 9Cin) * (9Cin x NHW) matrix product.
template <typename T>
struct Tensor {
  std::size_t c = 0, n = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t c_, std::size_t n_, std::size_t h_, std::size_t w_, T fill = T{})
      : c(c_), n(n_), h(h_), w(w_), data(c_ * n_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return h * w; }
  /// Elements per channel (all samples).
  std::size_t channel_stride() const { return n * h * w; }

  T& at(std::size_t ci, std::size_t ni, std::size_t y, std::size_t x) { return data[((ci * n + ni) * h + y) * w + x]; }
  const T& at(std::size_t ci, std::size_t ni, std::size_t y, std::size_t x) const {
    return data[((ci * n + ni) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const { return c == o.c && n == o.n && h == o.h && w == o.w; }
};

}  // namespace mbsr
