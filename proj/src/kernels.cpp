#include "mbsr/kernels.hpp"

#include <cblas.h>

#include <algorithm>

namespace mbsr::kernels {

namespace {

using Index = std::ptrdiff_t;

void check_conv_shapes(std::size_t cin, std::size_t cout, std::size_t weights, std::size_t biases) {
  if (weights != cout * cin * 9) throw Error("conv3x3: weight size does not match channels");
  if (biases != cout) throw Error("conv3x3: bias size does not match output channels");
}

// Narrow convolutions (the single-channel tail) starve GEMM, so they run as
// direct shifted multiply-adds over image rows instead.
constexpr std::size_t kDirectMaxCout = 2;

// Valid output x range for horizontal tap offset kx.
inline void tap_range(int kx, std::size_t w, std::size_t& x0, std::size_t& x1) {
  x0 = kx < 0 ? 1 : 0;
  x1 = kx > 0 ? w - 1 : w;
}

template <typename T>
void direct_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, std::size_t cout,
                    Tensor<T>& out) {
  const std::size_t h = in.h, w = in.w;
#pragma omp parallel for schedule(static)
  for (Index task = 0; task < static_cast<Index>(cout * in.n); ++task) {
    const std::size_t co = static_cast<std::size_t>(task) / in.n, ni = static_cast<std::size_t>(task) % in.n;
    T* o = &out.at(co, ni, 0, 0);
    std::fill(o, o + h * w, bias[co]);
    for (std::size_t ci = 0; ci < in.c; ++ci) {
      const T* src = &in.at(ci, ni, 0, 0);
      for (int kk = 0; kk < 9; ++kk) {
        const int ky = kk / 3 - 1, kx = kk % 3 - 1;
        const T wv = weight[(co * in.c + ci) * 9 + static_cast<std::size_t>(kk)];
        std::size_t x0, x1;
        tap_range(kx, w, x0, x1);
        for (std::size_t y = 0; y < h; ++y) {
          const Index sy = static_cast<Index>(y) + ky;
          if (sy < 0 || sy >= static_cast<Index>(h)) continue;
          const T* s = src + static_cast<std::size_t>(sy) * w + kx;
          T* d = o + y * w;
          for (std::size_t x = x0; x < x1; ++x) d[x] += wv * s[x];
        }
      }
    }
  }
}

template <typename T>
void direct_backward(const Tensor<T>& in, const Tensor<T>& grad_out, std::span<const T> weight,
                     std::span<T> grad_weight, Tensor<T>* grad_in) {
  const std::size_t h = in.h, w = in.w, cout = grad_out.c;
#pragma omp parallel for schedule(static)
  for (Index task = 0; task < static_cast<Index>(cout * in.c * 9); ++task) {
    const std::size_t idx = static_cast<std::size_t>(task);
    const std::size_t co = idx / (in.c * 9), ci = (idx / 9) % in.c;
    const int kk = static_cast<int>(idx % 9), ky = kk / 3 - 1, kx = kk % 3 - 1;
    std::size_t x0, x1;
    tap_range(kx, w, x0, x1);
    T acc{};
    for (std::size_t ni = 0; ni < in.n; ++ni)
      for (std::size_t y = 0; y < h; ++y) {
        const Index sy = static_cast<Index>(y) + ky;
        if (sy < 0 || sy >= static_cast<Index>(h)) continue;
        const T* g = &grad_out.at(co, ni, y, 0);
        const T* s = &in.at(ci, ni, static_cast<std::size_t>(sy), 0) + kx;
        T row{};
#pragma omp simd reduction(+ : row)
        for (std::size_t x = x0; x < x1; ++x) row += g[x] * s[x];
        acc += row;
      }
    grad_weight[idx] += acc;
  }
  if (!grad_in) return;
  if (!grad_in->same_shape(in)) *grad_in = Tensor<T>(in.c, in.n, in.h, in.w);
#pragma omp parallel for schedule(static)
  for (Index task = 0; task < static_cast<Index>(in.c * in.n); ++task) {
    const std::size_t ci = static_cast<std::size_t>(task) / in.n, ni = static_cast<std::size_t>(task) % in.n;
    T* gi = &grad_in->at(ci, ni, 0, 0);
    std::fill(gi, gi + h * w, T{});
    for (std::size_t co = 0; co < cout; ++co) {
      const T* g = &grad_out.at(co, ni, 0, 0);
      for (int kk = 0; kk < 9; ++kk) {
        const int ky = kk / 3 - 1, kx = kk % 3 - 1;
        const T wv = weight[(co * in.c + ci) * 9 + static_cast<std::size_t>(kk)];
        std::size_t x0, x1;
        tap_range(kx, w, x0, x1);
        for (std::size_t y = 0; y < h; ++y) {
          const Index sy = static_cast<Index>(y) + ky;
          if (sy < 0 || sy >= static_cast<Index>(h)) continue;
          T* d = gi + static_cast<std::size_t>(sy) * w + kx;
          const T* gr = g + y * w;
          for (std::size_t x = x0; x < x1; ++x) d[x] += wv * gr[x];
        }
      }
    }
  }
}

}  // namespace

template <>
void gemm<float>(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                 std::size_t lda, const float* b, std::size_t ldb, float beta, float* c, std::size_t ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
              beta, c, static_cast<int>(ldc));
}

// Double precision only serves gradient checks. It runs as a plain loop
// because the dgemm kernel OpenBLAS 0.3.20 dispatches on Cooper Lake class
// CPUs returns wrong results for M >= 32 (sgemm is unaffected).
template <>
void gemm<double>(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < static_cast<Index>(m); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    double* ci = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) ci[j] = beta == 0.0 ? 0.0 : beta * ci[j];
    for (std::size_t q = 0; q < k; ++q) {
      const double av = alpha * (ta ? a[q * lda + i] : a[i * lda + q]);
      if (tb) {
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * b[j * ldb + q];
      } else {
        const double* bq = b + q * ldb;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bq[j];
      }
    }
  }
}

template <typename T>
void im2col3x3(const Tensor<T>& in, std::vector<T>& col) {
  const std::size_t h = in.h, w = in.w, plane = in.plane(), cols = in.channel_stride();
  // Every element is written below (zeros at the padded border), so the
  // buffer is only resized, never cleared.
  col.resize(in.c * 9 * cols);
#pragma omp parallel for schedule(static)
  for (Index row = 0; row < static_cast<Index>(in.c * 9); ++row) {
    const std::size_t ci = static_cast<std::size_t>(row) / 9;
    const int ky = static_cast<int>(row % 9) / 3 - 1;
    const int kx = static_cast<int>(row % 3) - 1;
    T* dst = col.data() + static_cast<std::size_t>(row) * cols;
    const T* src = in.data.data() + ci * cols;
    const std::size_t x0 = kx < 0 ? 1 : 0;
    const std::size_t x1 = kx > 0 ? w - 1 : w;
    for (std::size_t ni = 0; ni < in.n; ++ni)
      for (std::size_t y = 0; y < h; ++y) {
        T* d = dst + ni * plane + y * w;
        const Index sy = static_cast<Index>(y) + ky;
        if (sy < 0 || sy >= static_cast<Index>(h)) {
          std::fill(d, d + w, T{});
          continue;
        }
        const T* s = src + ni * plane + static_cast<std::size_t>(sy) * w;
        if (x0 == 1) d[0] = T{};
        if (x1 < w) d[w - 1] = T{};
        for (std::size_t x = x0; x < x1; ++x) d[x] = s[static_cast<Index>(x) + kx];
      }
  }
}

template <typename T>
void col2im3x3(const std::vector<T>& col, Tensor<T>& grad_in) {
  const std::size_t h = grad_in.h, w = grad_in.w, plane = grad_in.plane(), cols = grad_in.channel_stride();
  if (col.size() != grad_in.c * 9 * cols) throw Error("col2im: workspace size mismatch");
  std::fill(grad_in.data.begin(), grad_in.data.end(), T{});
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(grad_in.c); ++ci) {
    T* dst = grad_in.data.data() + static_cast<std::size_t>(ci) * cols;
    for (int kk = 0; kk < 9; ++kk) {
      const int ky = kk / 3 - 1, kx = kk % 3 - 1;
      const T* src = col.data() + (static_cast<std::size_t>(ci) * 9 + static_cast<std::size_t>(kk)) * cols;
      const std::size_t x0 = kx < 0 ? 1 : 0;
      const std::size_t x1 = kx > 0 ? w - 1 : w;
      for (std::size_t ni = 0; ni < grad_in.n; ++ni)
        for (std::size_t y = 0; y < h; ++y) {
          const Index sy = static_cast<Index>(y) + ky;
          if (sy < 0 || sy >= static_cast<Index>(h)) continue;
          T* d = dst + ni * plane + static_cast<std::size_t>(sy) * w;
          const T* s = src + ni * plane + y * w;
          for (std::size_t x = x0; x < x1; ++x) d[static_cast<Index>(x) + kx] += s[x];
        }
    }
  }
}

template <typename T>
void conv3x3_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, std::size_t cout,
                     Tensor<T>& out, std::vector<T>& col) {
  check_conv_shapes(in.c, cout, weight.size(), bias.size());
  const std::size_t cols = in.channel_stride(), k = in.c * 9;
  if (!(out.c == cout && out.n == in.n && out.h == in.h && out.w == in.w)) out = Tensor<T>(cout, in.n, in.h, in.w);
  if (cout <= kDirectMaxCout) return direct_forward(in, weight, bias, cout, out);
  im2col3x3(in, col);
  gemm<T>(false, false, cout, cols, k, T{1}, weight.data(), k, col.data(), cols, T{0}, out.data.data(), cols);
#pragma omp parallel for schedule(static)
  for (Index co = 0; co < static_cast<Index>(cout); ++co) {
    T* o = out.data.data() + static_cast<std::size_t>(co) * cols;
    const T b = bias[static_cast<std::size_t>(co)];
    for (std::size_t i = 0; i < cols; ++i) o[i] += b;
  }
}

template <typename T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& grad_out, std::span<const T> weight,
                      std::span<T> grad_weight, std::span<T> grad_bias, Tensor<T>* grad_in, std::vector<T>& col) {
  const std::size_t cout = grad_out.c, cols = in.channel_stride(), k = in.c * 9;
  check_conv_shapes(in.c, cout, weight.size(), grad_bias.size());
  if (grad_weight.size() != weight.size()) throw Error("conv3x3: gradient buffer size mismatch");
  if (grad_out.n != in.n || grad_out.h != in.h || grad_out.w != in.w) throw Error("conv3x3: gradient shape mismatch");

#pragma omp parallel for schedule(static)
  for (Index co = 0; co < static_cast<Index>(cout); ++co) {
    const T* g = grad_out.data.data() + static_cast<std::size_t>(co) * cols;
    T s{};
    for (std::size_t i = 0; i < cols; ++i) s += g[i];
    grad_bias[static_cast<std::size_t>(co)] += s;
  }
  if (cout <= kDirectMaxCout) return direct_backward(in, grad_out, weight, grad_weight, grad_in);

  im2col3x3(in, col);
  gemm<T>(false, true, cout, k, cols, T{1}, grad_out.data.data(), cols, col.data(), cols, T{1}, grad_weight.data(), k);
  if (grad_in) {
    gemm<T>(true, false, k, cols, cout, T{1}, weight.data(), k, grad_out.data.data(), cols, T{0}, col.data(), cols);
    if (!grad_in->same_shape(in)) *grad_in = Tensor<T>(in.c, in.n, in.h, in.w);
    col2im3x3(col, *grad_in);
  }
}

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& in, std::size_t r) {
  if (r == 0 || in.c % (r * r) != 0) throw Error("depth_to_space: channels not divisible by r^2");
  Tensor<T> out(in.c / (r * r), in.n, in.h * r, in.w * r);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(in.c); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci) / (r * r);
    const std::size_t dy = (static_cast<std::size_t>(ci) % (r * r)) / r;
    const std::size_t dx = static_cast<std::size_t>(ci) % r;
    for (std::size_t ni = 0; ni < in.n; ++ni)
      for (std::size_t y = 0; y < in.h; ++y)
        for (std::size_t x = 0; x < in.w; ++x)
          out.at(c, ni, r * y + dy, r * x + dx) = in.at(static_cast<std::size_t>(ci), ni, y, x);
  }
  return out;
}

template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& in, std::size_t r) {
  if (r == 0 || in.h % r != 0 || in.w % r != 0) throw Error("space_to_depth: spatial size not divisible by r");
  Tensor<T> out(in.c * r * r, in.n, in.h / r, in.w / r);
#pragma omp parallel for schedule(static)
  for (Index co = 0; co < static_cast<Index>(out.c); ++co) {
    const std::size_t c = static_cast<std::size_t>(co) / (r * r);
    const std::size_t dy = (static_cast<std::size_t>(co) % (r * r)) / r;
    const std::size_t dx = static_cast<std::size_t>(co) % r;
    for (std::size_t ni = 0; ni < in.n; ++ni)
      for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t x = 0; x < out.w; ++x)
          out.at(static_cast<std::size_t>(co), ni, y, x) = in.at(c, ni, r * y + dy, r * x + dx);
  }
  return out;
}

namespace reference {

template <typename T>
void conv3x3_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, std::size_t cout,
                     Tensor<T>& out) {
  check_conv_shapes(in.c, cout, weight.size(), bias.size());
  out = Tensor<T>(cout, in.n, in.h, in.w);
  const auto h = static_cast<Index>(in.h), w = static_cast<Index>(in.w);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ni = 0; ni < in.n; ++ni)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          T s = bias[co];
          for (std::size_t ci = 0; ci < in.c; ++ci)
            for (Index ky = 0; ky < 3; ++ky)
              for (Index kx = 0; kx < 3; ++kx) {
                const Index sy = y + ky - 1, sx = x + kx - 1;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                s += weight[((co * in.c + ci) * 3 + static_cast<std::size_t>(ky)) * 3 + static_cast<std::size_t>(kx)] *
                     in.at(ci, ni, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
              }
          out.at(co, ni, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
        }
}

template <typename T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& grad_out, std::span<const T> weight,
                      std::span<T> grad_weight, std::span<T> grad_bias, Tensor<T>* grad_in) {
  const std::size_t cout = grad_out.c;
  check_conv_shapes(in.c, cout, weight.size(), grad_bias.size());
  if (grad_in) *grad_in = Tensor<T>(in.c, in.n, in.h, in.w);
  const auto h = static_cast<Index>(in.h), w = static_cast<Index>(in.w);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ni = 0; ni < in.n; ++ni)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const T g = grad_out.at(co, ni, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          grad_bias[co] += g;
          for (std::size_t ci = 0; ci < in.c; ++ci)
            for (Index ky = 0; ky < 3; ++ky)
              for (Index kx = 0; kx < 3; ++kx) {
                const Index sy = y + ky - 1, sx = x + kx - 1;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                const std::size_t wi =
                    ((co * in.c + ci) * 3 + static_cast<std::size_t>(ky)) * 3 + static_cast<std::size_t>(kx);
                grad_weight[wi] += g * in.at(ci, ni, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
                if (grad_in) grad_in->at(ci, ni, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) += g * weight[wi];
              }
        }
}

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& in, std::size_t r) {
  if (r == 0 || in.c % (r * r) != 0) throw Error("depth_to_space: channels not divisible by r^2");
  Tensor<T> out(in.c / (r * r), in.n, in.h * r, in.w * r);
  for (std::size_t c = 0; c < out.c; ++c)
    for (std::size_t ni = 0; ni < out.n; ++ni)
      for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t x = 0; x < out.w; ++x)
          out.at(c, ni, y, x) = in.at(c * r * r + (y % r) * r + (x % r), ni, y / r, x / r);
  return out;
}

}  // namespace reference

#define MBSR_INSTANTIATE(T)                                                                                        \
  template void im2col3x3<T>(const Tensor<T>&, std::vector<T>&);                                                  \
  template void col2im3x3<T>(const std::vector<T>&, Tensor<T>&);                                                  \
  template void conv3x3_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, std::size_t,         \
                                   Tensor<T>&, std::vector<T>&);                                                  \
  template void conv3x3_backward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>, std::span<T>,         \
                                    std::span<T>, Tensor<T>*, std::vector<T>&);                                   \
  template Tensor<T> depth_to_space<T>(const Tensor<T>&, std::size_t);                                            \
  template Tensor<T> space_to_depth<T>(const Tensor<T>&, std::size_t);                                            \
  template void reference::conv3x3_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>,           \
                                              std::size_t, Tensor<T>&);                                           \
  template void reference::conv3x3_backward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>,            \
                                               std::span<T>, std::span<T>, Tensor<T>*);                           \
  template Tensor<T> reference::depth_to_space<T>(const Tensor<T>&, std::size_t);

MBSR_INSTANTIATE(float)
MBSR_INSTANTIATE(double)

#undef MBSR_INSTANTIATE

}  // namespace mbsr::kernels
