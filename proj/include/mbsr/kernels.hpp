#pragma once

// Convolution and rearrangement kernels of the SR network.
//
// The production kernels lower 3x3 "same" convolutions to im2col + GEMM with
// OpenMP over channels; every output element is produced by exactly one
// thread, so results do not depend on the thread count. The `reference`
// namespace holds straight-loop serial versions used as test oracles and
// benchmark baselines.

#include <span>
#include <vector>

#include "mbsr/tensor.hpp"

namespace mbsr::kernels {

/// Row-major C = alpha op(A) op(B) + beta C.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

/// col is (9 C) x (N H W); row index ci * 9 + ky * 3 + kx.
template <typename T>
void im2col3x3(const Tensor<T>& in, std::vector<T>& col);

/// Adjoint of im2col3x3; overwrites grad_in (shape must be preset).
template <typename T>
void col2im3x3(const std::vector<T>& col, Tensor<T>& grad_in);

/// weight is Cout x Cin x 3 x 3, zero padding, stride 1.
template <typename T>
void conv3x3_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, std::size_t cout,
                     Tensor<T>& out, std::vector<T>& col);

/// Accumulates into grad_weight / grad_bias; overwrites *grad_in when given.
template <typename T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& grad_out, std::span<const T> weight,
                      std::span<T> grad_weight, std::span<T> grad_bias, Tensor<T>* grad_in, std::vector<T>& col);

/// (r^2 C) x N x H x W -> C x N x rH x rW, input channel c r^2 + dy r + dx
/// feeds output pixel (r y + dy, r x + dx) of channel c.
template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& in, std::size_t r);

/// Exact inverse (and adjoint) of depth_to_space.
template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& in, std::size_t r);

namespace reference {

template <typename T>
void conv3x3_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, std::size_t cout,
                     Tensor<T>& out);

template <typename T>
void conv3x3_backward(const Tensor<T>& in, const Tensor<T>& grad_out, std::span<const T> weight,
                      std::span<T> grad_weight, std::span<T> grad_bias, Tensor<T>* grad_in);

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& in, std::size_t r);

}  // namespace reference

}  // namespace mbsr::kernels
