// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

/// Layer primitives with hand-written reverse passes. Activations are
/// single-sample C x H x W buffers; parameter gradients accumulate (+=).
namespace ddmm::nn {

struct Shape {
  int c = 0, h = 0, w = 0;
  std::size_t size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
};

/// 3x3 convolution, stride 1, zero padding 1. weight is [cout, cin, 3, 3].
template <typename T>
void conv3x3_forward(std::span<const T> x, Shape in, std::span<const T> weight,
                     std::span<const T> bias, int cout, std::span<T> y);

/// dx may be empty when the input gradient is not needed.
template <typename T>
void conv3x3_backward(std::span<const T> x, Shape in, std::span<const T> weight, int cout,
                      std::span<const T> dy, std::span<T> dweight, std::span<T> dbias,
                      std::span<T> dx);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> rstd;
};

/// Group normalization with per-channel affine scale/shift.
template <typename T>
void group_norm_forward(std::span<const T> x, Shape s, int groups, std::span<const T> scale,
                        std::span<const T> shift, std::span<T> y, NormStats& stats,
                        double eps = 1e-5);

template <typename T>
void group_norm_backward(std::span<const T> x, Shape s, int groups, std::span<const T> scale,
                         const NormStats& stats, std::span<const T> dy, std::span<T> dscale,
                         std::span<T> dshift, std::span<T> dx);

/// x * sigmoid(x)
template <typename T>
void silu_forward(std::span<const T> x, std::span<T> y);

/// dx = dy * d/dx silu(x); dx may alias dy.
template <typename T>
void silu_backward(std::span<const T> x, std::span<const T> dy, std::span<T> dx);

/// y = W x + b, W is [out, in].
template <typename T>
void linear_forward(std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                    int out, std::span<T> y);

template <typename T>
void linear_backward(std::span<const T> x, std::span<const T> weight, int out,
                     std::span<const T> dy, std::span<T> dweight, std::span<T> dbias,
                     std::span<T> dx);

/// 2x2 average pooling; h and w must be even.
template <typename T>
void avgpool2_forward(std::span<const T> x, Shape in, std::span<T> y);
template <typename T>
void avgpool2_backward(Shape in, std::span<const T> dy, std::span<T> dx);

/// Nearest-neighbour 2x upsampling.
template <typename T>
void upsample2_forward(std::span<const T> x, Shape in, std::span<T> y);
template <typename T>
void upsample2_backward(Shape in, std::span<const T> dy, std::span<T> dx);

/// Sinusoidal embedding of an integer timestep: [sin(t f_k) ..., cos(t f_k) ...]
/// with geometric frequencies f_k = 10000^(-k / (dim/2)).
template <typename T>
void timestep_embedding(int t, int dim, std::span<T> out);

}  // namespace ddmm::nn
