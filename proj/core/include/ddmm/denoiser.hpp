// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ddmm/grid.hpp"

namespace ddmm {

/// UNet architecture descriptor. With time_conditioned = false the same
/// family serves as the downstream segmentation network.
struct UNetArch {
  int in_channels = 1;
  int out_channels = 1;
  int base_channels = 32;
  int depth = 2;
  int time_embed_dim = 64;
  int norm_groups = 8;
  bool time_conditioned = true;

  void validate() const;
  /// Channel width at encoder stage i (stage `depth` is the bottleneck).
  int stage_channels(int i) const { return base_channels << i; }

  friend bool operator==(const UNetArch&, const UNetArch&) = default;
};

struct ParamEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

using ParamLayout = std::vector<ParamEntry>;

/// One flat tensor per network, shape-matched to a layout.
template <typename T>
struct ParamBuffer {
  std::shared_ptr<const ParamLayout> layout;
  std::vector<T> values;

  std::size_t size() const noexcept { return values.size(); }
  bool all_finite() const noexcept;
  void set_zero() { std::fill(values.begin(), values.end(), T(0)); }
  /// this += scale * other
  void add_scaled(const ParamBuffer& other, T scale);
};

template <typename T>
using GradientSet = ParamBuffer<T>;

/// Epsilon-prediction UNet: sinusoidal timestep embedding with a two-layer
/// projection, `depth` encoder stages (two conv/groupnorm/SiLU units with
/// additive time injection, then 2x average pooling), a bottleneck, and a
/// mirrored decoder with nearest upsampling and skip concatenation.
template <typename T>
class UNet {
 public:
  /// Fan-in scaled uniform kernels, unit norm scales, zero shifts and biases,
  /// zero final convolution.
  static UNet init(const UNetArch& arch, std::uint64_t seed, std::uint64_t substream = 0);
  /// Parameters in layout order; used by checkpoint loading and casts.
  static UNet from_values(const UNetArch& arch, std::vector<T> values);

  template <typename U>
  UNet<U> cast() const {
    std::vector<U> v(params_.values.begin(), params_.values.end());
    return UNet<U>::from_values(arch_, std::move(v));
  }

  const UNetArch& arch() const noexcept { return arch_; }
  const ParamLayout& layout() const noexcept { return *params_.layout; }
  const ParamBuffer<T>& params() const noexcept { return params_; }
  ParamBuffer<T>& mutable_params() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  GradientSet<T> zero_gradients() const;

  /// Throws ValidationError for shapes the architecture cannot take.
  void check_input(const BasicGrid<T>& x) const;

  /// t is ignored when the network is not time conditioned.
  BasicGrid<T> forward(const BasicGrid<T>& x, int t) const;

  /// Recomputes the forward pass and accumulates d(loss)/d(params) into grads.
  /// Returns the forward output.
  BasicGrid<T> forward_backward(const BasicGrid<T>& x, int t,
                                const std::function<BasicGrid<T>(const BasicGrid<T>&)>& loss_grad,
                                GradientSet<T>& grads) const;

  /// Exact parameter gradients for a given output gradient.
  GradientSet<T> backward(const BasicGrid<T>& x, int t, const BasicGrid<T>& dout) const;

  struct Index;

 private:
  UNet(const UNetArch& arch, ParamBuffer<T> params);
  struct Tape;
  BasicGrid<T> run_forward(const BasicGrid<T>& x, int t, Tape* tape) const;
  void run_backward(const Tape& tape, const BasicGrid<T>& dout, GradientSet<T>& grads) const;

  UNetArch arch_;
  ParamBuffer<T> params_;
  std::shared_ptr<const Index> index_;
};

using DenoiserNet = UNet<float>;

/// Builds the parameter layout for an architecture (names, shapes, offsets).
ParamLayout make_layout(const UNetArch& arch);

}  // namespace ddmm
