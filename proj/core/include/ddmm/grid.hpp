// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ddmm/errors.hpp"

namespace ddmm {

/// Dense channels x height x width array, row-major (channel, row, column).
/// Value-semantic: copies are deep.
template <typename T>
class BasicGrid {
 public:
  using value_type = T;

  BasicGrid() = default;
  BasicGrid(int channels, int height, int width, T fill = T(0))
      : channels_(channels), height_(height), width_(width) {
    require(channels > 0 && height > 0 && width > 0, "grid dimensions must be positive");
    values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  static BasicGrid like(const BasicGrid& other, T fill = T(0)) {
    return BasicGrid(other.channels_, other.height_, other.width_, fill);
  }

  template <typename U>
  static BasicGrid cast(const BasicGrid<U>& other) {
    BasicGrid g(other.channels(), other.height(), other.width());
    std::transform(other.values().begin(), other.values().end(), g.values_.begin(),
                   [](U v) { return static_cast<T>(v); });
    return g;
  }

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return values_.empty(); }

  bool same_shape(const BasicGrid& o) const noexcept {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  T& operator()(int c, int y, int x) noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  T operator()(int c, int y, int x) const noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  T& operator[](std::size_t i) noexcept { return values_[i]; }
  T operator[](std::size_t i) const noexcept { return values_[i]; }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  std::string shape_string() const {
    return std::to_string(channels_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
  }

  friend bool operator==(const BasicGrid& a, const BasicGrid& b) {
    return a.same_shape(b) && a.values_ == b.values_;
  }

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

/// Model-space grid used for training and sampling.
using Grid = BasicGrid<float>;
/// 64-bit grid used by exactness tests and gradient verification.
using GridD = BasicGrid<double>;

template <typename T>
inline void require_same_shape(const BasicGrid<T>& a, const BasicGrid<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                          b.shape_string());
  }
}

}  // namespace ddmm
