// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "ddmm/denoiser.hpp"

namespace ddmm {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam first/second moments for one parameter buffer.
struct OptimState {
  std::vector<float> m;
  std::vector<float> v;
  std::int64_t step = 0;

  static OptimState for_size(std::size_t n) { return {std::vector<float>(n, 0.f), std::vector<float>(n, 0.f), 0}; }
  bool all_finite() const noexcept;
  friend bool operator==(const OptimState&, const OptimState&) = default;
};

/// One bias-corrected Adam update. Zero gradients leave parameters unchanged.
void adam_update(const AdamConfig& cfg, std::vector<float>& params, const std::vector<float>& grads,
                 OptimState& state);

}  // namespace ddmm
