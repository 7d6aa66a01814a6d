// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/adam.hpp"

#include <cmath>

namespace ddmm {

bool OptimState::all_finite() const noexcept {
  auto fin = [](float x) { return std::isfinite(x); };
  return std::all_of(m.begin(), m.end(), fin) && std::all_of(v.begin(), v.end(), fin);
}

void adam_update(const AdamConfig& cfg, std::vector<float>& params, const std::vector<float>& grads,
                 OptimState& state) {
  require(params.size() == grads.size() && params.size() == state.m.size() &&
              params.size() == state.v.size(),
          "adam_update: parameter, gradient and moment sizes differ");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] = static_cast<float>(params[i] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

}  // namespace ddmm
