// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/schedule.hpp"

#include <cmath>
#include <numbers>

#include "ddmm/errors.hpp"

namespace ddmm {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kCosine ? "cosine" : "linear";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "cosine") return ScheduleKind::kCosine;
  if (s == "linear") return ScheduleKind::kLinear;
  throw ValidationError("unknown schedule kind '" + s + "' (expected cosine or linear)");
}

NoiseSchedule NoiseSchedule::cosine(int t_max, double offset, double beta_cap) {
  require(t_max >= 2, "cosine schedule: t_max must be >= 2");
  require(offset > 0.0, "cosine schedule: offset must be positive");
  require(beta_cap > 0.0 && beta_cap < 1.0, "cosine schedule: beta_cap must lie in (0, 1)");
  const auto f = [&](double t) {
    const double c = std::cos((t / t_max + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> betas(static_cast<std::size_t>(t_max));
  double prev = 1.0;
  for (int t = 1; t <= t_max; ++t) {
    const double ab = f(t) / f0;
    betas[t - 1] = std::min(1.0 - ab / prev, beta_cap);
    prev = ab;
  }
  return NoiseSchedule(ScheduleKind::kCosine, std::move(betas));
}

NoiseSchedule NoiseSchedule::linear(int t_max, double beta_start, double beta_end) {
  require(t_max >= 1, "linear schedule: t_max must be >= 1");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "linear schedule: need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(t_max));
  for (int i = 0; i < t_max; ++i) {
    const double w = t_max == 1 ? 0.0 : static_cast<double>(i) / (t_max - 1);
    betas[i] = beta_start + (beta_end - beta_start) * w;
  }
  return NoiseSchedule(ScheduleKind::kLinear, std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(ScheduleKind kind, std::vector<double> betas) {
  require(!betas.empty(), "schedule: empty beta sequence");
  return NoiseSchedule(kind, std::move(betas));
}

NoiseSchedule::NoiseSchedule(ScheduleKind kind, std::vector<double> betas)
    : kind_(kind), betas_(std::move(betas)) {
  const std::size_t n = betas_.size();
  alphas_.resize(n);
  alpha_bars_.resize(n);
  posterior_variances_.resize(n);
  double ab_prev = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = betas_[i];
    if (!std::isfinite(b) || b <= 0.0 || b >= 1.0) {
      throw ValidationError("schedule: beta_" + std::to_string(i + 1) + " = " +
                            std::to_string(b) + " outside (0, 1)");
    }
    alphas_[i] = 1.0 - b;
    alpha_bars_[i] = ab_prev * alphas_[i];
    posterior_variances_[i] = b * (1.0 - ab_prev) / (1.0 - alpha_bars_[i]);
    if (!std::isfinite(alpha_bars_[i]) || !std::isfinite(posterior_variances_[i]) ||
        !(alpha_bars_[i] < ab_prev) || alpha_bars_[i] <= 0.0) {
      throw ValidationError("schedule: non-finite or non-decreasing coefficients at t=" +
                            std::to_string(i + 1));
    }
    ab_prev = alpha_bars_[i];
  }
}

void NoiseSchedule::check_timestep(int t) const {
  if (t < 1 || t > t_max()) {
    throw ValidationError("timestep " + std::to_string(t) + " outside [1, " +
                          std::to_string(t_max()) + "]");
  }
}

std::size_t NoiseSchedule::index(int t) const {
  check_timestep(t);
  return static_cast<std::size_t>(t - 1);
}

}  // namespace ddmm
