// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ddmm {

enum class ScheduleKind : std::uint8_t { kCosine = 0, kLinear = 1 };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

/// Noise schedule beta_1..beta_T with every derived per-step coefficient.
/// Public timesteps are 1-based; alpha_bar(0) is defined as 1. Immutable after
/// construction, stored in 64-bit.
class NoiseSchedule {
 public:
  /// Squared-cosine alpha-bar profile with offset s, betas clipped to beta_cap.
  static NoiseSchedule cosine(int t_max, double offset = 0.008, double beta_cap = 0.999);
  static NoiseSchedule linear(int t_max, double beta_start, double beta_end);
  /// Rebuild from stored betas (checkpoint load). Derived sequences recomputed.
  static NoiseSchedule from_betas(ScheduleKind kind, std::vector<double> betas);

  ScheduleKind kind() const noexcept { return kind_; }
  int t_max() const noexcept { return static_cast<int>(betas_.size()); }

  double beta(int t) const { return betas_.at(index(t)); }
  double alpha(int t) const { return alphas_.at(index(t)); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_.at(index(t)); }
  double posterior_variance(int t) const { return posterior_variances_.at(index(t)); }

  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }
  const std::vector<double>& posterior_variances() const noexcept { return posterior_variances_; }

  /// Throws ValidationError unless 1 <= t <= T.
  void check_timestep(int t) const;

  friend bool operator==(const NoiseSchedule& a, const NoiseSchedule& b) {
    return a.kind_ == b.kind_ && a.betas_ == b.betas_;
  }

 private:
  NoiseSchedule(ScheduleKind kind, std::vector<double> betas);
  std::size_t index(int t) const;

  ScheduleKind kind_ = ScheduleKind::kCosine;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> posterior_variances_;
};

}  // namespace ddmm
