// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddmm/grid.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/trainer.hpp"

namespace ddmm {

enum class SamplerKind { kDdpm, kDdim };

std::string to_string(SamplerKind k);
SamplerKind sampler_kind_from_string(const std::string& s);

struct SamplerSettings {
  SamplerKind kind = SamplerKind::kDdpm;
  int ddim_steps = 10;
  double eta = 0.0;
  /// Share the per-step injected noise between the chains, not only x_T.
  bool shared_step_noise = true;
  bool clamp_x0 = true;
  int height = 32;
  int width = 32;
};

struct SamplePair {
  Grid image;      // [-1, 1]
  Grid mask_soft;  // raw mask-branch output
  Grid mask;       // {0, 1}, mask_soft >= 0
  std::uint64_t seed = 0;
  SamplerKind kind = SamplerKind::kDdpm;
  int steps_used = 0;
};

/// Evenly strided decreasing subsequence of [1, T] containing T and 1.
std::vector<int> ddim_timesteps(int t_max, int steps);

/// Joint sampling: one x_T from the sampler stream of `seed` feeds both chains.
SamplePair sample_pair(const DdmmModel& model, std::uint64_t seed, const SamplerSettings& settings);

/// Pair i uses seed base_seed + i. Runs in parallel; output is order-stable.
std::vector<SamplePair> sample_batch(const DdmmModel& model, std::uint64_t base_seed, std::size_t n,
                                     const SamplerSettings& settings);

Grid threshold_mask(const Grid& soft);

/// Agreement between sampled masks and the oracle segmentation of the sampled
/// images: matched is the mean Dice over (image_i, mask_i), shuffled the mean
/// over all mismatched (image_i, mask_j), i != j.
struct JointConsistency {
  double matched = 0.0;
  double shuffled = 0.0;
  double gap() const { return matched - shuffled; }
};

JointConsistency joint_consistency(const std::vector<SamplePair>& pairs, const PhantomConfig& cfg = {});

}  // namespace ddmm
