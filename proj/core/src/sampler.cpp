// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/sampler.hpp"

#include <cmath>

#include "ddmm/kernel.hpp"
#include "ddmm/metrics.hpp"
#include "ddmm/parallel.hpp"
#include "ddmm/rng.hpp"

namespace ddmm {

std::string to_string(SamplerKind k) { return k == SamplerKind::kDdpm ? "ddpm" : "ddim"; }

SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "ddpm") return SamplerKind::kDdpm;
  if (s == "ddim") return SamplerKind::kDdim;
  throw ValidationError("unknown sampler '" + s + "' (expected ddpm or ddim)");
}

std::vector<int> ddim_timesteps(int t_max, int steps) {
  require(steps >= 1 && steps <= t_max,
          "ddim: steps must lie in [1, T] (got " + std::to_string(steps) + ")");
  std::vector<int> ts;
  if (steps == 1) return {t_max};
  for (int k = steps - 1; k >= 0; --k) {
    const double v = 1.0 + static_cast<double>(k) * (t_max - 1) / (steps - 1);
    ts.push_back(static_cast<int>(std::lround(v)));
  }
  for (std::size_t i = 1; i < ts.size(); ++i) {
    require(ts[i] < ts[i - 1], "ddim: timestep subsequence is not strictly decreasing");
  }
  return ts;
}

Grid threshold_mask(const Grid& soft) {
  Grid m = Grid::like(soft);
  for (std::size_t i = 0; i < soft.size(); ++i) m[i] = soft[i] >= 0.f ? 1.f : 0.f;
  return m;
}

SamplePair sample_pair(const DdmmModel& model, std::uint64_t seed, const SamplerSettings& st) {
  const NoiseSchedule& s = model.sched();
  if (!model.image_net.params().all_finite() || !model.mask_net.params().all_finite()) {
    throw NumericError("sample: model parameters contain non-finite values");
  }
  const int c = model.image_net.arch().in_channels;
  RngStream rng(seed, "sampler");
  Grid x_img = rng.normal_grid<float>(c, st.height, st.width);
  model.image_net.check_input(x_img);
  Grid x_mask = x_img;
  SamplePair out;
  out.seed = seed;
  out.kind = st.kind;

  auto draw_step_noise = [&](Grid& z_img, Grid& z_mask) {
    z_img = rng.normal_grid<float>(c, st.height, st.width);
    z_mask = st.shared_step_noise ? z_img : rng.normal_grid<float>(c, st.height, st.width);
  };

  if (st.kind == SamplerKind::kDdpm) {
    for (int t = s.t_max(); t >= 1; --t) {
      const Grid e_img = model.image_net.forward(x_img, t);
      const Grid e_mask = model.mask_net.forward(x_mask, t);
      Grid z_img, z_mask;
      if (t > 1) draw_step_noise(z_img, z_mask);
      x_img = kernel::ddpm_reverse_step(s, x_img, t, e_img, z_img, st.clamp_x0);
      x_mask = kernel::ddpm_reverse_step(s, x_mask, t, e_mask, z_mask, st.clamp_x0);
    }
    out.steps_used = s.t_max();
  } else {
    const std::vector<int> ts = ddim_timesteps(s.t_max(), st.ddim_steps);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const int t = ts[i];
      const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
      const Grid e_img = model.image_net.forward(x_img, t);
      const Grid e_mask = model.mask_net.forward(x_mask, t);
      Grid z_img, z_mask;
      if (st.eta > 0.0) draw_step_noise(z_img, z_mask);
      x_img = kernel::ddim_step(s, x_img, t, t_prev, e_img, st.eta, z_img, st.clamp_x0);
      x_mask = kernel::ddim_step(s, x_mask, t, t_prev, e_mask, st.eta, z_mask, st.clamp_x0);
    }
    out.steps_used = static_cast<int>(ts.size());
  }
  if (!x_img.all_finite() || !x_mask.all_finite()) {
    throw NumericError("sample: non-finite output for seed " + std::to_string(seed));
  }
  for (auto& v : x_img.values()) v = std::clamp(v, -1.f, 1.f);
  out.image = std::move(x_img);
  out.mask = threshold_mask(x_mask);
  out.mask_soft = std::move(x_mask);
  return out;
}

std::vector<SamplePair> sample_batch(const DdmmModel& model, std::uint64_t base_seed, std::size_t n,
                                     const SamplerSettings& settings) {
  require(n >= 1, "sample_batch: n must be >= 1");
  std::vector<SamplePair> pairs(n);
  parallel_for(n, [&](std::size_t i) { pairs[i] = sample_pair(model, base_seed + i, settings); });
  return pairs;
}

JointConsistency joint_consistency(const std::vector<SamplePair>& pairs, const PhantomConfig& cfg) {
  require(pairs.size() >= 2, "joint_consistency: need at least 2 pairs");
  const std::size_t n = pairs.size();
  std::vector<Grid> oracle(n);
  parallel_for(n, [&](std::size_t i) { oracle[i] = oracle_segment(pairs[i].image, cfg); });
  std::vector<double> matched(n), shuffled(n);
  parallel_for(n, [&](std::size_t i) {
    matched[i] = metrics::dice(pairs[i].mask, oracle[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) shuffled[i] += metrics::dice(pairs[j].mask, oracle[i]);
    }
    shuffled[i] /= static_cast<double>(n - 1);
  });
  JointConsistency r;
  for (std::size_t i = 0; i < n; ++i) {
    r.matched += matched[i];
    r.shuffled += shuffled[i];
  }
  r.matched /= static_cast<double>(n);
  r.shuffled /= static_cast<double>(n);
  return r;
}

}  // namespace ddmm
