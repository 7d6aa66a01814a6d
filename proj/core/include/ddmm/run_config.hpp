// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ddmm/denoiser.hpp"
#include "ddmm/metrics.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/sampler.hpp"
#include "ddmm/schedule.hpp"
#include "ddmm/segmenter.hpp"
#include "ddmm/trainer.hpp"

namespace ddmm {

/// Everything a run needs, read from an INI-style file:
///
///   # comment
///   [section]
///   key = value
///
/// Ranges are written "lo, hi". Unknown sections or keys are errors.
struct RunConfig {
  // [data]
  PhantomConfig phantom;
  int n_labeled = 200;
  int n_unlabeled = 2000;
  /// Held-out labeled-style images used as the real set for image metrics.
  int n_reference = 200;

  // [model]
  UNetArch arch;
  ScheduleKind schedule = ScheduleKind::kCosine;
  int timesteps = 100;
  double cosine_offset = 0.008;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::uint64_t init_seed = 0;

  // [train]
  TrainConfig train;
  /// Write a resumable checkpoint every N epochs (0 = only at the end).
  int checkpoint_every = 10;

  // [sampler]
  SamplerSettings sampler;
  std::uint64_t sample_seed = 1000;
  int n_samples = 200;

  // [metrics]
  metrics::MetricSettings metrics;

  // [segmenter]
  SegTrainConfig seg;

  // [paths]; command-line flags take precedence
  std::string data_dir;
  std::string checkpoint;
  std::string real_dir;
  std::string fake_dir;
  std::string pairs_dir;
  std::string segnet;
  std::string test_dir;

  NoiseSchedule make_schedule() const;
  void validate() const;

  /// Fully resolved configuration in the input format; parses back to an equal config.
  std::string to_text() const;
};

/// Throws ValidationError naming the line for syntax errors, unknown keys and bad values.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ddmm
