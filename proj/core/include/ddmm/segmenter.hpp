// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ddmm/adam.hpp"
#include "ddmm/denoiser.hpp"
#include "ddmm/grid.hpp"

namespace ddmm {

/// Denoiser family without time conditioning; one channel of logits.
using SegNet = UNet<float>;

UNetArch default_seg_arch();

/// Image in model space [-1, 1], mask in {0, 1}.
struct SegPair {
  Grid image;
  Grid mask;
  std::string name;
};

struct SegTrainConfig {
  UNetArch arch = default_seg_arch();
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 11;

  void validate() const;
};

struct SegEpoch {
  int epoch = 0;
  double loss = 0.0;  // mean BCE over the epoch's batches
};

struct SegTrainResult {
  SegNet net;
  OptimState opt;
  std::vector<SegEpoch> losses;
};

/// Mean per-pixel binary cross-entropy on logits, numerically stable form.
double bce_with_logits(const Grid& logits, const Grid& target01);
/// d(bce)/d(logits) = (sigmoid(z) - y) / N.
Grid bce_with_logits_grad(const Grid& logits, const Grid& target01);

/// Plain minibatch Adam on BCE; no augmentation. Deterministic in cfg.seed.
SegTrainResult train_segmenter(const std::vector<SegPair>& pairs, const SegTrainConfig& cfg);

/// sigmoid(z) >= 0.5, so a zero logit is foreground.
Grid logits_to_mask(const Grid& logits);

struct SegRow {
  std::string name;
  double dice = 0.0;
  double rand = 0.0;
};

struct SegEvaluation {
  double dice_mean = 0.0;
  double rand_mean = 0.0;
  std::vector<SegRow> rows;

  void write_csv(const std::string& path) const;
};

using LogitFn = std::function<Grid(const Grid&)>;

SegEvaluation evaluate_segmenter(const LogitFn& predict, const std::vector<SegPair>& test_set);
SegEvaluation evaluate_segmenter(const SegNet& net, const std::vector<SegPair>& test_set);

}  // namespace ddmm
