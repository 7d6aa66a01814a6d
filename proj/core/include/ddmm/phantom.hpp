// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddmm/grid.hpp"
#include "ddmm/trainer.hpp"

namespace ddmm {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

/// Procedural radiograph-like phantom: bright body ellipse on a dark
/// background, two dark lung ellipses, brighter sinusoidal rib bands and
/// Gaussian pixel noise. Geometry is given as fractions of `size`.
struct PhantomConfig {
  int size = 32;
  Range body_axis_x{0.40, 0.46};
  Range body_axis_y{0.44, 0.48};
  Range lung_axis_x{0.10, 0.15};
  Range lung_axis_y{0.20, 0.28};
  Range lung_offset_x{0.17, 0.22};
  Range lung_offset_y{-0.04, 0.04};
  Range lung_rotation{-0.15, 0.15};
  double level_background = 0.0;
  double level_lung = 0.25;
  double level_body = 0.75;
  double rib_delta = 0.12;
  int rib_min = 3;
  int rib_max = 6;
  double noise_sigma = 0.03;
  std::uint64_t seed = 0;
  /// Style shift applied to the unlabeled pool.
  Range unlabeled_axis_scale{0.85, 1.2};
  double unlabeled_noise_scale = 1.5;

  /// depth: denoiser depth the size must be compatible with.
  void validate(int depth = 2) const;
  /// Wider eccentricity and noise ranges used for the unlabeled pool.
  PhantomConfig unlabeled_variant() const;
  /// Raw intensity [0, 1] to model space [-1, 1].
  static double to_model(double level) { return 2.0 * level - 1.0; }
};

struct Phantom {
  Grid image;  // [-1, 1]
  Grid mask;   // {0, 1}
  Grid body;   // {0, 1} body silhouette
};

/// Deterministic in (cfg.seed, index).
Phantom generate_phantom(const PhantomConfig& cfg, std::uint64_t index);

/// {0, 1} -> {-1, +1}
Grid to_model_mask(const Grid& mask01);
/// {-1, +1} (or any real) -> {0, 1} by sign, >= 0 is foreground.
Grid from_model_mask(const Grid& model_mask);

struct DatasetSplit {
  std::vector<LabeledPair> labeled_train;
  std::vector<LabeledPair> labeled_test;
  std::vector<Grid> unlabeled;
  std::vector<std::uint64_t> train_indices;
  std::vector<std::uint64_t> test_indices;
  std::vector<std::uint64_t> unlabeled_indices;
};

/// Indices [0, n_labeled) are labeled and split 80:20 by a seeded shuffle;
/// [n_labeled, n_labeled + n_unlabeled) use the unlabeled style variant.
DatasetSplit make_splits(const PhantomConfig& cfg, int n_labeled, int n_unlabeled);

/// Number of training items for an 80:20 split of n.
int train_count(int n);

/// Images/masks loaded from a folder; masks in model space.
struct FolderDataset {
  std::vector<std::string> names;  // file stems, lexicographic
  std::vector<Grid> images;
  std::vector<Grid> masks;  // empty when no mask folder
};

/// Pairs files by stem; center-crops to square and resizes to `size`.
FolderDataset ingest_folder(const std::filesystem::path& image_dir,
                            const std::optional<std::filesystem::path>& mask_dir, int size);

/// Ground-truth rule: threshold between lung and body levels inside the body
/// silhouette, keep the two largest 4-connected components. Returns {0, 1}.
Grid oracle_segment(const Grid& image, const PhantomConfig& cfg = {});

/// Fraction of foreground pixels in a {0, 1} mask.
double foreground_fraction(const Grid& mask01);

}  // namespace ddmm
