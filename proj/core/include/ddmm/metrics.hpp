// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ddmm/grid.hpp"

namespace ddmm::metrics {

/// Rows are samples, columns are feature dimensions.
using FeatureMatrix = Eigen::MatrixXd;

// Pairwise image metrics. Inputs are model-space grids in [-1, 1], remapped to
// [0, 1] before evaluation. Windows are 7x7 (clipped to the image size), valid
// positions only, with population statistics.
template <typename T>
double ssim(const BasicGrid<T>& a, const BasicGrid<T>& b);
/// SSIM without stabilizers; windows with a zero denominator are skipped and
/// 0 is returned when no window is defined.
template <typename T>
double uqi(const BasicGrid<T>& a, const BasicGrid<T>& b);
/// Pearson correlation of 3x3 Laplacian responses; 0 when either response is constant.
template <typename T>
double scc(const BasicGrid<T>& a, const BasicGrid<T>& b);

/// 3x3 Laplacian [0 1 0; 1 -4 1; 0 1 0] over the valid region, per channel.
std::vector<double> laplacian(const GridD& g);
/// Pearson correlation; 0 when either side has zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;
constexpr int kWindow = 7;

/// Fixed random convolutional embedding standing in for a pretrained network:
/// three conv3x3 + ReLU stages (16, 32, 64 channels) with 2x average pooling
/// between them, then global average pooling to 64 features.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  static constexpr int kDim = 64;

  /// Height and width must be divisible by 4.
  Eigen::VectorXd features(const Grid& image) const;
  FeatureMatrix features(const std::vector<Grid>& images) const;

 private:
  struct Stage {
    int cin = 0, cout = 0;
    std::vector<float> weight;
    std::vector<float> bias;
  };
  std::uint64_t seed_;
  std::vector<Stage> stages_;
};

/// Frechet distance between Gaussian fits of the two feature sets.
double fid(const FeatureMatrix& real, const FeatureMatrix& fake);
/// Frechet distance between N(mu1, s1) and N(mu2, s2).
double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1,
                        const Eigen::VectorXd& mu2, const Eigen::MatrixXd& s2);

/// Unbiased squared MMD with kernel (x.y/d + 1)^3 on one pair of sets.
double mmd2_unbiased(const FeatureMatrix& x, const FeatureMatrix& y);
/// Averaged over min(n/100, 10) seeded subsets of 100 when both sides have at
/// least 200 rows, else one full-set estimate.
double kid(const FeatureMatrix& real, const FeatureMatrix& fake, std::uint64_t seed = 0);

/// 2|A and B| / (|A| + |B|); both empty gives 1. Inputs must be {0, 1}.
template <typename T>
double dice(const BasicGrid<T>& a, const BasicGrid<T>& b);

/// Rand index between the two foreground/background partitions, from the
/// 2x2 contingency table. adjusted = true gives the chance-corrected index.
template <typename T>
double rand_score(const BasicGrid<T>& a, const BasicGrid<T>& b, bool adjusted = false);

struct MetricSettings {
  std::uint64_t extractor_seed = 0;
  std::uint64_t kid_seed = 0;
  std::uint64_t pairing_seed = 0;
  int max_pairs = 1000;
};

struct QualityReport {
  double fid = 0.0;
  double kid = 0.0;
  double ssim_mean = 0.0;
  double uqi_mean = 0.0;
  double scc_mean = 0.0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::size_t n_pairs = 0;
};

/// FID/KID over full sets; SSIM/UQI/SCC averaged over a seeded random matching
/// of min(n_real, n_fake, max_pairs) real/fake pairs.
QualityReport evaluate_quality(const std::vector<Grid>& real, const std::vector<Grid>& fake,
                               const MetricSettings& settings = {});

void write_quality_csv(const std::string& path, const QualityReport& r, const MetricSettings& settings);

}  // namespace ddmm::metrics
