// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "ddmm/metrics.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/rng.hpp"
#include "oracles.hpp"

namespace ddmm {
namespace {

using namespace metrics;

GridD uniform_grid(RngStream& r, int h, int w) {
  GridD g(1, h, w);
  for (auto& v : g.values()) v = r.uniform(-1.0, 1.0);
  return g;
}

GridD mask4(int bits) {
  GridD g(1, 2, 2);
  for (int i = 0; i < 4; ++i) g[static_cast<std::size_t>(i)] = (bits >> i) & 1;
  return g;
}

std::vector<int> bits4(int bits) {
  std::vector<int> v(4);
  for (int i = 0; i < 4; ++i) v[static_cast<std::size_t>(i)] = (bits >> i) & 1;
  return v;
}

TEST(Ssim, IdenticalAndConstantClosedForm) {
  RngStream r(1, "test");
  const GridD a = uniform_grid(r, 8, 8);
  EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
  const GridD zero(1, 8, 8, -1.0), one(1, 8, 8, 1.0);
  EXPECT_NEAR(ssim(zero, one), kSsimC1 / (1 + kSsimC1), 1e-15);
}

TEST(Ssim, SymmetricAndBounded) {
  RngStream r(2, "test");
  for (int k = 0; k < 20; ++k) {
    const GridD a = uniform_grid(r, 12, 12), b = uniform_grid(r, 12, 12);
    EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
    EXPECT_LE(std::fabs(ssim(a, b)), 1.0);
    EXPECT_LE(std::fabs(uqi(a, b)), 1.0);
    EXPECT_LE(std::fabs(scc(a, b)), 1.0);
  }
}

TEST(PairwiseMetrics, MatchHighPrecisionOracles) {
  RngStream r(3, "test");
  for (int k = 0; k < 50; ++k) {
    const GridD a = uniform_grid(r, 8, 8), b = uniform_grid(r, 8, 8);
    EXPECT_NEAR(ssim(a, b), static_cast<double>(oracle::ssim(a, b)), 1e-10);
    EXPECT_NEAR(uqi(a, b), static_cast<double>(oracle::uqi(a, b)), 1e-10);
    EXPECT_NEAR(scc(a, b), static_cast<double>(oracle::scc(a, b)), 1e-10);
  }
  // Windows clip to small images.
  const GridD a = uniform_grid(r, 5, 6), b = uniform_grid(r, 5, 6);
  EXPECT_NEAR(ssim(a, b), static_cast<double>(oracle::ssim(a, b)), 1e-10);
}

TEST(Uqi, IdenticalAndUndefined) {
  RngStream r(4, "test");
  const GridD a = uniform_grid(r, 8, 8);
  EXPECT_NEAR(uqi(a, a), 1.0, 1e-12);
  EXPECT_EQ(uqi(GridD(1, 8, 8, 0.0), GridD(1, 8, 8, 0.0)), 0.0);
}

TEST(Scc, IdenticalNegatedAndConstant) {
  RngStream r(5, "test");
  const GridD a = uniform_grid(r, 8, 8);
  EXPECT_NEAR(scc(a, a), 1.0, 1e-12);
  GridD neg = a;
  for (auto& v : neg.values()) v = -v;  // [0, 1] image becomes 1 - a, Laplacian negated
  EXPECT_NEAR(scc(a, neg), -1.0, 1e-12);
  EXPECT_EQ(scc(a, GridD(1, 8, 8, 0.3)), 0.0);
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-15);
}

TEST(Dice, Examples) {
  GridD a(1, 2, 4), b(1, 2, 4);
  for (int i : {0, 1, 2, 3}) a[static_cast<std::size_t>(i)] = 1;
  for (int i : {2, 3, 4, 5}) b[static_cast<std::size_t>(i)] = 1;
  EXPECT_EQ(dice(a, b), 0.5);
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(GridD(1, 2, 2), GridD(1, 2, 2)), 1.0);
  EXPECT_EQ(dice(mask4(0b0011), mask4(0b1100)), 0.0);
  EXPECT_THROW(dice(GridD(1, 2, 2, 0.5), GridD(1, 2, 2)), ValidationError);
}

TEST(Rand, Examples) {
  EXPECT_EQ(rand_score(mask4(0b0011), mask4(0b0001)), 0.5);
  EXPECT_EQ(rand_score(mask4(0b0110), mask4(0b1001)), 1.0);
  EXPECT_THROW(rand_score(GridD(1, 2, 2, 2.0), GridD(1, 2, 2)), ValidationError);
}

TEST(DiceRand, ExhaustiveFourPixelEnumeration) {
  for (int x = 0; x < 16; ++x) {
    for (int y = 0; y < 16; ++y) {
      const GridD a = mask4(x), b = mask4(y);
      EXPECT_EQ(dice(a, b), oracle::dice(bits4(x), bits4(y))) << x << "," << y;
      EXPECT_EQ(rand_score(a, b), oracle::rand_index(bits4(x), bits4(y))) << x << "," << y;
      EXPECT_EQ(dice(Grid::cast(a), Grid::cast(b)), dice(a, b));
    }
  }
}

TEST(Rand, AdjustedMatchesPairCountingForm) {
  RngStream r(6, "test");
  for (int k = 0; k < 30; ++k) {
    GridD a(1, 5, 5), b(1, 5, 5);
    std::vector<int> va, vb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = r.uniform() < 0.4;
      b[i] = r.uniform() < 0.5;
      va.push_back(static_cast<int>(a[i]));
      vb.push_back(static_cast<int>(b[i]));
    }
    double ss = 0, sd = 0, ds = 0, dd = 0;
    for (std::size_t i = 0; i < va.size(); ++i) {
      for (std::size_t j = i + 1; j < va.size(); ++j) {
        const bool sa = va[i] == va[j], sb = vb[i] == vb[j];
        ss += sa && sb;
        sd += sa && !sb;
        ds += !sa && sb;
        dd += !sa && !sb;
      }
    }
    const double ari = 2 * (ss * dd - sd * ds) / ((ss + sd) * (sd + dd) + (ss + ds) * (ds + dd));
    EXPECT_NEAR(rand_score(a, b, true), ari, 1e-12);
  }
  GridD a(1, 4, 4);
  a[3] = 1;
  EXPECT_NEAR(rand_score(a, a, true), 1.0, 1e-15);
}

TEST(Fid, IdenticalAndPointMasses) {
  RngStream r(7, "test");
  FeatureMatrix f(50, 8);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = r.normal();
  EXPECT_NEAR(fid(f, f), 0.0, 1e-8);
  Eigen::VectorXd mu1(3), mu2(3);
  mu1 << 1, 2, 3;
  mu2 << 0, 0, 1;
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  EXPECT_NEAR(frechet_distance(mu1, z, mu2, z), 1 + 4 + 4, 1e-12);
  EXPECT_THROW(fid(f.topRows(1), f), ValidationError);
}

// Commuting covariances Q D Q^T have a closed-form cross term.
struct GaussianPair {
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd s1, s2, l1, l2;
  double distance;
};

GaussianPair make_pair(int d, std::uint64_t seed) {
  RngStream r(seed, "gaussians");
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
  Eigen::VectorXd d1(d), d2(d);
  GaussianPair g;
  g.mu1 = Eigen::VectorXd(d);
  g.mu2 = Eigen::VectorXd(d);
  double dist = 0;
  for (int i = 0; i < d; ++i) {
    d1(i) = r.uniform(0.2, 2.0);
    d2(i) = r.uniform(0.2, 2.0);
    g.mu1(i) = r.normal() * 0.5;
    g.mu2(i) = r.normal() * 0.5;
    dist += (g.mu1(i) - g.mu2(i)) * (g.mu1(i) - g.mu2(i)) + (std::sqrt(d1(i)) - std::sqrt(d2(i))) * (std::sqrt(d1(i)) - std::sqrt(d2(i)));
  }
  g.s1 = q * d1.asDiagonal() * q.transpose();
  g.s2 = q * d2.asDiagonal() * q.transpose();
  g.l1 = q * d1.cwiseSqrt().asDiagonal();
  g.l2 = q * d2.cwiseSqrt().asDiagonal();
  g.distance = dist;
  return g;
}

TEST(Fid, FrechetDistanceClosedForm) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = make_pair(16, seed);
    EXPECT_NEAR(frechet_distance(g.mu1, g.s1, g.mu2, g.s2), g.distance, 1e-9 * g.distance);
  }
}

TEST(Fid, SampleEstimateWithinTwoPercent) {
  const auto g = make_pair(8, 11);
  RngStream r(12, "samples");
  const int n = 5000;
  FeatureMatrix a(n, 8), b(n, 8);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z1(8), z2(8);
    for (int k = 0; k < 8; ++k) {
      z1(k) = r.normal();
      z2(k) = r.normal();
    }
    a.row(i) = (g.mu1 + g.l1 * z1).transpose();
    b.row(i) = (g.mu2 + g.l2 * z2).transpose();
  }
  EXPECT_NEAR(fid(a, b), g.distance, 0.02 * g.distance);
}

double kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double k = x.dot(y) / static_cast<double>(x.size()) + 1;
  return k * k * k;
}

TEST(Kid, PointMassesThreeTermOracle) {
  Eigen::VectorXd x(4), y(4);
  x << 3, -1, 2, 0.5;
  y << -4, 2, 1, -2;
  FeatureMatrix a(10, 4), b(7, 4);
  for (int i = 0; i < 10; ++i) a.row(i) = x.transpose();
  for (int i = 0; i < 7; ++i) b.row(i) = y.transpose();
  const double ref = kernel(x, x) + kernel(y, y) - 2 * kernel(x, y);
  EXPECT_NEAR(mmd2_unbiased(a, b), ref, 1e-12 * std::fabs(ref));
  EXPECT_NEAR(kid(a, b), ref, 1e-12 * std::fabs(ref));
}

TEST(Kid, IdenticalSetsGiveTheDiagonalCorrection) {
  RngStream r(13, "test");
  const int m = 40;
  FeatureMatrix f(m, 6);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = r.normal();
  double off = 0, diag = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) (i == j ? diag : off) += kernel(f.row(i), f.row(j));
  }
  const double ref = 2.0 / m * (off / (m * (m - 1.0)) - diag / m);
  const double v = kid(f, f);
  EXPECT_LE(v, 0.0);
  EXPECT_NEAR(v, ref, 1e-10 * std::fabs(ref));
}

TEST(Kid, SymmetricWithSubsets) {
  RngStream r(14, "test");
  FeatureMatrix a(300, 8), b(250, 8);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = r.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = r.normal() + 0.3;
  EXPECT_NEAR(kid(a, b, 5), kid(b, a, 5), 1e-12);
  EXPECT_GT(kid(a, b, 5), 0.0);
  EXPECT_NE(kid(a, b, 5), kid(a, b, 6));
  EXPECT_NEAR(kid(a.topRows(50), b.topRows(60)), kid(b.topRows(60), a.topRows(50)), 1e-12);
}

TEST(FeatureExtractor, DeterministicAndSeeded) {
  PhantomConfig cfg;
  const Grid img = generate_phantom(cfg, 0).image;
  const FeatureExtractor a(0), b(0), c(1);
  EXPECT_EQ(a.features(img), b.features(img));
  EXPECT_NE(a.features(img), c.features(img));
  EXPECT_EQ(a.features(img).size(), FeatureExtractor::kDim);
  EXPECT_THROW(a.features(Grid(1, 10, 10)), ValidationError);
  const FeatureMatrix m = a.features(std::vector<Grid>{img, generate_phantom(cfg, 1).image});
  EXPECT_EQ(m.row(0).transpose(), a.features(img));
}

TEST(EvaluateQuality, SameSetsGiveZeroFid) {
  PhantomConfig cfg;
  std::vector<Grid> imgs;
  for (std::uint64_t i = 0; i < 30; ++i) imgs.push_back(generate_phantom(cfg, i).image);
  const auto r = evaluate_quality(imgs, imgs);
  EXPECT_LE(r.fid, 1e-6);
  EXPECT_EQ(r.n_pairs, 30u);
  EXPECT_GT(r.ssim_mean, 0.0);
  std::vector<Grid> noise;
  RngStream rng(1, "noise");
  for (int i = 0; i < 30; ++i) {
    Grid g = rng.normal_grid<float>(1, 32, 32);
    for (auto& v : g.values()) v = std::clamp(v, -1.f, 1.f);
    noise.push_back(g);
  }
  const auto far = evaluate_quality(imgs, noise);
  EXPECT_GT(far.fid, 1e-3);
  EXPECT_GT(far.kid, r.kid);
  MetricSettings few;
  few.max_pairs = 5;
  EXPECT_EQ(evaluate_quality(imgs, noise, few).n_pairs, 5u);
}

}  // namespace
}  // namespace ddmm
