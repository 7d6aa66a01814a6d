// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>

#include "ddmm/phantom.hpp"
#include "ddmm/sampler.hpp"

namespace ddmm {
namespace {

UNetArch tiny_arch() {
  UNetArch a;
  a.base_channels = 8;
  a.depth = 1;
  a.time_embed_dim = 16;
  a.norm_groups = 4;
  return a;
}

DdmmModel random_model(bool identical_branches) {
  auto m = DdmmModel::create(tiny_arch(), NoiseSchedule::cosine(20), 0);
  RngStream r(1, "perturb");
  for (auto& v : m.image_net.mutable_params().values) v += static_cast<float>(0.05 * r.normal());
  if (identical_branches) {
    m.mask_net = m.image_net;
  } else {
    for (auto& v : m.mask_net.mutable_params().values) v += static_cast<float>(0.05 * r.normal());
  }
  return m;
}

SamplerSettings settings(SamplerKind kind) {
  SamplerSettings s;
  s.kind = kind;
  s.height = 16;
  s.width = 16;
  s.ddim_steps = 5;
  return s;
}

bool bitwise_equal(const Grid& a, const Grid& b) {
  return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

TEST(DdimTimesteps, EvenlyStridedWithEndpoints) {
  const auto ts = ddim_timesteps(100, 10);
  ASSERT_EQ(ts.size(), 10u);
  EXPECT_EQ(ts.front(), 100);
  EXPECT_EQ(ts.back(), 1);
  for (std::size_t i = 1; i < ts.size(); ++i) {
    EXPECT_LT(ts[i], ts[i - 1]);
    EXPECT_NEAR(ts[i - 1] - ts[i], 11, 1);
  }
  const auto all = ddim_timesteps(100, 100);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)], 100 - i);
  EXPECT_EQ(ddim_timesteps(100, 1), std::vector<int>{100});
  EXPECT_THROW(ddim_timesteps(100, 0), ValidationError);
  EXPECT_THROW(ddim_timesteps(100, 101), ValidationError);
}

class IdenticalBranches : public ::testing::TestWithParam<SamplerKind> {};

TEST_P(IdenticalBranches, ImageChainEqualsMaskChain) {
  const auto model = random_model(true);
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto p = sample_pair(model, seed, settings(GetParam()));
    EXPECT_TRUE(bitwise_equal(p.image, p.mask_soft)) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Samplers, IdenticalBranches, ::testing::Values(SamplerKind::kDdpm, SamplerKind::kDdim),
                         [](const auto& info) { return to_string(info.param); });

TEST(SamplePair, IndependentStepNoiseBreaksTheCoupling) {
  const auto model = random_model(true);
  auto st = settings(SamplerKind::kDdpm);
  st.shared_step_noise = false;
  const auto p = sample_pair(model, 0, st);
  EXPECT_FALSE(bitwise_equal(p.image, p.mask_soft));
}

TEST(SamplePair, DeterministicAndPure) {
  const auto model = random_model(false);
  const auto before = model.image_net.params().values;
  for (auto kind : {SamplerKind::kDdpm, SamplerKind::kDdim}) {
    const auto a = sample_pair(model, 7, settings(kind));
    const auto b = sample_pair(model, 7, settings(kind));
    EXPECT_TRUE(bitwise_equal(a.image, b.image));
    EXPECT_TRUE(bitwise_equal(a.mask_soft, b.mask_soft));
    EXPECT_EQ(a.seed, 7u);
    EXPECT_EQ(a.kind, kind);
    EXPECT_EQ(a.steps_used, kind == SamplerKind::kDdpm ? 20 : 5);
    EXPECT_EQ(a.mask, threshold_mask(a.mask_soft));
    for (float v : a.image.values()) {
      EXPECT_GE(v, -1.f);
      EXPECT_LE(v, 1.f);
    }
  }
  EXPECT_EQ(model.image_net.params().values, before);
}

TEST(SamplePair, FullStrideDdimReproducible) {
  const auto model = random_model(false);
  auto st = settings(SamplerKind::kDdim);
  st.ddim_steps = 20;
  const auto a = sample_pair(model, 3, st);
  const auto b = sample_pair(model, 3, st);
  double m = 0;
  for (std::size_t i = 0; i < a.image.size(); ++i) m = std::max(m, std::fabs(double(a.image[i]) - b.image[i]));
  EXPECT_LE(m, 1e-4);
}

TEST(SampleBatch, SeedsAreOffsetsOfTheBase) {
  const auto model = random_model(false);
  const auto st = settings(SamplerKind::kDdim);
  const auto one = sample_batch(model, 40, 1, st);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(bitwise_equal(one[0].image, sample_pair(model, 40, st).image));
  const auto many = sample_batch(model, 40, 4, st);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(many[i].seed, 40 + i);
    EXPECT_TRUE(bitwise_equal(many[i].image, sample_pair(model, 40 + i, st).image));
  }
  EXPECT_FALSE(bitwise_equal(many[0].image, many[1].image));
  EXPECT_THROW(sample_batch(model, 0, 0, st), ValidationError);
}

TEST(SamplePair, RejectsNonFiniteModel) {
  auto model = random_model(false);
  model.mask_net.mutable_params().values[3] = std::nanf("");
  EXPECT_THROW(sample_pair(model, 0, settings(SamplerKind::kDdpm)), NumericError);
}

TEST(JointConsistency, TruePairsBeatShuffledPairs) {
  PhantomConfig cfg;
  std::vector<SamplePair> pairs;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto p = generate_phantom(cfg, i);
    SamplePair s;
    s.image = p.image;
    s.mask = p.mask;
    s.mask_soft = to_model_mask(p.mask);
    pairs.push_back(s);
  }
  const auto jc = joint_consistency(pairs, cfg);
  EXPECT_GT(jc.matched, 0.9);
  EXPECT_LT(jc.shuffled, jc.matched);
  EXPECT_NEAR(jc.gap(), jc.matched - jc.shuffled, 0.0);
  // Reversing the masks pairs each image with someone else's mask.
  auto crossed = pairs;
  for (std::size_t i = 0; i < crossed.size(); ++i) crossed[i].mask = pairs[pairs.size() - 1 - i].mask;
  EXPECT_LT(joint_consistency(crossed, cfg).matched, jc.matched);
}

}  // namespace
}  // namespace ddmm
