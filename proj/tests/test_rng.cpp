// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddmm/rng.hpp"

namespace ddmm {
namespace {

TEST(Philox, KnownAnswerZeroKey) {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RngStream, SameIdentitySameSequence) {
  RngStream a(42, "phantom", 3), b(42, "phantom", 3);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u32(), b.next_u32());
}

TEST(RngStream, NamesSeedsAndSubstreamsSeparate) {
  auto head = [](RngStream r) {
    std::vector<std::uint32_t> v(8);
    for (auto& x : v) x = r.next_u32();
    return v;
  };
  const auto base = head(RngStream(1, "supervised-noise"));
  EXPECT_NE(base, head(RngStream(1, "unsupervised-noise")));
  EXPECT_NE(base, head(RngStream(2, "supervised-noise")));
  EXPECT_NE(base, head(RngStream(1, "supervised-noise", 1)));
}

TEST(RngStream, DrawsFromOneStreamDoNotPerturbAnother) {
  RngStream a(5, "supervised-noise");
  RngStream ref(5, "supervised-noise");
  RngStream other(5, "unsupervised-noise");
  for (int i = 0; i < 100; ++i) {
    (void)other.normal();
    ASSERT_EQ(a.normal(), ref.normal());
  }
}

TEST(RngStream, StateRestoreContinuesExactly) {
  RngStream a(9, "sampler");
  for (int i = 0; i < 7; ++i) (void)a.normal();  // leaves a Box-Muller spare pending
  (void)a.next_u32();
  RngStream b(a.state());
  for (int i = 0; i < 500; ++i) {
    ASSERT_EQ(a.normal(), b.normal());
    ASSERT_EQ(a.next_u32(), b.next_u32());
  }
}

TEST(RngStream, UniformInUnitInterval) {
  RngStream r(3, "u");
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
}

TEST(RngStream, NormalMoments) {
  RngStream r(4, "n");
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(RngStream, UniformIntCoversRangeUniformly) {
  RngStream r(6, "i");
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = r.uniform_int(-3, 3);
    ASSERT_GE(v, -3);
    ASSERT_LE(v, 3);
    ++counts[static_cast<std::size_t>(v + 3)];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);  // chi-square(6) at p = 0.001
}

TEST(RngStream, PermutationIsAPermutation) {
  RngStream r(8, "split");
  auto p = r.permutation(951);
  ASSERT_EQ(p.size(), 951u);
  std::vector<std::size_t> id(951);
  std::iota(id.begin(), id.end(), 0);
  EXPECT_NE(p, id);
  std::sort(p.begin(), p.end());
  EXPECT_EQ(p, id);
}

TEST(RngStream, StreamTagIsStable) {
  EXPECT_EQ(stream_tag(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(stream_tag("a"), 0xaf63dc4c8601ec8cull);
}

}  // namespace
}  // namespace ddmm
