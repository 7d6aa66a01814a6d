// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "ddmm/denoiser.hpp"
#include "ddmm/kernel.hpp"
#include "ddmm/rng.hpp"
#include "ddmm/segmenter.hpp"
#include "oracles.hpp"

namespace ddmm {
namespace {

UNetArch small_arch() {
  UNetArch a;
  a.base_channels = 8;
  a.depth = 1;
  a.time_embed_dim = 16;
  a.norm_groups = 4;
  return a;
}

// Init zeroes the output convolution, which would make most gradients vanish;
// perturb everything so the check exercises every path.
UNet<double> randomized(const UNetArch& arch, std::uint64_t seed) {
  auto net = UNet<double>::init(arch, seed);
  RngStream r(seed, "perturb");
  for (auto& v : net.mutable_params().values) v += 0.2 * r.normal();
  return net;
}

TEST(UNet, DefaultParameterCountIsGolden) {
  const auto net = DenoiserNet::init(UNetArch{}, 0);
  EXPECT_EQ(net.parameter_count(), 501633u);
  std::size_t total = 0, offset = 0;
  for (const auto& e : net.layout()) {
    EXPECT_EQ(e.offset, offset) << e.name;
    std::size_t n = 1;
    for (int d : e.shape) n *= static_cast<std::size_t>(d);
    EXPECT_EQ(n, e.size) << e.name;
    offset += e.size;
    total += e.size;
  }
  EXPECT_EQ(total, net.parameter_count());
  EXPECT_EQ(make_layout(UNetArch{}).size(), net.layout().size());
}

TEST(UNet, ZeroOutputAtInit) {
  const auto net = DenoiserNet::init(UNetArch{}, 3);
  RngStream r(1, "test");
  const Grid x = r.normal_grid<float>(1, 32, 32);
  const Grid y = net.forward(x, 17);
  ASSERT_TRUE(y.same_shape(x));
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
  // With a zero predictor the simple loss is mean(eps^2), a chi-square mean.
  const Grid eps = r.normal_grid<float>(1, 64, 64);
  const Grid y64 = net.forward(eps, 5);
  EXPECT_EQ(y64.height(), 64);
  EXPECT_NEAR(kernel::loss_simple(eps, y64), 1.0, 0.05);
}

TEST(UNet, InitIsDeterministicAndSeedDependent) {
  const auto a = DenoiserNet::init(small_arch(), 5);
  const auto b = DenoiserNet::init(small_arch(), 5);
  const auto c = DenoiserNet::init(small_arch(), 6);
  const auto d = DenoiserNet::init(small_arch(), 5, 1);
  EXPECT_EQ(a.params().values, b.params().values);
  EXPECT_NE(a.params().values, c.params().values);
  EXPECT_NE(a.params().values, d.params().values);
}

TEST(UNet, ForwardIsDeterministicAndTimeDependent) {
  const auto net = randomized(small_arch(), 7).cast<float>();
  RngStream r(2, "test");
  const Grid x = r.normal_grid<float>(1, 16, 16);
  EXPECT_EQ(net.forward(x, 3), net.forward(x, 3));
  EXPECT_NE(net.forward(x, 3), net.forward(x, 4));
}

TEST(UNet, SegmenterIgnoresTime) {
  auto arch = default_seg_arch();
  EXPECT_FALSE(arch.time_conditioned);
  const auto net = randomized(arch, 8);
  RngStream r(3, "test");
  const GridD x = r.normal_grid<double>(1, 16, 16);
  EXPECT_EQ(net.forward(x, 1), net.forward(x, 99));
}

TEST(UNet, ShapeContract) {
  const auto net = DenoiserNet::init(UNetArch{}, 0);
  EXPECT_NO_THROW(net.check_input(Grid(1, 32, 32)));
  EXPECT_NO_THROW(net.check_input(Grid(1, 64, 64)));
  EXPECT_THROW(net.check_input(Grid(1, 30, 32)), ValidationError);
  EXPECT_THROW(net.check_input(Grid(2, 32, 32)), ValidationError);
  EXPECT_THROW(net.forward(Grid(1, 32, 32), 0), ValidationError);
}

TEST(UNet, ArchValidation) {
  UNetArch a;
  a.norm_groups = 5;
  EXPECT_THROW(a.validate(), ValidationError);
  a = UNetArch{};
  a.time_embed_dim = 3;
  EXPECT_THROW(a.validate(), ValidationError);
  a = UNetArch{};
  a.depth = 7;
  EXPECT_THROW(a.validate(), ValidationError);
  EXPECT_THROW(DenoiserNet::from_values(UNetArch{}, std::vector<float>(10)), ValidationError);
}

TEST(UNet, ZeroOutputGradientGivesZeroParameterGradient) {
  const auto net = randomized(small_arch(), 9);
  RngStream r(4, "test");
  const GridD x = r.normal_grid<double>(1, 8, 8);
  const auto g = net.backward(x, 2, GridD(1, 8, 8));
  for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(UNet, ForwardBackwardMatchesBackward) {
  const auto net = randomized(small_arch(), 10);
  RngStream r(5, "test");
  const GridD x = r.normal_grid<double>(1, 8, 8);
  const GridD w = r.normal_grid<double>(1, 8, 8);
  auto grads = net.zero_gradients();
  const GridD y = net.forward_backward(x, 4, [&](const GridD&) { return w; }, grads);
  EXPECT_EQ(y, net.forward(x, 4));
  EXPECT_EQ(grads.values, net.backward(x, 4, w).values);
}

struct FdCase {
  const char* name;
  UNetArch arch;
  int size;
};

class FiniteDifference : public ::testing::TestWithParam<FdCase> {};

TEST_P(FiniteDifference, TwentyFiveParameters) {
  const auto& c = GetParam();
  const auto net = randomized(c.arch, 11);
  RngStream r(6, "test");
  const GridD x = r.normal_grid<double>(1, c.size, c.size);
  const auto res = oracle::finite_difference_check(net, x, 37, 25, 12);
  EXPECT_EQ(res.checked, 25);
  EXPECT_EQ(res.failed, 0) << res.first_failure << " worst rel " << res.worst_rel;
  EXPECT_GE(res.nontrivial, 20);
}

INSTANTIATE_TEST_SUITE_P(Architectures, FiniteDifference,
                         ::testing::Values(FdCase{"default", UNetArch{}, 8},
                                           FdCase{"small", small_arch(), 8},
                                           FdCase{"segmenter", default_seg_arch(), 8}),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(ParamBuffer, AddScaledAndFinite) {
  auto net = DenoiserNet::init(small_arch(), 1);
  auto g = net.zero_gradients();
  for (auto& v : g.values) v = 1.0f;
  const auto before = net.params().values;
  net.mutable_params().add_scaled(g, 0.5f);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(net.params().values[i], before[i] + 0.5f);
  EXPECT_TRUE(net.params().all_finite());
  net.mutable_params().values[0] = std::nanf("");
  EXPECT_FALSE(net.params().all_finite());
}

}  // namespace
}  // namespace ddmm
