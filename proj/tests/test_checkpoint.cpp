// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "ddmm/checkpoint.hpp"
#include "ddmm/segmenter.hpp"
#include "temp_dir.hpp"

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

Checkpoint sample_checkpoint() {
  auto model = DdmmModel::create(tiny_arch(), NoiseSchedule::cosine(20), 3);
  model.epoch = 7;
  TrainConfig cfg;
  auto state = TrainerState::fresh(model, cfg);
  (void)state.supervised_rng.normal();  // leaves a spare value pending
  state.image_opt.step = 4;
  state.image_opt.m[2] = 0.25f;
  return Checkpoint::from_model(model, 16, 16, &state);
}

TEST(Checkpoint, EncodeDecodeIsBitwiseStable) {
  const Checkpoint c = sample_checkpoint();
  const auto bytes = c.encode();
  const Checkpoint d = Checkpoint::decode(bytes);
  EXPECT_EQ(d.encode(), bytes);
  EXPECT_EQ(d.epoch, 7);
  EXPECT_EQ(d.height, 16);
  ASSERT_TRUE(d.schedule.has_value());
  EXPECT_EQ(*d.schedule, NoiseSchedule::cosine(20));
  const DdmmModel m = d.to_model();
  EXPECT_EQ(m.image_net.params().values, c.networks[0].values);
  EXPECT_EQ(m.epoch, 7);
  const TrainerState st = d.trainer_state();
  EXPECT_EQ(st.image_opt.step, 4);
  EXPECT_EQ(st.image_opt.m[2], 0.25f);
  RngStream a = sample_checkpoint().trainer_state().supervised_rng;
  RngStream b = st.supervised_rng;
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Checkpoint, FileRoundTripAndCorruption) {
  testing::TempDir dir;
  const Checkpoint c = sample_checkpoint();
  save_checkpoint(dir / "c.ddmm", c);
  EXPECT_EQ(load_checkpoint(dir / "c.ddmm").encode(), c.encode());
  auto bytes = read_file(dir / "c.ddmm");
  bytes[bytes.size() / 2] ^= 0x01;
  write_file_atomic(dir / "bad.ddmm", bytes);
  EXPECT_THROW(load_checkpoint(dir / "bad.ddmm"), ValidationError);
  auto truncated = c.encode();
  truncated.resize(truncated.size() - 9);
  EXPECT_THROW(Checkpoint::decode(truncated), ValidationError);
  auto magic = c.encode();
  magic[0] = 'X';
  EXPECT_THROW(Checkpoint::decode(magic), ValidationError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ddmm"), ValidationError);
}

TEST(Checkpoint, SegmenterAndMissingBlocks) {
  const auto net = SegNet::init(default_seg_arch(), 4);
  const Checkpoint c = Checkpoint::from_segnet(net, 32, 32);
  const Checkpoint d = Checkpoint::decode(c.encode());
  EXPECT_EQ(d.to_segnet().params().values, net.params().values);
  EXPECT_EQ(d.to_segnet().arch(), net.arch());
  EXPECT_THROW(d.to_model(), ValidationError);
  EXPECT_THROW(d.trainer_state(), ValidationError);
  const Checkpoint m = Checkpoint::decode(sample_checkpoint().encode());
  EXPECT_THROW(m.to_segnet(), ValidationError);
}

}  // namespace
}  // namespace ddmm
