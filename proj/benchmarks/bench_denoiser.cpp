// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ddmm/denoiser.hpp"
#include "ddmm/kernel.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/rng.hpp"
#include "ddmm/sampler.hpp"
#include "ddmm/trainer.hpp"

namespace {

using namespace ddmm;

void BM_DenoiserForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto net = UNet<float>::init(UNetArch{}, 0);
  RngStream r(1, "bench");
  const Grid x = r.normal_grid<float>(1, size, size);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, 50));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DenoiserForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DenoiserForwardBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto net = UNet<float>::init(UNetArch{}, 0);
  RngStream r(1, "bench");
  const Grid x = r.normal_grid<float>(1, size, size);
  const Grid eps = r.normal_grid<float>(1, size, size);
  auto grads = net.zero_gradients();
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward_backward(
        x, 50, [&](const Grid& out) { return kernel::loss_simple_grad(eps, out); }, grads));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DenoiserForwardBackward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainBatch(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  PhantomConfig pc;
  pc.size = size;
  std::vector<LabeledPair> labeled;
  std::vector<Grid> unlabeled;
  for (int i = 0; i < 16; ++i) {
    const Phantom p = generate_phantom(pc, static_cast<std::uint64_t>(i));
    labeled.push_back({p.image, to_model_mask(p.mask)});
    unlabeled.push_back(generate_phantom(pc, static_cast<std::uint64_t>(100 + i)).image);
  }
  std::vector<const LabeledPair*> lb;
  std::vector<const Grid*> ub;
  for (const auto& p : labeled) lb.push_back(&p);
  for (const auto& g : unlabeled) ub.push_back(&g);
  auto model = DdmmModel::create(UNetArch{}, NoiseSchedule::cosine(100), 0);
  TrainConfig cfg;
  auto st = TrainerState::fresh(model, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(train_batch(model, lb, ub, cfg, st));
}
BENCHMARK(BM_TrainBatch)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_SamplePairDdim(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto model = DdmmModel::create(UNetArch{}, NoiseSchedule::cosine(100), 0);
  SamplerSettings st;
  st.kind = SamplerKind::kDdim;
  st.ddim_steps = 10;
  st.height = st.width = size;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_pair(model, seed++, st));
}
BENCHMARK(BM_SamplePairDdim)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
