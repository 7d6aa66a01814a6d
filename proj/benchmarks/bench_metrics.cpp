// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ddmm/metrics.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/rng.hpp"

namespace {

using namespace ddmm;

std::vector<Grid> phantoms(int n, int size, std::uint64_t first) {
  PhantomConfig pc;
  pc.size = size;
  std::vector<Grid> out;
  for (int i = 0; i < n; ++i) out.push_back(generate_phantom(pc, first + static_cast<std::uint64_t>(i)).image);
  return out;
}

void BM_Ssim(benchmark::State& state) {
  const auto a = phantoms(2, static_cast<int>(state.range(0)), 0);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(a[0], a[1]));
}
BENCHMARK(BM_Ssim)->Arg(32)->Arg(64);

void BM_Fid(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream r(1, "bench");
  metrics::FeatureMatrix a(n, 64), b(n, 64);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = r.normal();
    b.data()[i] = r.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::fid(a, b));
}
BENCHMARK(BM_Fid)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Kid(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream r(1, "bench");
  metrics::FeatureMatrix a(n, 64), b(n, 64);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = r.normal();
    b.data()[i] = r.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::kid(a, b));
}
BENCHMARK(BM_Kid)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_EvaluateQuality(benchmark::State& state) {
  const auto real = phantoms(64, 32, 0), fake = phantoms(64, 32, 1000);
  const metrics::MetricSettings settings;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate_quality(real, fake, settings));
}
BENCHMARK(BM_EvaluateQuality)->Unit(benchmark::kMillisecond);

void BM_OracleSegment(benchmark::State& state) {
  const auto a = phantoms(1, 64, 0);
  for (auto _ : state) benchmark::DoNotOptimize(oracle_segment(a[0]));
}
BENCHMARK(BM_OracleSegment);

}  // namespace
