// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "ddmm/grid.hpp"

namespace ddmm {

/// Philox4x32-10 block function. Pure: same (counter, key) -> same output.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Stable 64-bit tag for a stream name.
constexpr std::uint64_t stream_tag(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Counter-based random stream. A stream is identified by (seed, name, substream);
/// draws from one stream never perturb another, so adding work to the
/// unsupervised branch leaves the supervised noise sequence untouched.
class RngStream {
 public:
  struct State {
    std::uint64_t seed = 0;
    std::uint64_t tag = 0;
    std::uint64_t block = 0;
    std::uint32_t lane = 4;
    bool has_spare = false;
    double spare = 0.0;
  };

  RngStream() = default;
  RngStream(std::uint64_t seed, std::string_view name, std::uint64_t substream = 0);
  explicit RngStream(const State& s) : state_(s) { refill_current(); }

  std::uint32_t next_u32();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi], rejection-sampled (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void fill_normal(BasicGrid<T>& g) {
    for (auto& v : g.values()) v = static_cast<T>(normal());
  }
  template <typename T>
  BasicGrid<T> normal_grid(int c, int h, int w) {
    BasicGrid<T> g(c, h, w);
    fill_normal(g);
    return g;
  }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  const State& state() const noexcept { return state_; }

 private:
  void refill_current();
  State state_;
  std::array<std::uint32_t, 4> buffer_{};
};

}  // namespace ddmm
