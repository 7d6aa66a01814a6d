// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ddmm::cli {

/// Flags shared by every subcommand; empty strings mean "not given".
struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;

  std::string data;
  std::string checkpoint;
  std::optional<int> n;
  std::string real;
  std::string fake;
  std::string pairs;
  std::string segnet;
  std::string test;
  std::string run;
  bool resume = false;
  bool dump_masks = false;
  bool quiet = false;
};

int gen_data(const Options& o);
int train(const Options& o);
int sample(const Options& o);
int eval_images(const Options& o);
int train_seg(const Options& o);
int eval_seg(const Options& o);
int report(const Options& o);

/// Parses argv and dispatches. Returns the process exit code:
/// 0 success, 1 validation error, 2 numeric failure.
int run(int argc, char** argv);

}  // namespace ddmm::cli
