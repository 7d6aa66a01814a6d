// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ddmm::testing {

/// Runs the command-line tool in-process. args excludes the program name.
int run_cli(const std::vector<std::string>& args);

/// 50 labeled, 200 unlabeled, 16x16, 5 epochs, 20 samples.
std::string smoke_config_text();

/// gen-data, train, sample, eval-images, train-seg, eval-seg and report under root.
/// Throws std::runtime_error naming the failing step.
void run_smoke_pipeline(const std::filesystem::path& root, const std::filesystem::path& config);

}  // namespace ddmm::testing
