// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ddmm {

struct FileDigest {
  std::string path;
  std::uint32_t crc32 = 0;
  std::uint64_t bytes = 0;
  friend bool operator==(const FileDigest&, const FileDigest&) = default;
};

FileDigest digest_file(const std::filesystem::path& path, const std::string& recorded_as);

/// Provenance record written next to every command's outputs (manifest.json).
/// Contains no timestamps, so identical inputs give an identical manifest.
struct Manifest {
  std::string command;
  std::string version;
  std::string config;  // resolved config text
  std::map<std::string, std::uint64_t> seeds;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  /// Named sets of sample identifiers, e.g. "test" or "trained_on".
  /// Identifiers are "<phantom seed>:<index>" or "file:<stem>".
  std::map<std::string, std::set<std::string>> samples;
  std::map<std::string, std::string> notes;

  void add_input(const std::filesystem::path& path);
  /// Outputs are recorded relative to run_dir.
  void add_output(const std::filesystem::path& run_dir, const std::string& relative);

  std::string to_json() const;
  static Manifest from_json(const std::string& text);
  void write(const std::filesystem::path& path) const;
  static Manifest read(const std::filesystem::path& path);
};

std::string sample_id(std::uint64_t phantom_seed, std::uint64_t index);

/// Library version string recorded in manifests.
std::string artifact_version();

}  // namespace ddmm
