// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddmm/adam.hpp"
#include "ddmm/denoiser.hpp"
#include "ddmm/rng.hpp"
#include "ddmm/schedule.hpp"
#include "ddmm/trainer.hpp"

namespace ddmm {

/// Binary layout, all little-endian:
///   "DDMM" u32 version
///   u8 has_schedule [u8 kind, u32 T, f64 betas[T]]
///   i32 epoch, i32 height, i32 width
///   u32 n_networks, per network:
///     str name, i32 arch[7], u32 n_tensors, per tensor: str name, u32 rank, i32 dims[rank], f32 values
///   u8 has_trainer [per network: i64 step, f32 m, f32 v; u32 n_streams, per stream: rng state]
///   u32 crc32 of everything before it
/// Strings are u32 length + bytes.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  struct Network {
    std::string name;
    UNetArch arch;
    std::vector<float> values;
  };
  struct Trainer {
    std::vector<OptimState> optimizers;  // one per network, same order
    std::vector<RngStream::State> streams;
  };

  std::optional<NoiseSchedule> schedule;
  int epoch = 0;
  int height = 0;
  int width = 0;
  std::vector<Network> networks;
  std::optional<Trainer> trainer;

  static Checkpoint from_model(const DdmmModel& model, int height, int width,
                               const TrainerState* state = nullptr);
  static Checkpoint from_segnet(const UNet<float>& net, int height, int width);

  /// Requires a schedule and networks named "image" and "mask".
  DdmmModel to_model() const;
  /// Requires the trainer block.
  TrainerState trainer_state() const;
  /// Requires a network named "segmenter".
  UNet<float> to_segnet() const;

  std::vector<std::uint8_t> encode() const;
  /// Verifies magic, version, structure and checksum.
  static Checkpoint decode(const std::vector<std::uint8_t>& bytes);
};

/// Writes to a temporary file in the same directory, then renames.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Atomic whole-file write used for all artifacts.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n);

}  // namespace ddmm
