// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddmm/grid.hpp"

namespace ddmm {

/// 8-bit single-channel raster.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Binary PGM (P5) with maxval 255; written bit-exactly with a "P5\n<w> <h>\n255\n" header.
void write_pgm(const std::filesystem::path& path, const Image8& img);
/// Rejects anything but P5 with maxval 255.
Image8 read_pgm(const std::filesystem::path& path);
/// 8-bit grayscale PNG.
Image8 read_png(const std::filesystem::path& path);
/// Dispatches on extension (.pgm / .png).
Image8 read_image(const std::filesystem::path& path);

/// 8-bit RGB raster written as binary PPM (P6); used by the plotter.
struct ImageRgb {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // r, g, b interleaved
};
void write_ppm(const std::filesystem::path& path, const ImageRgb& img);

/// [-1, 1] -> [0, 255] with rounding and clipping.
Image8 grid_to_image(const Grid& g);
/// [0, 255] -> [-1, 1].
Grid image_to_grid(const Image8& img);
/// {0, 1} -> {0, 255}.
Image8 mask_to_image(const Grid& mask01);

}  // namespace ddmm
