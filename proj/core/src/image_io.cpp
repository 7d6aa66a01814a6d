// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace ddmm {

namespace fs = std::filesystem;

void write_pgm(const fs::path& path, const Image8& img) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot write " + path.string());
  f << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  require(static_cast<bool>(f), "write failed: " + path.string());
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

Image8 read_pgm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot read " + path.string());
  const std::string magic = header_token(f);
  require(magic == "P5", path.string() + ": not a binary PGM (P5)");
  Image8 img;
  try {
    img.width = std::stoi(header_token(f));
    img.height = std::stoi(header_token(f));
    const int maxval = std::stoi(header_token(f));
    require(maxval == 255, path.string() + ": PGM maxval " + std::to_string(maxval) +
                               " unsupported (need 255)");
  } catch (const std::invalid_argument&) {
    throw ValidationError(path.string() + ": malformed PGM header");
  }
  require(img.width > 0 && img.height > 0, path.string() + ": bad PGM dimensions");
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  require(f.gcount() == static_cast<std::streamsize>(img.pixels.size()),
          path.string() + ": truncated PGM data");
  return img;
}

Image8 read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ValidationError(path.string() + ": unreadable PNG (" + image.message + ")");
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  if (!gray) {
    png_image_free(&image);
    throw ValidationError(path.string() + ": PNG is not grayscale");
  }
  image.format = PNG_FORMAT_GRAY;
  Image8 img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ValidationError(path.string() + ": PNG decode failed (" + msg + ")");
  }
  return img;
}

Image8 read_image(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  throw ValidationError(path.string() + ": unsupported image extension");
}

void write_ppm(const fs::path& path, const ImageRgb& img) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot write " + path.string());
  f << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
}

Image8 grid_to_image(const Grid& g) {
  require(g.channels() == 1, "grid_to_image: single-channel grid required");
  Image8 img{g.width(), g.height(), std::vector<std::uint8_t>(g.size())};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = (static_cast<double>(g[i]) + 1.0) * 127.5;
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return img;
}

Grid image_to_grid(const Image8& img) {
  Grid g(1, img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    g[i] = static_cast<float>(img.pixels[i] / 127.5 - 1.0);
  }
  return g;
}

Image8 mask_to_image(const Grid& mask01) {
  require(mask01.channels() == 1, "mask_to_image: single-channel grid required");
  Image8 img{mask01.width(), mask01.height(), std::vector<std::uint8_t>(mask01.size())};
  for (std::size_t i = 0; i < mask01.size(); ++i) img.pixels[i] = mask01[i] > 0.5f ? 255 : 0;
  return img;
}

}  // namespace ddmm
