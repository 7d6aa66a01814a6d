// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddmm/image_io.hpp"

namespace ddmm::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // non-finite points are skipped
};

/// Line chart with axis extents, legend and title drawn in a 3x5 pixel font.
ImageRgb line_plot(const std::string& title, const std::vector<Series>& series, int width = 640,
                   int height = 400);

/// Vertical bars labelled below with their name and above with their value.
ImageRgb bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars,
                   int width = 640, int height = 400);

/// Draws text (case-insensitive; unknown glyphs render blank) at pixel scale `scale`.
void draw_text(ImageRgb& img, int x, int y, const std::string& text, const unsigned char rgb[3], int scale = 2);

}  // namespace ddmm::plot
