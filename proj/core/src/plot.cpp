// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ddmm::plot {

namespace {

// 3x5 glyphs, one row per entry, bit 2 = left column.
struct Glyph {
  char c;
  unsigned char rows[5];
};

constexpr Glyph kFont[] = {
    {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}}, {'3', {7, 1, 7, 1, 7}},
    {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}}, {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}},
    {'8', {7, 5, 7, 5, 7}}, {'9', {7, 5, 7, 1, 7}}, {'A', {2, 5, 7, 5, 5}}, {'B', {6, 5, 6, 5, 6}},
    {'C', {3, 4, 4, 4, 3}}, {'D', {6, 5, 5, 5, 6}}, {'E', {7, 4, 6, 4, 7}}, {'F', {7, 4, 6, 4, 4}},
    {'G', {3, 4, 5, 5, 3}}, {'H', {5, 5, 7, 5, 5}}, {'I', {7, 2, 2, 2, 7}}, {'J', {1, 1, 1, 5, 2}},
    {'K', {5, 5, 6, 5, 5}}, {'L', {4, 4, 4, 4, 7}}, {'M', {5, 7, 7, 5, 5}}, {'N', {6, 5, 5, 5, 5}},
    {'O', {2, 5, 5, 5, 2}}, {'P', {6, 5, 6, 4, 4}}, {'Q', {2, 5, 5, 6, 3}}, {'R', {6, 5, 6, 5, 5}},
    {'S', {3, 4, 2, 1, 6}}, {'T', {7, 2, 2, 2, 2}}, {'U', {5, 5, 5, 5, 7}}, {'V', {5, 5, 5, 5, 2}},
    {'W', {5, 5, 7, 7, 5}}, {'X', {5, 5, 2, 5, 5}}, {'Y', {5, 5, 2, 2, 2}}, {'Z', {7, 1, 2, 4, 7}},
    {'.', {0, 0, 0, 0, 2}}, {'-', {0, 0, 7, 0, 0}}, {'_', {0, 0, 0, 0, 7}}, {':', {0, 2, 0, 2, 0}},
    {'+', {0, 2, 7, 2, 0}}, {'(', {1, 2, 2, 2, 1}}, {')', {4, 2, 2, 2, 4}}, {'/', {1, 1, 2, 4, 4}},
    {'=', {0, 7, 0, 7, 0}}, {',', {0, 0, 0, 2, 4}},
};

constexpr unsigned char kBlack[3] = {0, 0, 0};
constexpr unsigned char kGrey[3] = {200, 200, 200};
constexpr unsigned char kPalette[][3] = {
    {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {140, 86, 75},
};

ImageRgb blank(int w, int h) { return ImageRgb{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3, 255)}; }

void set_pixel(ImageRgb& img, int x, int y, const unsigned char rgb[3]) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  auto* p = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
  p[0] = rgb[0];
  p[1] = rgb[1];
  p[2] = rgb[2];
}

void fill_rect(ImageRgb& img, int x0, int y0, int x1, int y1, const unsigned char rgb[3]) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set_pixel(img, x, y, rgb);
  }
}

// Bresenham, two pixels thick.
void draw_line(ImageRgb& img, int x0, int y0, int x1, int y1, const unsigned char rgb[3]) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    set_pixel(img, x0, y0, rgb);
    set_pixel(img, x0, y0 + 1, rgb);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

int text_width(const std::string& s, int scale) { return static_cast<int>(s.size()) * 4 * scale; }

void draw_frame(ImageRgb& img, int l, int t, int r, int b) {
  draw_line(img, l, b, r, b, kBlack);
  draw_line(img, l, t, l, b, kBlack);
}

}  // namespace

void draw_text(ImageRgb& img, int x, int y, const std::string& text, const unsigned char rgb[3], int scale) {
  for (char ch : text) {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    for (const Glyph& g : kFont) {
      if (g.c != up) continue;
      for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 3; ++c) {
          if (g.rows[r] & (4 >> c)) {
            fill_rect(img, x + c * scale, y + r * scale, x + (c + 1) * scale - 1, y + (r + 1) * scale - 1, rgb);
          }
        }
      }
      break;
    }
    x += 4 * scale;
  }
}

ImageRgb line_plot(const std::string& title, const std::vector<Series>& series, int width, int height) {
  ImageRgb img = blank(width, height);
  const int left = 80, right = width - 20, top = 40, bottom = height - 40;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  draw_text(img, left, 12, title, kBlack);
  draw_frame(img, left, top, right, bottom);
  if (!std::isfinite(xmin)) return img;
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (right - left))); };
  auto py = [&](double y) { return bottom - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (bottom - top))); };
  draw_line(img, left, top, right, top, kGrey);
  draw_text(img, 4, top - 4, fmt(ymax), kBlack);
  draw_text(img, 4, bottom - 6, fmt(ymin), kBlack);
  draw_text(img, left, bottom + 10, fmt(xmin), kBlack);
  draw_text(img, right - text_width(fmt(xmax), 2), bottom + 10, fmt(xmax), kBlack);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto* col = kPalette[k % std::size(kPalette)];
    bool have_prev = false;
    int qx = 0, qy = 0;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const int x = px(s.x[i]), y = py(s.y[i]);
      if (have_prev) draw_line(img, qx, qy, x, y, col);
      else fill_rect(img, x - 1, y - 1, x + 1, y + 1, col);
      qx = x;
      qy = y;
      have_prev = true;
    }
    const int ly = top + 8 + static_cast<int>(k) * 16;
    fill_rect(img, right - 160, ly, right - 148, ly + 8, col);
    draw_text(img, right - 140, ly, s.name, kBlack);
  }
  return img;
}

ImageRgb bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars,
                   int width, int height) {
  ImageRgb img = blank(width, height);
  const int left = 40, right = width - 20, top = 50, bottom = height - 40;
  draw_text(img, left, 12, title, kBlack);
  draw_frame(img, left, top, right, bottom);
  if (bars.empty()) return img;
  double vmax = 0.0, vmin = 0.0;
  for (const auto& [_, v] : bars) {
    if (!std::isfinite(v)) continue;
    vmax = std::max(vmax, v);
    vmin = std::min(vmin, v);
  }
  if (vmax == vmin) vmax = vmin + 1.0;
  auto py = [&](double v) { return bottom - static_cast<int>(std::lround((v - vmin) / (vmax - vmin) * (bottom - top))); };
  const int slot = (right - left) / static_cast<int>(bars.size());
  for (std::size_t k = 0; k < bars.size(); ++k) {
    const auto& [name, v] = bars[k];
    const int x0 = left + static_cast<int>(k) * slot + slot / 5;
    const int x1 = left + static_cast<int>(k + 1) * slot - slot / 5;
    if (std::isfinite(v)) {
      fill_rect(img, x0, py(v), x1, py(0.0), kPalette[k % std::size(kPalette)]);
      draw_text(img, x0, std::min(py(v), py(0.0)) - 14, fmt(v), kBlack);
    }
    draw_text(img, x0, bottom + 10, name, kBlack);
  }
  return img;
}

}  // namespace ddmm::plot
