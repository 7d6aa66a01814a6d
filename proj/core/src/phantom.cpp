// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>

#include "ddmm/image_io.hpp"
#include "ddmm/rng.hpp"

namespace ddmm {

namespace fs = std::filesystem;

namespace {

void check_range(const Range& r, const char* name) {
  require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi,
          std::string("phantom: range ") + name + " must satisfy lo <= hi");
}

struct Ellipse {
  double cx, cy, ax, ay, rot;
  bool contains(double px, double py) const {
    const double dx = px - cx, dy = py - cy;
    const double c = std::cos(rot), s = std::sin(rot);
    const double u = dx * c + dy * s, w = -dx * s + dy * c;
    return (u / ax) * (u / ax) + (w / ay) * (w / ay) <= 1.0;
  }
};

struct Rib {
  double y0, amp, period, phase, half;
  bool contains(double px, double py) const {
    const double yc = y0 + amp * std::sin(2.0 * std::numbers::pi * px / period + phase);
    return std::abs(py - yc) <= half;
  }
};

double draw(RngStream& rng, const Range& r, double scale) { return rng.uniform(r.lo, r.hi) * scale; }

// 4-connected component labels; returns component sizes (label k -> sizes[k-1]).
std::vector<std::size_t> label_components(const std::vector<std::uint8_t>& on, int h, int w,
                                          std::vector<int>& labels) {
  labels.assign(on.size(), 0);
  std::vector<std::size_t> sizes;
  std::deque<int> queue;
  for (int start = 0; start < h * w; ++start) {
    if (!on[start] || labels[start]) continue;
    const int label = static_cast<int>(sizes.size()) + 1;
    std::size_t count = 0;
    labels[start] = label;
    queue.push_back(start);
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      ++count;
      const int y = p / w, x = p % w;
      const int nbr[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nbr) {
        if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
        const int q = n[0] * w + n[1];
        if (on[q] && !labels[q]) {
          labels[q] = label;
          queue.push_back(q);
        }
      }
    }
    sizes.push_back(count);
  }
  return sizes;
}

}  // namespace

void PhantomConfig::validate(int depth) const {
  require(size >= 8, "phantom: size must be >= 8");
  require(depth >= 0 && size % (1 << depth) == 0,
          "phantom: size " + std::to_string(size) + " not divisible by 2^" + std::to_string(depth));
  check_range(body_axis_x, "body_axis_x");
  check_range(body_axis_y, "body_axis_y");
  check_range(lung_axis_x, "lung_axis_x");
  check_range(lung_axis_y, "lung_axis_y");
  check_range(lung_offset_x, "lung_offset_x");
  check_range(lung_offset_y, "lung_offset_y");
  check_range(lung_rotation, "lung_rotation");
  check_range(unlabeled_axis_scale, "unlabeled_axis_scale");
  require(body_axis_x.lo > 0 && body_axis_y.lo > 0 && lung_axis_x.lo > 0 && lung_axis_y.lo > 0,
          "phantom: axes must be positive");
  require(level_background < level_lung && level_lung < level_body,
          "phantom: intensity levels must satisfy background < lung < body");
  require(level_background >= 0.0 && level_body <= 1.0, "phantom: levels must lie in [0, 1]");
  require(rib_delta >= 0.0, "phantom: rib_delta must be >= 0");
  require(rib_min >= 0 && rib_min <= rib_max, "phantom: need 0 <= rib_min <= rib_max");
  require(noise_sigma >= 0.0, "phantom: noise_sigma must be >= 0");
  require(unlabeled_noise_scale >= 0.0, "phantom: unlabeled_noise_scale must be >= 0");
}

PhantomConfig PhantomConfig::unlabeled_variant() const {
  PhantomConfig v = *this;
  const auto widen = [&](Range r) {
    return Range{r.lo * unlabeled_axis_scale.lo, r.hi * unlabeled_axis_scale.hi};
  };
  v.lung_axis_x = widen(lung_axis_x);
  v.lung_axis_y = widen(lung_axis_y);
  v.noise_sigma = noise_sigma * unlabeled_noise_scale;
  return v;
}

Phantom generate_phantom(const PhantomConfig& cfg, std::uint64_t index) {
  cfg.validate(0);
  RngStream rng(cfg.seed, "phantom", index);
  const double s = cfg.size;
  constexpr int kMaxRetries = 10;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    const double cx = s / 2.0 + rng.uniform(-0.02, 0.02) * s;
    const double cy = s / 2.0 + rng.uniform(-0.02, 0.02) * s;
    const Ellipse body{cx, cy, draw(rng, cfg.body_axis_x, s), draw(rng, cfg.body_axis_y, s), 0.0};
    Ellipse lungs[2];
    for (int k = 0; k < 2; ++k) {
      const double side = k == 0 ? -1.0 : 1.0;
      const double ax = draw(rng, cfg.lung_axis_x, s);
      const double ay = draw(rng, cfg.lung_axis_y, s);
      const double ox = draw(rng, cfg.lung_offset_x, s);
      const double oy = draw(rng, cfg.lung_offset_y, s);
      const double rot = draw(rng, cfg.lung_rotation, 1.0) * side;
      lungs[k] = {cx + side * ox, cy + oy, ax, ay, rot};
    }
    const int n_ribs = static_cast<int>(rng.uniform_int(cfg.rib_min, cfg.rib_max));
    std::vector<Rib> ribs;
    for (int k = 0; k < n_ribs; ++k) {
      Rib r;
      r.y0 = cy - 0.3 * s + (k + 0.5) * (0.6 * s / n_ribs) + rng.uniform(-0.02, 0.02) * s;
      r.amp = rng.uniform(0.02, 0.05) * s;
      r.period = rng.uniform(0.6, 1.0) * s;
      r.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      r.half = rng.uniform(0.0125, 0.02) * s;
      ribs.push_back(r);
    }
    // Full axis lengths under 2 px are degenerate; redraw.
    bool degenerate = 2.0 * body.ax < 2.0 || 2.0 * body.ay < 2.0;
    for (const auto& l : lungs) degenerate = degenerate || 2.0 * l.ax < 2.0 || 2.0 * l.ay < 2.0;
    if (degenerate) continue;

    Phantom p{Grid(1, cfg.size, cfg.size), Grid(1, cfg.size, cfg.size), Grid(1, cfg.size, cfg.size)};
    for (int y = 0; y < cfg.size; ++y) {
      for (int x = 0; x < cfg.size; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const bool in_body = body.contains(px, py);
        const bool in_lung = in_body && (lungs[0].contains(px, py) || lungs[1].contains(px, py));
        double v = !in_body ? cfg.level_background : in_lung ? cfg.level_lung : cfg.level_body;
        if (in_body) {
          for (const auto& r : ribs) {
            if (r.contains(px, py)) {
              v += cfg.rib_delta;
              break;
            }
          }
        }
        p.image(0, y, x) = static_cast<float>(v);
        p.mask(0, y, x) = in_lung ? 1.f : 0.f;
        p.body(0, y, x) = in_body ? 1.f : 0.f;
      }
    }
    for (auto& v : p.image.values()) {
      double raw = v;
      if (cfg.noise_sigma > 0.0) raw += cfg.noise_sigma * rng.normal();
      v = static_cast<float>(PhantomConfig::to_model(std::clamp(raw, 0.0, 1.0)));
    }
    return p;
  }
  throw ValidationError("phantom " + std::to_string(index) + ": degenerate ellipse after " +
                        std::to_string(kMaxRetries) + " retries");
}

Grid to_model_mask(const Grid& mask01) {
  Grid m = Grid::like(mask01);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = mask01[i] > 0.5f ? 1.f : -1.f;
  return m;
}

Grid from_model_mask(const Grid& model_mask) {
  Grid m = Grid::like(model_mask);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = model_mask[i] >= 0.f ? 1.f : 0.f;
  return m;
}

int train_count(int n) { return static_cast<int>(std::lround(0.8 * n)); }

DatasetSplit make_splits(const PhantomConfig& cfg, int n_labeled, int n_unlabeled) {
  require(n_labeled >= 5, "make_splits: n_labeled must be >= 5");
  require(n_unlabeled >= 0, "make_splits: n_unlabeled must be >= 0");
  cfg.validate(0);
  RngStream rng(cfg.seed, "split");
  const auto perm = rng.permutation(static_cast<std::size_t>(n_labeled));
  const int n_train = train_count(n_labeled);
  DatasetSplit split;
  split.train_indices.assign(perm.begin(), perm.begin() + n_train);
  split.test_indices.assign(perm.begin() + n_train, perm.end());
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  auto labeled = [&](std::uint64_t idx) {
    Phantom p = generate_phantom(cfg, idx);
    return LabeledPair{std::move(p.image), to_model_mask(p.mask)};
  };
  for (auto i : split.train_indices) split.labeled_train.push_back(labeled(i));
  for (auto i : split.test_indices) split.labeled_test.push_back(labeled(i));
  const PhantomConfig ucfg = cfg.unlabeled_variant();
  for (int k = 0; k < n_unlabeled; ++k) {
    const auto idx = static_cast<std::uint64_t>(n_labeled + k);
    split.unlabeled_indices.push_back(idx);
    split.unlabeled.push_back(generate_phantom(ucfg, idx).image);
  }
  return split;
}

namespace {

Image8 center_crop(const Image8& img) {
  const int side = std::min(img.width, img.height);
  if (img.width == side && img.height == side) return img;
  const int x0 = (img.width - side) / 2, y0 = (img.height - side) / 2;
  Image8 out{side, side, std::vector<std::uint8_t>(static_cast<std::size_t>(side) * side)};
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) out.pixels[static_cast<std::size_t>(y) * side + x] = img.at(x0 + x, y0 + y);
  }
  return out;
}

// Area average over source pixels whose centres fall in the target footprint.
Image8 resize_area(const Image8& img, int size) {
  if (img.width == size) return img;
  const double scale = static_cast<double>(img.width) / size;
  Image8 out{size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int sx0 = static_cast<int>(std::ceil(x * scale - 0.5));
      const int sx1 = static_cast<int>(std::ceil((x + 1) * scale - 0.5));
      const int sy0 = static_cast<int>(std::ceil(y * scale - 0.5));
      const int sy1 = static_cast<int>(std::ceil((y + 1) * scale - 0.5));
      double sum = 0.0;
      int n = 0;
      for (int sy = std::max(0, sy0); sy < std::min(img.height, sy1); ++sy) {
        for (int sx = std::max(0, sx0); sx < std::min(img.width, sx1); ++sx) {
          sum += img.at(sx, sy);
          ++n;
        }
      }
      if (n == 0) {
        const int nx = std::min(img.width - 1, static_cast<int>((x + 0.5) * scale));
        const int ny = std::min(img.height - 1, static_cast<int>((y + 0.5) * scale));
        sum = img.at(nx, ny);
        n = 1;
      }
      out.pixels[static_cast<std::size_t>(y) * size + x] =
          static_cast<std::uint8_t>(std::lround(sum / n));
    }
  }
  return out;
}

Image8 resize_nearest(const Image8& img, int size) {
  if (img.width == size) return img;
  const double scale = static_cast<double>(img.width) / size;
  Image8 out{size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int nx = std::min(img.width - 1, static_cast<int>((x + 0.5) * scale));
      const int ny = std::min(img.height - 1, static_cast<int>((y + 0.5) * scale));
      out.pixels[static_cast<std::size_t>(y) * size + x] = img.at(nx, ny);
    }
  }
  return out;
}

std::map<std::string, fs::path> list_images(const fs::path& dir) {
  require(fs::is_directory(dir), "not a directory: " + dir.string());
  std::map<std::string, fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext != ".pgm" && ext != ".png") continue;
    const std::string stem = e.path().stem().string();
    require(!files.contains(stem), "duplicate image stem '" + stem + "' in " + dir.string());
    files.emplace(stem, e.path());
  }
  return files;
}

}  // namespace

FolderDataset ingest_folder(const fs::path& image_dir, const std::optional<fs::path>& mask_dir,
                            int size) {
  require(size >= 1, "ingest: size must be positive");
  const auto images = list_images(image_dir);
  std::map<std::string, fs::path> masks;
  if (mask_dir) masks = list_images(*mask_dir);
  FolderDataset ds;
  for (const auto& [stem, path] : images) {
    const Image8 img = read_image(path);
    ds.names.push_back(stem);
    ds.images.push_back(image_to_grid(resize_area(center_crop(img), size)));
    if (!mask_dir) continue;
    const auto it = masks.find(stem);
    require(it != masks.end(), "no mask for image '" + stem + "' in " + mask_dir->string());
    const Image8 m = read_image(it->second);
    require(m.width == img.width && m.height == img.height,
            it->second.string() + ": mask shape " + std::to_string(m.width) + "x" +
                std::to_string(m.height) + " does not match image " + std::to_string(img.width) +
                "x" + std::to_string(img.height));
    bool has_one = false, has_255 = false;
    for (std::uint8_t v : m.pixels) {
      if (v == 1) has_one = true;
      else if (v == 255) has_255 = true;
      else if (v != 0) {
        throw ValidationError(it->second.string() + ": non-binary mask value " +
                              std::to_string(static_cast<int>(v)));
      }
    }
    require(!(has_one && has_255), it->second.string() + ": mask mixes values 1 and 255");
    const Image8 mr = resize_nearest(center_crop(m), size);
    Grid g(1, size, size);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = mr.pixels[i] != 0 ? 1.f : -1.f;
    ds.masks.push_back(std::move(g));
  }
  return ds;
}

Grid oracle_segment(const Grid& image, const PhantomConfig& cfg) {
  require(image.channels() == 1, "oracle_segment: single-channel image required");
  const int h = image.height(), w = image.width();
  const auto n = static_cast<std::size_t>(h) * w;
  const float t_body = static_cast<float>(PhantomConfig::to_model(0.5 * (cfg.level_background + cfg.level_lung)));
  const float t_lung = static_cast<float>(PhantomConfig::to_model(0.5 * (cfg.level_lung + cfg.level_body)));

  // Body silhouette: largest above-background component with holes filled.
  std::vector<std::uint8_t> above(n);
  for (std::size_t i = 0; i < n; ++i) above[i] = image[i] > t_body;
  std::vector<int> labels;
  auto sizes = label_components(above, h, w, labels);
  Grid out(1, h, w);
  if (sizes.empty()) return out;
  const int body_label =
      static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin()) + 1;
  std::vector<std::uint8_t> outside(n);
  for (std::size_t i = 0; i < n; ++i) outside[i] = labels[i] != body_label;
  std::vector<int> out_labels;
  label_components(outside, h, w, out_labels);
  std::vector<std::uint8_t> touches_border(n + 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (y == 0 || x == 0 || y == h - 1 || x == w - 1) {
        touches_border[out_labels[static_cast<std::size_t>(y) * w + x]] = 1;
      }
    }
  }
  std::vector<std::uint8_t> candidate(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool interior = labels[i] == body_label || !touches_border[out_labels[i]];
    candidate[i] = interior && image[i] < t_lung;
  }
  std::vector<int> cand_labels;
  sizes = label_components(candidate, h, w, cand_labels);
  std::vector<int> order(sizes.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
  std::vector<std::uint8_t> keep(sizes.size() + 1, 0);
  for (std::size_t k = 0; k < std::min<std::size_t>(2, order.size()); ++k) keep[order[k] + 1] = 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = keep[cand_labels[i]] ? 1.f : 0.f;
  return out;
}

double foreground_fraction(const Grid& mask01) {
  double s = 0.0;
  for (float v : mask01.values()) s += v > 0.5f ? 1.0 : 0.0;
  return s / static_cast<double>(mask01.size());
}

}  // namespace ddmm
