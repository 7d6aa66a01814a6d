// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "criteria.hpp"
#include "ddmm/image_io.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/sampler.hpp"
#include "pipeline.hpp"

namespace ddmm::acceptance {

namespace fs = std::filesystem;

namespace {

struct Preset {
  int size;
  int n_labeled;
  int n_unlabeled;
  int n_reference;
  int epochs;
  int n_samples;
  int n_downstream;
  int replicates;
};

// acceptance: the full protocol. desk: 32x32, otherwise unchanged. smoke: exercises the driver only.
Preset make_preset(const std::string& scale) {
  if (scale == "desk") return {32, 200, 2000, 200, 100, 200, 2000, 3};
  if (scale == "smoke") return {16, 20, 20, 10, 2, 10, 20, 3};
  return {64, 200, 2000, 200, 100, 200, 2000, 3};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

class Experiment {
 public:
  explicit Experiment(const Context& ctx) : p_(make_preset(ctx.scale)), root_(ctx.workdir / ctx.scale) {
    fs::create_directories(root_);
  }

  const Preset& preset() const { return p_; }
  fs::path dir(const std::string& rel) const { return root_ / rel; }

  fs::path data() {
    const fs::path out = dir("data");
    step("gen-data", out, config("data", 0, 1.0, 0, 1), {});
    return out;
  }

  /// Trains (or resumes) one model; lambda 0 is the supervised-only variant.
  fs::path model(const std::string& name, int replicate, double lambda) {
    const fs::path d = data();
    const fs::path out = dir(name + "/model");
    const fs::path cfg = config(name, replicate, lambda, 0, p_.n_samples);
    if (done(out)) return out;
    std::vector<std::string> args = {"train", "--config", cfg.string(), "--data", d.string(), "--out", out.string()};
    if (fs::exists(out / "checkpoint.ddmm")) args.push_back("--resume");
    else args.push_back("--force");
    run(args);
    return out;
  }

  fs::path samples(const std::string& name, const fs::path& model, const std::string& as, std::uint64_t seed, int n) {
    const fs::path out = dir(name + "/" + as);
    step("sample", out, config(name + "-" + as, 0, 1.0, seed, n), {"--checkpoint", (model / "checkpoint.ddmm").string()});
    return out;
  }

  fs::path quality(const std::string& name, const fs::path& samples) {
    const fs::path out = dir(name + "/quality");
    step("eval-images", out, config("data", 0, 1.0, 0, 1), {"--real", data().string(), "--fake", samples.string()});
    return out;
  }

  fs::path segmenter(const std::string& name, const fs::path& pairs) {
    const fs::path seg = dir(name + "/seg");
    step("train-seg", seg, config("data", 0, 1.0, 0, 1), {"--pairs", pairs.string()});
    const fs::path eval = dir(name + "/seg_eval");
    step("eval-seg", eval, config("data", 0, 1.0, 0, 1),
         {"--segnet", (seg / "segnet.ddmm").string(), "--test", data().string()});
    return eval;
  }

 private:
  static bool done(const fs::path& out) { return fs::exists(out / "manifest.json"); }

  static void run(const std::vector<std::string>& args) {
    const int code = testing::run_cli(args);
    if (code != 0) throw std::runtime_error(args.front() + " exited with " + std::to_string(code));
  }

  void step(const std::string& command, const fs::path& out, const fs::path& cfg, std::vector<std::string> extra) {
    if (done(out)) return;
    std::vector<std::string> args = {command, "--config", cfg.string(), "--out", out.string(), "--force"};
    args.insert(args.end(), extra.begin(), extra.end());
    run(args);
  }

  fs::path config(const std::string& name, int replicate, double lambda, std::uint64_t sample_seed, int n) {
    std::ostringstream c;
    c << "[data]\nn_labeled = " << p_.n_labeled << "\nn_unlabeled = " << p_.n_unlabeled
      << "\nn_reference = " << p_.n_reference << "\nsize = " << p_.size << "\n\n"
      << "[model]\ninit_seed = " << replicate << "\n\n"
      << "[train]\nepochs = " << p_.epochs << "\nlambda_unsup = " << lambda
      << "\nseed_supervised = " << 1 + 10 * replicate << "\nseed_unsupervised = " << 2 + 10 * replicate
      << "\nvlb_every = 10\ncheckpoint_every = 1\n\n"
      << "[sampler]\nseed = " << sample_seed << "\nn = " << n << "\n";
    std::string file = name;
    for (auto& ch : file) {
      if (ch == '/') ch = '_';
    }
    const fs::path path = root_ / "configs" / (file + ".ini");
    fs::create_directories(path.parent_path());
    std::ofstream(path) << c.str();
    return path;
  }

  Preset p_;
  fs::path root_;
};

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  explicit Csv(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (line.back() == ',') cells.emplace_back();
      if (header.empty()) header = cells;
      else rows.push_back(cells);
    }
  }

  double at(std::size_t row, const std::string& col) const {
    const auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) throw std::runtime_error("missing column " + col);
    const std::string& s = rows.at(row).at(static_cast<std::size_t>(it - header.begin()));
    return s.empty() ? std::nan("") : std::stod(s);
  }
};

std::string replicate_name(const char* variant, int r) { return std::string(variant) + "-r" + std::to_string(r); }

}  // namespace

Verdict joint_consistency(const Context& ctx) {
  Experiment ex(ctx);
  const auto& p = ex.preset();
  const fs::path model = ex.model(replicate_name("ddmm2", 0), 0, 1.0);
  const fs::path dir = ex.samples(replicate_name("ddmm2", 0), model, "samples", 1000, p.n_samples);
  std::vector<SamplePair> pairs;
  int fg_ok = 0;
  for (int i = 0; i < p.n_samples; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06d", i);
    SamplePair s;
    s.image = image_to_grid(read_image(dir / "samples" / (std::string(stem) + "_image.pgm")));
    const Image8 m = read_image(dir / "samples" / (std::string(stem) + "_mask.pgm"));
    s.mask = Grid(1, m.height, m.width);
    for (std::size_t k = 0; k < m.pixels.size(); ++k) s.mask[k] = m.pixels[k] == 255 ? 1.f : 0.f;
    const double fg = foreground_fraction(s.mask);
    fg_ok += fg >= 0.05 && fg <= 0.6;
    pairs.push_back(std::move(s));
  }
  PhantomConfig pc;
  pc.size = p.size;
  const JointConsistency jc = ddmm::joint_consistency(pairs, pc);
  Verdict v;
  v.pass = jc.gap() >= 0.25;
  v.measured = "matched dice " + fmt(jc.matched) + ", shuffled " + fmt(jc.shuffled) + ", gap " + fmt(jc.gap()) +
               " over " + std::to_string(pairs.size()) + " pairs; mask fg in [0.05, 0.6] for " +
               std::to_string(fg_ok) + "/" + std::to_string(pairs.size());
  v.tolerance = "gap >= 0.25";
  return v;
}

Verdict semi_supervision(const Context& ctx) {
  Experiment ex(ctx);
  const auto& p = ex.preset();
  int wins = 0;
  std::ostringstream m;
  for (int r = 0; r < p.replicates; ++r) {
    double fid[2], kid[2];
    for (int variant = 0; variant < 2; ++variant) {
      const std::string name = replicate_name(variant == 0 ? "ddmm1" : "ddmm2", r);
      const fs::path model = ex.model(name, r, variant == 0 ? 0.0 : 1.0);
      const fs::path s = ex.samples(name, model, "samples", 1000, p.n_samples);
      const Csv q(ex.quality(name, s) / "quality.csv");
      fid[variant] = q.at(0, "fid");
      kid[variant] = q.at(0, "kid");
    }
    const bool win = fid[1] <= fid[0] && kid[1] <= kid[0];
    wins += win;
    m << "r" << r << ": fid " << fmt(fid[0]) << " -> " << fmt(fid[1]) << ", kid " << fmt(kid[0]) << " -> "
      << fmt(kid[1]) << (win ? " (ok)" : " (worse)") << "; ";
  }
  Verdict v;
  v.pass = wins >= 2;
  v.measured = m.str() + std::to_string(wins) + "/" + std::to_string(p.replicates) + " replicates";
  v.tolerance = "DDMM(2) <= DDMM(1) on both fid and kid in >= 2 of 3";
  return v;
}

Verdict downstream_segmentation(const Context& ctx) {
  Experiment ex(ctx);
  const auto& p = ex.preset();
  const std::string name = replicate_name("ddmm2", 0);
  const fs::path model = ex.model(name, 0, 1.0);
  const fs::path pairs = ex.samples(name, model, "downstream_pairs", 500000, p.n_downstream);
  const Csv generated(ex.segmenter(name, pairs) / "seg_eval.csv");
  const Csv ceiling(ex.segmenter("calibration", ex.data()) / "seg_eval.csv");
  const std::size_t g = generated.rows.size() - 1, c = ceiling.rows.size() - 1;
  const double dice = generated.at(g, "dice");
  Verdict v;
  v.pass = dice >= 0.80;
  v.measured = "dice " + fmt(dice) + ", rand " + fmt(generated.at(g, "rand")) + " from " +
               std::to_string(p.n_downstream) + " generated pairs; real-pair ceiling dice " +
               fmt(ceiling.at(c, "dice")) + ", rand " + fmt(ceiling.at(c, "rand"));
  v.tolerance = "dice >= 0.80";
  return v;
}

Verdict vlb_decrease(const Context& ctx) {
  Experiment ex(ctx);
  const Csv log(ex.model(replicate_name("ddmm2", 0), 0, 1.0) / "training_log.csv");
  const double first = log.at(0, "vlb_img");
  const double last = log.at(log.rows.size() - 1, "vlb_img");
  Verdict v;
  v.pass = std::isfinite(first) && std::isfinite(last) && last < first;
  v.measured = "image-branch bound " + fmt(first) + " at epoch " + std::to_string(static_cast<int>(log.at(0, "epoch"))) +
               ", " + fmt(last) + " at epoch " + std::to_string(static_cast<int>(log.at(log.rows.size() - 1, "epoch")));
  v.tolerance = "final < first";
  return v;
}

}  // namespace ddmm::acceptance
