// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "ddmm/checkpoint.hpp"
#include "ddmm/errors.hpp"
#include "ddmm/image_io.hpp"
#include "ddmm/manifest.hpp"
#include "ddmm/metrics.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/plot.hpp"
#include "ddmm/run_config.hpp"
#include "ddmm/sampler.hpp"
#include "ddmm/segmenter.hpp"
#include "ddmm/trainer.hpp"

namespace ddmm::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kConfigEcho = "config.ini";

void say(const Options& o, const std::string& msg) {
  if (!o.quiet) std::cerr << msg << '\n';
}

RunConfig load_config(const Options& o) {
  if (o.config.empty()) {
    RunConfig c;
    c.validate();
    return c;
  }
  return load_run_config(o.config);
}

std::string pick(const std::string& flag, const std::string& from_config, const char* what) {
  const std::string v = flag.empty() ? from_config : flag;
  require(!v.empty(), std::string("missing --") + what + " (or [paths] " + what + " in the config)");
  return v;
}

fs::path prepare_out(const std::string& out, bool force) {
  require(!out.empty(), "missing --out");
  const fs::path p(out);
  if (fs::exists(p)) {
    require(fs::is_directory(p), "output path exists and is not a directory: " + out);
    if (!fs::is_empty(p)) {
      require(force, "output directory " + out + " already exists; pass --force to overwrite");
      fs::remove_all(p);
    }
  }
  fs::create_directories(p);
  return p;
}

std::string index_name(std::uint64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(i));
  return buf;
}

Manifest start_manifest(const std::string& command, const RunConfig& cfg) {
  Manifest m;
  m.command = command;
  m.version = artifact_version();
  m.config = cfg.to_text();
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void finish(const fs::path& out, Manifest& m, const RunConfig& cfg) {
  write_text(out / kConfigEcho, cfg.to_text());
  m.add_output(out, kConfigEcho);
  std::sort(m.outputs.begin(), m.outputs.end(),
            [](const FileDigest& a, const FileDigest& b) { return a.path < b.path; });
  m.write(out / kManifest);
}

Manifest manifest_of(const fs::path& dir) { return Manifest::read(dir / kManifest); }

std::optional<Manifest> try_manifest_of(const fs::path& dir) {
  if (!fs::exists(dir / kManifest)) return std::nullopt;
  return manifest_of(dir);
}

// Finds the gen-data run a path belongs to, if any.
std::optional<fs::path> data_root_of(fs::path p) {
  p = fs::weakly_canonical(p);
  for (; !p.empty(); p = p.parent_path()) {
    if (fs::exists(p / kManifest) && manifest_of(p).command == "gen-data") return p;
    if (p == p.root_path()) break;
  }
  return std::nullopt;
}

void refuse_test_split(const fs::path& dir) {
  const auto root = data_root_of(dir);
  if (!root) return;
  const fs::path test = fs::weakly_canonical(*root / "labeled" / "test");
  const fs::path d = fs::weakly_canonical(dir);
  const auto rel = d.lexically_relative(test);
  require(rel.empty() || *rel.begin() == "..",
          "refusing to read the labeled test split (" + dir.string() + "); only eval-seg may use it");
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& suffix = "") {
  require(fs::is_directory(dir), "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext != ".pgm" && ext != ".png") continue;
    const std::string stem = e.path().stem().string();
    if (!suffix.empty() && (stem.size() < suffix.size() || stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) != 0)) {
      continue;
    }
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Grid load_image(const fs::path& p) { return image_to_grid(read_image(p)); }

// {0, 255} masks to {0, 1}.
Grid load_mask01(const fs::path& p) {
  const Image8 img = read_image(p);
  Grid g(1, img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto v = img.pixels[i];
    require(v == 0 || v == 255, p.string() + ": mask value " + std::to_string(v) + " is not 0 or 255");
    g[i] = v == 255 ? 1.f : 0.f;
  }
  return g;
}

// Image set for the metrics: a gen-data run uses its reference images, a
// sample run its generated images, anything else every image in the folder.
std::vector<Grid> collect_images(const fs::path& dir) {
  refuse_test_split(dir);
  std::vector<fs::path> files;
  if (fs::exists(dir / kManifest) && manifest_of(dir).command == "gen-data") {
    files = list_files(dir / "reference" / "images");
  } else if (fs::is_directory(dir / "samples")) {
    files = list_files(dir / "samples", "_image");
  } else {
    for (const auto& f : list_files(dir)) {
      const std::string stem = f.stem().string();
      if (stem.size() < 5 || stem.substr(stem.size() - 5) != "_mask") files.push_back(f);
    }
  }
  require(!files.empty(), "no images found in " + dir.string());
  std::vector<Grid> out;
  for (const auto& f : files) out.push_back(load_image(f));
  return out;
}

std::set<std::string> lineage(const fs::path& dir) {
  const auto m = try_manifest_of(dir);
  require(m.has_value(), "no manifest.json in " + dir.string() + "; cannot establish training lineage");
  const auto it = m->samples.find("trained_on");
  return it == m->samples.end() ? std::set<std::string>{} : it->second;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

CsvTable read_csv(const fs::path& p) {
  std::ifstream f(p);
  require(static_cast<bool>(f), "cannot read " + p.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(cell);
    if (!s.empty() && s.back() == ',') v.emplace_back();
    return v;
  };
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) t.header = split(line);
    else t.rows.push_back(split(line));
  }
  return t;
}

double to_double(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

int gen_data(const Options& o) {
  RunConfig cfg = load_config(o);
  if (o.seed) cfg.phantom.seed = *o.seed;
  cfg.validate();
  const fs::path out = prepare_out(o.out, o.force);
  say(o, "gen-data: " + std::to_string(cfg.n_labeled) + " labeled, " + std::to_string(cfg.n_unlabeled) +
             " unlabeled, " + std::to_string(cfg.n_reference) + " reference at " +
             std::to_string(cfg.phantom.size) + "x" + std::to_string(cfg.phantom.size));
  const DatasetSplit split = make_splits(cfg.phantom, cfg.n_labeled, cfg.n_unlabeled);
  Manifest m = start_manifest("gen-data", cfg);
  m.seeds["phantom"] = cfg.phantom.seed;
  const std::uint64_t seed = cfg.phantom.seed;

  auto write_labeled = [&](const std::string& part, const std::vector<LabeledPair>& pairs,
                           const std::vector<std::uint64_t>& idx) {
    const fs::path dir = out / "labeled" / part;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    auto& ids = m.samples["labeled_" + part];
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const std::string name = index_name(idx[k]) + ".pgm";
      write_pgm(dir / "images" / name, grid_to_image(pairs[k].image));
      write_pgm(dir / "masks" / name, mask_to_image(from_model_mask(pairs[k].mask)));
      m.add_output(out, "labeled/" + part + "/images/" + name);
      m.add_output(out, "labeled/" + part + "/masks/" + name);
      ids.insert(sample_id(seed, idx[k]));
    }
  };
  write_labeled("train", split.labeled_train, split.train_indices);
  write_labeled("test", split.labeled_test, split.test_indices);

  fs::create_directories(out / "unlabeled" / "images");
  auto& uids = m.samples["unlabeled"];
  for (std::size_t k = 0; k < split.unlabeled.size(); ++k) {
    const std::string name = index_name(split.unlabeled_indices[k]) + ".pgm";
    write_pgm(out / "unlabeled" / "images" / name, grid_to_image(split.unlabeled[k]));
    m.add_output(out, "unlabeled/images/" + name);
    uids.insert(sample_id(seed, split.unlabeled_indices[k]));
  }

  fs::create_directories(out / "reference" / "images");
  auto& rids = m.samples["reference"];
  const auto first_ref = static_cast<std::uint64_t>(cfg.n_labeled + cfg.n_unlabeled);
  for (int k = 0; k < cfg.n_reference; ++k) {
    const std::uint64_t idx = first_ref + static_cast<std::uint64_t>(k);
    const std::string name = index_name(idx) + ".pgm";
    write_pgm(out / "reference" / "images" / name, grid_to_image(generate_phantom(cfg.phantom, idx).image));
    m.add_output(out, "reference/images/" + name);
    rids.insert(sample_id(seed, idx));
  }
  finish(out, m, cfg);
  say(o, "gen-data: wrote " + out.string());
  return 0;
}

int train(const Options& o) {
  RunConfig cfg = load_config(o);
  if (o.seed) cfg.init_seed = *o.seed;
  cfg.validate();
  const fs::path data(pick(o.data, cfg.data_dir, "data"));
  const Manifest dm = manifest_of(data);
  require(dm.command == "gen-data", data.string() + " is not a gen-data directory");

  std::vector<LabeledPair> labeled;
  for (const auto& f : list_files(data / "labeled" / "train" / "images")) {
    const Grid mask = load_mask01(data / "labeled" / "train" / "masks" / f.filename());
    labeled.push_back({load_image(f), to_model_mask(mask)});
  }
  std::vector<Grid> unlabeled;
  if (fs::is_directory(data / "unlabeled" / "images")) {
    for (const auto& f : list_files(data / "unlabeled" / "images")) unlabeled.push_back(load_image(f));
  }
  require(!labeled.empty(), "no labeled training pairs in " + data.string());
  const int h = labeled.front().image.height(), w = labeled.front().image.width();

  fs::path out;
  std::optional<DdmmModel> loaded;
  TrainerState state;
  TrainingLog previous;
  if (o.resume) {
    require(!o.out.empty(), "missing --out");
    out = o.out;
    const Checkpoint ck = load_checkpoint(out / "checkpoint.ddmm");
    loaded = ck.to_model();
    state = ck.trainer_state();
    require(loaded->image_net.arch() == cfg.arch, "resume: checkpoint architecture differs from config");
    if (fs::exists(out / "training_log.csv")) {
      const CsvTable t = read_csv(out / "training_log.csv");
      for (const auto& r : t.rows) {
        EpochRecord e{std::stoi(r.at(0)), to_double(r.at(1)), to_double(r.at(2)), to_double(r.at(3)),
                      to_double(r.size() > 4 ? r[4] : "")};
        if (e.epoch <= loaded->epoch) previous.epochs.push_back(e);
      }
    }
    say(o, "train: resuming at epoch " + std::to_string(loaded->epoch));
  } else {
    out = prepare_out(o.out, o.force);
    loaded = DdmmModel::create(cfg.arch, cfg.make_schedule(), cfg.init_seed);
    state = TrainerState::fresh(*loaded, cfg.train);
  }
  DdmmModel& model = *loaded;
  say(o, "train: " + std::to_string(labeled.size()) + " labeled, " + std::to_string(unlabeled.size()) +
             " unlabeled, " + std::to_string(model.image_net.parameter_count()) + " parameters per branch");

  TrainingLog log = previous;
  FitCallbacks cb;
  cb.on_epoch_end = [&](const DdmmModel& mdl, const TrainerState& st, const EpochRecord& rec) {
    log.epochs.push_back(rec);
    std::ostringstream line;
    line << "epoch " << rec.epoch << " sup_img " << rec.loss_sup_image << " sup_mask " << rec.loss_sup_mask
         << " unsup " << rec.loss_unsup;
    if (std::isfinite(rec.vlb_image)) line << " vlb " << rec.vlb_image;
    say(o, line.str());
    const bool last = rec.epoch == cfg.train.epochs;
    if (last || (cfg.checkpoint_every > 0 && rec.epoch % cfg.checkpoint_every == 0)) {
      save_checkpoint(out / "checkpoint.ddmm", Checkpoint::from_model(mdl, h, w, &st));
      log.write_csv((out / "training_log.csv").string());
    }
  };
  fit(model, labeled, unlabeled, cfg.train, state, cb);
  if (log.epochs.empty() || log.epochs.back().epoch != model.epoch || !fs::exists(out / "checkpoint.ddmm")) {
    save_checkpoint(out / "checkpoint.ddmm", Checkpoint::from_model(model, h, w, &state));
    log.write_csv((out / "training_log.csv").string());
  }

  Manifest m = start_manifest("train", cfg);
  m.add_input(data);
  m.seeds["init"] = cfg.init_seed;
  m.seeds["supervised_noise"] = cfg.train.seed_supervised;
  m.seeds["unsupervised_noise"] = cfg.train.seed_unsupervised;
  m.seeds["vlb_probe"] = cfg.train.vlb_seed;
  auto& trained = m.samples["trained_on"];
  trained.insert(dm.samples.at("labeled_train").begin(), dm.samples.at("labeled_train").end());
  if (cfg.train.lambda_unsup > 0.0 && dm.samples.contains("unlabeled")) {
    trained.insert(dm.samples.at("unlabeled").begin(), dm.samples.at("unlabeled").end());
  }
  m.notes["variant"] = cfg.train.lambda_unsup > 0.0 ? "DDMM(2)" : "DDMM(1)";
  m.notes["image_size"] = std::to_string(h) + "x" + std::to_string(w);
  m.add_output(out, "checkpoint.ddmm");
  m.add_output(out, "training_log.csv");
  finish(out, m, cfg);
  say(o, "train: wrote " + out.string());
  return 0;
}

int sample(const Options& o) {
  RunConfig cfg = load_config(o);
  if (o.seed) cfg.sample_seed = *o.seed;
  if (o.n) cfg.n_samples = *o.n;
  cfg.validate();
  const fs::path ckpt_path(pick(o.checkpoint, cfg.checkpoint, "checkpoint"));
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const DdmmModel model = ck.to_model();
  SamplerSettings st = cfg.sampler;
  st.height = ck.height;
  st.width = ck.width;
  const fs::path out = prepare_out(o.out, o.force);
  fs::create_directories(out / "samples");
  say(o, "sample: " + std::to_string(cfg.n_samples) + " pairs with " + to_string(st.kind));

  Manifest m = start_manifest("sample", cfg);
  m.add_input(ckpt_path);
  m.seeds["sampler_base"] = cfg.sample_seed;
  m.samples["trained_on"] = lineage(ckpt_path.parent_path().empty() ? fs::path(".") : ckpt_path.parent_path());
  auto& generated = m.samples["generated"];

  std::ostringstream csv;
  csv << "index,seed,sampler,steps,image,mask\n";
  constexpr std::size_t kChunk = 32;
  const auto n = static_cast<std::size_t>(cfg.n_samples);
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t count = std::min(kChunk, n - begin);
    const auto pairs = sample_batch(model, cfg.sample_seed + begin, count, st);
    for (std::size_t k = 0; k < count; ++k) {
      const std::string stem = index_name(begin + k);
      write_pgm(out / "samples" / (stem + "_image.pgm"), grid_to_image(pairs[k].image));
      write_pgm(out / "samples" / (stem + "_mask.pgm"), mask_to_image(pairs[k].mask));
      m.add_output(out, "samples/" + stem + "_image.pgm");
      m.add_output(out, "samples/" + stem + "_mask.pgm");
      csv << begin + k << ',' << pairs[k].seed << ',' << to_string(pairs[k].kind) << ',' << pairs[k].steps_used
          << ',' << stem << "_image.pgm," << stem << "_mask.pgm\n";
      generated.insert("sample:" + std::to_string(pairs[k].seed));
    }
    say(o, "sample: " + std::to_string(begin + count) + "/" + std::to_string(n));
  }
  write_text(out / "samples.csv", csv.str());
  m.add_output(out, "samples.csv");
  finish(out, m, cfg);
  return 0;
}

int eval_images(const Options& o) {
  RunConfig cfg = load_config(o);
  if (o.seed) cfg.metrics.extractor_seed = *o.seed;
  cfg.validate();
  const fs::path real(pick(o.real, cfg.real_dir, "real"));
  const fs::path fake(pick(o.fake, cfg.fake_dir, "fake"));
  const auto real_images = collect_images(real);
  const auto fake_images = collect_images(fake);
  const fs::path out = prepare_out(o.out, o.force);
  say(o, "eval-images: " + std::to_string(real_images.size()) + " real vs " +
             std::to_string(fake_images.size()) + " generated");
  const auto report = metrics::evaluate_quality(real_images, fake_images, cfg.metrics);
  metrics::write_quality_csv((out / "quality.csv").string(), report, cfg.metrics);
  std::ostringstream line;
  line << std::setprecision(6) << "eval-images: fid " << report.fid << " kid " << report.kid << " ssim "
       << report.ssim_mean << " uqi " << report.uqi_mean << " scc " << report.scc_mean;
  say(o, line.str());

  Manifest m = start_manifest("eval-images", cfg);
  for (const auto& d : {real, fake}) {
    if (fs::exists(d / kManifest)) m.add_input(d);
  }
  m.seeds["extractor"] = cfg.metrics.extractor_seed;
  m.seeds["kid_subsets"] = cfg.metrics.kid_seed;
  m.seeds["pairing"] = cfg.metrics.pairing_seed;
  m.add_output(out, "quality.csv");
  finish(out, m, cfg);
  return 0;
}

int train_seg(const Options& o) {
  RunConfig cfg = load_config(o);
  if (o.seed) cfg.seg.seed = *o.seed;
  cfg.validate();
  const fs::path pairs_dir(pick(o.pairs, cfg.pairs_dir, "pairs"));
  refuse_test_split(pairs_dir);
  const Manifest pm = manifest_of(pairs_dir);
  std::vector<SegPair> pairs;
  std::set<std::string> trained = lineage(pairs_dir);
  if (pm.command == "sample") {
    for (const auto& f : list_files(pairs_dir / "samples", "_image")) {
      std::string stem = f.stem().string();
      stem.resize(stem.size() - 6);
      pairs.push_back({load_image(f), load_mask01(pairs_dir / "samples" / (stem + "_mask.pgm")), stem});
    }
  } else if (pm.command == "gen-data") {
    // Real labeled pairs: the calibration setting.
    for (const auto& f : list_files(pairs_dir / "labeled" / "train" / "images")) {
      pairs.push_back({load_image(f), load_mask01(pairs_dir / "labeled" / "train" / "masks" / f.filename()),
                       f.stem().string()});
    }
    trained.insert(pm.samples.at("labeled_train").begin(), pm.samples.at("labeled_train").end());
  } else {
    throw ValidationError(pairs_dir.string() + " is neither a sample nor a gen-data directory");
  }
  require(!pairs.empty(), "no training pairs in " + pairs_dir.string());
  const fs::path out = prepare_out(o.out, o.force);
  say(o, "train-seg: " + std::to_string(pairs.size()) + " pairs, " + std::to_string(cfg.seg.epochs) + " epochs");
  const SegTrainResult r = train_segmenter(pairs, cfg.seg);
  std::ostringstream csv;
  csv << std::setprecision(9) << "epoch,loss\n";
  for (const auto& e : r.losses) csv << e.epoch << ',' << e.loss << '\n';
  write_text(out / "seg_loss.csv", csv.str());
  save_checkpoint(out / "segnet.ddmm",
                  Checkpoint::from_segnet(r.net, pairs.front().image.height(), pairs.front().image.width()));
  if (!r.losses.empty()) say(o, "train-seg: final loss " + std::to_string(r.losses.back().loss));

  Manifest m = start_manifest("train-seg", cfg);
  m.add_input(pairs_dir);
  m.seeds["segmenter"] = cfg.seg.seed;
  m.samples["trained_on"] = trained;
  m.notes["n_pairs"] = std::to_string(pairs.size());
  m.notes["augmentation"] = "none";
  m.add_output(out, "seg_loss.csv");
  m.add_output(out, "segnet.ddmm");
  finish(out, m, cfg);
  return 0;
}

int eval_seg(const Options& o) {
  RunConfig cfg = load_config(o);
  cfg.validate();
  const fs::path segnet_path(pick(o.segnet, cfg.segnet, "segnet"));
  const fs::path test_dir(pick(o.test, cfg.test_dir, "test"));
  const Manifest dm = manifest_of(test_dir);
  require(dm.command == "gen-data", test_dir.string() + " is not a gen-data directory");
  const auto& test_ids = dm.samples.at("labeled_test");
  const fs::path seg_dir = segnet_path.parent_path().empty() ? fs::path(".") : segnet_path.parent_path();
  const std::set<std::string> trained = lineage(seg_dir);
  for (const auto& id : test_ids) {
    require(!trained.contains(id), "test sample " + id + " appears in the segmenter's training lineage");
  }
  const UNet<float> net = load_checkpoint(segnet_path).to_segnet();

  std::vector<SegPair> test;
  for (const auto& f : list_files(test_dir / "labeled" / "test" / "images")) {
    test.push_back({load_image(f), load_mask01(test_dir / "labeled" / "test" / "masks" / f.filename()),
                    f.stem().string()});
  }
  require(!test.empty(), "empty test split in " + test_dir.string());
  const fs::path out = prepare_out(o.out, o.force);
  const SegEvaluation ev = evaluate_segmenter(net, test);
  ev.write_csv((out / "seg_eval.csv").string());
  say(o, "eval-seg: dice " + std::to_string(ev.dice_mean) + " rand " + std::to_string(ev.rand_mean) + " over " +
             std::to_string(test.size()) + " test images");

  Manifest m = start_manifest("eval-seg", cfg);
  m.add_input(segnet_path);
  m.add_input(test_dir);
  m.samples["evaluated"] = test_ids;
  m.add_output(out, "seg_eval.csv");
  if (o.dump_masks) {
    fs::create_directories(out / "masks");
    for (const auto& p : test) {
      const std::string rel = "masks/" + p.name + ".pgm";
      write_pgm(out / rel, mask_to_image(logits_to_mask(net.forward(p.image, 0))));
      m.add_output(out, rel);
    }
  }
  finish(out, m, cfg);
  return 0;
}

int report(const Options& o) {
  const fs::path run(o.run.empty() ? o.out : o.run);
  require(!run.empty(), "missing --run");
  require(fs::is_directory(run), "not a directory: " + run.string());
  const fs::path out_dir = o.out.empty() || o.out == o.run ? run / "report" : fs::path(o.out);

  std::vector<fs::path> found;
  for (auto it = fs::recursive_directory_iterator(run); it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && fs::weakly_canonical(it->path()) == fs::weakly_canonical(out_dir)) {
      it.disable_recursion_pending();
      continue;
    }
    const std::string name = it->path().filename().string();
    if (name == "training_log.csv" || name == "seg_loss.csv" || name == "quality.csv" || name == "seg_eval.csv") {
      found.push_back(it->path());
    }
  }
  std::sort(found.begin(), found.end());
  const fs::path out = prepare_out(out_dir.string(), o.force);
  RunConfig cfg;
  Manifest m = start_manifest("report", cfg);

  auto label = [&](const fs::path& p) {
    std::string s = p.parent_path().lexically_relative(run).generic_string();
    if (s.empty() || s == ".") s = "run";
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
  };
  std::ostringstream quality, seg;
  quality << "# fid/kid use a seeded random feature extractor; compare values only within this tool\n"
          << "run,extractor_seed,n_real,n_fake,fid,kid,ssim,uqi,scc\n";
  seg << "run,dice,rand\n";
  std::vector<std::pair<std::string, double>> fid_bars, kid_bars, dice_bars;
  bool have_quality = false, have_seg = false;

  for (const auto& p : found) {
    m.inputs.push_back(digest_file(p, p.lexically_relative(run).generic_string()));
    const CsvTable t = read_csv(p);
    const std::string name = p.filename().string();
    const std::string lbl = label(p);
    if (name == "training_log.csv" || name == "seg_loss.csv") {
      std::vector<plot::Series> loss_series;
      plot::Series vlb{"vlb image", {}, {}};
      for (std::size_t c = 1; c < t.header.size(); ++c) {
        plot::Series s{t.header[c], {}, {}};
        for (const auto& r : t.rows) {
          if (c >= r.size()) continue;
          s.x.push_back(to_double(r[0]));
          s.y.push_back(to_double(r[c]));
        }
        if (t.header[c] == "vlb_img") vlb = {"vlb image", s.x, s.y};
        else loss_series.push_back(std::move(s));
      }
      const std::string base = lbl + (name == "seg_loss.csv" ? "_seg_loss" : "_loss");
      write_ppm(out / (base + ".ppm"), plot::line_plot(base, loss_series));
      m.add_output(out, base + ".ppm");
      if (std::any_of(vlb.y.begin(), vlb.y.end(), [](double v) { return std::isfinite(v); })) {
        write_ppm(out / (lbl + "_vlb.ppm"), plot::line_plot(lbl + " vlb", {vlb}));
        m.add_output(out, lbl + "_vlb.ppm");
      }
    } else if (name == "quality.csv" && !t.rows.empty()) {
      const auto& r = t.rows.front();
      auto col = [&](const char* c) { const int i = t.column(c); return i >= 0 && i < static_cast<int>(r.size()) ? r[i] : std::string(); };
      quality << lbl << ',' << col("extractor_seed") << ',' << col("n_real") << ',' << col("n_fake") << ','
              << col("fid") << ',' << col("kid") << ',' << col("ssim") << ',' << col("uqi") << ',' << col("scc") << '\n';
      fid_bars.emplace_back(lbl, to_double(col("fid")));
      kid_bars.emplace_back(lbl, to_double(col("kid")));
      have_quality = true;
    } else if (name == "seg_eval.csv") {
      for (const auto& r : t.rows) {
        if (!r.empty() && r[0] == "mean" && r.size() >= 3) {
          seg << lbl << ',' << r[1] << ',' << r[2] << '\n';
          dice_bars.emplace_back(lbl, to_double(r[1]));
          have_seg = true;
        }
      }
    }
  }
  if (have_quality) {
    write_text(out / "quality_summary.csv", quality.str());
    write_ppm(out / "fid.ppm", plot::bar_chart("fid (random features)", fid_bars));
    write_ppm(out / "kid.ppm", plot::bar_chart("kid (random features)", kid_bars));
    for (const char* f : {"quality_summary.csv", "fid.ppm", "kid.ppm"}) m.add_output(out, f);
  }
  if (have_seg) {
    write_text(out / "segmentation_summary.csv", seg.str());
    write_ppm(out / "dice.ppm", plot::bar_chart("dice", dice_bars));
    for (const char* f : {"segmentation_summary.csv", "dice.ppm"}) m.add_output(out, f);
  }
  std::sort(m.outputs.begin(), m.outputs.end(),
            [](const FileDigest& a, const FileDigest& b) { return a.path < b.path; });
  m.config.clear();
  m.write(out / kManifest);
  say(o, "report: " + std::to_string(found.size()) + " result files summarised in " + out.string());
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Joint image/mask diffusion models: data, training, sampling and evaluation"};
  app.require_subcommand(1);
  Options o;
  std::optional<std::uint64_t> seed;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration file");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Override the command's primary seed");
    sub->add_flag("--force", o.force, "Overwrite an existing output directory");
    sub->add_flag("-q,--quiet", o.quiet, "Suppress progress output");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate labeled, unlabeled and reference phantoms");
  common(gen);
  auto* tr = app.add_subcommand("train", "Train the two-branch diffusion model");
  common(tr);
  tr->add_option("--data", o.data, "gen-data output directory");
  tr->add_flag("--resume", o.resume, "Continue from the checkpoint in --out");
  auto* sa = app.add_subcommand("sample", "Sample image/mask pairs from a checkpoint");
  common(sa);
  sa->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  sa->add_option("--n", o.n, "Number of pairs");
  auto* ei = app.add_subcommand("eval-images", "FID, KID, SSIM, UQI and SCC between two image sets");
  common(ei);
  ei->add_option("--real", o.real, "Reference images (gen-data run or image folder)");
  ei->add_option("--fake", o.fake, "Generated images (sample run or image folder)");
  auto* ts = app.add_subcommand("train-seg", "Train a segmentation UNet on image/mask pairs");
  common(ts);
  ts->add_option("--pairs", o.pairs, "sample run (or gen-data run for real pairs)");
  auto* es = app.add_subcommand("eval-seg", "Dice and Rand scores on the held-out test split");
  common(es);
  es->add_option("--segnet", o.segnet, "Segmenter checkpoint");
  es->add_option("--test", o.test, "gen-data run providing the test split");
  es->add_flag("--dump-masks", o.dump_masks, "Write predicted masks");
  auto* rp = app.add_subcommand("report", "Plots and summary tables for a run tree");
  common(rp);
  rp->add_option("--run", o.run, "Directory to scan for results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return gen_data(o);
    if (*tr) return train(o);
    if (*sa) return sample(o);
    if (*ei) return eval_images(o);
    if (*ts) return train_seg(o);
    if (*es) return eval_seg(o);
    if (*rp) return report(o);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace ddmm::cli
