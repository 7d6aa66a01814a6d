// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

namespace ddmm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ValidationError("invalid number '" + s + "'");
  }
  return v;
}

using Ref = std::variant<int*, double*, std::uint64_t*, bool*, std::string*, Range*, ScheduleKind*,
                         SamplerKind*>;

struct Field {
  std::string section;
  std::string key;
  Ref ref;
};

void set_value(const Ref& ref, const std::string& text) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, int>) {
          *p = parse_number<int>(text);
        } else if constexpr (std::is_same_v<T, double>) {
          *p = parse_number<double>(text);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          *p = parse_number<std::uint64_t>(text);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (text == "true" || text == "1") *p = true;
          else if (text == "false" || text == "0") *p = false;
          else throw ValidationError("invalid boolean '" + text + "' (expected true or false)");
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = text;
        } else if constexpr (std::is_same_v<T, Range>) {
          const auto comma = text.find(',');
          if (comma == std::string::npos) throw ValidationError("invalid range '" + text + "' (expected lo, hi)");
          *p = Range{parse_number<double>(trim(text.substr(0, comma))),
                     parse_number<double>(trim(text.substr(comma + 1)))};
        } else if constexpr (std::is_same_v<T, ScheduleKind>) {
          *p = schedule_kind_from_string(text);
        } else {
          *p = sampler_kind_from_string(text);
        }
      },
      ref);
}

std::string get_value(const Ref& ref) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          return format_double(*p);
        } else if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, Range>) {
          return format_double(p->lo) + ", " + format_double(p->hi);
        } else if constexpr (std::is_same_v<T, ScheduleKind> || std::is_same_v<T, SamplerKind>) {
          return to_string(*p);
        } else {
          return std::to_string(*p);
        }
      },
      ref);
}

// Order here is the order of the echoed config.
std::vector<Field> fields(RunConfig& c) {
  PhantomConfig& p = c.phantom;
  TrainConfig& t = c.train;
  return {
      {"data", "n_labeled", &c.n_labeled},
      {"data", "n_unlabeled", &c.n_unlabeled},
      {"data", "n_reference", &c.n_reference},
      {"data", "size", &p.size},
      {"data", "seed", &p.seed},
      {"data", "body_axis_x", &p.body_axis_x},
      {"data", "body_axis_y", &p.body_axis_y},
      {"data", "lung_axis_x", &p.lung_axis_x},
      {"data", "lung_axis_y", &p.lung_axis_y},
      {"data", "lung_offset_x", &p.lung_offset_x},
      {"data", "lung_offset_y", &p.lung_offset_y},
      {"data", "lung_rotation", &p.lung_rotation},
      {"data", "level_background", &p.level_background},
      {"data", "level_lung", &p.level_lung},
      {"data", "level_body", &p.level_body},
      {"data", "rib_delta", &p.rib_delta},
      {"data", "rib_min", &p.rib_min},
      {"data", "rib_max", &p.rib_max},
      {"data", "noise_sigma", &p.noise_sigma},
      {"data", "unlabeled_axis_scale", &p.unlabeled_axis_scale},
      {"data", "unlabeled_noise_scale", &p.unlabeled_noise_scale},

      {"model", "base_channels", &c.arch.base_channels},
      {"model", "depth", &c.arch.depth},
      {"model", "time_embed_dim", &c.arch.time_embed_dim},
      {"model", "norm_groups", &c.arch.norm_groups},
      {"model", "schedule", &c.schedule},
      {"model", "timesteps", &c.timesteps},
      {"model", "cosine_offset", &c.cosine_offset},
      {"model", "beta_start", &c.beta_start},
      {"model", "beta_end", &c.beta_end},
      {"model", "init_seed", &c.init_seed},

      {"train", "learning_rate", &t.learning_rate},
      {"train", "epochs", &t.epochs},
      {"train", "batch_size", &t.batch_size},
      {"train", "lambda_unsup", &t.lambda_unsup},
      {"train", "seed_supervised", &t.seed_supervised},
      {"train", "seed_unsupervised", &t.seed_unsupervised},
      {"train", "adam_beta1", &t.adam_beta1},
      {"train", "adam_beta2", &t.adam_beta2},
      {"train", "adam_eps", &t.adam_eps},
      {"train", "vlb_every", &t.vlb_every},
      {"train", "vlb_probe_size", &t.vlb_probe_size},
      {"train", "vlb_seed", &t.vlb_seed},
      {"train", "checkpoint_every", &c.checkpoint_every},

      {"sampler", "kind", &c.sampler.kind},
      {"sampler", "ddim_steps", &c.sampler.ddim_steps},
      {"sampler", "eta", &c.sampler.eta},
      {"sampler", "shared_step_noise", &c.sampler.shared_step_noise},
      {"sampler", "clamp_x0", &c.sampler.clamp_x0},
      {"sampler", "seed", &c.sample_seed},
      {"sampler", "n", &c.n_samples},

      {"metrics", "extractor_seed", &c.metrics.extractor_seed},
      {"metrics", "kid_seed", &c.metrics.kid_seed},
      {"metrics", "pairing_seed", &c.metrics.pairing_seed},
      {"metrics", "max_pairs", &c.metrics.max_pairs},

      {"segmenter", "base_channels", &c.seg.arch.base_channels},
      {"segmenter", "depth", &c.seg.arch.depth},
      {"segmenter", "norm_groups", &c.seg.arch.norm_groups},
      {"segmenter", "epochs", &c.seg.epochs},
      {"segmenter", "batch_size", &c.seg.batch_size},
      {"segmenter", "learning_rate", &c.seg.learning_rate},
      {"segmenter", "seed", &c.seg.seed},

      {"paths", "data", &c.data_dir},
      {"paths", "checkpoint", &c.checkpoint},
      {"paths", "real", &c.real_dir},
      {"paths", "fake", &c.fake_dir},
      {"paths", "pairs", &c.pairs_dir},
      {"paths", "segnet", &c.segnet},
      {"paths", "test", &c.test_dir},
  };
}

}  // namespace

NoiseSchedule RunConfig::make_schedule() const {
  if (schedule == ScheduleKind::kCosine) return NoiseSchedule::cosine(timesteps, cosine_offset);
  return NoiseSchedule::linear(timesteps, beta_start, beta_end);
}

void RunConfig::validate() const {
  phantom.validate(arch.depth);
  arch.validate();
  train.validate();
  seg.validate();
  require(n_labeled >= 5, "config: data.n_labeled must be >= 5");
  require(n_unlabeled >= 0, "config: data.n_unlabeled must be >= 0");
  require(n_reference >= 0, "config: data.n_reference must be >= 0");
  require(timesteps >= 2, "config: model.timesteps must be >= 2");
  require(checkpoint_every >= 0, "config: train.checkpoint_every must be >= 0");
  require(n_samples >= 1, "config: sampler.n must be >= 1");
  require(sampler.ddim_steps >= 1 && sampler.ddim_steps <= timesteps,
          "config: sampler.ddim_steps must lie in [1, timesteps]");
  require(sampler.eta >= 0.0, "config: sampler.eta must be >= 0");
  require(metrics.max_pairs >= 1, "config: metrics.max_pairs must be >= 1");
  require(phantom.size % (1 << seg.arch.depth) == 0,
          "config: data.size must be divisible by 2^segmenter.depth");
  (void)make_schedule();
}

std::string RunConfig::to_text() const {
  RunConfig copy = *this;
  std::ostringstream out;
  std::string section;
  for (const Field& f : fields(copy)) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << get_value(f.ref) << '\n';
  }
  return out.str();
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  const auto table = fields(cfg);
  std::set<std::string> sections;
  for (const auto& f : table) sections.insert(f.section);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ValidationError(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.contains(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value', got '" + line + "'");
    if (section.empty()) fail("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == table.end()) fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) fail("duplicate key '" + key + "' in [" + section + "]");
    try {
      set_value(it->ref, value);
    } catch (const ValidationError& e) {
      fail(section + "." + key + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), "cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

}  // namespace ddmm
