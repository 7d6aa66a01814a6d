// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace ddmm {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  template <typename T>
  void put_array(const std::vector<T>& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    bytes.insert(bytes.end(), p, p + v.size() * sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t n) : data_(data), n_(n) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  template <typename T>
  std::vector<T> get_array(std::size_t count) {
    require(count <= (n_ - pos_) / sizeof(T), "checkpoint: truncated array");
    std::vector<T> v(count);
    std::memcpy(v.data(), data_ + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint32_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == n_; }

 private:
  void need(std::size_t k) const { require(k <= n_ - pos_, "checkpoint: truncated data"); }
  const std::uint8_t* data_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

void put_arch(Writer& w, const UNetArch& a) {
  for (int v : {a.in_channels, a.out_channels, a.base_channels, a.depth, a.time_embed_dim,
                a.norm_groups, a.time_conditioned ? 1 : 0}) {
    w.put<std::int32_t>(v);
  }
}

UNetArch get_arch(Reader& r) {
  UNetArch a;
  a.in_channels = r.get<std::int32_t>();
  a.out_channels = r.get<std::int32_t>();
  a.base_channels = r.get<std::int32_t>();
  a.depth = r.get<std::int32_t>();
  a.time_embed_dim = r.get<std::int32_t>();
  a.norm_groups = r.get<std::int32_t>();
  a.time_conditioned = r.get<std::int32_t>() != 0;
  a.validate();
  return a;
}

void put_state(Writer& w, const RngStream::State& s) {
  w.put(s.seed);
  w.put(s.tag);
  w.put(s.block);
  w.put(s.lane);
  w.put<std::uint8_t>(s.has_spare ? 1 : 0);
  w.put(s.spare);
}

RngStream::State get_state(Reader& r) {
  RngStream::State s;
  s.seed = r.get<std::uint64_t>();
  s.tag = r.get<std::uint64_t>();
  s.block = r.get<std::uint64_t>();
  s.lane = r.get<std::uint32_t>();
  require(s.lane <= 4, "checkpoint: invalid rng lane");
  s.has_spare = r.get<std::uint8_t>() != 0;
  s.spare = r.get<double>();
  return s;
}

const Checkpoint::Network& find_network(const Checkpoint& c, const std::string& name) {
  for (const auto& n : c.networks) {
    if (n.name == name) return n;
  }
  throw ValidationError("checkpoint: no network named '" + name + "'");
}

}  // namespace

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

Checkpoint Checkpoint::from_model(const DdmmModel& model, int height, int width,
                                  const TrainerState* state) {
  Checkpoint c;
  c.schedule = model.sched();
  c.epoch = model.epoch;
  c.height = height;
  c.width = width;
  c.networks.push_back({"image", model.image_net.arch(), model.image_net.params().values});
  c.networks.push_back({"mask", model.mask_net.arch(), model.mask_net.params().values});
  if (state) {
    c.trainer = Trainer{{state->image_opt, state->mask_opt},
                        {state->supervised_rng.state(), state->unsupervised_rng.state()}};
  }
  return c;
}

Checkpoint Checkpoint::from_segnet(const UNet<float>& net, int height, int width) {
  Checkpoint c;
  c.height = height;
  c.width = width;
  c.networks.push_back({"segmenter", net.arch(), net.params().values});
  return c;
}

DdmmModel Checkpoint::to_model() const {
  require(schedule.has_value(), "checkpoint: no noise schedule (not a DDMM checkpoint)");
  const Network& img = find_network(*this, "image");
  const Network& msk = find_network(*this, "mask");
  return DdmmModel{std::make_shared<const NoiseSchedule>(*schedule),
                   DenoiserNet::from_values(img.arch, img.values),
                   DenoiserNet::from_values(msk.arch, msk.values), epoch};
}

TrainerState Checkpoint::trainer_state() const {
  require(trainer.has_value(), "checkpoint: no trainer state");
  require(trainer->optimizers.size() == 2 && trainer->streams.size() == 2,
          "checkpoint: trainer state does not match a DDMM model");
  return TrainerState{trainer->optimizers[0], trainer->optimizers[1], RngStream(trainer->streams[0]),
                      RngStream(trainer->streams[1])};
}

UNet<float> Checkpoint::to_segnet() const {
  const Network& n = find_network(*this, "segmenter");
  return UNet<float>::from_values(n.arch, n.values);
}

std::vector<std::uint8_t> Checkpoint::encode() const {
  Writer w;
  w.bytes = {'D', 'D', 'M', 'M'};
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(schedule ? 1 : 0);
  if (schedule) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(schedule->kind()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(schedule->t_max()));
    w.put_array(schedule->betas());
  }
  w.put<std::int32_t>(epoch);
  w.put<std::int32_t>(height);
  w.put<std::int32_t>(width);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(networks.size()));
  for (const auto& n : networks) {
    w.put_string(n.name);
    put_arch(w, n.arch);
    const ParamLayout layout = make_layout(n.arch);
    std::size_t total = 0;
    for (const auto& e : layout) total += e.size;
    require(total == n.values.size(), "checkpoint: network '" + n.name + "' has wrong parameter count");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layout.size()));
    for (const auto& e : layout) {
      w.put_string(e.name);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
      for (int d : e.shape) w.put<std::int32_t>(d);
      const auto* p = reinterpret_cast<const std::uint8_t*>(n.values.data() + e.offset);
      w.bytes.insert(w.bytes.end(), p, p + e.size * sizeof(float));
    }
  }
  w.put<std::uint8_t>(trainer ? 1 : 0);
  if (trainer) {
    require(trainer->optimizers.size() == networks.size(), "checkpoint: optimizer count mismatch");
    for (std::size_t i = 0; i < networks.size(); ++i) {
      const OptimState& o = trainer->optimizers[i];
      require(o.m.size() == networks[i].values.size() && o.v.size() == o.m.size(),
              "checkpoint: optimizer size mismatch");
      w.put<std::int64_t>(o.step);
      w.put_array(o.m);
      w.put_array(o.v);
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(trainer->streams.size()));
    for (const auto& s : trainer->streams) put_state(w, s);
  }
  w.put<std::uint32_t>(crc32_of(w.bytes.data(), w.bytes.size()));
  return w.bytes;
}

Checkpoint Checkpoint::decode(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), "DDMM", 4) == 0,
          "checkpoint: bad magic (not a DDMM checkpoint)");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  require(stored == crc32_of(bytes.data(), bytes.size() - 4), "checkpoint: checksum mismatch (corrupt file)");
  Reader r(bytes.data() + 4, bytes.size() - 8);
  const auto version = r.get<std::uint32_t>();
  require(version == kVersion, "checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint c;
  if (r.get<std::uint8_t>()) {
    const auto kind = r.get<std::uint8_t>();
    require(kind <= 1, "checkpoint: unknown schedule kind");
    const auto t = r.get<std::uint32_t>();
    c.schedule = NoiseSchedule::from_betas(static_cast<ScheduleKind>(kind), r.get_array<double>(t));
  }
  c.epoch = r.get<std::int32_t>();
  c.height = r.get<std::int32_t>();
  c.width = r.get<std::int32_t>();
  const auto n_nets = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_nets; ++i) {
    Network n;
    n.name = r.get_string();
    n.arch = get_arch(r);
    const ParamLayout layout = make_layout(n.arch);
    const auto n_tensors = r.get<std::uint32_t>();
    require(n_tensors == layout.size(), "checkpoint: tensor count mismatch in '" + n.name + "'");
    for (const auto& e : layout) {
      require(r.get_string() == e.name, "checkpoint: unexpected tensor in '" + n.name + "'");
      const auto rank = r.get<std::uint32_t>();
      require(rank == e.shape.size(), "checkpoint: rank mismatch for " + e.name);
      for (int d : e.shape) require(r.get<std::int32_t>() == d, "checkpoint: shape mismatch for " + e.name);
      const auto v = r.get_array<float>(e.size);
      n.values.insert(n.values.end(), v.begin(), v.end());
    }
    c.networks.push_back(std::move(n));
  }
  if (r.get<std::uint8_t>()) {
    Trainer t;
    for (const auto& n : c.networks) {
      OptimState o;
      o.step = r.get<std::int64_t>();
      o.m = r.get_array<float>(n.values.size());
      o.v = r.get_array<float>(n.values.size());
      t.optimizers.push_back(std::move(o));
    }
    const auto n_streams = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_streams; ++i) t.streams.push_back(get_state(r));
    c.trainer = std::move(t);
  }
  require(r.done(), "checkpoint: trailing bytes");
  return c;
}

void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), "cannot write " + tmp.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(f), "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) { write_file_atomic(path, ckpt.encode()); }

Checkpoint load_checkpoint(const fs::path& path) {
  require(fs::exists(path), "checkpoint not found: " + path.string());
  return Checkpoint::decode(read_file(path));
}

}  // namespace ddmm
