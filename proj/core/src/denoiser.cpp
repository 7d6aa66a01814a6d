// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/denoiser.hpp"

#include <cmath>

#include "ddmm/nn_ops.hpp"
#include "ddmm/rng.hpp"

namespace ddmm {

void UNetArch::validate() const {
  require(in_channels > 0 && out_channels > 0, "arch: channel counts must be positive");
  require(base_channels > 0, "arch: base_channels must be positive");
  require(depth >= 0 && depth <= 6, "arch: depth must lie in [0, 6]");
  require(norm_groups > 0, "arch: norm_groups must be positive");
  for (int i = 0; i <= depth; ++i) {
    require(stage_channels(i) % norm_groups == 0,
            "arch: stage width " + std::to_string(stage_channels(i)) +
                " not divisible by norm_groups " + std::to_string(norm_groups));
  }
  if (time_conditioned) {
    require(time_embed_dim >= 2 && time_embed_dim % 2 == 0,
            "arch: time_embed_dim must be even and >= 2");
  }
}

template <typename T>
bool ParamBuffer<T>::all_finite() const noexcept {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void ParamBuffer<T>::add_scaled(const ParamBuffer& other, T scale) {
  require(other.values.size() == values.size(), "add_scaled: size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
}

namespace {

struct ConvIdx {
  std::size_t w = 0, b = 0;
  int cin = 0, cout = 0;
};
struct NormIdx {
  std::size_t scale = 0, shift = 0;
};
struct LinIdx {
  std::size_t w = 0, b = 0;
  int in = 0, out = 0;
};
struct BlockIdx {
  ConvIdx conv1;
  NormIdx norm1;
  LinIdx temb;
  ConvIdx conv2;
  NormIdx norm2;
  bool has_temb = false;
};

enum class Init { kFanIn, kZero, kOne };

struct LayoutBuilder {
  ParamLayout layout;
  std::vector<Init> inits;
  std::vector<int> fan_in;
  std::size_t next = 0;

  std::size_t add(std::string name, std::vector<int> shape, Init init, int fan = 0) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    layout.push_back({std::move(name), std::move(shape), next, n});
    inits.push_back(init);
    fan_in.push_back(fan);
    const std::size_t off = next;
    next += n;
    return off;
  }
  ConvIdx conv(const std::string& name, int cin, int cout, bool zero = false) {
    ConvIdx c;
    c.cin = cin;
    c.cout = cout;
    c.w = add(name + ".weight", {cout, cin, 3, 3}, zero ? Init::kZero : Init::kFanIn, cin * 9);
    c.b = add(name + ".bias", {cout}, Init::kZero);
    return c;
  }
  NormIdx norm(const std::string& name, int c) {
    NormIdx n;
    n.scale = add(name + ".scale", {c}, Init::kOne);
    n.shift = add(name + ".shift", {c}, Init::kZero);
    return n;
  }
  LinIdx linear(const std::string& name, int in, int out) {
    LinIdx l;
    l.in = in;
    l.out = out;
    l.w = add(name + ".weight", {out, in}, Init::kFanIn, in);
    l.b = add(name + ".bias", {out}, Init::kZero);
    return l;
  }
  BlockIdx block(const std::string& name, int cin, int cout, int temb_dim) {
    BlockIdx b;
    b.conv1 = conv(name + ".conv1", cin, cout);
    b.norm1 = norm(name + ".norm1", cout);
    if (temb_dim > 0) {
      b.has_temb = true;
      b.temb = linear(name + ".temb", temb_dim, cout);
    }
    b.conv2 = conv(name + ".conv2", cout, cout);
    b.norm2 = norm(name + ".norm2", cout);
    return b;
  }
};

}  // namespace

template <typename T>
struct UNet<T>::Index {
  LinIdx fc1, fc2;
  std::vector<BlockIdx> enc;
  BlockIdx mid;
  std::vector<BlockIdx> dec;  // dec[i] pairs with enc[i]
  ConvIdx out;
  std::vector<Init> inits;
  std::vector<int> fan_in;
  std::shared_ptr<const ParamLayout> layout;
};

namespace {

template <typename Index>
std::shared_ptr<Index> build_index(const UNetArch& arch) {
  arch.validate();
  LayoutBuilder lb;
  auto idx = std::make_shared<Index>();
  const int d = arch.time_conditioned ? arch.time_embed_dim : 0;
  if (d > 0) {
    idx->fc1 = lb.linear("time.fc1", d, d);
    idx->fc2 = lb.linear("time.fc2", d, d);
  }
  idx->enc.resize(static_cast<std::size_t>(arch.depth));
  idx->dec.resize(static_cast<std::size_t>(arch.depth));
  for (int i = 0; i < arch.depth; ++i) {
    const int cin = i == 0 ? arch.in_channels : arch.stage_channels(i - 1);
    idx->enc[i] = lb.block("enc" + std::to_string(i), cin, arch.stage_channels(i), d);
  }
  {
    const int cin = arch.depth == 0 ? arch.in_channels : arch.stage_channels(arch.depth - 1);
    idx->mid = lb.block("mid", cin, arch.stage_channels(arch.depth), d);
  }
  for (int i = arch.depth - 1; i >= 0; --i) {
    idx->dec[i] = lb.block("dec" + std::to_string(i),
                           arch.stage_channels(i + 1) + arch.stage_channels(i),
                           arch.stage_channels(i), d);
  }
  idx->out = lb.conv("out", arch.stage_channels(0), arch.out_channels, /*zero=*/true);
  idx->inits = std::move(lb.inits);
  idx->fan_in = std::move(lb.fan_in);
  idx->layout = std::make_shared<const ParamLayout>(std::move(lb.layout));
  return idx;
}

}  // namespace

ParamLayout make_layout(const UNetArch& arch) {
  return *build_index<UNet<float>::Index>(arch)->layout;
}

template <typename T>
UNet<T>::UNet(const UNetArch& arch, ParamBuffer<T> params)
    : arch_(arch), params_(std::move(params)) {}

template <typename T>
UNet<T> UNet<T>::init(const UNetArch& arch, std::uint64_t seed, std::uint64_t substream) {
  auto idx = build_index<Index>(arch);
  ParamBuffer<T> p{idx->layout, {}};
  std::size_t total = 0;
  for (const auto& e : *idx->layout) total += e.size;
  p.values.assign(total, T(0));
  RngStream rng(seed, "init", substream);
  for (std::size_t k = 0; k < idx->layout->size(); ++k) {
    const ParamEntry& e = (*idx->layout)[k];
    switch (idx->inits[k]) {
      case Init::kZero:
        break;
      case Init::kOne:
        std::fill_n(p.values.begin() + static_cast<std::ptrdiff_t>(e.offset), e.size, T(1));
        break;
      case Init::kFanIn: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(idx->fan_in[k]));
        for (std::size_t i = 0; i < e.size; ++i) {
          p.values[e.offset + i] = static_cast<T>(rng.uniform(-bound, bound));
        }
        break;
      }
    }
  }
  UNet net(arch, std::move(p));
  net.index_ = idx;
  return net;
}

template <typename T>
UNet<T> UNet<T>::from_values(const UNetArch& arch, std::vector<T> values) {
  auto idx = build_index<Index>(arch);
  std::size_t total = 0;
  for (const auto& e : *idx->layout) total += e.size;
  require(values.size() == total, "UNet: parameter count " + std::to_string(values.size()) +
                                      " does not match architecture (" + std::to_string(total) +
                                      ")");
  UNet net(arch, ParamBuffer<T>{idx->layout, std::move(values)});
  net.index_ = idx;
  return net;
}

template <typename T>
GradientSet<T> UNet<T>::zero_gradients() const {
  return GradientSet<T>{params_.layout, std::vector<T>(params_.values.size(), T(0))};
}

template <typename T>
void UNet<T>::check_input(const BasicGrid<T>& x) const {
  require(x.channels() == arch_.in_channels,
          "UNet: expected " + std::to_string(arch_.in_channels) + " input channel(s), got " +
              std::to_string(x.channels()));
  const int m = 1 << arch_.depth;
  require(x.height() % m == 0 && x.width() % m == 0,
          "UNet: spatial dims " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
              " not divisible by 2^depth = " + std::to_string(m));
}

template <typename T>
struct UNet<T>::Tape {
  struct Block {
    nn::Shape in_shape;
    int cout = 0;
    std::vector<T> in, h1, n1, a1, h2, n2;
    nn::NormStats s1, s2;
  };
  std::vector<T> emb, u, su, v, temb;
  std::vector<Block> enc;
  Block mid;
  std::vector<Block> dec;
  std::vector<T> final_in;
  nn::Shape final_shape;
};

namespace {

template <typename T>
std::span<const T> cspan(const std::vector<T>& v, std::size_t off, std::size_t n) {
  return std::span<const T>(v.data() + off, n);
}
template <typename T>
std::span<T> mspan(std::vector<T>& v, std::size_t off, std::size_t n) {
  return std::span<T>(v.data() + off, n);
}

template <typename T, typename BlockTape>
std::vector<T> block_forward(const BlockIdx& b, const std::vector<T>& p, int groups,
                             std::vector<T> in, nn::Shape s, const std::vector<T>& temb,
                             BlockTape* bt) {
  const int cout = b.conv1.cout;
  const nn::Shape so{cout, s.h, s.w};
  const std::size_t n = so.size(), hw = so.plane();
  std::vector<T> h1(n), n1(n), a1(n), h2(n), n2(n), out(n);
  nn::NormStats s1, s2;
  nn::conv3x3_forward<T>(in, s, cspan(p, b.conv1.w, static_cast<std::size_t>(cout) * s.c * 9),
                         cspan(p, b.conv1.b, cout), cout, h1);
  nn::group_norm_forward<T>(h1, so, groups, cspan(p, b.norm1.scale, cout),
                            cspan(p, b.norm1.shift, cout), n1, s1);
  nn::silu_forward<T>(n1, a1);
  if (b.has_temb) {
    std::vector<T> proj(static_cast<std::size_t>(cout));
    nn::linear_forward<T>(temb, cspan(p, b.temb.w, static_cast<std::size_t>(cout) * b.temb.in),
                          cspan(p, b.temb.b, cout), cout, proj);
    for (int c = 0; c < cout; ++c) {
      T* a = a1.data() + static_cast<std::size_t>(c) * hw;
      for (std::size_t i = 0; i < hw; ++i) a[i] += proj[c];
    }
  }
  nn::conv3x3_forward<T>(a1, so, cspan(p, b.conv2.w, static_cast<std::size_t>(cout) * cout * 9),
                         cspan(p, b.conv2.b, cout), cout, h2);
  nn::group_norm_forward<T>(h2, so, groups, cspan(p, b.norm2.scale, cout),
                            cspan(p, b.norm2.shift, cout), n2, s2);
  nn::silu_forward<T>(n2, out);
  if (bt) {
    bt->in_shape = s;
    bt->cout = cout;
    bt->in = std::move(in);
    bt->h1 = std::move(h1);
    bt->n1 = std::move(n1);
    bt->a1 = std::move(a1);
    bt->h2 = std::move(h2);
    bt->n2 = std::move(n2);
    bt->s1 = std::move(s1);
    bt->s2 = std::move(s2);
  }
  return out;
}

// Returns d(loss)/d(block input) when need_dx, else an empty vector.
template <typename T, typename BlockTape>
std::vector<T> block_backward(const BlockIdx& b, const std::vector<T>& p, int groups,
                              const BlockTape& bt, const std::vector<T>& temb,
                              std::vector<T> dout, std::vector<T>& g, std::vector<T>& dtemb,
                              bool need_dx) {
  const int cout = bt.cout;
  const nn::Shape s = bt.in_shape;
  const nn::Shape so{cout, s.h, s.w};
  const std::size_t n = so.size(), hw = so.plane();
  std::vector<T> tmp(n);
  nn::silu_backward<T>(bt.n2, dout, dout);
  nn::group_norm_backward<T>(bt.h2, so, groups, cspan(p, b.norm2.scale, cout), bt.s2, dout,
                             mspan(g, b.norm2.scale, cout), mspan(g, b.norm2.shift, cout), tmp);
  std::vector<T> da1(n, T(0));
  nn::conv3x3_backward<T>(bt.a1, so, cspan(p, b.conv2.w, static_cast<std::size_t>(cout) * cout * 9),
                          cout, tmp, mspan(g, b.conv2.w, static_cast<std::size_t>(cout) * cout * 9),
                          mspan(g, b.conv2.b, cout), da1);
  if (b.has_temb) {
    std::vector<T> dproj(static_cast<std::size_t>(cout), T(0));
    for (int c = 0; c < cout; ++c) {
      const T* d = da1.data() + static_cast<std::size_t>(c) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(d[i]);
      dproj[c] = static_cast<T>(acc);
    }
    nn::linear_backward<T>(temb, cspan(p, b.temb.w, static_cast<std::size_t>(cout) * b.temb.in),
                           cout, dproj,
                           mspan(g, b.temb.w, static_cast<std::size_t>(cout) * b.temb.in),
                           mspan(g, b.temb.b, cout), dtemb);
  }
  nn::silu_backward<T>(bt.n1, da1, da1);
  nn::group_norm_backward<T>(bt.h1, so, groups, cspan(p, b.norm1.scale, cout), bt.s1, da1,
                             mspan(g, b.norm1.scale, cout), mspan(g, b.norm1.shift, cout), tmp);
  std::vector<T> din;
  if (need_dx) din.assign(s.size(), T(0));
  nn::conv3x3_backward<T>(bt.in, s, cspan(p, b.conv1.w, static_cast<std::size_t>(cout) * s.c * 9),
                          cout, tmp, mspan(g, b.conv1.w, static_cast<std::size_t>(cout) * s.c * 9),
                          mspan(g, b.conv1.b, cout), std::span<T>(din));
  return din;
}

}  // namespace

template <typename T>
BasicGrid<T> UNet<T>::run_forward(const BasicGrid<T>& x, int t, Tape* tape) const {
  check_input(x);
  const std::vector<T>& p = params_.values;
  const Index& idx = *index_;
  const int groups = arch_.norm_groups;

  std::vector<T> temb;
  if (arch_.time_conditioned) {
    require(t >= 1, "UNet: timestep must be >= 1");
    const int d = arch_.time_embed_dim;
    std::vector<T> emb(d), u(d), su(d), v(d);
    temb.resize(d);
    nn::timestep_embedding<T>(t, d, emb);
    nn::linear_forward<T>(emb, cspan(p, idx.fc1.w, static_cast<std::size_t>(d) * d),
                          cspan(p, idx.fc1.b, d), d, u);
    nn::silu_forward<T>(u, su);
    nn::linear_forward<T>(su, cspan(p, idx.fc2.w, static_cast<std::size_t>(d) * d),
                          cspan(p, idx.fc2.b, d), d, v);
    nn::silu_forward<T>(v, temb);
    if (tape) {
      tape->emb = std::move(emb);
      tape->u = std::move(u);
      tape->su = std::move(su);
      tape->v = std::move(v);
      tape->temb = temb;
    }
  }

  const int depth = arch_.depth;
  if (tape) {
    tape->enc.resize(static_cast<std::size_t>(depth));
    tape->dec.resize(static_cast<std::size_t>(depth));
  }
  std::vector<std::vector<T>> skips(static_cast<std::size_t>(depth));
  std::vector<T> cur(x.values().begin(), x.values().end());
  nn::Shape s{x.channels(), x.height(), x.width()};
  for (int i = 0; i < depth; ++i) {
    skips[i] = block_forward<T>(idx.enc[i], p, groups, std::move(cur), s, temb,
                                tape ? &tape->enc[i] : nullptr);
    s.c = arch_.stage_channels(i);
    cur.assign(skips[i].size() / 4, T(0));
    nn::avgpool2_forward<T>(skips[i], s, cur);
    s.h /= 2;
    s.w /= 2;
  }
  cur = block_forward<T>(idx.mid, p, groups, std::move(cur), s, temb, tape ? &tape->mid : nullptr);
  s.c = arch_.stage_channels(depth);
  for (int i = depth - 1; i >= 0; --i) {
    const nn::Shape up{s.c, s.h * 2, s.w * 2};
    std::vector<T> cat(up.size() + skips[i].size());
    nn::upsample2_forward<T>(cur, s, std::span<T>(cat.data(), up.size()));
    std::copy(skips[i].begin(), skips[i].end(), cat.begin() + static_cast<std::ptrdiff_t>(up.size()));
    const nn::Shape cs{s.c + arch_.stage_channels(i), up.h, up.w};
    cur = block_forward<T>(idx.dec[i], p, groups, std::move(cat), cs, temb,
                           tape ? &tape->dec[i] : nullptr);
    s = {arch_.stage_channels(i), up.h, up.w};
  }
  BasicGrid<T> out(arch_.out_channels, x.height(), x.width());
  const int oc = arch_.out_channels;
  nn::conv3x3_forward<T>(cur, s, cspan(p, idx.out.w, static_cast<std::size_t>(oc) * s.c * 9),
                         cspan(p, idx.out.b, oc), oc, out.values());
  if (tape) {
    tape->final_in = std::move(cur);
    tape->final_shape = s;
  }
  return out;
}

template <typename T>
void UNet<T>::run_backward(const Tape& tape, const BasicGrid<T>& dout,
                           GradientSet<T>& grads) const {
  const std::vector<T>& p = params_.values;
  std::vector<T>& g = grads.values;
  require(g.size() == p.size(), "UNet::backward: gradient buffer does not match parameters");
  const Index& idx = *index_;
  const int groups = arch_.norm_groups;
  const int depth = arch_.depth;
  const int oc = arch_.out_channels;
  nn::Shape s = tape.final_shape;
  require(dout.channels() == oc && dout.height() == s.h && dout.width() == s.w,
          "UNet::backward: output gradient shape mismatch");

  std::vector<T> dtemb(tape.temb.size(), T(0));
  std::vector<T> dcur(s.size(), T(0));
  nn::conv3x3_backward<T>(tape.final_in, s,
                          cspan(p, idx.out.w, static_cast<std::size_t>(oc) * s.c * 9), oc,
                          dout.values(), mspan(g, idx.out.w, static_cast<std::size_t>(oc) * s.c * 9),
                          mspan(g, idx.out.b, oc), dcur);

  std::vector<std::vector<T>> dskips(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) {
    const auto& bt = tape.dec[i];
    std::vector<T> dcat =
        block_backward<T>(idx.dec[i], p, groups, bt, tape.temb, std::move(dcur), g, dtemb, true);
    const nn::Shape below{arch_.stage_channels(i + 1), bt.in_shape.h / 2, bt.in_shape.w / 2};
    const std::size_t up_size = below.size() * 4;
    dskips[i].assign(dcat.begin() + static_cast<std::ptrdiff_t>(up_size), dcat.end());
    dcur.assign(below.size(), T(0));
    nn::upsample2_backward<T>(below, std::span<const T>(dcat.data(), up_size), dcur);
  }
  dcur = block_backward<T>(idx.mid, p, groups, tape.mid, tape.temb, std::move(dcur), g, dtemb,
                           depth > 0);
  for (int i = depth - 1; i >= 0; --i) {
    const auto& bt = tape.enc[i];
    const nn::Shape es{arch_.stage_channels(i), bt.in_shape.h, bt.in_shape.w};
    std::vector<T> dout_block(es.size());
    nn::avgpool2_backward<T>(es, dcur, dout_block);
    for (std::size_t k = 0; k < dout_block.size(); ++k) dout_block[k] += dskips[i][k];
    dcur = block_backward<T>(idx.enc[i], p, groups, bt, tape.temb, std::move(dout_block), g,
                             dtemb, i > 0);
  }

  if (arch_.time_conditioned) {
    const int d = arch_.time_embed_dim;
    std::vector<T> dv(d), dsu(d, T(0)), du(d);
    nn::silu_backward<T>(tape.v, dtemb, dv);
    nn::linear_backward<T>(tape.su, cspan(p, idx.fc2.w, static_cast<std::size_t>(d) * d), d, dv,
                           mspan(g, idx.fc2.w, static_cast<std::size_t>(d) * d),
                           mspan(g, idx.fc2.b, d), dsu);
    nn::silu_backward<T>(tape.u, dsu, du);
    nn::linear_backward<T>(tape.emb, cspan(p, idx.fc1.w, static_cast<std::size_t>(d) * d), d, du,
                           mspan(g, idx.fc1.w, static_cast<std::size_t>(d) * d),
                           mspan(g, idx.fc1.b, d), std::span<T>());
  }
}

template <typename T>
BasicGrid<T> UNet<T>::forward(const BasicGrid<T>& x, int t) const {
  return run_forward(x, t, nullptr);
}

template <typename T>
BasicGrid<T> UNet<T>::forward_backward(
    const BasicGrid<T>& x, int t, const std::function<BasicGrid<T>(const BasicGrid<T>&)>& loss_grad,
    GradientSet<T>& grads) const {
  Tape tape;
  BasicGrid<T> out = run_forward(x, t, &tape);
  run_backward(tape, loss_grad(out), grads);
  return out;
}

template <typename T>
GradientSet<T> UNet<T>::backward(const BasicGrid<T>& x, int t, const BasicGrid<T>& dout) const {
  GradientSet<T> grads = zero_gradients();
  forward_backward(
      x, t,
      [&](const BasicGrid<T>& out) {
        require_same_shape(out, dout, "UNet::backward");
        return dout;
      },
      grads);
  return grads;
}

template struct ParamBuffer<float>;
template struct ParamBuffer<double>;
template class UNet<float>;
template class UNet<double>;

}  // namespace ddmm
