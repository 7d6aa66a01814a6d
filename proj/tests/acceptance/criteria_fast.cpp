// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "criteria.hpp"
#include "ddmm/kernel.hpp"
#include "ddmm/metrics.hpp"
#include "ddmm/phantom.hpp"
#include "ddmm/rng.hpp"
#include "ddmm/sampler.hpp"
#include "ddmm/segmenter.hpp"
#include "ddmm/trainer.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "temp_dir.hpp"

namespace ddmm::acceptance {

namespace fs = std::filesystem;

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

template <typename T>
bool bitwise_equal(const BasicGrid<T>& a, const BasicGrid<T>& b) {
  return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

UNetArch small_arch() {
  UNetArch a;
  a.base_channels = 8;
  a.depth = 1;
  a.time_embed_dim = 16;
  a.norm_groups = 4;
  return a;
}

}  // namespace

Verdict kernel_exactness(const Context&) {
  using namespace kernel;
  const auto s100 = NoiseSchedule::cosine(100);
  RngStream r(1, "acceptance-kernel");

  int zero_case_mismatches = 0;
  for (int t = 1; t <= 100; ++t) {
    const GridD x = r.normal_grid<double>(1, 4, 4), eps = r.normal_grid<double>(1, 4, 4);
    const GridD zero = GridD::like(x);
    const GridD a = forward_jump(s100, x, t, zero), b = forward_jump(s100, zero, t, eps);
    const GridD c = forward_step(s100, x, t, zero), d = forward_step(s100, zero, t, eps);
    for (std::size_t i = 0; i < x.size(); ++i) {
      zero_case_mismatches += a[i] != std::sqrt(s100.alpha_bar(t)) * x[i];
      zero_case_mismatches += b[i] != std::sqrt(1.0 - s100.alpha_bar(t)) * eps[i];
      zero_case_mismatches += c[i] != std::sqrt(1.0 - s100.beta(t)) * x[i];
      zero_case_mismatches += d[i] != std::sqrt(s100.beta(t)) * eps[i];
    }
  }

  double ddim_gap = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int t = static_cast<int>(r.uniform_int(3, 100));
    const int mid = static_cast<int>(r.uniform_int(2, t - 1));
    const int end = static_cast<int>(r.uniform_int(0, mid - 1));
    const GridD x0 = r.normal_grid<double>(1, 4, 4), eps = r.normal_grid<double>(1, 4, 4);
    const GridD xt = forward_jump(s100, x0, t, eps);
    const GridD two = ddim_step(s100, ddim_step(s100, xt, t, mid, eps, 0.0, GridD(), false), mid, end, eps, 0.0,
                                GridD(), false);
    const GridD one = ddim_step(s100, xt, t, end, eps, 0.0, GridD(), false);
    for (std::size_t i = 0; i < one.size(); ++i) ddim_gap = std::max(ddim_gap, std::fabs(two[i] - one[i]));
  }

  double worst_step_loss = 0;
  for (int t = 2; t <= 100; ++t) {
    const GridD x0 = r.normal_grid<double>(1, 4, 4), eps = r.normal_grid<double>(1, 4, 4);
    worst_step_loss = std::max(worst_step_loss, std::fabs(loss_step(s100, x0, forward_jump(s100, x0, t, eps), t, eps)));
  }

  double worst_posterior = 0;
  for (int t_max : {4, 10, 100}) {
    const auto s = NoiseSchedule::cosine(t_max);
    for (int trial = 0; trial < 5; ++trial) {
      const GridD x0 = r.normal_grid<double>(1, 2, 2), xt = r.normal_grid<double>(1, 2, 2);
      for (int t = 1; t <= t_max; ++t) {
        const auto p = posterior(s, x0, xt, t);
        const auto ref = oracle::posterior_by_conditioning(s.betas(), x0, xt, t);
        for (std::size_t i = 0; i < x0.size(); ++i) {
          const double m = static_cast<double>(ref.mean[i]);
          worst_posterior = std::max(worst_posterior, std::fabs(p.mean[i] - m) / std::max(1.0, std::fabs(m)));
        }
        const double v = static_cast<double>(ref.variance);
        if (v > 0) worst_posterior = std::max(worst_posterior, std::fabs(p.variance - v) / v);
        else worst_posterior = std::max(worst_posterior, std::fabs(p.variance));
      }
    }
  }

  Verdict v;
  v.pass = zero_case_mismatches == 0 && ddim_gap <= 1e-12 && worst_step_loss <= 1e-20 && worst_posterior <= 1e-10;
  v.measured = "zero-case mismatches " + std::to_string(zero_case_mismatches) + ", ddim two-vs-one " + sci(ddim_gap) +
               ", max L_t-1 under true eps " + sci(worst_step_loss) + ", posterior rel err " + sci(worst_posterior);
  v.tolerance = "mismatches = 0, ddim <= 1e-12, L <= 1e-20, posterior <= 1e-10";
  return v;
}

Verdict gradient_check(const Context&) {
  struct Case {
    const char* name;
    UNetArch arch;
  };
  const Case cases[] = {{"denoiser", UNetArch{}}, {"small", small_arch()}, {"segmenter", default_seg_arch()}};
  Verdict v;
  v.pass = true;
  std::ostringstream m;
  for (const auto& c : cases) {
    auto net = UNet<double>::init(c.arch, 11);
    RngStream r(11, "perturb");
    for (auto& p : net.mutable_params().values) p += 0.2 * r.normal();
    RngStream xr(6, "acceptance-fd");
    const GridD x = xr.normal_grid<double>(1, 8, 8);
    const auto res = oracle::finite_difference_check(net, x, 37, 25, 12);
    v.pass = v.pass && res.checked == 25 && res.failed == 0 && res.nontrivial >= 20;
    m << c.name << " " << res.checked - res.failed << "/" << res.checked << " (" << res.nontrivial
      << " nonzero, worst rel " << sci(res.worst_rel) << ") ";
    if (res.failed > 0) m << res.first_failure << ' ';
  }
  v.measured = m.str();
  v.tolerance = "25/25 per architecture, rel 1e-3 above abs 1e-6, >= 20 gradients above 1e-6";
  return v;
}

Verdict determinism(const Context& ctx) {
  const fs::path root = ctx.workdir / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream f(root / "smoke.ini");
    f << testing::smoke_config_text();
  }
  // Both runs execute at the same path so recorded input paths agree.
  const fs::path run = root / "run";
  testing::run_smoke_pipeline(run, root / "smoke.ini");
  fs::rename(run, root / "first");
  testing::run_smoke_pipeline(run, root / "smoke.ini");
  fs::rename(run, root / "second");
  const std::string diff = testing::compare_trees(root / "first", root / "second");
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "first")) files += e.is_regular_file();
  Verdict v;
  v.pass = diff.empty();
  v.measured = diff.empty() ? std::to_string(files) + " files byte-identical across two runs" : diff;
  v.tolerance = "byte-identical";
  if (v.pass) fs::remove_all(root);
  return v;
}

namespace {

struct RecordingNet {
  mutable std::vector<int> seen_t;
  mutable std::vector<Grid> seen_x;

  GradientSet<float> zero_gradients() const { return {}; }
  Grid forward_backward(const Grid& x, int t, const std::function<Grid(const Grid&)>& loss_grad,
                        GradientSet<float>&) const {
    seen_t.push_back(t);
    seen_x.push_back(x);
    const Grid out = Grid::like(x);
    (void)loss_grad(out);
    return out;
  }
};

}  // namespace

Verdict shared_noise(const Context&) {
  const auto s = NoiseSchedule::cosine(100);
  PhantomConfig pc;
  pc.size = 16;

  // Instrumented supervised steps. Feeding the mask grid as the image too makes
  // the two branch inputs bitwise equal exactly when (t, eps) are.
  int hook_mismatch = 0, input_mismatch = 0, steps = 0;
  TrainHooks hooks;
  hooks.on_supervised_noise = [&](int ti, const Grid& ei, int tm, const Grid& em) {
    hook_mismatch += ti != tm || !bitwise_equal(ei, em);
  };
  RngStream rng(3, "acceptance-supervised");
  for (int i = 0; i < 200; ++i) {
    const Grid mask = to_model_mask(generate_phantom(pc, static_cast<std::uint64_t>(i)).mask);
    RecordingNet a, b;
    (void)supervised_step(s, a, b, mask, mask, rng, &hooks);
    input_mismatch += a.seen_t != b.seen_t || !bitwise_equal(a.seen_x.at(0), b.seen_x.at(0));
    ++steps;
  }

  // The same hook observed inside real training batches.
  UNetArch arch = small_arch();
  auto model = DdmmModel::create(arch, NoiseSchedule::cosine(20), 0);
  TrainConfig tc;
  tc.batch_size = 4;
  auto state = TrainerState::fresh(model, tc);
  std::vector<LabeledPair> labeled;
  for (int i = 0; i < 4; ++i) {
    const Phantom p = generate_phantom(pc, static_cast<std::uint64_t>(i));
    labeled.push_back({p.image, to_model_mask(p.mask)});
  }
  std::vector<const LabeledPair*> lb;
  for (const auto& p : labeled) lb.push_back(&p);
  int batch_calls = 0;
  TrainHooks counting;
  counting.on_supervised_noise = [&](int ti, const Grid& ei, int tm, const Grid& em) {
    ++batch_calls;
    hook_mismatch += ti != tm || !bitwise_equal(ei, em);
  };
  for (int k = 0; k < 3; ++k) train_batch(model, lb, {}, tc, state, &counting);

  // Joint sampling with one network in both branches.
  auto twin = DdmmModel::create(arch, NoiseSchedule::cosine(20), 0);
  RngStream pr(1, "perturb");
  for (auto& v : twin.image_net.mutable_params().values) v += static_cast<float>(0.05 * pr.normal());
  twin.mask_net = twin.image_net;
  int sample_mismatch = 0, samples = 0;
  for (auto kind : {SamplerKind::kDdpm, SamplerKind::kDdim}) {
    SamplerSettings st;
    st.kind = kind;
    st.height = st.width = 16;
    st.ddim_steps = 5;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = sample_pair(twin, seed, st);
      sample_mismatch += !bitwise_equal(p.image, p.mask_soft);
      ++samples;
    }
  }

  Verdict v;
  v.pass = hook_mismatch == 0 && input_mismatch == 0 && batch_calls == 12 && sample_mismatch == 0;
  v.measured = "eps/t mismatches " + std::to_string(hook_mismatch) + " over " + std::to_string(steps + batch_calls) +
               " draws, branch-input mismatches " + std::to_string(input_mismatch) + ", image != mask_soft in " +
               std::to_string(sample_mismatch) + "/" + std::to_string(samples) + " twin samples";
  v.tolerance = "bitwise, 0 mismatches";
  return v;
}

Verdict metric_oracles(const Context&) {
  using namespace metrics;
  // Frechet distance of two Gaussians with commuting covariances.
  const int d = 8, n = 5000;
  RngStream g(11, "gaussians");
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
  Eigen::VectorXd d1(d), d2(d), mu1(d), mu2(d);
  double closed = 0;
  for (int i = 0; i < d; ++i) {
    d1(i) = g.uniform(0.2, 2.0);
    d2(i) = g.uniform(0.2, 2.0);
    mu1(i) = 0.5 * g.normal();
    mu2(i) = 0.5 * g.normal();
    closed += (mu1(i) - mu2(i)) * (mu1(i) - mu2(i)) +
              (std::sqrt(d1(i)) - std::sqrt(d2(i))) * (std::sqrt(d1(i)) - std::sqrt(d2(i)));
  }
  const Eigen::MatrixXd l1 = q * d1.cwiseSqrt().asDiagonal(), l2 = q * d2.cwiseSqrt().asDiagonal();
  FeatureMatrix a(n, d), b(n, d);
  RngStream z(12, "samples");
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z1(d), z2(d);
    for (int k = 0; k < d; ++k) {
      z1(k) = z.normal();
      z2(k) = z.normal();
    }
    a.row(i) = (mu1 + l1 * z1).transpose();
    b.row(i) = (mu2 + l2 * z2).transpose();
  }
  const double fid_rel = std::fabs(fid(a, b) - closed) / closed;

  int enum_mismatch = 0;
  for (int x = 0; x < 16; ++x) {
    for (int y = 0; y < 16; ++y) {
      GridD ga(1, 2, 2), gb(1, 2, 2);
      std::vector<int> va(4), vb(4);
      for (int i = 0; i < 4; ++i) {
        va[static_cast<std::size_t>(i)] = (x >> i) & 1;
        vb[static_cast<std::size_t>(i)] = (y >> i) & 1;
        ga[static_cast<std::size_t>(i)] = va[static_cast<std::size_t>(i)];
        gb[static_cast<std::size_t>(i)] = vb[static_cast<std::size_t>(i)];
      }
      enum_mismatch += dice(ga, gb) != oracle::dice(va, vb);
      enum_mismatch += rand_score(ga, gb) != oracle::rand_index(va, vb);
    }
  }

  double worst = 0;
  RngStream r(3, "acceptance-metrics");
  for (int k = 0; k < 100; ++k) {
    GridD x(1, 8, 8), y(1, 8, 8);
    for (auto& v : x.values()) v = r.uniform(-1.0, 1.0);
    for (auto& v : y.values()) v = r.uniform(-1.0, 1.0);
    worst = std::max(worst, std::fabs(ssim(x, y) - static_cast<double>(oracle::ssim(x, y))));
    worst = std::max(worst, std::fabs(uqi(x, y) - static_cast<double>(oracle::uqi(x, y))));
    worst = std::max(worst, std::fabs(scc(x, y) - static_cast<double>(oracle::scc(x, y))));
  }

  Verdict v;
  v.pass = fid_rel <= 0.02 && enum_mismatch == 0 && worst <= 1e-10;
  v.measured = "fid rel err " + sci(fid_rel) + ", dice/rand mismatches " + std::to_string(enum_mismatch) +
               "/512, ssim/uqi/scc max abs err " + sci(worst);
  v.tolerance = "fid <= 2%, exact enumeration, pairwise <= 1e-10";
  return v;
}

}  // namespace ddmm::acceptance
