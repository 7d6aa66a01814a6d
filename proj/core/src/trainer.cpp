// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/trainer.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "ddmm/parallel.hpp"

namespace ddmm {

namespace {

// Samples per parallel wave. Fixed so the reduction order never depends on the
// worker count.
constexpr std::size_t kWave = 8;

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw NumericError("non-finite loss " + where);
}

}  // namespace

DdmmModel DdmmModel::create(const UNetArch& arch, NoiseSchedule schedule, std::uint64_t init_seed) {
  auto s = std::make_shared<const NoiseSchedule>(std::move(schedule));
  return DdmmModel{s, DenoiserNet::init(arch, init_seed, 0), DenoiserNet::init(arch, init_seed, 1),
                   0};
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "train: learning_rate must be > 0");
  require(epochs >= 0, "train: epochs must be >= 0");
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(lambda_unsup >= 0.0, "train: lambda_unsup must be >= 0");
  require(seed_supervised != seed_unsupervised,
          "train: seed_supervised and seed_unsupervised must differ");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "train: Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "train: adam_eps must be > 0");
  require(vlb_every >= 0 && vlb_probe_size >= 0, "train: vlb settings must be >= 0");
}

TrainerState TrainerState::fresh(const DdmmModel& model, const TrainConfig& cfg) {
  return TrainerState{OptimState::for_size(model.image_net.parameter_count()),
                      OptimState::for_size(model.mask_net.parameter_count()),
                      RngStream(cfg.seed_supervised, "supervised-noise"),
                      RngStream(cfg.seed_unsupervised, "unsupervised-noise")};
}

NoiseDraw draw_noise(RngStream& rng, int t_max, int c, int h, int w) {
  NoiseDraw d;
  d.t = static_cast<int>(rng.uniform_int(1, t_max));
  d.eps = rng.normal_grid<float>(c, h, w);
  return d;
}

void require_model_mask(const Grid& mask) {
  for (float v : mask.values()) {
    if (v != -1.f && v != 1.f) {
      throw ValidationError("mask is not in model encoding {-1, +1} (found " + std::to_string(v) +
                            ")");
    }
  }
}

BatchReport train_batch(DdmmModel& model, const std::vector<const LabeledPair*>& labeled,
                        const std::vector<const Grid*>& unlabeled, const TrainConfig& cfg,
                        TrainerState& state, const TrainHooks* hooks) {
  require(!labeled.empty(), "train_batch: empty labeled batch");
  const NoiseSchedule& s = model.sched();
  const bool use_unsup = cfg.lambda_unsup > 0.0 && !unlabeled.empty();

  // All draws happen up front and in order so the two streams advance
  // identically however the work is scheduled.
  std::vector<NoiseDraw> sup_draws, unsup_draws;
  sup_draws.reserve(labeled.size());
  for (const LabeledPair* p : labeled) {
    const Grid& im = p->image;
    sup_draws.push_back(draw_noise(state.supervised_rng, s.t_max(), im.channels(), im.height(), im.width()));
  }
  if (use_unsup) {
    unsup_draws.reserve(unlabeled.size());
    for (const Grid* g : unlabeled) {
      unsup_draws.push_back(draw_noise(state.unsupervised_rng, s.t_max(), g->channels(), g->height(), g->width()));
    }
  }

  const std::size_t nl = labeled.size();
  const std::size_t nu = use_unsup ? unlabeled.size() : 0;
  const std::size_t total_items = nl + nu;
  GradientSet<float> acc_img = model.image_net.zero_gradients();
  GradientSet<float> acc_mask = model.mask_net.zero_gradients();
  BatchReport report;
  report.n_labeled = nl;
  report.n_unlabeled = nu;
  const float w_sup = static_cast<float>(1.0 / static_cast<double>(nl));
  const float w_unsup =
      nu > 0 ? static_cast<float>(cfg.lambda_unsup / static_cast<double>(nu)) : 0.f;

  std::vector<SupervisedResult> sup(kWave);
  std::vector<UnsupervisedResult> uns(kWave);
  for (std::size_t begin = 0; begin < total_items; begin += kWave) {
    const std::size_t end = std::min(total_items, begin + kWave);
    parallel_for(end - begin, [&](std::size_t k) {
      const std::size_t item = begin + k;
      if (item < nl) {
        sup[k] = supervised_step_with(s, model.image_net, model.mask_net, labeled[item]->image,
                                      labeled[item]->mask, sup_draws[item], hooks);
      } else {
        const std::size_t j = item - nl;
        uns[k] = unsupervised_step_with(s, model.image_net, *unlabeled[j], unsup_draws[j]);
      }
    });
    for (std::size_t item = begin; item < end; ++item) {
      const std::size_t k = item - begin;
      if (item < nl) {
        check_finite(sup[k].loss(), "in supervised step");
        report.loss_sup_image += sup[k].loss_image;
        report.loss_sup_mask += sup[k].loss_mask;
        acc_img.add_scaled(sup[k].image_grads, w_sup);
        acc_mask.add_scaled(sup[k].mask_grads, w_sup);
      } else {
        check_finite(uns[k].loss, "in unsupervised step");
        report.loss_unsup += uns[k].loss;
        acc_img.add_scaled(uns[k].image_grads, w_unsup);
      }
    }
  }
  report.loss_sup_image /= static_cast<double>(nl);
  report.loss_sup_mask /= static_cast<double>(nl);
  if (nu > 0) report.loss_unsup /= static_cast<double>(nu);
  report.total = report.loss_sup_image + report.loss_sup_mask + cfg.lambda_unsup * report.loss_unsup;
  check_finite(report.total, "in batch total");
  if (!acc_img.all_finite() || !acc_mask.all_finite()) {
    throw NumericError("non-finite gradients in train_batch");
  }

  const AdamConfig adam = cfg.adam();
  adam_update(adam, model.image_net.mutable_params().values, acc_img.values, state.image_opt);
  adam_update(adam, model.mask_net.mutable_params().values, acc_mask.values, state.mask_opt);
  return report;
}

void TrainingLog::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot write " + path);
  f << "epoch,loss_sup_img,loss_sup_mask,loss_unsup,vlb_img\n";
  f << std::setprecision(9);
  for (const auto& e : epochs) {
    f << e.epoch << ',' << e.loss_sup_image << ',' << e.loss_sup_mask << ',' << e.loss_unsup << ',';
    if (std::isfinite(e.vlb_image)) f << e.vlb_image;
    f << '\n';
  }
}

VlbProbe VlbProbe::make(const std::vector<LabeledPair>& labeled, const NoiseSchedule& s,
                        int probe_size, std::uint64_t seed) {
  VlbProbe probe;
  const std::size_t n = std::min<std::size_t>(labeled.size(), static_cast<std::size_t>(probe_size));
  RngStream rng(seed, "vlb-probe");
  for (std::size_t i = 0; i < n; ++i) {
    const Grid& im = labeled[i].image;
    probe.images.push_back(im);
    std::vector<Grid> noises;
    noises.reserve(static_cast<std::size_t>(s.t_max()));
    for (int t = 1; t <= s.t_max(); ++t) {
      noises.push_back(rng.normal_grid<float>(im.channels(), im.height(), im.width()));
    }
    probe.noises.push_back(std::move(noises));
  }
  return probe;
}

double VlbProbe::evaluate(const NoiseSchedule& s, const DenoiserNet& net) const {
  if (images.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> totals(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    totals[i] = kernel::vlb<float>(s, images[i], noises[i],
                                   [&](const Grid& xt, int t) { return net.forward(xt, t); })
                    .total();
  });
  double sum = 0.0;
  for (double v : totals) sum += v;
  return sum / static_cast<double>(images.size());
}

TrainingLog fit(DdmmModel& model, const std::vector<LabeledPair>& labeled,
                const std::vector<Grid>& unlabeled, const TrainConfig& cfg, TrainerState& state,
                const FitCallbacks& callbacks) {
  cfg.validate();
  require(!labeled.empty(), "fit: labeled set is empty");
  const NoiseSchedule& s = model.sched();
  for (const auto& p : labeled) {
    model.image_net.check_input(p.image);
    require_same_shape(p.image, p.mask, "fit: labeled pair");
    require_model_mask(p.mask);
  }
  for (const auto& g : unlabeled) {
    require_same_shape(g, labeled.front().image, "fit: unlabeled image");
  }

  TrainingLog log;
  const VlbProbe probe = VlbProbe::make(labeled, s, cfg.vlb_probe_size, cfg.vlb_seed);
  const std::size_t nl = labeled.size();
  const std::size_t nu = unlabeled.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t n_batches = (nl + bs - 1) / bs;
  const int first_epoch = model.epoch + 1;

  while (model.epoch < cfg.epochs) {
    const int epoch = model.epoch + 1;
    RngStream shuffle_l(cfg.seed_supervised, "shuffle-labeled", static_cast<std::uint64_t>(epoch));
    RngStream shuffle_u(cfg.seed_unsupervised, "shuffle-unlabeled", static_cast<std::uint64_t>(epoch));
    const auto perm_l = shuffle_l.permutation(nl);
    const auto perm_u = shuffle_u.permutation(nu);

    EpochRecord rec;
    rec.epoch = epoch;
    double w_l = 0.0, w_u = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      std::vector<const LabeledPair*> lb;
      for (std::size_t i = b * bs; i < std::min(nl, (b + 1) * bs); ++i) lb.push_back(&labeled[perm_l[i]]);
      std::vector<const Grid*> ub;
      const std::size_t u0 = b * nu / n_batches, u1 = (b + 1) * nu / n_batches;
      for (std::size_t i = u0; i < u1; ++i) ub.push_back(&unlabeled[perm_u[i]]);
      BatchReport r;
      try {
        r = train_batch(model, lb, ub, cfg, state, &callbacks.hooks);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b + 1) + ")");
      }
      rec.loss_sup_image += r.loss_sup_image * static_cast<double>(r.n_labeled);
      rec.loss_sup_mask += r.loss_sup_mask * static_cast<double>(r.n_labeled);
      rec.loss_unsup += r.loss_unsup * static_cast<double>(r.n_unlabeled);
      w_l += static_cast<double>(r.n_labeled);
      w_u += static_cast<double>(r.n_unlabeled);
    }
    rec.loss_sup_image /= w_l;
    rec.loss_sup_mask /= w_l;
    if (w_u > 0) rec.loss_unsup /= w_u;
    model.epoch = epoch;

    const bool eval_vlb = epoch == first_epoch || epoch == cfg.epochs ||
                          (cfg.vlb_every > 0 && epoch % cfg.vlb_every == 0);
    if (eval_vlb && !probe.images.empty()) {
      rec.vlb_image = probe.evaluate(s, model.image_net);
      if (!std::isfinite(rec.vlb_image)) {
        throw NumericError("non-finite VLB at epoch " + std::to_string(epoch));
      }
    }
    log.epochs.push_back(rec);
    if (callbacks.on_epoch_end) callbacks.on_epoch_end(model, state, rec);
  }
  return log;
}

}  // namespace ddmm
