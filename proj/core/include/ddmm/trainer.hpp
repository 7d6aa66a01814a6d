// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "ddmm/adam.hpp"
#include "ddmm/denoiser.hpp"
#include "ddmm/kernel.hpp"
#include "ddmm/rng.hpp"
#include "ddmm/schedule.hpp"

namespace ddmm {

/// Two epsilon-prediction branches bound to one shared noise schedule:
/// image_net generates radiographs, mask_net the aligned segmentation.
struct DdmmModel {
  std::shared_ptr<const NoiseSchedule> schedule;
  DenoiserNet image_net;
  DenoiserNet mask_net;
  int epoch = 0;

  static DdmmModel create(const UNetArch& arch, NoiseSchedule schedule, std::uint64_t init_seed);
  const NoiseSchedule& sched() const { return *schedule; }
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 100;
  int batch_size = 16;
  double lambda_unsup = 1.0;
  std::uint64_t seed_supervised = 1;
  std::uint64_t seed_unsupervised = 2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Evaluate the image-branch bound every N epochs (0 = only first and last).
  int vlb_every = 10;
  int vlb_probe_size = 4;
  std::uint64_t vlb_seed = 7;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

/// Optimizer moments and the two noise streams; everything needed to resume.
struct TrainerState {
  OptimState image_opt;
  OptimState mask_opt;
  RngStream supervised_rng;
  RngStream unsupervised_rng;

  static TrainerState fresh(const DdmmModel& model, const TrainConfig& cfg);
};

struct LabeledPair {
  Grid image;  // model space [-1, 1]
  Grid mask;   // model space {-1, +1}
};

/// One (t, eps) corruption draw.
struct NoiseDraw {
  int t = 0;
  Grid eps;
};

NoiseDraw draw_noise(RngStream& rng, int t_max, int c, int h, int w);

/// Observes the corruption fed to each branch inside a supervised step.
struct TrainHooks {
  std::function<void(int t_image, const Grid& eps_image, int t_mask, const Grid& eps_mask)>
      on_supervised_noise;
};

struct SupervisedResult {
  double loss_image = 0.0;
  double loss_mask = 0.0;
  double loss() const { return loss_image + loss_mask; }
  GradientSet<float> image_grads;
  GradientSet<float> mask_grads;
};

struct UnsupervisedResult {
  double loss = 0.0;
  GradientSet<float> image_grads;
};

/// Checks mask values are exactly -1 or +1.
void require_model_mask(const Grid& mask);

/// Supervised DDMM step for a given corruption draw: both branches see the
/// same t and the same eps. Net types need forward_backward and
/// zero_gradients (DenoiserNet, or a test double).
template <typename ImageNet, typename MaskNet>
SupervisedResult supervised_step_with(const NoiseSchedule& s, const ImageNet& image_net,
                                      const MaskNet& mask_net, const Grid& image, const Grid& mask,
                                      const NoiseDraw& draw, const TrainHooks* hooks = nullptr) {
  require_same_shape(image, mask, "supervised_step");
  require_model_mask(mask);
  if (hooks && hooks->on_supervised_noise) {
    hooks->on_supervised_noise(draw.t, draw.eps, draw.t, draw.eps);
  }
  const Grid xt_img = kernel::forward_jump(s, image, draw.t, draw.eps);
  const Grid xt_mask = kernel::forward_jump(s, mask, draw.t, draw.eps);
  SupervisedResult r{0.0, 0.0, image_net.zero_gradients(), mask_net.zero_gradients()};
  auto grad_of = [&](double& loss_out) {
    return [&](const Grid& out) {
      loss_out = kernel::loss_simple(draw.eps, out);
      return kernel::loss_simple_grad(draw.eps, out);
    };
  };
  image_net.forward_backward(xt_img, draw.t, grad_of(r.loss_image), r.image_grads);
  mask_net.forward_backward(xt_mask, draw.t, grad_of(r.loss_mask), r.mask_grads);
  return r;
}

template <typename ImageNet, typename MaskNet>
SupervisedResult supervised_step(const NoiseSchedule& s, const ImageNet& image_net,
                                 const MaskNet& mask_net, const Grid& image, const Grid& mask,
                                 RngStream& rng_sup, const TrainHooks* hooks = nullptr) {
  const NoiseDraw d = draw_noise(rng_sup, s.t_max(), image.channels(), image.height(), image.width());
  return supervised_step_with(s, image_net, mask_net, image, mask, d, hooks);
}

template <typename ImageNet>
UnsupervisedResult unsupervised_step_with(const NoiseSchedule& s, const ImageNet& image_net,
                                          const Grid& image, const NoiseDraw& draw) {
  const Grid xt = kernel::forward_jump(s, image, draw.t, draw.eps);
  UnsupervisedResult r{0.0, image_net.zero_gradients()};
  image_net.forward_backward(
      xt, draw.t,
      [&](const Grid& out) {
        r.loss = kernel::loss_simple(draw.eps, out);
        return kernel::loss_simple_grad(draw.eps, out);
      },
      r.image_grads);
  return r;
}

/// Image-only step from the unsupervised stream; never touches the mask branch.
template <typename ImageNet>
UnsupervisedResult unsupervised_step(const NoiseSchedule& s, const ImageNet& image_net,
                                     const Grid& image, RngStream& rng_unsup) {
  const NoiseDraw d = draw_noise(rng_unsup, s.t_max(), image.channels(), image.height(), image.width());
  return unsupervised_step_with(s, image_net, image, d);
}

struct BatchReport {
  double loss_sup_image = 0.0;  // mean over labeled batch
  double loss_sup_mask = 0.0;
  double loss_unsup = 0.0;      // mean over unlabeled batch (0 when empty)
  double total = 0.0;           // sup_image + sup_mask + lambda * unsup
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
};

/// Mean supervised loss plus lambda times mean unsupervised loss, then one Adam
/// update per network. An empty unlabeled batch is supervised-only training.
BatchReport train_batch(DdmmModel& model, const std::vector<const LabeledPair*>& labeled,
                        const std::vector<const Grid*>& unlabeled, const TrainConfig& cfg,
                        TrainerState& state, const TrainHooks* hooks = nullptr);

struct EpochRecord {
  int epoch = 0;
  double loss_sup_image = 0.0;
  double loss_sup_mask = 0.0;
  double loss_unsup = 0.0;
  double vlb_image = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  void write_csv(const std::string& path) const;
};

/// Mean image-branch variational bound (nats per image) over a fixed probe.
struct VlbProbe {
  std::vector<Grid> images;
  std::vector<std::vector<Grid>> noises;  // [image][t-1]

  static VlbProbe make(const std::vector<LabeledPair>& labeled, const NoiseSchedule& s,
                       int probe_size, std::uint64_t seed);
  double evaluate(const NoiseSchedule& s, const DenoiserNet& net) const;
};

struct FitCallbacks {
  /// Called after each epoch with the updated model and state.
  std::function<void(const DdmmModel&, const TrainerState&, const EpochRecord&)> on_epoch_end;
  TrainHooks hooks;
};

/// Runs cfg.epochs epochs starting at model.epoch. Each epoch shuffles both
/// sets and pairs every labeled batch with a proportional slice of the
/// unlabeled pool, so both are consumed once. Throws NumericError on NaN.
TrainingLog fit(DdmmModel& model, const std::vector<LabeledPair>& labeled,
                const std::vector<Grid>& unlabeled, const TrainConfig& cfg, TrainerState& state,
                const FitCallbacks& callbacks = {});

}  // namespace ddmm
