// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/segmenter.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "ddmm/metrics.hpp"
#include "ddmm/parallel.hpp"
#include "ddmm/rng.hpp"

namespace ddmm {

namespace {
constexpr std::size_t kWave = 8;
}

UNetArch default_seg_arch() {
  UNetArch a;
  a.base_channels = 16;
  a.norm_groups = 8;
  a.time_conditioned = false;
  return a;
}

void SegTrainConfig::validate() const {
  arch.validate();
  require(!arch.time_conditioned, "segmenter: architecture must not be time conditioned");
  require(epochs >= 0, "segmenter: epochs must be >= 0");
  require(batch_size >= 1, "segmenter: batch_size must be >= 1");
  require(learning_rate > 0.0, "segmenter: learning_rate must be positive");
}

double bce_with_logits(const Grid& logits, const Grid& target01) {
  require_same_shape(logits, target01, "bce_with_logits");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], y = target01[i];
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return sum / static_cast<double>(logits.size());
}

Grid bce_with_logits_grad(const Grid& logits, const Grid& target01) {
  require_same_shape(logits, target01, "bce_with_logits_grad");
  Grid g = Grid::like(logits);
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
    g[i] = static_cast<float>((p - target01[i]) * inv_n);
  }
  return g;
}

SegTrainResult train_segmenter(const std::vector<SegPair>& pairs, const SegTrainConfig& cfg) {
  cfg.validate();
  require(!pairs.empty(), "train_segmenter: no training pairs");
  SegTrainResult r{SegNet::init(cfg.arch, cfg.seed), OptimState{}, {}};
  r.opt = OptimState::for_size(r.net.parameter_count());
  for (const auto& p : pairs) {
    r.net.check_input(p.image);
    require_same_shape(p.image, p.mask, "train_segmenter");
    for (float v : p.mask.values()) require(v == 0.f || v == 1.f, "train_segmenter: mask must be {0, 1}");
  }
  const AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};
  const std::size_t n = pairs.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<GradientSet<float>> grads(kWave);
  std::vector<double> losses(kWave);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto perm = RngStream(cfg.seed, "seg-shuffle", static_cast<std::uint64_t>(epoch)).permutation(n);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += bs) {
      const std::size_t b1 = std::min(n, b0 + bs);
      GradientSet<float> acc = r.net.zero_gradients();
      double batch_loss = 0.0;
      const float w = static_cast<float>(1.0 / static_cast<double>(b1 - b0));
      for (std::size_t begin = b0; begin < b1; begin += kWave) {
        const std::size_t end = std::min(b1, begin + kWave);
        parallel_for(end - begin, [&](std::size_t k) {
          const SegPair& p = pairs[perm[begin + k]];
          grads[k] = r.net.zero_gradients();
          r.net.forward_backward(
              p.image, 0,
              [&](const Grid& z) {
                losses[k] = bce_with_logits(z, p.mask);
                return bce_with_logits_grad(z, p.mask);
              },
              grads[k]);
        });
        for (std::size_t k = 0; k < end - begin; ++k) {
          batch_loss += losses[k];
          acc.add_scaled(grads[k], w);
        }
      }
      batch_loss /= static_cast<double>(b1 - b0);
      if (!std::isfinite(batch_loss) || !acc.all_finite()) {
        throw NumericError("segmenter: non-finite loss at epoch " + std::to_string(epoch));
      }
      adam_update(adam, r.net.mutable_params().values, acc.values, r.opt);
      epoch_loss += batch_loss;
      ++n_batches;
    }
    r.losses.push_back({epoch, epoch_loss / static_cast<double>(n_batches)});
  }
  return r;
}

Grid logits_to_mask(const Grid& logits) {
  Grid m = Grid::like(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) m[i] = logits[i] >= 0.f ? 1.f : 0.f;
  return m;
}

SegEvaluation evaluate_segmenter(const LogitFn& predict, const std::vector<SegPair>& test_set) {
  require(!test_set.empty(), "evaluate_segmenter: empty test set");
  SegEvaluation ev;
  ev.rows.resize(test_set.size());
  parallel_for(test_set.size(), [&](std::size_t i) {
    const SegPair& p = test_set[i];
    const Grid pred = logits_to_mask(predict(p.image));
    ev.rows[i] = {p.name, metrics::dice(pred, p.mask), metrics::rand_score(pred, p.mask)};
  });
  for (const auto& row : ev.rows) {
    ev.dice_mean += row.dice;
    ev.rand_mean += row.rand;
  }
  ev.dice_mean /= static_cast<double>(ev.rows.size());
  ev.rand_mean /= static_cast<double>(ev.rows.size());
  return ev;
}

SegEvaluation evaluate_segmenter(const SegNet& net, const std::vector<SegPair>& test_set) {
  return evaluate_segmenter([&](const Grid& x) { return net.forward(x, 0); }, test_set);
}

void SegEvaluation::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot write " + path);
  f << std::setprecision(9) << "name,dice,rand\n";
  for (const auto& r : rows) f << r.name << ',' << r.dice << ',' << r.rand << '\n';
  f << "mean," << dice_mean << ',' << rand_mean << '\n';
}

}  // namespace ddmm
