// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/kernel.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace ddmm::kernel {

namespace {

template <typename T>
BasicGrid<T> axpby(double a, const BasicGrid<T>& x, double b, const BasicGrid<T>& y) {
  BasicGrid<T> out = BasicGrid<T>::like(x);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<T>(a * static_cast<double>(x[i]) + b * static_cast<double>(y[i]));
  }
  return out;
}

}  // namespace

template <typename T>
BasicGrid<T> forward_step(const NoiseSchedule& s, const BasicGrid<T>& x_prev, int t,
                          const BasicGrid<T>& eps) {
  require_same_shape(x_prev, eps, "forward_step");
  const double b = s.beta(t);
  return axpby(std::sqrt(1.0 - b), x_prev, std::sqrt(b), eps);
}

template <typename T>
BasicGrid<T> forward_jump(const NoiseSchedule& s, const BasicGrid<T>& x0, int t,
                          const BasicGrid<T>& eps) {
  require_same_shape(x0, eps, "forward_jump");
  const double ab = s.alpha_bar(t);
  s.check_timestep(t);
  return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

template <typename T>
ReverseStepParams<T> posterior(const NoiseSchedule& s, const BasicGrid<T>& x0,
                               const BasicGrid<T>& xt, int t) {
  require_same_shape(x0, xt, "posterior");
  s.check_timestep(t);
  const double ab = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  const double c0 = std::sqrt(ab_prev) * s.beta(t) / (1.0 - ab);
  const double ct = std::sqrt(s.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
  return {axpby(c0, x0, ct, xt), s.posterior_variance(t)};
}

template <typename T>
BasicGrid<T> eps_to_x0(const NoiseSchedule& s, const BasicGrid<T>& xt, int t,
                       const BasicGrid<T>& eps_hat, bool clamp) {
  require_same_shape(xt, eps_hat, "eps_to_x0");
  const double ab = s.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(ab);
  const double se = std::sqrt(1.0 - ab);
  BasicGrid<T> x0 = BasicGrid<T>::like(xt);
  for (std::size_t i = 0; i < xt.size(); ++i) {
    double v = (static_cast<double>(xt[i]) - se * static_cast<double>(eps_hat[i])) * inv;
    if (clamp) v = std::clamp(v, -1.0, 1.0);
    x0[i] = static_cast<T>(v);
  }
  return x0;
}

template <typename T>
BasicGrid<T> ddpm_reverse_step(const NoiseSchedule& s, const BasicGrid<T>& xt, int t,
                               const BasicGrid<T>& eps_hat, const BasicGrid<T>& z, bool clamp) {
  s.check_timestep(t);
  if (t == 1) {
    const bool zero = z.empty() || std::all_of(z.values().begin(), z.values().end(),
                                               [](T v) { return v == T(0); });
    require(zero, "ddpm_reverse_step: injected noise must be zero at t = 1");
  } else {
    require_same_shape(xt, z, "ddpm_reverse_step");
  }
  const BasicGrid<T> x0_hat = eps_to_x0(s, xt, t, eps_hat, clamp);
  ReverseStepParams<T> p = posterior(s, x0_hat, xt, t);
  if (t == 1) return std::move(p.mean);
  const double sd = std::sqrt(p.variance);
  return axpby(1.0, p.mean, sd, z);
}

double ddim_sigma(const NoiseSchedule& s, int t, int t_prev, double eta) {
  const double ab = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t_prev);
  return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
}

template <typename T>
BasicGrid<T> ddim_step(const NoiseSchedule& s, const BasicGrid<T>& xt, int t, int t_prev,
                       const BasicGrid<T>& eps_hat, double eta, const BasicGrid<T>& z,
                       bool clamp) {
  s.check_timestep(t);
  require(t_prev >= 0 && t_prev < t, "ddim_step: need 0 <= t_prev < t");
  require(eta >= 0.0 && eta <= 1.0, "ddim_step: eta must lie in [0, 1]");
  const BasicGrid<T> x0_hat = eps_to_x0(s, xt, t, eps_hat, clamp);
  const double ab_prev = s.alpha_bar(t_prev);
  const double sigma = ddim_sigma(s, t, t_prev, eta);
  const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
  BasicGrid<T> out = axpby(std::sqrt(ab_prev), x0_hat, dir, eps_hat);
  if (eta > 0.0 && sigma > 0.0) {
    require_same_shape(xt, z, "ddim_step");
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<T>(static_cast<double>(out[i]) + sigma * static_cast<double>(z[i]));
    }
  }
  return out;
}

template <typename T>
double loss_prior(const NoiseSchedule& s, const BasicGrid<T>& x0) {
  const double ab = s.alpha_bar(s.t_max());
  const double var = 1.0 - ab;
  const double per_element_const = 0.5 * (var - 1.0 - std::log(var));
  double sum = 0.0;
  for (T v : x0.values()) {
    const double x = static_cast<double>(v);
    sum += 0.5 * ab * x * x + per_element_const;
  }
  return sum;
}

template <typename T>
double loss_step(const NoiseSchedule& s, const BasicGrid<T>& x0, const BasicGrid<T>& xt, int t,
                 const BasicGrid<T>& eps_hat) {
  require(t >= 2, "loss_step: t must be >= 2 (t = 1 is the decoder term)");
  require_same_shape(x0, xt, "loss_step");
  require_same_shape(xt, eps_hat, "loss_step");
  s.check_timestep(t);
  // Both posterior means share the x_t coefficient, so their difference is
  // c0 * (x0 - x0_hat).
  const double ab = s.alpha_bar(t);
  const double c0 = std::sqrt(s.alpha_bar(t - 1)) * s.beta(t) / (1.0 - ab);
  const double inv = 1.0 / std::sqrt(ab);
  const double se = std::sqrt(1.0 - ab);
  double sq = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double x0_hat =
        (static_cast<double>(xt[i]) - se * static_cast<double>(eps_hat[i])) * inv;
    const double d = c0 * (static_cast<double>(x0[i]) - x0_hat);
    sq += d * d;
  }
  return sq / (2.0 * s.posterior_variance(t));
}

template <typename T>
double loss_decoder(const NoiseSchedule& s, const BasicGrid<T>& x0, const BasicGrid<T>& x1,
                    const BasicGrid<T>& eps_hat) {
  require_same_shape(x0, x1, "loss_decoder");
  const BasicGrid<T> mu = eps_to_x0(s, x1, 1, eps_hat, false);
  const double var = s.beta(1);
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi * var);
  double sum = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double r = static_cast<double>(x0[i]) - static_cast<double>(mu[i]);
    sum += log_norm + r * r / (2.0 * var);
  }
  return sum;
}

template <typename T>
double loss_simple(const BasicGrid<T>& eps, const BasicGrid<T>& eps_hat) {
  require_same_shape(eps, eps_hat, "loss_simple");
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double d = static_cast<double>(eps_hat[i]) - static_cast<double>(eps[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(eps.size());
}

template <typename T>
BasicGrid<T> loss_simple_grad(const BasicGrid<T>& eps, const BasicGrid<T>& eps_hat) {
  require_same_shape(eps, eps_hat, "loss_simple_grad");
  BasicGrid<T> g = BasicGrid<T>::like(eps);
  const double scale = 2.0 / static_cast<double>(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    g[i] = static_cast<T>(scale * (static_cast<double>(eps_hat[i]) - static_cast<double>(eps[i])));
  }
  return g;
}

double VlbTerms::total() const {
  return decoder + std::accumulate(steps.begin(), steps.end(), 0.0) + prior;
}

template <typename T>
VlbTerms vlb(const NoiseSchedule& s, const BasicGrid<T>& x0,
             const std::vector<BasicGrid<T>>& noises, const EpsPredictor<T>& predict) {
  require(static_cast<int>(noises.size()) == s.t_max(), "vlb: need one noise grid per timestep");
  VlbTerms terms;
  terms.steps.reserve(static_cast<std::size_t>(s.t_max() - 1));
  {
    const BasicGrid<T> x1 = forward_jump(s, x0, 1, noises[0]);
    terms.decoder = loss_decoder(s, x0, x1, predict(x1, 1));
  }
  for (int t = 2; t <= s.t_max(); ++t) {
    const BasicGrid<T> xt = forward_jump(s, x0, t, noises[static_cast<std::size_t>(t - 1)]);
    terms.steps.push_back(loss_step(s, x0, xt, t, predict(xt, t)));
  }
  terms.prior = loss_prior(s, x0);
  return terms;
}

#define DDMM_KERNEL_INSTANTIATE(T)                                                              \
  template BasicGrid<T> forward_step(const NoiseSchedule&, const BasicGrid<T>&, int,            \
                                     const BasicGrid<T>&);                                      \
  template BasicGrid<T> forward_jump(const NoiseSchedule&, const BasicGrid<T>&, int,            \
                                     const BasicGrid<T>&);                                      \
  template ReverseStepParams<T> posterior(const NoiseSchedule&, const BasicGrid<T>&,            \
                                          const BasicGrid<T>&, int);                            \
  template BasicGrid<T> eps_to_x0(const NoiseSchedule&, const BasicGrid<T>&, int,               \
                                  const BasicGrid<T>&, bool);                                   \
  template BasicGrid<T> ddpm_reverse_step(const NoiseSchedule&, const BasicGrid<T>&, int,       \
                                          const BasicGrid<T>&, const BasicGrid<T>&, bool);      \
  template BasicGrid<T> ddim_step(const NoiseSchedule&, const BasicGrid<T>&, int, int,          \
                                  const BasicGrid<T>&, double, const BasicGrid<T>&, bool);      \
  template double loss_prior(const NoiseSchedule&, const BasicGrid<T>&);                        \
  template double loss_step(const NoiseSchedule&, const BasicGrid<T>&, const BasicGrid<T>&,     \
                            int, const BasicGrid<T>&);                                          \
  template double loss_decoder(const NoiseSchedule&, const BasicGrid<T>&, const BasicGrid<T>&,  \
                               const BasicGrid<T>&);                                            \
  template double loss_simple(const BasicGrid<T>&, const BasicGrid<T>&);                        \
  template BasicGrid<T> loss_simple_grad(const BasicGrid<T>&, const BasicGrid<T>&);             \
  template VlbTerms vlb(const NoiseSchedule&, const BasicGrid<T>&,                              \
                        const std::vector<BasicGrid<T>>&, const EpsPredictor<T>&);

DDMM_KERNEL_INSTANTIATE(float)
DDMM_KERNEL_INSTANTIATE(double)

#undef DDMM_KERNEL_INSTANTIATE

}  // namespace ddmm::kernel
