// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "ddmm/grid.hpp"
#include "ddmm/schedule.hpp"

/// Diffusion mathematics with no knowledge of networks or training. Every
/// source of randomness is an explicit argument; all functions are pure.
namespace ddmm::kernel {

template <typename T>
struct ReverseStepParams {
  BasicGrid<T> mean;
  double variance = 0.0;  // isotropic
};

/// sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * eps.
template <typename T>
BasicGrid<T> forward_step(const NoiseSchedule& s, const BasicGrid<T>& x_prev, int t,
                          const BasicGrid<T>& eps);

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
template <typename T>
BasicGrid<T> forward_jump(const NoiseSchedule& s, const BasicGrid<T>& x0, int t,
                          const BasicGrid<T>& eps);

/// Gaussian q(x_{t-1} | x_t, x_0): mean and variance beta_tilde_t.
template <typename T>
ReverseStepParams<T> posterior(const NoiseSchedule& s, const BasicGrid<T>& x0,
                               const BasicGrid<T>& xt, int t);

/// Inverts forward_jump for a predicted noise; optional clamp to [-1, 1].
template <typename T>
BasicGrid<T> eps_to_x0(const NoiseSchedule& s, const BasicGrid<T>& xt, int t,
                       const BasicGrid<T>& eps_hat, bool clamp);

/// Ancestral step x_t -> x_{t-1}. z must be all zeros at t = 1 (or empty).
template <typename T>
BasicGrid<T> ddpm_reverse_step(const NoiseSchedule& s, const BasicGrid<T>& xt, int t,
                               const BasicGrid<T>& eps_hat, const BasicGrid<T>& z,
                               bool clamp = true);

/// DDIM sigma for the (t -> t_prev) jump.
double ddim_sigma(const NoiseSchedule& s, int t, int t_prev, double eta);

/// Generalized DDIM step x_t -> x_{t_prev}; t_prev may be 0 (alpha_bar_0 = 1).
/// z is only read when eta > 0 and may be empty otherwise.
template <typename T>
BasicGrid<T> ddim_step(const NoiseSchedule& s, const BasicGrid<T>& xt, int t, int t_prev,
                       const BasicGrid<T>& eps_hat, double eta, const BasicGrid<T>& z,
                       bool clamp = true);

/// L_T: KL(q(x_T | x_0) || N(0, I)) summed over elements.
template <typename T>
double loss_prior(const NoiseSchedule& s, const BasicGrid<T>& x0);

/// L_{t-1} for t >= 2: KL between the true and predicted posteriors (shared variance).
template <typename T>
double loss_step(const NoiseSchedule& s, const BasicGrid<T>& x0, const BasicGrid<T>& xt, int t,
                 const BasicGrid<T>& eps_hat);

/// L_0: -log N(x0; mu_theta(x1, 1), beta_1 I), continuous density, summed.
template <typename T>
double loss_decoder(const NoiseSchedule& s, const BasicGrid<T>& x0, const BasicGrid<T>& x1,
                    const BasicGrid<T>& eps_hat);

/// Mean squared error between true and predicted noise.
template <typename T>
double loss_simple(const BasicGrid<T>& eps, const BasicGrid<T>& eps_hat);

/// Gradient of loss_simple with respect to eps_hat: 2 (eps_hat - eps) / N.
template <typename T>
BasicGrid<T> loss_simple_grad(const BasicGrid<T>& eps, const BasicGrid<T>& eps_hat);

/// Per-term variational bound. steps[k] holds L_{t-1} for t = k + 2.
struct VlbTerms {
  double decoder = 0.0;
  std::vector<double> steps;
  double prior = 0.0;
  double total() const;
};

template <typename T>
using EpsPredictor = std::function<BasicGrid<T>(const BasicGrid<T>& xt, int t)>;

/// Evaluates L_0 + sum_t L_{t-1} + L_T for one x0. noises[t-1] corrupts x0 to x_t.
template <typename T>
VlbTerms vlb(const NoiseSchedule& s, const BasicGrid<T>& x0,
             const std::vector<BasicGrid<T>>& noises, const EpsPredictor<T>& predict);

}  // namespace ddmm::kernel
