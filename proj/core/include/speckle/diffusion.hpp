#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "speckle/errors.hpp"
#include "speckle/grid.hpp"
#include "speckle/rng.hpp"

namespace speckle {

inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

/// Linear beta schedule with cumulative products. Steps are 1-based:
/// alpha_bar(t) for t in [1, T], and alpha_bar(0) = 1 by convention.
struct NoiseSchedule {
  int steps = 0;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  std::vector<double> beta;
  std::vector<double> alpha_bar_values;

  double alpha_bar(int t) const {
    if (t < 0 || t > steps) throw std::out_of_range("diffusion step " + std::to_string(t) + " out of range");
    return t == 0 ? 1.0 : alpha_bar_values[static_cast<std::size_t>(t - 1)];
  }
};

NoiseSchedule linear_schedule(int steps, double beta_start = kDefaultBetaStart, double beta_end = kDefaultBetaEnd);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
template <typename Real>
Grid<Real> forward_noise(const Grid<Real>& x0, int t, const Grid<Real>& noise, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps) throw std::out_of_range("forward_noise: step out of range");
  if (!x0.same_shape(noise)) throw std::invalid_argument("forward_noise: noise shape mismatch");
  const Real a = static_cast<Real>(std::sqrt(sched.alpha_bar(t)));
  const Real b = static_cast<Real>(std::sqrt(1.0 - sched.alpha_bar(t)));
  Grid<Real> out(x0.rows(), x0.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * noise[i];
  return out;
}

/// Deterministic DDIM update (eta = 0) from step t to t_prev < t.
template <typename Real>
Grid<Real> ddim_step(const Grid<Real>& x_t, int t, int t_prev, const Grid<Real>& eps_hat, const NoiseSchedule& sched) {
  if (!(t_prev < t)) throw std::invalid_argument("ddim_step: t_prev must be below t");
  if (t_prev < 0 || t > sched.steps) throw std::out_of_range("ddim_step: step out of range");
  if (!x_t.same_shape(eps_hat)) throw std::invalid_argument("ddim_step: eps_hat shape mismatch");
  const double abar_t = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t_prev);
  const Real sqrt_abar_t = static_cast<Real>(std::sqrt(abar_t));
  const Real sqrt_one_minus_t = static_cast<Real>(std::sqrt(1.0 - abar_t));
  const Real sqrt_abar_prev = static_cast<Real>(std::sqrt(abar_prev));
  const Real sqrt_one_minus_prev = static_cast<Real>(std::sqrt(1.0 - abar_prev));
  Grid<Real> out(x_t.rows(), x_t.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Real x0_hat = (x_t[i] - sqrt_one_minus_t * eps_hat[i]) / sqrt_abar_t;
    out[i] = sqrt_abar_prev * x0_hat + sqrt_one_minus_prev * eps_hat[i];
  }
  return out;
}

/// DDIM timestep subsequence tau_1 < ... < tau_S = T, uniformly spaced.
struct SamplerConfig {
  int steps = 0;
  std::vector<int> timesteps;
};

SamplerConfig uniform_sampler(int diffusion_steps, int sampler_steps);

/// Standard-normal grid from `rng`, row-major draw order.
template <typename Real>
Grid<Real> normal_grid(int rows, int cols, Rng& rng) {
  Grid<Real> g(rows, cols);
  for (auto& v : g) v = static_cast<Real>(rng.normal());
  return g;
}

/// Runs the DDIM chain from x_T ~ N(0, I) (drawn from `seed`) down to step 0.
/// `predict(x_t, t)` returns the noise estimate. No clipping is applied.
template <typename Real, typename Predictor>
Grid<Real> ddim_sample(Predictor&& predict, const NoiseSchedule& sched, const SamplerConfig& sampler, int rows,
                       int cols, std::uint64_t seed) {
  if (sampler.timesteps.empty() || sampler.timesteps.back() != sched.steps) {
    throw std::invalid_argument("ddim_sample: sampler subsequence must end at T");
  }
  Rng rng(seed);
  Grid<Real> x = normal_grid<Real>(rows, cols, rng);
  for (std::size_t i = sampler.timesteps.size(); i-- > 0;) {
    const int t = sampler.timesteps[i];
    const int t_prev = i == 0 ? 0 : sampler.timesteps[i - 1];
    const Grid<Real> eps = predict(static_cast<const Grid<Real>&>(x), t);
    x = ddim_step(x, t, t_prev, eps, sched);
    for (Real v : x) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericalError("ddim sampling produced a non-finite value at step t=" + std::to_string(t));
      }
    }
  }
  return x;
}

}  // namespace speckle
