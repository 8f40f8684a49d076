#include "speckle/diffusion.hpp"

namespace speckle {

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("linear_schedule: need at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.beta.resize(static_cast<std::size_t>(steps));
  s.alpha_bar_values.resize(static_cast<std::size_t>(steps));
  double running = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    const double beta = beta_start + frac * (beta_end - beta_start);
    running *= 1.0 - beta;
    s.beta[static_cast<std::size_t>(i)] = beta;
    s.alpha_bar_values[static_cast<std::size_t>(i)] = running;
  }
  return s;
}

SamplerConfig uniform_sampler(int diffusion_steps, int sampler_steps) {
  if (sampler_steps < 1 || sampler_steps > diffusion_steps) {
    throw std::invalid_argument("uniform_sampler: need 1 <= S <= T");
  }
  SamplerConfig cfg;
  cfg.steps = sampler_steps;
  for (int i = 1; i <= sampler_steps; ++i) {
    const auto tau = static_cast<int>((static_cast<long long>(i) * diffusion_steps) / sampler_steps);
    cfg.timesteps.push_back(tau);
  }
  return cfg;
}

}  // namespace speckle
