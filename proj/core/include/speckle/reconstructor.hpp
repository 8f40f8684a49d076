#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "speckle/condition.hpp"
#include "speckle/denoiser.hpp"
#include "speckle/diffusion.hpp"
#include "speckle/errors.hpp"

namespace speckle {

/// One (normalized HQ target, condition) pair.
struct TrainingSample {
  Image target;
  Condition condition;
};

/// Network-precision copy of a training pair.
template <typename Real>
struct BatchItem {
  Grid<Real> target;
  Planes<Real> condition;
};

template <typename Real>
BatchItem<Real> to_batch_item(const TrainingSample& sample) {
  return {sample.target.cast<Real>(), sample.condition.planes<Real>()};
}

/// Diffusion step and injected noise for one batch item.
template <typename Real>
struct NoiseDraw {
  int t = 1;
  Grid<Real> noise;
};

/// For each item: t uniform in [1, T], then the noise grid, in item order.
template <typename Real>
std::vector<NoiseDraw<Real>> draw_noise(std::size_t count, int rows, int cols, int diffusion_steps, Rng& rng) {
  std::vector<NoiseDraw<Real>> draws;
  draws.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    NoiseDraw<Real> d;
    d.t = static_cast<int>(rng.integer(1, diffusion_steps));
    d.noise = normal_grid<Real>(rows, cols, rng);
    draws.push_back(std::move(d));
  }
  return draws;
}

/// Mean squared error between injected noise and its prediction.
template <typename Real>
Real noise_prediction_loss(const Grid<Real>& noise, const Grid<Real>& predicted) {
  if (!noise.same_shape(predicted)) throw std::invalid_argument("noise_prediction_loss: shape mismatch");
  Real total{};
  for (std::size_t i = 0; i < noise.size(); ++i) {
    const Real d = noise[i] - predicted[i];
    total += d * d;
  }
  return total / static_cast<Real>(noise.size());
}

template <typename Real>
struct LossAndGrad {
  Real loss{};
  std::vector<Real> grad;
};

/// Noise-prediction loss averaged over items and pixels, with its gradient
/// w.r.t. every weight. Per-item work may run on `threads` workers; the
/// reduction is in item order, so results do not depend on `threads`.
template <typename Real>
LossAndGrad<Real> loss_and_grad(const BasicDenoiser<Real>& params, std::span<const BatchItem<Real>> batch,
                                std::span<const NoiseDraw<Real>> draws, const NoiseSchedule& sched, int threads = 1);

/// Draws (t, noise) per item from `rng`, then evaluates the loss.
template <typename Real>
LossAndGrad<Real> loss_and_grad(const BasicDenoiser<Real>& params, std::span<const BatchItem<Real>> batch,
                                const NoiseSchedule& sched, Rng& rng, int threads = 1) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const auto draws =
      draw_noise<Real>(batch.size(), batch.front().target.rows(), batch.front().target.cols(), sched.steps, rng);
  return loss_and_grad<Real>(params, batch, draws, sched, threads);
}

struct TrainConfig {
  int steps = 2000;
  int batch_size = 4;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Random flips / transposes applied jointly to target and condition.
  bool augment = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct TrainResult {
  DenoiserParams params;
  std::vector<double> loss_trace;
};

/// Raised when the loss stays above 10x its first value for 100 consecutive steps.
class TrainingDiverged : public NumericalError {
public:
  TrainingDiverged(const std::string& what, std::vector<double> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

private:
  std::vector<double> trace_;
};

using TrainProgress = std::function<void(int step, double loss)>;

/// AdamW on random minibatches; deterministic given config.seed.
TrainResult train(DenoiserParams params, std::span<const TrainingSample> dataset, const NoiseSchedule& sched,
                  const TrainConfig& config, const TrainProgress& progress = {});

/// Applies dihedral transform `code` (0..7; only 0..3 on non-square grids).
Image dihedral(const Image& image, int code);

/// Deterministic DDIM reconstruction in the normalized domain.
Image sample(const DenoiserParams& params, const Condition& cond, const NoiseSchedule& sched,
             const SamplerConfig& sampler, std::uint64_t seed);

}  // namespace speckle
