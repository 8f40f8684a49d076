#include "speckle/reconstructor.hpp"

#include <cmath>
#include <string>

#include "speckle/parallel.hpp"

namespace speckle {

template <typename Real>
LossAndGrad<Real> loss_and_grad(const BasicDenoiser<Real>& params, std::span<const BatchItem<Real>> batch,
                                std::span<const NoiseDraw<Real>> draws, const NoiseSchedule& sched, int threads) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  if (draws.size() != batch.size()) throw std::invalid_argument("loss_and_grad: one noise draw per item required");

  const std::size_t n = batch.size();
  const std::size_t pixels = batch.front().target.size();
  const Real scale = Real(1) / static_cast<Real>(n * pixels);
  std::vector<Real> item_loss(n);
  std::vector<std::vector<Real>> item_grad(n);

  parallel_for(n, threads, [&](std::size_t i) {
    const auto& item = batch[i];
    const auto& draw = draws[i];
    if (item.target.size() != pixels) throw std::invalid_argument("loss_and_grad: batch items differ in size");
    const Grid<Real> x_t = forward_noise(item.target, draw.t, draw.noise, sched);
    ForwardCache<Real> cache;
    const Grid<Real> eps_hat = denoise_forward(params, network_input(x_t, item.condition), draw.t, &cache);
    Grid<Real> d_out(eps_hat.rows(), eps_hat.cols());
    Real sum{};
    for (std::size_t p = 0; p < pixels; ++p) {
      const Real r = draw.noise[p] - eps_hat[p];
      sum += r * r;
      d_out[p] = Real(-2) * r * scale;
    }
    item_loss[i] = sum;
    item_grad[i].assign(params.weights.size(), Real{});
    denoise_backward(params, cache, d_out, std::span<Real>(item_grad[i]));
  });

  LossAndGrad<Real> out;
  out.grad.assign(params.weights.size(), Real{});
  for (std::size_t i = 0; i < n; ++i) {
    out.loss += item_loss[i];
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += item_grad[i][j];
  }
  out.loss *= scale;
  if (!std::isfinite(static_cast<double>(out.loss))) throw NumericalError("loss_and_grad: non-finite loss");
  return out;
}

template LossAndGrad<float> loss_and_grad<float>(const BasicDenoiser<float>&, std::span<const BatchItem<float>>,
                                                 std::span<const NoiseDraw<float>>, const NoiseSchedule&, int);
template LossAndGrad<double> loss_and_grad<double>(const BasicDenoiser<double>&, std::span<const BatchItem<double>>,
                                                   std::span<const NoiseDraw<double>>, const NoiseSchedule&, int);

Image dihedral(const Image& image, int code) {
  const bool transpose = (code & 4) != 0;
  if (transpose && image.rows() != image.cols()) {
    throw std::invalid_argument("dihedral: transpose needs a square grid");
  }
  const int h = image.rows();
  const int w = image.cols();
  Image out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      int sr = transpose ? c : r;
      int sc = transpose ? r : c;
      if (code & 1) sc = w - 1 - sc;
      if (code & 2) sr = h - 1 - sr;
      out(r, c) = image(sr, sc);
    }
  }
  return out;
}

namespace {

TrainingSample transformed(const TrainingSample& s, int code) {
  TrainingSample out{dihedral(s.target, code), s.condition};
  for (auto& ch : out.condition.channels) ch = dihedral(ch, code);
  return out;
}

constexpr int kDivergenceWindow = 100;
constexpr double kDivergenceFactor = 10.0;

}  // namespace

TrainResult train(DenoiserParams params, std::span<const TrainingSample> dataset, const NoiseSchedule& sched,
                  const TrainConfig& config, const TrainProgress& progress) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch size must be positive");
  if (config.steps < 0) throw std::invalid_argument("train: step count must be nonnegative");
  const int rows = dataset.front().target.rows();
  const int cols = dataset.front().target.cols();
  for (const auto& s : dataset) {
    if (s.target.rows() != rows || s.target.cols() != cols || s.condition.rows() != rows ||
        s.condition.cols() != cols || s.condition.channel_count() != params.arch.cond_channels) {
      throw std::invalid_argument("train: dataset shapes do not match the denoiser");
    }
  }
  const int transforms = config.augment ? (rows == cols ? 8 : 4) : 1;

  std::vector<float> m(params.weights.size(), 0.0F);
  std::vector<float> v(params.weights.size(), 0.0F);
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.steps));
  int above = 0;

  for (int step = 0; step < config.steps; ++step) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(step)));
    std::vector<BatchItem<float>> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      const auto index = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(dataset.size()) - 1));
      const int code = transforms > 1 ? static_cast<int>(rng.integer(0, transforms - 1)) : 0;
      batch.push_back(to_batch_item<float>(code == 0 ? dataset[index] : transformed(dataset[index], code)));
    }
    const auto lg = loss_and_grad<float>(params, batch, sched, rng, config.threads);
    const double loss = lg.loss;
    result.loss_trace.push_back(loss);
    if (progress) progress(step, loss);

    if (loss > kDivergenceFactor * result.loss_trace.front()) {
      if (++above >= kDivergenceWindow) {
        throw TrainingDiverged("training diverged at step " + std::to_string(step), result.loss_trace);
      }
    } else {
      above = 0;
    }

    const double t = step + 1;
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t j = 0; j < params.weights.size(); ++j) {
      const double g = lg.grad[j];
      m[j] = static_cast<float>(config.beta1 * m[j] + (1.0 - config.beta1) * g);
      v[j] = static_cast<float>(config.beta2 * v[j] + (1.0 - config.beta2) * g * g);
      const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + config.adam_eps);
      const double w = params.weights[j];
      params.weights[j] = static_cast<float>(w - config.learning_rate * (update + config.weight_decay * w));
    }
  }
  result.params = std::move(params);
  return result;
}

Image sample(const DenoiserParams& params, const Condition& cond, const NoiseSchedule& sched,
             const SamplerConfig& sampler, std::uint64_t seed) {
  if (cond.channel_count() != params.arch.cond_channels) {
    throw std::invalid_argument("sample: condition has " + std::to_string(cond.channel_count()) +
                                " channels, model expects " + std::to_string(params.arch.cond_channels));
  }
  const Planes<float> c = cond.planes<float>();
  auto predict = [&](const Grid<float>& x_t, int t) { return denoise_forward(params, network_input(x_t, c), t); };
  return ddim_sample<float>(predict, sched, sampler, cond.rows(), cond.cols(), seed).cast<double>();
}

}  // namespace speckle
