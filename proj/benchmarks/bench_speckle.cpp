#include <benchmark/benchmark.h>

#include <random>

#include "speckle/contrast.hpp"
#include "speckle/denoiser.hpp"
#include "speckle/metrics.hpp"
#include "speckle/phantom.hpp"
#include "speckle/reconstructor.hpp"
#include "speckle/registration.hpp"

using namespace speckle;

namespace {

Image noise_image(int n, std::uint64_t seed) {
  Rng rng(seed);
  Image img(n, n);
  for (auto& v : img) v = rng.uniform();
  return img;
}

PhantomRealization moving_phantom(int size, int frames) {
  PhantomSpec spec;
  spec.height = size;
  spec.width = size;
  spec.n_frames = frames;
  spec.texture = 0.3;
  spec.vessels = random_vessels(size, size, {}, 1);
  spec.motion = random_walk_motion(frames, size / 8, 2);
  spec.seed = 3;
  return synthesize_sequence(spec);
}

}  // namespace

static void BM_EstimateShift(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Image ref = noise_image(n, 1);
  const Image frame = apply_shift(ref, {3, -5}).image;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_shift(frame, ref));
}
BENCHMARK(BM_EstimateShift)->Arg(32)->Arg(128)->Arg(384);

static void BM_Stabilize(benchmark::State& state) {
  const auto real = moving_phantom(static_cast<int>(state.range(0)), 64);
  for (auto _ : state) benchmark::DoNotOptimize(stabilize(real.sequence));
}
BENCHMARK(BM_Stabilize)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_ContrastAndFlow(benchmark::State& state) {
  const auto real = moving_phantom(static_cast<int>(state.range(0)), 200);
  for (auto _ : state) benchmark::DoNotOptimize(contrast_and_flow(real.sequence));
}
BENCHMARK(BM_ContrastAndFlow)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_Synthesize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(moving_phantom(32, 200));
}
BENCHMARK(BM_Synthesize)->Unit(benchmark::kMillisecond);

static void BM_DenoiserForward(benchmark::State& state) {
  const auto params = init_denoiser<float>(Architecture{}, 4, InitMode::all_random);
  const int n = static_cast<int>(state.range(0));
  Planes<float> input(7, n, n);
  Rng rng(5);
  for (auto& v : input.data) v = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(denoise_forward(params, input, 100));
}
BENCHMARK(BM_DenoiserForward)->Arg(32)->Arg(64);

static void BM_LossAndGrad(benchmark::State& state) {
  const auto params = init_denoiser<float>(Architecture{}, 6, InitMode::all_random);
  std::vector<BatchItem<float>> batch(4);
  Rng rng(7);
  for (auto& item : batch) {
    item.target = normal_grid<float>(32, 32, rng);
    item.condition = Planes<float>(6, 32, 32);
    for (auto& v : item.condition.data) v = static_cast<float>(rng.uniform(-1, 1));
  }
  const auto sched = linear_schedule(200, 5e-4, 0.1);
  for (auto _ : state) {
    Rng draw(8);
    benchmark::DoNotOptimize(loss_and_grad<float>(params, batch, sched, draw));
  }
}
BENCHMARK(BM_LossAndGrad)->Unit(benchmark::kMillisecond);

static void BM_Ssim(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Image a = noise_image(n, 9);
  const Image b = noise_image(n, 10);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b, {}));
}
BENCHMARK(BM_Ssim)->Arg(32)->Arg(384);

BENCHMARK_MAIN();
