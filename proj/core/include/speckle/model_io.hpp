#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "speckle/condition.hpp"
#include "speckle/contrast.hpp"
#include "speckle/denoiser.hpp"
#include "speckle/diffusion.hpp"

namespace speckle {

/// Trained reconstructor plus everything needed to sample from it.
///
/// Layout (little-endian): "SPKM", u16 version, architecture (u32
/// cond_channels, u32 hidden count, u32 widths..., u32 kernel, u32 time_dim),
/// schedule (u32 T, f64 beta_start, f64 beta_end, u32 sampler steps),
/// provenance (u64 train seed, u64 train steps), preprocessing (f64
/// contrast eps, f64 flow eps, f64 lo pct, f64 hi pct), target record (f64
/// lo, f64 hi), u64 weight count, then f32 weights.
struct ModelFile {
  DenoiserParams params;
  int diffusion_steps = 200;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  int sampler_steps = 20;
  std::uint64_t train_seed = 0;
  std::uint64_t train_steps = 0;
  PriorOptions prior;
  NormalizationOptions normalization;
  /// Denormalization convention for sampled flow maps.
  NormalizationRecord target_record;

  NoiseSchedule schedule() const { return linear_schedule(diffusion_steps, beta_start, beta_end); }
};

inline constexpr char kModelMagic[4] = {'S', 'P', 'K', 'M'};
inline constexpr std::uint16_t kModelVersion = 1;

std::vector<std::uint8_t> encode_model(const ModelFile& model);
ModelFile decode_model(const std::vector<std::uint8_t>& bytes);

void write_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile read_model(const std::filesystem::path& path);

}  // namespace speckle
