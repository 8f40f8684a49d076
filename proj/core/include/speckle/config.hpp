#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "speckle/phantom.hpp"
#include "speckle/registration.hpp"

namespace speckle {

struct PhantomSection {
  int count = 8;
  int height = 32;
  int width = 32;
  int n_frames = 200;
  double base_intensity = 100.0;
  double background_k = 0.3;
  double texture = 0.3;
  double additive_noise = 0.0;
  /// Per-phantom motion amplitude is drawn uniformly from [0, max_shift].
  int max_shift = 4;
  ShiftMode shift_mode = ShiftMode::circular;
  VesselRandomization vessels;
};

struct RegistrationSection {
  double eps = kDefaultPhaseEps;
  ShiftMode mode = ShiftMode::circular;
  double confidence_threshold = kDefaultConfidenceThreshold;
  ReferenceFrame reference = ReferenceFrame::first;
};

struct ContrastSection {
  double contrast_eps = 1e-6;
  double flow_eps = 1e-6;
  double lo_pct = 0.5;
  double hi_pct = 99.5;
  int n_few = 5;
  int n_hq = 200;
};

struct DiffusionSection {
  int steps = 200;
  double beta_start = 5e-4;
  double beta_end = 0.1;
  std::vector<int> hidden = {32, 32, 32};
  int kernel = 3;
  int time_dim = 32;
  int train_steps = 2000;
  int batch_size = 4;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  bool augment = true;
  int sampler_steps = 20;
};

struct EvaluationSection {
  std::vector<std::string> metrics = {"ssim", "psnr", "mae"};
  bool export_png = false;
};

struct SeedSection {
  std::uint64_t phantom = 1;
  std::uint64_t train = 2;
  std::uint64_t sample = 3;
};

/// One experiment run. Every section must be present in the file.
struct PipelineConfig {
  PhantomSection phantom;
  RegistrationSection registration;
  ContrastSection contrast;
  DiffusionSection diffusion;
  EvaluationSection evaluation;
  SeedSection seeds;

  void validate() const;
  /// Canonical "[section] key = value" text; stable across formatting changes.
  std::string canonical_text() const;
  /// SHA-256 (hex) of canonical_text().
  std::string hash() const;
  /// phantom = s, train = s + 1, sample = s + 2.
  void override_seeds(std::uint64_t seed);
};

/// Parses sectioned "key = value" text. Throws ConfigError on missing
/// sections, unknown keys, or malformed values.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

}  // namespace speckle
