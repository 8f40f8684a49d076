#pragma once

#include <cstdint>
#include <vector>

#include "speckle/grid.hpp"
#include "speckle/registration.hpp"

namespace speckle {

/// Largest contrast the multiplicative model accepts; keeps
/// P(1 + k z < 0) below 5e-4.
inline constexpr double kMaxPhantomContrast = 0.35;

struct Point {
  double y = 0.0;
  double x = 0.0;
};

/// Straight vessel: all pixels within `radius` of segment [a, b].
struct VesselSegment {
  Point a;
  Point b;
  double radius = 1.0;
  double k_true = 0.1;
  /// Mean intensity inside the vessel relative to base_intensity.
  double mu_scale = 1.0;
};

struct PhantomSpec {
  int height = 64;
  int width = 64;
  int n_frames = 200;
  std::vector<VesselSegment> vessels;
  double background_k = 0.3;
  double base_intensity = 100.0;
  /// One entry per frame; motion[0] must be (0, 0).
  std::vector<Displacement> motion;
  std::uint64_t seed = 0;

  /// Static multiplicative tissue texture: mu *= max(0.05, 1 + texture * g(x)),
  /// g i.i.d. standard normal, fixed over time. Leaves temporal contrast intact.
  double texture = 0.0;
  /// Additive Gaussian noise, std as a fraction of base_intensity; the sum is
  /// clamped at zero.
  double additive_noise = 0.0;
  ShiftMode shift_mode = ShiftMode::circular;

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

struct PhantomMaps {
  Image mu;
  Image k_true;
};

/// Rasterizes vessels onto the background. Overlaps take the smallest
/// k_true (fastest flow); the winning vessel also sets mu.
PhantomMaps build_phantom(const PhantomSpec& spec);

struct PhantomGroundTruth {
  Image k_true_map;
  Image mu_map;
  std::vector<Displacement> shifts;
  /// Flow prior of the full unshifted sequence.
  Image hq_flow;
};

struct PhantomRealization {
  SpeckleSequence sequence;
  PhantomGroundTruth truth;
};

/// I_t(x) = shift(mu(x) max(0, 1 + k(x) z_t(x)), motion[t]); z_t drawn from a
/// per-frame substream of `seed`, so the output is bit-reproducible.
PhantomRealization synthesize_sequence(const PhantomSpec& spec, int threads = 1);

/// Bounded random walk starting at (0, 0): steps in {-1, 0, 1}^2, reflected
/// at +-max_shift.
std::vector<Displacement> random_walk_motion(int n_frames, int max_shift, std::uint64_t seed);

struct VesselRandomization {
  int min_count = 2;
  int max_count = 4;
  double min_radius = 1.0;
  double max_radius = 3.0;
  /// The first vessel always gets min_k; the rest are uniform in [min_k, max_k].
  double min_k = 0.08;
  double max_k = 0.2;
  double mu_scale = 0.6;
};

/// Random straight vessels that cross the whole field of view.
std::vector<VesselSegment> random_vessels(int height, int width, const VesselRandomization& params,
                                          std::uint64_t seed);

}  // namespace speckle
