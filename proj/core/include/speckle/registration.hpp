#pragma once

#include <complex>
#include <string_view>
#include <vector>

#include "speckle/grid.hpp"

namespace speckle {

using Spectrum = Grid<std::complex<double>>;

/// Integer translation between two frames, in pixels.
struct Displacement {
  int dy = 0;
  int dx = 0;

  friend bool operator==(const Displacement&, const Displacement&) = default;
  Displacement operator-() const { return {-dy, -dx}; }
};

enum class ShiftMode { circular, zero_fill };

ShiftMode parse_shift_mode(std::string_view name);
std::string_view to_string(ShiftMode mode);

enum class ReferenceFrame { first, median };

ReferenceFrame parse_reference_frame(std::string_view name);

inline constexpr double kDefaultPhaseEps = 1e-8;
inline constexpr double kDefaultConfidenceThreshold = 0.03;

/// Normalized cross-power spectrum F(frame) conj(F(ref)) / (|.| + eps').
///
/// `eps` is relative: eps' = eps * max_u |F(frame) conj(F(ref))|, so the
/// result does not depend on the intensity scale. If the numerator vanishes
/// everywhere eps' = eps.
Spectrum cross_power_spectrum(const Image& frame, const Image& ref, double eps = kDefaultPhaseEps);

struct ShiftEstimate {
  Displacement shift;
  /// Height of the phase-correlation peak; 1 for an exact circular shift.
  double peak = 0.0;
  /// Peak below threshold: `shift` has been forced to (0, 0).
  bool low_confidence = false;
};

/// Translation d such that frame(x) ~ ref(x - d) (circularly).
///
/// Requires even H and W; peak row p decodes to p - H when p > H/2 (same
/// for columns). Ties go to the smallest |dy|+|dx|, then lexicographic (dy, dx).
ShiftEstimate estimate_shift(const Image& frame, const Image& ref, double eps = kDefaultPhaseEps,
                             double confidence_threshold = kDefaultConfidenceThreshold);

struct ShiftedFrame {
  Image image;
  /// 1 where the pixel was sampled from inside the source frame.
  Mask valid;
};

/// out(x) = frame(x + d). Circular mode wraps; zero_fill writes 0 into
/// vacated pixels and marks them invalid.
ShiftedFrame apply_shift(const Image& frame, Displacement d, ShiftMode mode = ShiftMode::circular);

struct StabilizeOptions {
  double eps = kDefaultPhaseEps;
  ShiftMode mode = ShiftMode::circular;
  double confidence_threshold = kDefaultConfidenceThreshold;
  ReferenceFrame reference = ReferenceFrame::first;
  int threads = 1;
};

struct StabilizeResult {
  SpeckleSequence aligned;
  std::vector<Displacement> shifts;
  std::vector<double> confidence;
  std::vector<bool> low_confidence;
  /// Pixels valid in every aligned frame (all ones in circular mode).
  Mask valid;
};

/// Registers every frame against the reference frame and aligns it.
/// Low-confidence frames are kept (with zero shift) and flagged.
StabilizeResult stabilize(const SpeckleSequence& seq, const StabilizeOptions& options = {});

/// Per-pixel temporal median image.
Image median_frame(const SpeckleSequence& seq);

}  // namespace speckle
