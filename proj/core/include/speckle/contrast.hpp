#pragma once

#include <span>

#include "speckle/grid.hpp"

namespace speckle {

inline constexpr double kDefaultContrastEps = 1e-6;
inline constexpr double kDefaultFlowEps = 1e-6;
inline constexpr double kDefaultLowPercentile = 0.5;
inline constexpr double kDefaultHighPercentile = 99.5;

struct TemporalStats {
  Image mean;
  /// Population standard deviation (1/N normalization).
  Image stddev;
};

/// Per-pixel temporal mean and 1/N standard deviation, two-pass.
TemporalStats temporal_stats(const SpeckleSequence& seq);

/// K = sigma / (mu + eps).
Image contrast_map(const Image& mean, const Image& stddev, double eps = kDefaultContrastEps);

/// F = 1 / (K^2 + eps); relative flow surrogate.
Image flow_prior(const Image& contrast, double eps = kDefaultFlowEps);

/// Convenience: stats -> K -> F on one sequence.
struct ContrastResult {
  Image contrast;
  Image flow;
};
ContrastResult contrast_and_flow(const SpeckleSequence& seq, double contrast_eps = kDefaultContrastEps,
                                 double flow_eps = kDefaultFlowEps);

/// Percentile with linear interpolation between closest order statistics
/// (rank p/100 * (n-1)).
double percentile(std::span<const double> values, double pct);

/// Clip range of a robust normalization.
struct NormalizationRecord {
  double lo = -1.0;
  double hi = 1.0;

  friend bool operator==(const NormalizationRecord&, const NormalizationRecord&) = default;
};

struct NormalizedMap {
  Image values;
  NormalizationRecord record;
};

/// Percentile-clip to [lo, hi] and map affinely onto [-1, 1].
/// Rejects maps whose percentile range collapses (hi <= lo).
NormalizedMap robust_normalize(const Image& map, double lo_pct = kDefaultLowPercentile,
                               double hi_pct = kDefaultHighPercentile);

/// Applies an existing record: clamp(2 (v - lo)/(hi - lo) - 1, -1, 1).
Image apply_normalization(const Image& map, const NormalizationRecord& record);

/// Inverse affine map from [-1, 1] back to [lo, hi]; inputs outside
/// [-1, 1] saturate at lo / hi.
Image denormalize(const Image& normalized, const NormalizationRecord& record);

}  // namespace speckle
