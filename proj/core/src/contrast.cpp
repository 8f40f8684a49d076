#include "speckle/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace speckle {

TemporalStats temporal_stats(const SpeckleSequence& seq) {
  const int n = seq.n_frames();
  if (n < 2) throw std::invalid_argument("temporal_stats: need at least two frames");
  const double inv_n = 1.0 / n;

  TemporalStats stats{Image(seq.height(), seq.width()), Image(seq.height(), seq.width())};
  for (int t = 0; t < n; ++t) {
    const Image& f = seq[t];
    for (std::size_t i = 0; i < f.size(); ++i) stats.mean[i] += f[i];
  }
  for (auto& m : stats.mean) m *= inv_n;

  for (int t = 0; t < n; ++t) {
    const Image& f = seq[t];
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double d = f[i] - stats.mean[i];
      stats.stddev[i] += d * d;
    }
  }
  for (auto& s : stats.stddev) s = std::sqrt(s * inv_n);
  return stats;
}

Image contrast_map(const Image& mean, const Image& stddev, double eps) {
  require_same_shape(mean, stddev, "contrast_map");
  if (!(eps >= 0.0)) throw std::invalid_argument("contrast_map: eps must be nonnegative");
  Image k(mean.rows(), mean.cols());
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = stddev[i] / (mean[i] + eps);
  return k;
}

Image flow_prior(const Image& contrast, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("flow_prior: eps must be positive");
  Image f(contrast.rows(), contrast.cols());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 / (contrast[i] * contrast[i] + eps);
  return f;
}

ContrastResult contrast_and_flow(const SpeckleSequence& seq, double contrast_eps, double flow_eps) {
  const TemporalStats stats = temporal_stats(seq);
  ContrastResult out;
  out.contrast = contrast_map(stats.mean, stats.stddev, contrast_eps);
  out.flow = flow_prior(out.contrast, flow_eps);
  return out;
}

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (!(pct >= 0.0 && pct <= 100.0)) throw std::invalid_argument("percentile must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(rank));
  const std::size_t above = std::min(below + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(below);
  return sorted[below] + frac * (sorted[above] - sorted[below]);
}

NormalizedMap robust_normalize(const Image& map, double lo_pct, double hi_pct) {
  if (!(lo_pct < hi_pct)) throw std::invalid_argument("robust_normalize: lo_pct must be below hi_pct");
  for (double v : map) {
    if (!std::isfinite(v)) throw std::invalid_argument("robust_normalize: map holds non-finite values");
  }
  const NormalizationRecord record{percentile(map.values(), lo_pct), percentile(map.values(), hi_pct)};
  if (!(record.hi > record.lo)) {
    throw std::invalid_argument("robust_normalize: map is constant over the percentile range");
  }
  return {apply_normalization(map, record), record};
}

Image apply_normalization(const Image& map, const NormalizationRecord& record) {
  if (!(record.hi > record.lo)) throw std::invalid_argument("normalization record needs lo < hi");
  const double range = record.hi - record.lo;
  Image out(map.rows(), map.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(2.0 * (map[i] - record.lo) / range - 1.0, -1.0, 1.0);
  }
  return out;
}

Image denormalize(const Image& normalized, const NormalizationRecord& record) {
  Image out(normalized.rows(), normalized.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Convex combination so that -1 and +1 land exactly on lo and hi.
    const double s = 0.5 * (std::clamp(normalized[i], -1.0, 1.0) + 1.0);
    out[i] = (1.0 - s) * record.lo + s * record.hi;
  }
  return out;
}

}  // namespace speckle
