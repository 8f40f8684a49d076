#pragma once

#include <vector>

#include "speckle/contrast.hpp"
#include "speckle/denoiser.hpp"
#include "speckle/grid.hpp"

namespace speckle {

/// Conditioning tensor: n_few normalized aligned frames, then the normalized
/// flow prior. Every value lies in [-1, 1].
struct Condition {
  int n_few = 0;
  std::vector<Image> channels;
  /// One record per channel, in channel order.
  std::vector<NormalizationRecord> records;

  int channel_count() const { return static_cast<int>(channels.size()); }
  int rows() const { return channels.empty() ? 0 : channels.front().rows(); }
  int cols() const { return channels.empty() ? 0 : channels.front().cols(); }

  template <typename Real>
  Planes<Real> planes() const {
    Planes<Real> p(channel_count(), rows(), cols());
    for (int c = 0; c < channel_count(); ++c) {
      auto dst = p.plane(c);
      const Image& src = channels[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(src[i]);
    }
    return p;
  }
};

struct NormalizationOptions {
  double lo_pct = kDefaultLowPercentile;
  double hi_pct = kDefaultHighPercentile;
};

/// Robust-normalizes each frame and the prior, then concatenates them in
/// frame order followed by the prior. Frame order is preserved as given.
Condition make_condition(const SpeckleSequence& aligned_few, const Image& prior,
                         const NormalizationOptions& normalization = {});

struct PriorOptions {
  double contrast_eps = kDefaultContrastEps;
  double flow_eps = kDefaultFlowEps;
};

/// Flow prior computed from the same few frames, then make_condition.
Condition condition_from_frames(const SpeckleSequence& aligned_few, const PriorOptions& prior = {},
                                const NormalizationOptions& normalization = {});

}  // namespace speckle
