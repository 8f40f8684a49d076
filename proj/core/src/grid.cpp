#include "speckle/grid.hpp"

#include <cmath>

namespace speckle {

SpeckleSequence::SpeckleSequence(std::vector<Image> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) throw std::invalid_argument("speckle sequence needs at least one frame");
  const Image& first = frames_.front();
  for (std::size_t t = 0; t < frames_.size(); ++t) {
    const Image& f = frames_[t];
    if (!f.same_shape(first)) throw std::invalid_argument("speckle sequence frames differ in shape");
    for (double v : f) {
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("speckle sequence frame " + std::to_string(t) +
                                    " holds a negative or non-finite intensity");
      }
    }
  }
}

SpeckleSequence SpeckleSequence::head(int count) const {
  if (count < 1 || count > n_frames()) throw std::out_of_range("head: frame count out of range");
  return SpeckleSequence(std::vector<Image>(frames_.begin(), frames_.begin() + count));
}

}  // namespace speckle
