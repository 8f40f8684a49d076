#include "speckle/condition.hpp"

#include <stdexcept>

namespace speckle {

Condition make_condition(const SpeckleSequence& aligned_few, const Image& prior,
                         const NormalizationOptions& normalization) {
  if (aligned_few.n_frames() < 1) throw std::invalid_argument("make_condition: need at least one frame");
  require_same_shape(aligned_few[0], prior, "make_condition");
  Condition cond;
  cond.n_few = aligned_few.n_frames();
  for (const Image& frame : aligned_few.frames()) {
    auto n = robust_normalize(frame, normalization.lo_pct, normalization.hi_pct);
    cond.channels.push_back(std::move(n.values));
    cond.records.push_back(n.record);
  }
  auto p = robust_normalize(prior, normalization.lo_pct, normalization.hi_pct);
  cond.channels.push_back(std::move(p.values));
  cond.records.push_back(p.record);
  return cond;
}

Condition condition_from_frames(const SpeckleSequence& aligned_few, const PriorOptions& prior,
                                const NormalizationOptions& normalization) {
  const auto maps = contrast_and_flow(aligned_few, prior.contrast_eps, prior.flow_eps);
  return make_condition(aligned_few, maps.flow, normalization);
}

}  // namespace speckle
