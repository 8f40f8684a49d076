#include "speckle/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

#include "fft.hpp"
#include "speckle/parallel.hpp"

namespace speckle {

ShiftMode parse_shift_mode(std::string_view name) {
  if (name == "circular") return ShiftMode::circular;
  if (name == "zero_fill") return ShiftMode::zero_fill;
  throw std::invalid_argument("unknown shift mode '" + std::string(name) + "'");
}

std::string_view to_string(ShiftMode mode) {
  return mode == ShiftMode::circular ? "circular" : "zero_fill";
}

ReferenceFrame parse_reference_frame(std::string_view name) {
  if (name == "first") return ReferenceFrame::first;
  if (name == "median") return ReferenceFrame::median;
  throw std::invalid_argument("unknown reference frame '" + std::string(name) + "'");
}

Spectrum cross_power_spectrum(const Image& frame, const Image& ref, double eps) {
  require_same_shape(frame, ref, "cross_power_spectrum");
  if (!(eps > 0.0)) throw std::invalid_argument("cross_power_spectrum: eps must be positive");

  Spectrum numerator = detail::fft2(frame);
  const Spectrum ref_spectrum = detail::fft2(ref);
  double peak = 0.0;
  for (std::size_t i = 0; i < numerator.size(); ++i) {
    numerator[i] *= std::conj(ref_spectrum[i]);
    peak = std::max(peak, std::abs(numerator[i]));
  }
  const double guard = peak > 0.0 ? eps * peak : eps;
  for (auto& v : numerator) v /= std::abs(v) + guard;
  return numerator;
}

namespace {

int decode(int index, int extent) { return index > extent / 2 ? index - extent : index; }

bool prefer(Displacement a, Displacement b) {
  const int la = std::abs(a.dy) + std::abs(a.dx);
  const int lb = std::abs(b.dy) + std::abs(b.dx);
  if (la != lb) return la < lb;
  if (a.dy != b.dy) return a.dy < b.dy;
  return a.dx < b.dx;
}

}  // namespace

ShiftEstimate estimate_shift(const Image& frame, const Image& ref, double eps, double confidence_threshold) {
  require_same_shape(frame, ref, "estimate_shift");
  const int h = frame.rows();
  const int w = frame.cols();
  if (h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("estimate_shift: frame dimensions must be even and at least 2");
  }

  const Spectrum surface = detail::ifft2(cross_power_spectrum(frame, ref, eps));
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& v : surface) peak = std::max(peak, v.real());

  // Values within round-off of the maximum count as ties.
  const double tie_band = 1e-9 * std::max(1.0, std::abs(peak));
  Displacement best{};
  bool found = false;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (surface(r, c).real() < peak - tie_band) continue;
      const Displacement d{decode(r, h), decode(c, w)};
      if (!found || prefer(d, best)) {
        best = d;
        found = true;
      }
    }
  }

  ShiftEstimate estimate{best, peak, false};
  if (!(peak >= confidence_threshold)) {
    estimate.shift = {};
    estimate.low_confidence = true;
  }
  return estimate;
}

ShiftedFrame apply_shift(const Image& frame, Displacement d, ShiftMode mode) {
  const int h = frame.rows();
  const int w = frame.cols();
  ShiftedFrame out{Image(h, w), Mask(h, w, 1)};
  for (int r = 0; r < h; ++r) {
    const int sr = r + d.dy;
    for (int c = 0; c < w; ++c) {
      const int sc = c + d.dx;
      if (mode == ShiftMode::circular) {
        out.image(r, c) = frame(((sr % h) + h) % h, ((sc % w) + w) % w);
      } else if (sr >= 0 && sr < h && sc >= 0 && sc < w) {
        out.image(r, c) = frame(sr, sc);
      } else {
        out.image(r, c) = 0.0;
        out.valid(r, c) = 0;
      }
    }
  }
  return out;
}

Image median_frame(const SpeckleSequence& seq) {
  Image out(seq.height(), seq.width());
  std::vector<double> column(static_cast<std::size_t>(seq.n_frames()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int t = 0; t < seq.n_frames(); ++t) column[static_cast<std::size_t>(t)] = seq[t][i];
    const auto mid = column.begin() + static_cast<std::ptrdiff_t>(column.size() / 2);
    std::nth_element(column.begin(), mid, column.end());
    double m = *mid;
    if (column.size() % 2 == 0) m = 0.5 * (m + *std::max_element(column.begin(), mid));
    out[i] = m;
  }
  return out;
}

StabilizeResult stabilize(const SpeckleSequence& seq, const StabilizeOptions& options) {
  const int n = seq.n_frames();
  if (n < 2) throw std::invalid_argument("stabilize: need at least two frames");

  const bool median = options.reference == ReferenceFrame::median;
  const Image reference = median ? median_frame(seq) : seq[0];

  std::vector<ShiftEstimate> estimates(static_cast<std::size_t>(n));
  std::vector<ShiftedFrame> shifted(static_cast<std::size_t>(n));
  estimates[0] = {{}, 1.0, false};
  const std::size_t first = median ? 0 : 1;
  if (!median) shifted[0] = apply_shift(seq[0], {}, options.mode);

  parallel_for(static_cast<std::size_t>(n) - first, options.threads, [&](std::size_t i) {
    const std::size_t t = i + first;
    const int ti = static_cast<int>(t);
    estimates[t] = estimate_shift(seq[ti], reference, options.eps, options.confidence_threshold);
    shifted[t] = apply_shift(seq[ti], estimates[t].shift, options.mode);
  });

  StabilizeResult result;
  result.valid = Mask(seq.height(), seq.width(), 1);
  std::vector<Image> frames;
  frames.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const auto& e = estimates[static_cast<std::size_t>(t)];
    result.shifts.push_back(e.shift);
    result.confidence.push_back(e.peak);
    result.low_confidence.push_back(e.low_confidence);
    auto& s = shifted[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < s.valid.size(); ++i) result.valid[i] &= s.valid[i];
    frames.push_back(std::move(s.image));
  }
  result.aligned = SpeckleSequence(std::move(frames));
  return result;
}

}  // namespace speckle
