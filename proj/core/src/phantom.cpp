#include "speckle/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "speckle/contrast.hpp"
#include "speckle/parallel.hpp"
#include "speckle/rng.hpp"

namespace speckle {
namespace {

constexpr std::uint64_t kTextureStream = 0x7E47;

void check_contrast(double k, const char* what) {
  if (!(k >= 0.0 && k <= kMaxPhantomContrast)) {
    throw std::invalid_argument(std::string(what) + " must lie in [0, 0.35], got " + std::to_string(k));
  }
}

double distance_to_segment(Point p, Point a, Point b) {
  const double vy = b.y - a.y;
  const double vx = b.x - a.x;
  const double len2 = vy * vy + vx * vx;
  double s = ((p.y - a.y) * vy + (p.x - a.x) * vx) / len2;
  s = std::clamp(s, 0.0, 1.0);
  return std::hypot(p.y - (a.y + s * vy), p.x - (a.x + s * vx));
}

}  // namespace

void PhantomSpec::validate() const {
  if (height < 2 || width < 2) throw std::invalid_argument("phantom must be at least 2x2");
  if (n_frames < 1) throw std::invalid_argument("phantom needs at least one frame");
  check_contrast(background_k, "background_k");
  if (!(base_intensity > 0.0) || !std::isfinite(base_intensity)) {
    throw std::invalid_argument("base_intensity must be positive");
  }
  if (!(texture >= 0.0 && texture < 1.0)) throw std::invalid_argument("texture must lie in [0, 1)");
  if (!(additive_noise >= 0.0)) throw std::invalid_argument("additive_noise must be nonnegative");
  for (const auto& v : vessels) {
    check_contrast(v.k_true, "vessel k_true");
    if (!(v.radius >= 0.0)) throw std::invalid_argument("vessel radius must be nonnegative");
    if (!(v.mu_scale > 0.0)) throw std::invalid_argument("vessel mu_scale must be positive");
    if (v.a.y == v.b.y && v.a.x == v.b.x) throw std::invalid_argument("vessel segment has zero length");
  }
  if (static_cast<int>(motion.size()) != n_frames) {
    throw std::invalid_argument("motion list length must equal n_frames");
  }
  if (motion.front() != Displacement{}) throw std::invalid_argument("motion[0] must be (0, 0)");
  for (const auto& d : motion) {
    if (2 * std::abs(d.dy) >= height || 2 * std::abs(d.dx) >= width) {
      throw std::invalid_argument("motion exceeds half the frame size");
    }
  }
}

PhantomMaps build_phantom(const PhantomSpec& spec) {
  spec.validate();
  PhantomMaps maps{Image(spec.height, spec.width, spec.base_intensity),
                   Image(spec.height, spec.width, spec.background_k)};
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const Point p{static_cast<double>(r), static_cast<double>(c)};
      const VesselSegment* winner = nullptr;
      for (const auto& v : spec.vessels) {
        if (distance_to_segment(p, v.a, v.b) > v.radius) continue;
        if (winner == nullptr || v.k_true < winner->k_true) winner = &v;
      }
      if (winner != nullptr) {
        maps.k_true(r, c) = winner->k_true;
        maps.mu(r, c) = spec.base_intensity * winner->mu_scale;
      }
    }
  }
  if (spec.texture > 0.0) {
    Rng rng(mix_seed(spec.seed, kTextureStream));
    for (auto& m : maps.mu) m *= std::max(0.05, 1.0 + spec.texture * rng.normal());
  }
  return maps;
}

PhantomRealization synthesize_sequence(const PhantomSpec& spec, int threads) {
  const PhantomMaps maps = build_phantom(spec);
  const auto n = static_cast<std::size_t>(spec.n_frames);
  std::vector<Image> still(n);
  std::vector<Image> moved(n);
  const double noise_sigma = spec.additive_noise * spec.base_intensity;

  parallel_for(n, threads, [&](std::size_t t) {
    Rng rng(mix_seed(spec.seed, t));
    Image frame(spec.height, spec.width);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      frame[i] = maps.mu[i] * std::max(0.0, 1.0 + maps.k_true[i] * rng.normal());
    }
    if (noise_sigma > 0.0) {
      for (auto& v : frame) v = std::max(0.0, v + noise_sigma * rng.normal());
    }
    moved[t] = apply_shift(frame, spec.motion[t], spec.shift_mode).image;
    still[t] = std::move(frame);
  });

  PhantomRealization out;
  out.truth.k_true_map = maps.k_true;
  out.truth.mu_map = maps.mu;
  out.truth.shifts = spec.motion;
  if (spec.n_frames >= 2) {
    out.truth.hq_flow = contrast_and_flow(SpeckleSequence(std::move(still))).flow;
  } else {
    out.truth.hq_flow = flow_prior(Image(spec.height, spec.width, 0.0));
  }
  out.sequence = SpeckleSequence(std::move(moved));
  return out;
}

std::vector<Displacement> random_walk_motion(int n_frames, int max_shift, std::uint64_t seed) {
  if (n_frames < 1) throw std::invalid_argument("random_walk_motion: need at least one frame");
  if (max_shift < 0) throw std::invalid_argument("random_walk_motion: max_shift must be nonnegative");
  auto reflect = [max_shift](int v) {
    if (v > max_shift) return 2 * max_shift - v;
    if (v < -max_shift) return -2 * max_shift - v;
    return v;
  };
  Rng rng(seed);
  std::vector<Displacement> path(static_cast<std::size_t>(n_frames));
  for (std::size_t t = 1; t < path.size(); ++t) {
    const int sy = static_cast<int>(rng.integer(-1, 1));
    const int sx = static_cast<int>(rng.integer(-1, 1));
    path[t] = max_shift == 0 ? Displacement{} : Displacement{reflect(path[t - 1].dy + sy), reflect(path[t - 1].dx + sx)};
  }
  return path;
}

std::vector<VesselSegment> random_vessels(int height, int width, const VesselRandomization& params,
                                          std::uint64_t seed) {
  if (params.min_count < 0 || params.max_count < params.min_count) {
    throw std::invalid_argument("random_vessels: invalid vessel count range");
  }
  Rng rng(seed);
  const int count = static_cast<int>(rng.integer(params.min_count, params.max_count));
  const double reach = std::hypot(height, width);
  std::vector<VesselSegment> vessels;
  for (int i = 0; i < count; ++i) {
    const Point center{rng.uniform(0.2, 0.8) * (height - 1), rng.uniform(0.2, 0.8) * (width - 1)};
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double dy = std::sin(angle) * reach;
    const double dx = std::cos(angle) * reach;
    VesselSegment v;
    v.a = {center.y - dy, center.x - dx};
    v.b = {center.y + dy, center.x + dx};
    v.radius = rng.uniform(params.min_radius, params.max_radius);
    v.k_true = i == 0 ? params.min_k : rng.uniform(params.min_k, params.max_k);
    v.mu_scale = params.mu_scale;
    vessels.push_back(v);
  }
  return vessels;
}

}  // namespace speckle
