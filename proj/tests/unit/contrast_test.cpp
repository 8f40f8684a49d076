#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "speckle/contrast.hpp"
#include "speckle/phantom.hpp"

using namespace speckle;

namespace {

SpeckleSequence random_stack(int n, int h, int w, std::uint64_t seed) {
  std::vector<Image> frames;
  for (int t = 0; t < n; ++t) frames.push_back(oracle::random_image(h, w, seed * 1000 + t, 50.0, 150.0));
  return SpeckleSequence(frames);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(TemporalStats, ConstantSequence) {
  const SpeckleSequence seq({Image(3, 4, 7.0), Image(3, 4, 7.0), Image(3, 4, 7.0)});
  const auto s = temporal_stats(seq);
  for (double v : s.mean) EXPECT_EQ(v, 7.0);
  for (double v : s.stddev) EXPECT_EQ(v, 0.0);
}

TEST(TemporalStats, PopulationNormalization) {
  const SpeckleSequence seq({Image(1, 1, 1.0), Image(1, 1, 3.0)});
  const auto s = temporal_stats(seq);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.stddev[0], 1.0);
}

TEST(TemporalStats, MatchesNaiveOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto seq = random_stack(50, 32, 32, seed);
    const auto s = temporal_stats(seq);
    const auto k = contrast_map(s.mean, s.stddev);
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        std::vector<double> series;
        for (int t = 0; t < 50; ++t) series.push_back(seq[t](r, c));
        const auto o = oracle::pixel_stats(series);
        EXPECT_LE(rel_err(s.mean(r, c), o.mean), 1e-12);
        EXPECT_LE(rel_err(s.stddev(r, c), o.stddev), 1e-10);
        EXPECT_LE(rel_err(k(r, c), o.stddev / (o.mean + 1e-6)), 1e-10);
      }
    }
  }
}

TEST(TemporalStats, RejectsSingleFrame) {
  EXPECT_THROW(temporal_stats(SpeckleSequence({Image(2, 2, 1.0)})), std::invalid_argument);
}

TEST(ContrastMap, ZeroSigmaGivesZero) {
  const Image k = contrast_map(Image(2, 2, 5.0), Image(2, 2, 0.0));
  for (double v : k) EXPECT_EQ(v, 0.0);
}

TEST(ContrastMap, DirectEvaluation) {
  EXPECT_NEAR(contrast_map(Image(1, 1, 2.0), Image(1, 1, 1.0), 1e-15)[0], 0.5, 1e-12);
}

TEST(ContrastMap, ScaleInvariantWithoutEps) {
  const auto seq = random_stack(10, 8, 8, 9);
  std::vector<Image> scaled;
  for (const auto& f : seq.frames()) {
    Image g = f;
    for (auto& v : g) v *= 10.0;
    scaled.push_back(g);
  }
  const auto a = contrast_and_flow(seq, 0.0).contrast;
  const auto b = contrast_and_flow(SpeckleSequence(scaled), 0.0).contrast;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * a[i]);
}

TEST(FlowPrior, DirectEvaluationAndCeiling) {
  EXPECT_NEAR(flow_prior(Image(1, 1, 0.5), 1e-15)[0], 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(flow_prior(Image(2, 2, 0.0), 1e-6)[3], 1e6);
  EXPECT_THROW(flow_prior(Image(1, 1, 0.5), 0.0), std::invalid_argument);
}

TEST(FlowPrior, StrictlyDecreasing) {
  Image k(1, 200);
  for (int i = 0; i < 200; ++i) k[static_cast<std::size_t>(i)] = 0.005 * i;
  const Image f = flow_prior(k);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_LT(f[i], f[i - 1]);
}

TEST(StaticPhantom, RecoversTrueContrast) {
  PhantomSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.n_frames = 200;
  spec.background_k = 0.3;
  spec.motion.assign(200, {});
  spec.seed = 21;
  const auto seq = synthesize_sequence(spec).sequence;
  const auto k = contrast_and_flow(seq).contrast;
  int within = 0;
  std::vector<double> errs;
  for (double v : k) {
    errs.push_back(std::abs(v - 0.3) / 0.3);
    within += errs.back() < 0.05 ? 1 : 0;
  }
  EXPECT_LT(oracle::percentile_sorted(errs, 50.0), 0.05);
  // Relative std of K at N = 200 is sqrt(1/(2N) + k^2/N) ~ 0.054, so about
  // 64% of pixels fall inside a 5% band.
  const double fraction = double(within) / double(k.size());
  EXPECT_GT(fraction, 0.55);
  EXPECT_LT(fraction, 0.75);
}

TEST(Percentile, LinearInterpolation) {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(100 - i);
  EXPECT_DOUBLE_EQ(percentile(v, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(percentile(v, 99.5), 99.5);
  EXPECT_DOUBLE_EQ(percentile(v, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(percentile(v, 100.0), 100.0);
  const auto r = oracle::random_image(7, 9, 3);
  for (double p : {1.0, 13.7, 50.0, 88.8}) {
    EXPECT_NEAR(percentile(r.values(), p), oracle::percentile_sorted({r.begin(), r.end()}, p), 1e-15);
  }
}

TEST(RobustNormalize, EndpointsAndMidpoint) {
  Image m(1, 101);
  for (int i = 0; i <= 100; ++i) m[static_cast<std::size_t>(i)] = i;
  const auto n = robust_normalize(m);
  EXPECT_DOUBLE_EQ(n.record.lo, 0.5);
  EXPECT_DOUBLE_EQ(n.record.hi, 99.5);
  const auto& rec = n.record;
  Image probe(1, 3);
  probe[0] = rec.lo;
  probe[1] = rec.hi;
  probe[2] = 0.5 * (rec.lo + rec.hi);
  const Image out = apply_normalization(probe, rec);
  EXPECT_EQ(out[0], -1.0);
  EXPECT_EQ(out[1], 1.0);
  EXPECT_NEAR(out[2], 0.0, 1e-15);
  int strictly_inside = 0;
  for (double v : n.values) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
    strictly_inside += (v > -1.0 && v < 1.0) ? 1 : 0;
  }
  EXPECT_GE(strictly_inside, 99);
}

TEST(RobustNormalize, RoundTripInsideClipRange) {
  const Image m = oracle::random_image(16, 16, 5, -3.0, 40.0);
  const auto n = robust_normalize(m);
  const Image back = denormalize(n.values, n.record);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] < n.record.lo) {
      EXPECT_EQ(back[i], n.record.lo);
    } else if (m[i] > n.record.hi) {
      EXPECT_EQ(back[i], n.record.hi);
    } else {
      EXPECT_NEAR(back[i], m[i], 1e-6);
    }
  }
  Image ends(1, 2);
  ends[0] = -1.0;
  ends[1] = 1.0;
  const Image e = denormalize(ends, n.record);
  EXPECT_EQ(e[0], n.record.lo);
  EXPECT_EQ(e[1], n.record.hi);
}

TEST(RobustNormalize, MonotoneNondecreasing) {
  Image m = oracle::random_image(1, 500, 6, 0.0, 10.0);
  std::sort(m.begin(), m.end());
  const auto n = robust_normalize(m);
  for (std::size_t i = 1; i < m.size(); ++i) EXPECT_LE(n.values[i - 1], n.values[i]);
}

TEST(RobustNormalize, RejectsConstantMap) {
  EXPECT_THROW(robust_normalize(Image(4, 4, 2.0)), std::invalid_argument);
}
