#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "speckle/metrics.hpp"

using namespace speckle;

TEST(Psnr, SpotValues) {
  const Image ref(4, 4, 0.0);
  EXPECT_NEAR(psnr(Image(4, 4, 1.0), ref, 1.0).db, 0.0, 1e-9);
  EXPECT_NEAR(psnr(Image(4, 4, 0.1), ref, 1.0).db, 20.0, 1e-9);
  const auto same = psnr(ref, ref, 1.0);
  EXPECT_TRUE(same.identical);
  EXPECT_EQ(same.to_string(), "inf");
  EXPECT_THROW(psnr(Image(4, 4), Image(4, 5), 1.0), std::invalid_argument);
  EXPECT_THROW(psnr(ref, ref, 0.0), std::invalid_argument);
}

TEST(Psnr, StrictlyDecreasingInMse) {
  const Image ref(3, 3, 0.0);
  double last = 1e300;
  for (int i = 1; i < 50; ++i) {
    const double db = psnr(Image(3, 3, 0.01 * i), ref, 2.0).db;
    EXPECT_LT(db, last);
    last = db;
  }
}

TEST(Ssim, SelfSimilarityIsOne) {
  const Image x = oracle::random_image(32, 32, 1);
  EXPECT_NEAR(ssim(x, x, {}), 1.0, 1e-9);
}

TEST(Ssim, Symmetric) {
  const Image a = oracle::random_image(24, 20, 2);
  const Image b = oracle::random_image(24, 20, 3);
  EXPECT_NEAR(ssim(a, b, {}), ssim(b, a, {}), 1e-14);
}

TEST(Ssim, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image a = oracle::random_image(32, 32, 10 + seed);
    Image b = oracle::random_image(32, 32, 20 + seed);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.6 * a[i] + 0.4 * b[i];
    SsimConfig cfg;
    cfg.dynamic_range = 1.0;
    EXPECT_NEAR(ssim(a, b, cfg), oracle::ssim_bruteforce(a, b, 11, 1.5, 0.01, 0.03, 1.0), 1e-6);
  }
}

TEST(Ssim, BoundedAndRejectsSmallImages) {
  const Image a = oracle::random_image(16, 16, 4);
  Image neg = a;
  for (auto& v : neg) v = 1.0 - v;
  const double s = ssim(a, neg, {});
  EXPECT_GE(s, -1.0);
  EXPECT_LT(s, 0.0);
  EXPECT_THROW(ssim(Image(10, 10), Image(10, 10), {}), std::invalid_argument);
}

TEST(GaussianWindow, NormalizedAndSymmetric) {
  const auto g = gaussian_window(11, 1.5);
  double sum = 0;
  for (double v : g) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-15);
  for (int i = 0; i < 11; ++i) EXPECT_DOUBLE_EQ(g[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(10 - i)]);
}

TEST(EvaluatePair, IdentityAndConstantOffset) {
  const Image ref = oracle::random_image(16, 16, 5, 0.0, 10.0);
  const auto same = evaluate_pair(ref, ref, "m", "0");
  EXPECT_NEAR(same.ssim, 1.0, 1e-12);
  EXPECT_EQ(same.mae, 0.0);
  EXPECT_TRUE(same.psnr.identical);
  std::vector<double> v(ref.begin(), ref.end());
  const double range = oracle::percentile_sorted(v, 99.5) - oracle::percentile_sorted(v, 0.5);
  Image pred = ref;
  for (auto& x : pred) x += 0.1 * range;
  const auto row = evaluate_pair(pred, ref);
  EXPECT_NEAR(row.mae, 0.1 * range, 1e-12);
  EXPECT_NEAR(row.psnr.db, 20.0, 1e-9);
}

TEST(Aggregate, PopulationMeanStd) {
  MetricsRow a{"m", "0", 1.0, {false, 1.0}, 1.0};
  MetricsRow b{"m", "1", 3.0, {false, 3.0}, 3.0};
  MetricsRow c{"n", "0", 0.5, Psnr::identical_images(), 0.0};
  const auto agg = aggregate({a, c, b});
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].method, "m");
  EXPECT_EQ(agg[0].count, 2);
  EXPECT_DOUBLE_EQ(agg[0].ssim_mean, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].ssim_std, 1.0);
  EXPECT_DOUBLE_EQ(agg[0].psnr_mean, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].mae_std, 1.0);
  EXPECT_EQ(agg[1].method, "n");
  const auto ms = mean_std({1.0, 3.0});
  EXPECT_DOUBLE_EQ(ms.mean, 2.0);
  EXPECT_DOUBLE_EQ(ms.std, 1.0);
}
