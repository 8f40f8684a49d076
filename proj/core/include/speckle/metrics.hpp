#pragma once

#include <string>
#include <vector>

#include "speckle/grid.hpp"

namespace speckle {

/// PSNR in dB, or "identical" when the MSE is exactly zero.
struct Psnr {
  bool identical = false;
  double db = 0.0;

  static Psnr identical_images() { return {true, 0.0}; }
  /// CSV literal: "inf" for identical images.
  std::string to_string() const;
};

/// 10 log10(L^2 / MSE).
Psnr psnr(const Image& pred, const Image& ref, double dynamic_range);

double mean_squared_error(const Image& a, const Image& b);
double mean_absolute_error(const Image& a, const Image& b);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Normalized (sum 1) separable Gaussian taps of length cfg.window.
std::vector<double> gaussian_window(int size, double sigma);

/// Mean of the local SSIM map over all fully contained windows.
double ssim(const Image& pred, const Image& ref, const SsimConfig& cfg);

struct MetricsRow {
  std::string method;
  std::string sequence_id;
  double ssim = 0.0;
  Psnr psnr;
  double mae = 0.0;
};

/// Metrics with L set to the reference's robust (0.5..99.5 percentile) range.
MetricsRow evaluate_pair(const Image& pred, const Image& ref, std::string method = "", std::string sequence_id = "");

struct MetricsAggregate {
  std::string method;
  int count = 0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  double mae_mean = 0.0;
  double mae_std = 0.0;
};

/// Population mean and std of every column, per method in first-seen order.
/// Identical-image PSNR values are skipped in the PSNR columns.
std::vector<MetricsAggregate> aggregate(const std::vector<MetricsRow>& rows);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace speckle
