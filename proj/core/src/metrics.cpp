#include "speckle/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "speckle/contrast.hpp"

namespace speckle {

std::string Psnr::to_string() const {
  if (identical) return "inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), db);
  return std::string(buf, res.ptr);
}

double mean_squared_error(const Image& a, const Image& b) {
  require_same_shape(a, b, "mean_squared_error");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total / static_cast<double>(a.size());
}

double mean_absolute_error(const Image& a, const Image& b) {
  require_same_shape(a, b, "mean_absolute_error");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
  return total / static_cast<double>(a.size());
}

Psnr psnr(const Image& pred, const Image& ref, double dynamic_range) {
  if (!(dynamic_range > 0.0)) throw std::invalid_argument("psnr: dynamic range must be positive");
  const double mse = mean_squared_error(pred, ref);
  if (mse == 0.0) return Psnr::identical_images();
  return {false, 10.0 * std::log10(dynamic_range * dynamic_range / mse)};
}

std::vector<double> gaussian_window(int size, double sigma) {
  if (size < 1) throw std::invalid_argument("gaussian_window: size must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_window: sigma must be positive");
  std::vector<double> taps(static_cast<std::size_t>(size));
  const double center = 0.5 * (size - 1);
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[static_cast<std::size_t>(i)];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

namespace {

// "Valid" separable filtering: output (rows - n + 1) x (cols - n + 1).
Image filter_valid(const Image& in, const std::vector<double>& taps) {
  const int n = static_cast<int>(taps.size());
  const int out_rows = in.rows() - n + 1;
  const int out_cols = in.cols() - n + 1;
  Image horizontal(in.rows(), out_cols);
  for (int r = 0; r < in.rows(); ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[static_cast<std::size_t>(k)] * in(r, c + k);
      horizontal(r, c) = acc;
    }
  }
  Image out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += taps[static_cast<std::size_t>(k)] * horizontal(r + k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

Image product(const Image& a, const Image& b) {
  Image out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

double ssim(const Image& pred, const Image& ref, const SsimConfig& cfg) {
  require_same_shape(pred, ref, "ssim");
  if (!(cfg.dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");
  if (pred.rows() < cfg.window || pred.cols() < cfg.window) {
    throw std::invalid_argument("ssim: images are smaller than the " + std::to_string(cfg.window) + "-pixel window");
  }
  const auto taps = gaussian_window(cfg.window, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);

  const Image mu_x = filter_valid(pred, taps);
  const Image mu_y = filter_valid(ref, taps);
  const Image xx = filter_valid(product(pred, pred), taps);
  const Image yy = filter_valid(product(ref, ref), taps);
  const Image xy = filter_valid(product(pred, ref), taps);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double vx = xx[i] - mx * mx;
    const double vy = yy[i] - my * my;
    const double cov = xy[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

MetricsRow evaluate_pair(const Image& pred, const Image& ref, std::string method, std::string sequence_id) {
  require_same_shape(pred, ref, "evaluate_pair");
  const double lo = percentile(ref.values(), kDefaultLowPercentile);
  const double hi = percentile(ref.values(), kDefaultHighPercentile);
  if (!(hi > lo)) throw std::invalid_argument("evaluate_pair: reference has no dynamic range");
  SsimConfig cfg;
  cfg.dynamic_range = hi - lo;
  MetricsRow row;
  row.method = std::move(method);
  row.sequence_id = std::move(sequence_id);
  row.ssim = ssim(pred, ref, cfg);
  row.psnr = psnr(pred, ref, cfg.dynamic_range);
  row.mae = mean_absolute_error(pred, ref);
  return row;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

std::vector<MetricsAggregate> aggregate(const std::vector<MetricsRow>& rows) {
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  std::vector<MetricsAggregate> out;
  for (const auto& m : methods) {
    std::vector<double> s, p, a;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      s.push_back(r.ssim);
      if (!r.psnr.identical) p.push_back(r.psnr.db);
      a.push_back(r.mae);
    }
    MetricsAggregate agg;
    agg.method = m;
    agg.count = static_cast<int>(s.size());
    const auto ss = mean_std(s);
    const auto ps = mean_std(p);
    const auto as = mean_std(a);
    agg.ssim_mean = ss.mean;
    agg.ssim_std = ss.std;
    agg.psnr_mean = ps.mean;
    agg.psnr_std = ps.std;
    agg.mae_mean = as.mean;
    agg.mae_std = as.std;
    out.push_back(agg);
  }
  return out;
}

}  // namespace speckle
