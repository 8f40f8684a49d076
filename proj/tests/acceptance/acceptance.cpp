// Acceptance checks. Usage: speckle_acceptance [criterion...]; no arguments runs all.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "speckle/config.hpp"
#include "speckle/contrast.hpp"
#include "speckle/diffusion.hpp"
#include "speckle/metrics.hpp"
#include "speckle/model_io.hpp"
#include "speckle/phantom.hpp"
#include "speckle/pipeline.hpp"
#include "speckle/reconstructor.hpp"
#include "speckle/registration.hpp"
#include "speckle/rng.hpp"
#include "speckle/tensor_io.hpp"

using namespace speckle;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("speckle_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

Outcome registration_exactness() {
  Rng rng(101);
  int exact = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    PhantomSpec spec;
    spec.height = 128;
    spec.width = 128;
    spec.n_frames = 2;
    spec.texture = 0.3;
    spec.vessels = random_vessels(128, 128, {}, mix_seed(101, static_cast<std::uint64_t>(trial)));
    spec.additive_noise = rng.uniform(0.0, 0.1);
    const Displacement d{static_cast<int>(rng.integer(-16, 16)), static_cast<int>(rng.integer(-16, 16))};
    spec.motion = {{0, 0}, d};
    spec.seed = 5000 + static_cast<std::uint64_t>(trial);
    const auto seq = synthesize_sequence(spec).sequence;
    const auto est = estimate_shift(seq[1], seq[0]);
    exact += (est.shift == -d && !est.low_confidence) ? 1 : 0;
  }

  PhantomSpec spec;
  spec.height = 128;
  spec.width = 128;
  spec.n_frames = 64;
  spec.texture = 0.3;
  spec.additive_noise = 0.1;
  spec.vessels = random_vessels(128, 128, {}, 77);
  spec.motion = random_walk_motion(64, 16, 78);
  spec.seed = 79;
  const auto real = synthesize_sequence(spec);
  const auto start = Clock::now();
  const auto result = stabilize(real.sequence);
  const double elapsed = seconds_since(start);
  int sequence_exact = 0;
  for (std::size_t t = 0; t < result.shifts.size(); ++t) sequence_exact += result.shifts[t] == -spec.motion[t] ? 1 : 0;

  return {exact == trials && elapsed < 2.0 && sequence_exact == 64,
          std::to_string(exact) + "/" + std::to_string(trials) + " shifts exact; stabilize 64x128x128 in " +
              fmt(elapsed, 3) + " s with " + std::to_string(sequence_exact) + "/64 frames exact"};
}

Outcome contrast_oracle() {
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    std::vector<Image> frames;
    for (int t = 0; t < 50; ++t) frames.push_back(oracle::random_image(32, 32, 900 + 50 * s + t, 20.0, 180.0));
    const SpeckleSequence seq(frames);
    const auto stats = temporal_stats(seq);
    const Image k = contrast_map(stats.mean, stats.stddev);
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        std::vector<double> series;
        for (int t = 0; t < 50; ++t) series.push_back(seq[t](r, c));
        const auto o = oracle::pixel_stats(series);
        const double k_ref = o.stddev / (o.mean + kDefaultContrastEps);
        worst = std::max({worst, std::abs(stats.mean(r, c) - o.mean) / o.mean,
                          std::abs(stats.stddev(r, c) - o.stddev) / o.stddev, std::abs(k(r, c) - k_ref) / k_ref});
      }
    }
  }

  PhantomSpec spec;
  spec.height = 64;
  spec.width = 64;
  spec.n_frames = 200;
  spec.background_k = 0.3;
  spec.motion.assign(200, {});
  spec.seed = 404;
  const Image k = contrast_and_flow(synthesize_sequence(spec).sequence).contrast;
  std::vector<double> errs;
  for (double v : k) errs.push_back(std::abs(v - 0.3) / 0.3);
  const double median = oracle::percentile_sorted(errs, 50.0);
  return {worst <= 1e-6 && median < 0.05,
          "max relative deviation from naive oracle " + fmt(worst, 3) + "; static K median relative error " +
              fmt(100 * median, 3) + "%"};
}

Outcome undersampling_law() {
  std::vector<double> k5;
  std::vector<double> k200;
  for (int rep = 0; rep < 500; ++rep) {
    PhantomSpec spec;
    spec.height = 2;
    spec.width = 2;
    spec.n_frames = 200;
    spec.background_k = 0.3;
    spec.motion.assign(200, {});
    spec.seed = mix_seed(31337, static_cast<std::uint64_t>(rep));
    const auto seq = synthesize_sequence(spec).sequence;
    k5.push_back(contrast_and_flow(seq.head(5)).contrast(0, 0));
    k200.push_back(contrast_and_flow(seq).contrast(0, 0));
  }
  const double ratio = mean_std(k5).std / mean_std(k200).std;
  const double target = std::sqrt(40.0);
  return {ratio >= 0.7 * target && ratio <= 1.3 * target,
          "std ratio " + fmt(ratio) + " vs sqrt(40) = " + fmt(target) + " (band " + fmt(0.7 * target) + ".." +
              fmt(1.3 * target) + ")"};
}

Outcome registration_benefit() {
  double err_raw = 0.0;
  double err_aligned = 0.0;
  for (int p = 0; p < 8; ++p) {
    PhantomSpec spec;
    spec.height = 64;
    spec.width = 64;
    spec.n_frames = 200;
    spec.texture = 0.3;
    spec.vessels = random_vessels(64, 64, {}, mix_seed(88, static_cast<std::uint64_t>(p)));
    spec.seed = mix_seed(89, static_cast<std::uint64_t>(p));
    Rng rng(mix_seed(90, static_cast<std::uint64_t>(p)));
    spec.motion.push_back({0, 0});
    while (spec.motion.size() < 200) {
      const Displacement d{static_cast<int>(rng.integer(-6, 6)), static_cast<int>(rng.integer(-6, 6))};
      if (std::max(std::abs(d.dy), std::abs(d.dx)) >= 3) spec.motion.push_back(d);
    }
    const auto real = synthesize_sequence(spec);
    const Image raw = contrast_and_flow(real.sequence).contrast;
    const Image aligned = contrast_and_flow(stabilize(real.sequence).aligned).contrast;
    err_raw += mean_absolute_error(raw, real.truth.k_true_map) / 8.0;
    err_aligned += mean_absolute_error(aligned, real.truth.k_true_map) / 8.0;
  }
  const double reduction = 1.0 - err_aligned / err_raw;
  return {reduction >= 0.5, "mean |K - k_true| " + fmt(err_raw) + " unaligned vs " + fmt(err_aligned) +
                                " stabilized (" + fmt(100 * reduction, 3) + "% lower)"};
}

template <typename Real>
double ddim_oracle_error(const NoiseSchedule& sched, const SamplerConfig& sampler, const Grid<Real>& x0,
                         Grid<Real>* out) {
  auto predict = [&](const Grid<Real>& xt, int t) {
    const Real a = static_cast<Real>(std::sqrt(sched.alpha_bar(t)));
    const Real b = static_cast<Real>(std::sqrt(1.0 - sched.alpha_bar(t)));
    Grid<Real> eps(xt.rows(), xt.cols());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (xt[i] - a * x0[i]) / b;
    return eps;
  };
  const auto x = ddim_sample<Real>(predict, sched, sampler, x0.rows(), x0.cols(), 2024);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(double(x[i]) - double(x0[i])));
  if (out != nullptr) *out = x;
  return worst;
}

Outcome diffusion_algebra() {
  const auto sched = linear_schedule(1000);
  const Image x0 = oracle::random_image(16, 16, 55, -1.0, 1.0);
  const Grid<float> x0f = x0.cast<float>();
  SamplerConfig single{1, {1000}};
  const auto s10 = uniform_sampler(1000, 10);
  const auto s100 = uniform_sampler(1000, 100);
  const auto full = uniform_sampler(1000, 1000);

  Image a10, a100;
  double worst_double = ddim_oracle_error<double>(sched, single, x0, nullptr);
  worst_double = std::max(worst_double, ddim_oracle_error<double>(sched, s10, x0, &a10));
  worst_double = std::max(worst_double, ddim_oracle_error<double>(sched, s100, x0, &a100));
  worst_double = std::max(worst_double, ddim_oracle_error<double>(sched, full, x0, nullptr));
  double path_gap = 0.0;
  for (std::size_t i = 0; i < a10.size(); ++i) path_gap = std::max(path_gap, std::abs(a10[i] - a100[i]));

  const double float_single = ddim_oracle_error<float>(sched, single, x0f, nullptr);
  double float_multi = ddim_oracle_error<float>(sched, s10, x0f, nullptr);
  float_multi = std::max(float_multi, ddim_oracle_error<float>(sched, s100, x0f, nullptr));
  float_multi = std::max(float_multi, ddim_oracle_error<float>(sched, full, x0f, nullptr));
  const double worst_float = std::max(float_single, float_multi);

  return {worst_double <= 1e-10 && worst_float <= 1e-5 && path_gap <= 1e-10,
          "max |x0_hat - x0| double " + fmt(worst_double, 3) + "; float single-step T->0 " + fmt(float_single, 3) +
              ", float multi-step " + fmt(float_multi, 3) + " (float rounding scale 2^-24 * 3 / sqrt(abar_T) = " +
              fmt(std::ldexp(1.0, -24) * 3.0 / std::sqrt(sched.alpha_bar(1000)), 3) + "); S=10 vs S=100 gap " +
              fmt(path_gap, 3)};
}

Outcome gradient_correctness() {
  Architecture arch;
  arch.cond_channels = 6;
  arch.hidden = {6, 6, 6};
  arch.kernel = 3;
  arch.time_dim = 8;
  const auto params = init_denoiser<double>(arch, 606, InitMode::all_random);
  std::vector<BatchItem<double>> batch;
  for (int i = 0; i < 2; ++i) {
    BatchItem<double> item;
    item.target = oracle::random_image(16, 16, 700 + i, -1.0, 1.0);
    item.condition = Planes<double>(6, 16, 16);
    const Image c = oracle::random_image(1, 6 * 256, 710 + i, -1.0, 1.0);
    std::copy(c.begin(), c.end(), item.condition.data.begin());
    batch.push_back(std::move(item));
  }
  Rng rng(720);
  const auto draws = draw_noise<double>(batch.size(), 16, 16, 200, rng);
  const auto sched = linear_schedule(200, 5e-4, 0.1);
  const auto analytic = loss_and_grad<double>(params, batch, draws, sched);
  const double h = 1e-4;
  double worst = 0.0;
  auto probe = params;
  for (std::size_t j = 0; j < params.weights.size(); ++j) {
    probe.weights[j] = params.weights[j] + h;
    const double up = loss_and_grad<double>(probe, batch, draws, sched).loss;
    probe.weights[j] = params.weights[j] - h;
    const double down = loss_and_grad<double>(probe, batch, draws, sched).loss;
    probe.weights[j] = params.weights[j];
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic.grad[j]), 1e-8});
    worst = std::max(worst, std::abs(fd - analytic.grad[j]) / scale);
  }
  return {worst <= 1e-4, "max relative error " + fmt(worst, 3) + " over " + std::to_string(params.weights.size()) +
                             " parameters (h = 1e-4, double)"};
}

fs::path config_path(const std::string& name) { return fs::path(SPECKLE_CONFIG_DIR) / name; }

double aggregate_of(const std::vector<MetricsAggregate>& aggs, const std::string& method, bool ssim_column) {
  for (const auto& a : aggs) {
    if (a.method == method) return ssim_column ? a.ssim_mean : a.psnr_mean;
  }
  return std::nan("");
}

Outcome directional_reproduction() {
  const auto config = load_config(config_path("desk.ini"));
  const auto first_dir = scratch("desk_a");
  const auto second_dir = scratch("desk_b");
  const auto start = Clock::now();
  const auto first = cmd_pipeline(config, first_dir);
  const double elapsed = seconds_since(start);
  const auto second = cmd_pipeline(config, second_dir);
  const bool same = slurp(first_dir / "summary.csv") == slurp(second_dir / "summary.csv") &&
                    slurp(first_dir / "model.spkm") == slurp(second_dir / "model.spkm");

  const double ssim_direct = aggregate_of(first.aggregates, "direct5f", true);
  const double ssim_diffusion = aggregate_of(first.aggregates, "diffusion", true);
  const double psnr_direct = aggregate_of(first.aggregates, "direct5f", false);
  const double psnr_diffusion = aggregate_of(first.aggregates, "diffusion", false);

  // Conditioning sensitivity: swap the condition of two held-out phantoms.
  const auto model = read_model(first_dir / "model.spkm");
  const auto cases = plan_phantoms(config);
  std::vector<PreparedSequence> held_out;
  for (const auto& c : cases) {
    if (c.train) continue;
    held_out.push_back(prepare_sequence(synthesize_sequence(c.spec).sequence, config));
    if (held_out.size() == 2) break;
  }
  const Image own = reconstruct_flow(model, held_out[0].condition, 0, 1);
  const Image swapped = reconstruct_flow(model, held_out[1].condition, 0, 1);
  std::printf("INFO  conditioning sensitivity: swapping conditions changes output by MAE %s (%s of target range)\n",
              fmt(mean_absolute_error(own, swapped)).c_str(),
              fmt(mean_absolute_error(own, swapped) / (model.target_record.hi - model.target_record.lo)).c_str());

  const bool pass = first.train_count >= 64 && first.test_count >= 8 && config.phantom.height == 32 &&
                    config.phantom.width == 32 && config.diffusion.steps == 200 && elapsed <= 1800.0 &&
                    ssim_diffusion - ssim_direct >= 0.05 && psnr_diffusion > psnr_direct && same &&
                    second.rows.size() == first.rows.size();
  return {pass, std::to_string(first.train_count) + " train / " + std::to_string(first.test_count) +
                    " held-out phantoms, run " + fmt(elapsed, 4) + " s; SSIM diffusion " + fmt(ssim_diffusion) +
                    " vs direct5f " + fmt(ssim_direct) + " (+" + fmt(ssim_diffusion - ssim_direct, 3) +
                    "); PSNR " + fmt(psnr_diffusion) + " vs " + fmt(psnr_direct) +
                    " dB; rerun " + (same ? "bit-identical" : "DIFFERS")};
}

Outcome normalization() {
  double worst_round_trip = 0.0;
  bool bounded = true;
  bool endpoints = true;
  for (int s = 0; s < 50; ++s) {
    Image map = oracle::random_image(32, 32, 1200 + s, -50.0, 400.0);
    map[static_cast<std::size_t>(s)] = 1e6;
    const auto n = robust_normalize(map);
    for (double v : n.values) bounded = bounded && v >= -1.0 && v <= 1.0;
    const Image back = denormalize(n.values, n.record);
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (map[i] >= n.record.lo && map[i] <= n.record.hi) {
        worst_round_trip = std::max(worst_round_trip, std::abs(back[i] - map[i]));
      }
    }
    Image ends(1, 2);
    ends[0] = n.record.lo;
    ends[1] = n.record.hi;
    const Image mapped = apply_normalization(ends, n.record);
    endpoints = endpoints && mapped[0] == -1.0 && mapped[1] == 1.0;
    Image unit(1, 2);
    unit[0] = -1.0;
    unit[1] = 1.0;
    const Image restored = denormalize(unit, n.record);
    endpoints = endpoints && restored[0] == n.record.lo && restored[1] == n.record.hi;
  }
  return {worst_round_trip <= 1e-6 && bounded && endpoints,
          "max round-trip error " + fmt(worst_round_trip, 3) + "; outputs in [-1, 1]: " + (bounded ? "yes" : "no") +
              "; endpoints exact: " + (endpoints ? "yes" : "no")};
}

Outcome metrics() {
  const Image x = oracle::random_image(32, 32, 1300);
  const double self = ssim(x, x, {});
  double worst_oracle = 0.0;
  for (int s = 0; s < 10; ++s) {
    const Image a = oracle::random_image(32, 32, 1310 + s);
    Image b = oracle::random_image(32, 32, 1330 + s);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.5 * a[i] + 0.5 * b[i];
    worst_oracle =
        std::max(worst_oracle, std::abs(ssim(a, b, {}) - oracle::ssim_bruteforce(a, b, 11, 1.5, 0.01, 0.03, 1.0)));
  }
  const double p0 = psnr(Image(8, 8, 1.0), Image(8, 8, 0.0), 1.0).db;
  const double p20 = psnr(Image(8, 8, 0.1), Image(8, 8, 0.0), 1.0).db;
  const bool pass = std::abs(self - 1.0) <= 1e-9 && worst_oracle <= 1e-6 && std::abs(p0) <= 1e-9 &&
                    std::abs(p20 - 20.0) <= 1e-9;
  return {pass, "ssim(x,x) - 1 = " + fmt(self - 1.0, 3) + "; oracle gap " + fmt(worst_oracle, 3) +
                    "; PSNR(MSE 1) = " + fmt(p0, 12) + " dB, PSNR(MSE 0.01) = " + fmt(p20, 12) + " dB"};
}

Outcome format_integrity() {
  const auto dir = scratch("formats");
  fs::create_directories(dir);
  Tensor t;
  t.dims = {4, 8, 8};
  Rng rng(1400);
  for (int i = 0; i < 256; ++i) t.data.push_back(static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-30, 30))));
  write_tensor(dir / "t.spkt", t);
  const Tensor back = read_tensor(dir / "t.spkt");
  const bool tensor_ok =
      back.dims == t.dims && std::memcmp(back.data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0;

  ModelFile m;
  m.params = init_denoiser<float>(Architecture{}, 1401, InitMode::all_random);
  m.train_seed = 9;
  m.train_steps = 123;
  m.target_record = {1.25, 99.5};
  write_model(dir / "m.spkm", m);
  const ModelFile mb = read_model(dir / "m.spkm");
  const bool model_ok = mb.params.weights == m.params.weights && mb.params.arch == m.params.arch &&
                        encode_model(mb) == encode_model(m);

  const auto config = load_config(config_path("minimal.ini"));
  cmd_pipeline(config, dir / "run_a");
  cmd_pipeline(config, dir / "run_b");
  const std::string a = slurp(dir / "run_a" / "summary.csv");
  const bool summary_ok = !a.empty() && a == slurp(dir / "run_b" / "summary.csv");
  return {tensor_ok && model_ok && summary_ok, std::string("tensor round trip ") + (tensor_ok ? "bit-exact" : "BROKEN") +
                                                   "; model round trip " + (model_ok ? "bit-exact" : "BROKEN") +
                                                   "; pipeline rerun summary " +
                                                   (summary_ok ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
      {1, {"registration exactness", registration_exactness}},
      {2, {"contrast oracle equivalence", contrast_oracle}},
      {3, {"undersampling law", undersampling_law}},
      {4, {"registration benefit", registration_benefit}},
      {5, {"diffusion algebra", diffusion_algebra}},
      {6, {"gradient correctness", gradient_correctness}},
      {7, {"directional reproduction", directional_reproduction}},
      {8, {"normalization", normalization}},
      {9, {"metrics", metrics}},
      {10, {"format integrity", format_integrity}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [id, entry] : criteria) selected.push_back(id);
  }
  int failures = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::printf("FAIL  criterion %d: unknown\n", id);
      ++failures;
      continue;
    }
    Outcome outcome;
    try {
      outcome = it->second.second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  criterion %d (%s): %s\n", outcome.pass ? "PASS" : "FAIL", id, it->second.first,
                outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
