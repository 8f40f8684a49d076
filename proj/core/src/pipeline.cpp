#include "speckle/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <utility>

#include "speckle/contrast.hpp"
#include "speckle/errors.hpp"
#include "speckle/parallel.hpp"
#include "speckle/png_export.hpp"
#include "speckle/rng.hpp"
#include "speckle/tensor_io.hpp"

namespace fs = std::filesystem;

namespace speckle {
namespace {

constexpr std::uint64_t kAmplitudeStream = 0xA3F1;
constexpr std::uint64_t kMotionStream = 0xB0B5;
constexpr std::uint64_t kVesselStream = 0xFE55;
constexpr std::uint64_t kInitStream = 0x1417;

template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  using Kind = StageError::Kind;
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(stage, Kind::config, e.what());
  } catch (const std::invalid_argument& e) {
    throw StageError(stage, Kind::config, e.what());
  } catch (const NumericalError& e) {
    throw StageError(stage, Kind::numerical, e.what());
  } catch (const IoError& e) {
    throw StageError(stage, Kind::io, e.what());
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, Kind::io, e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, Kind::other, e.what());
  }
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_text(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string phantom_dir_name(int id) {
  std::string digits = std::to_string(id);
  return "phantom_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

void note(std::ostream* log, const std::string& message) {
  if (log != nullptr) *log << message << std::endl;
}

NormalizationOptions normalization_options(const ContrastSection& c) { return {c.lo_pct, c.hi_pct}; }
PriorOptions prior_options(const ContrastSection& c) { return {c.contrast_eps, c.flow_eps}; }

bool wants(const PipelineConfig& config, const std::string& metric) {
  const auto& m = config.evaluation.metrics;
  return std::find(m.begin(), m.end(), metric) != m.end();
}

}  // namespace

std::vector<PhantomCase> plan_phantoms(const PipelineConfig& config) {
  const auto& p = config.phantom;
  std::vector<PhantomCase> cases;
  for (int id = 0; id < p.count; ++id) {
    PhantomCase c;
    c.id = id;
    c.seed = config.seeds.phantom + static_cast<std::uint64_t>(id);
    c.train = c.seed % 2 == 0;
    Rng amplitude(mix_seed(c.seed, kAmplitudeStream));
    c.max_shift = static_cast<int>(amplitude.integer(0, p.max_shift));

    PhantomSpec& s = c.spec;
    s.height = p.height;
    s.width = p.width;
    s.n_frames = p.n_frames;
    s.background_k = p.background_k;
    s.base_intensity = p.base_intensity;
    s.texture = p.texture;
    s.additive_noise = p.additive_noise;
    s.shift_mode = p.shift_mode;
    s.seed = c.seed;
    s.vessels = random_vessels(p.height, p.width, p.vessels, mix_seed(c.seed, kVesselStream));
    s.motion = random_walk_motion(p.n_frames, c.max_shift, mix_seed(c.seed, kMotionStream));
    cases.push_back(std::move(c));
  }
  return cases;
}

StabilizeOptions stabilize_options(const RegistrationSection& section, int threads) {
  StabilizeOptions o;
  o.eps = section.eps;
  o.mode = section.mode;
  o.confidence_threshold = section.confidence_threshold;
  o.reference = section.reference;
  o.threads = threads;
  return o;
}

PreparedSequence prepare_sequence(const SpeckleSequence& seq, const PipelineConfig& config, int threads) {
  const auto& c = config.contrast;
  if (seq.n_frames() < std::max(c.n_hq, c.n_few)) {
    throw std::invalid_argument("sequence has " + std::to_string(seq.n_frames()) + " frames, need " +
                                std::to_string(std::max(c.n_hq, c.n_few)));
  }
  StabilizeResult reg = stabilize(seq, stabilize_options(config.registration, threads));
  PreparedSequence out;
  out.shifts = reg.shifts;
  out.confidence = reg.confidence;
  out.low_confidence_frames =
      static_cast<int>(std::count(reg.low_confidence.begin(), reg.low_confidence.end(), true));
  out.hq_flow = contrast_and_flow(reg.aligned.head(c.n_hq), c.contrast_eps, c.flow_eps).flow;
  const SpeckleSequence few = reg.aligned.head(c.n_few);
  out.direct_flow = contrast_and_flow(few, c.contrast_eps, c.flow_eps).flow;
  out.condition = make_condition(few, out.direct_flow, normalization_options(c));
  out.hq_normalized = robust_normalize(out.hq_flow, c.lo_pct, c.hi_pct);
  return out;
}

ModelFile train_model(const PipelineConfig& config, std::span<const TrainingSample> samples,
                      std::span<const NormalizationRecord> target_records, int threads,
                      std::vector<double>* loss_trace, std::ostream* log) {
  if (samples.empty()) throw std::invalid_argument("train_model: no training samples");
  if (target_records.empty()) throw std::invalid_argument("train_model: no target records");
  const auto& d = config.diffusion;
  Architecture arch;
  arch.cond_channels = config.contrast.n_few + 1;
  arch.hidden = d.hidden;
  arch.kernel = d.kernel;
  arch.time_dim = d.time_dim;

  TrainConfig tc;
  tc.steps = d.train_steps;
  tc.batch_size = d.batch_size;
  tc.learning_rate = d.learning_rate;
  tc.weight_decay = d.weight_decay;
  tc.augment = d.augment;
  tc.seed = config.seeds.train;
  tc.threads = threads;

  const NoiseSchedule sched = linear_schedule(d.steps, d.beta_start, d.beta_end);
  const int report_every = std::max(1, d.train_steps / 20);
  auto progress = [&](int step, double loss) {
    if (log != nullptr && (step % report_every == 0 || step + 1 == d.train_steps)) {
      *log << "  step " << step << " loss " << loss << std::endl;
    }
  };
  TrainResult trained = train(init_denoiser<float>(arch, mix_seed(config.seeds.train, kInitStream)), samples, sched,
                              tc, progress);

  ModelFile model;
  model.params = std::move(trained.params);
  model.diffusion_steps = d.steps;
  model.beta_start = d.beta_start;
  model.beta_end = d.beta_end;
  model.sampler_steps = d.sampler_steps;
  model.train_seed = config.seeds.train;
  model.train_steps = static_cast<std::uint64_t>(d.train_steps);
  model.prior = prior_options(config.contrast);
  model.normalization = normalization_options(config.contrast);
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& r : target_records) {
    lo += r.lo;
    hi += r.hi;
  }
  model.target_record = {lo / static_cast<double>(target_records.size()),
                         hi / static_cast<double>(target_records.size())};
  if (loss_trace != nullptr) *loss_trace = std::move(trained.loss_trace);
  return model;
}

Image reconstruct_flow(const ModelFile& model, const Condition& condition, int sampler_steps, std::uint64_t seed) {
  const NoiseSchedule sched = model.schedule();
  const SamplerConfig sampler = uniform_sampler(sched.steps, sampler_steps > 0 ? sampler_steps : model.sampler_steps);
  return denormalize(sample(model.params, condition, sched, sampler, seed), model.target_record);
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  auto out = open_text(path);
  out << "method,sequence_id,ssim,psnr_db,mae\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.sequence_id << ',' << format_number(r.ssim) << ',' << r.psnr.to_string() << ','
        << format_number(r.mae) << '\n';
  }
  close_text(out, path);
}

void write_aggregate_csv(const fs::path& path, const std::vector<MetricsAggregate>& aggregates) {
  auto out = open_text(path);
  out << "method,count,ssim_mean,ssim_std,psnr_db_mean,psnr_db_std,mae_mean,mae_std\n";
  for (const auto& a : aggregates) {
    out << a.method << ',' << a.count << ',' << format_number(a.ssim_mean) << ',' << format_number(a.ssim_std) << ','
        << format_number(a.psnr_mean) << ',' << format_number(a.psnr_std) << ',' << format_number(a.mae_mean) << ','
        << format_number(a.mae_std) << '\n';
  }
  close_text(out, path);
}

void write_shifts_csv(const fs::path& path, std::span<const Displacement> shifts, std::span<const double> confidence) {
  auto out = open_text(path);
  out << (confidence.empty() ? "frame,dy,dx\n" : "frame,dy,dx,confidence\n");
  for (std::size_t t = 0; t < shifts.size(); ++t) {
    out << t << ',' << shifts[t].dy << ',' << shifts[t].dx;
    if (!confidence.empty()) out << ',' << format_number(confidence[t]);
    out << '\n';
  }
  close_text(out, path);
}

namespace {

struct CaseOutcome {
  PreparedSequence prepared;
  Image reconstruction;
  MetricsRow direct;
  MetricsRow diffusion;
};

void write_loss_csv(const fs::path& path, const std::vector<double>& trace) {
  auto out = open_text(path);
  out << "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << format_number(trace[i]) << '\n';
  close_text(out, path);
}

Metadata map_metadata(const PipelineConfig& config, const std::string& kind) {
  return {{"kind", kind},
          {"contrast_eps", format_number(config.contrast.contrast_eps)},
          {"flow_eps", format_number(config.contrast.flow_eps)}};
}

void write_summary(const fs::path& path, const PipelineConfig& config, const std::vector<PhantomCase>& cases,
                   const std::vector<CaseOutcome>& outcomes) {
  auto out = open_text(path);
  out << "phantom_id,seed,split,max_shift";
  for (const char* metric : {"ssim", "psnr", "mae"}) {
    if (!wants(config, metric)) continue;
    const std::string col = std::string(metric) == "psnr" ? "psnr_db" : metric;
    out << ',' << col << "_direct5f," << col << "_diffusion";
  }
  out << '\n';
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const MetricsRow& direct = outcomes[i].direct;
    const MetricsRow& diffusion = outcomes[i].diffusion;
    out << c.id << ',' << c.seed << ',' << (c.train ? "train" : "test") << ',' << c.max_shift;
    if (wants(config, "ssim")) out << ',' << format_number(direct.ssim) << ',' << format_number(diffusion.ssim);
    if (wants(config, "psnr")) out << ',' << direct.psnr.to_string() << ',' << diffusion.psnr.to_string();
    if (wants(config, "mae")) out << ',' << format_number(direct.mae) << ',' << format_number(diffusion.mae);
    out << '\n';
  }
  close_text(out, path);
}

}  // namespace

PipelineResult cmd_pipeline(const PipelineConfig& config, const fs::path& out_dir, const RunOptions& options) {
  PipelineResult result;
  result.run_dir = out_dir;
  const auto cases = run_stage("validate", [&] {
    config.validate();
    auto planned = plan_phantoms(config);
    const auto train = std::count_if(planned.begin(), planned.end(), [](const PhantomCase& c) { return c.train; });
    if (train == 0) throw ConfigError("no phantom falls in the training split");
    if (train == static_cast<std::ptrdiff_t>(planned.size())) throw ConfigError("no phantom falls in the test split");
    fs::create_directories(out_dir / "test");
    auto cfg = open_text(out_dir / "config.ini");
    cfg << config.canonical_text();
    close_text(cfg, out_dir / "config.ini");
    return planned;
  });

  note(options.log, "simulating and stabilizing " + std::to_string(cases.size()) + " phantoms");
  std::vector<CaseOutcome> outcomes(cases.size());
  parallel_for(cases.size(), options.threads, [&](std::size_t i) {
    const auto realization = run_stage("simulate", [&] { return synthesize_sequence(cases[i].spec); });
    outcomes[i].prepared = run_stage("stabilize", [&] { return prepare_sequence(realization.sequence, config); });
  });

  std::vector<TrainingSample> samples;
  std::vector<NormalizationRecord> records;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!cases[i].train) continue;
    const auto& p = outcomes[i].prepared;
    samples.push_back({p.hq_normalized.values, p.condition});
    records.push_back(p.hq_normalized.record);
  }
  result.train_count = static_cast<int>(samples.size());
  result.test_count = static_cast<int>(cases.size() - samples.size());

  note(options.log, "training on " + std::to_string(samples.size()) + " phantoms");
  const ModelFile model = run_stage("train", [&] {
    auto m = train_model(config, samples, records, options.threads, &result.loss_trace, options.log);
    write_model(out_dir / "model.spkm", m);
    write_loss_csv(out_dir / "loss.csv", result.loss_trace);
    return m;
  });

  note(options.log, "sampling " + std::to_string(cases.size()) + " phantoms");
  parallel_for(cases.size(), options.threads, [&](std::size_t i) {
    outcomes[i].reconstruction = run_stage("sample", [&] {
      return reconstruct_flow(model, outcomes[i].prepared.condition, config.diffusion.sampler_steps,
                              mix_seed(config.seeds.sample, static_cast<std::uint64_t>(cases[i].id)));
    });
  });

  run_stage("evaluate", [&] {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto id = std::to_string(cases[i].id);
      auto& o = outcomes[i];
      o.direct = evaluate_pair(o.prepared.direct_flow, o.prepared.hq_flow, "direct5f", id);
      o.diffusion = evaluate_pair(o.reconstruction, o.prepared.hq_flow, "diffusion", id);
      if (cases[i].train) continue;
      result.rows.push_back(o.direct);
      result.rows.push_back(o.diffusion);
    }
    result.aggregates = aggregate(result.rows);
  });

  run_stage("write", [&] {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      if (cases[i].train) continue;
      const fs::path dir = out_dir / "test" / phantom_dir_name(cases[i].id);
      fs::create_directories(dir);
      const auto& p = outcomes[i].prepared;
      write_tensor(dir / "hq_flow.spkt", to_tensor(p.hq_flow), map_metadata(config, "hq_flow"));
      write_tensor(dir / "direct5f_flow.spkt", to_tensor(p.direct_flow), map_metadata(config, "direct5f_flow"));
      Metadata recon_meta = map_metadata(config, "diffusion_flow");
      recon_meta.emplace_back("record_lo", format_number(model.target_record.lo));
      recon_meta.emplace_back("record_hi", format_number(model.target_record.hi));
      write_tensor(dir / "diffusion_flow.spkt", to_tensor(outcomes[i].reconstruction), recon_meta);
      write_shifts_csv(dir / "shifts.csv", p.shifts, p.confidence);
      if (config.evaluation.export_png) {
        export_png(p.hq_flow, dir / "hq_flow.png");
        export_png(p.direct_flow, dir / "direct5f_flow.png");
        export_png(outcomes[i].reconstruction, dir / "diffusion_flow.png");
      }
    }
    write_metrics_csv(out_dir / "metrics.csv", result.rows);
    write_aggregate_csv(out_dir / "aggregate.csv", result.aggregates);
    write_summary(out_dir / "summary.csv", config, cases, outcomes);

    auto phantoms = open_text(out_dir / "phantoms.csv");
    phantoms << "phantom_id,seed,split,max_shift,vessels,min_vessel_k,low_confidence_frames\n";
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& c = cases[i];
      double min_k = config.phantom.background_k;
      for (const auto& v : c.spec.vessels) min_k = std::min(min_k, v.k_true);
      phantoms << c.id << ',' << c.seed << ',' << (c.train ? "train" : "test") << ',' << c.max_shift << ','
               << c.spec.vessels.size() << ',' << format_number(min_k) << ','
               << outcomes[i].prepared.low_confidence_frames << '\n';
    }
    close_text(phantoms, out_dir / "phantoms.csv");

    auto manifest = open_text(out_dir / "manifest.txt");
    manifest << "config_file = config.ini\n"
             << "config_hash = sha256:" << config.hash() << '\n'
             << "seed_phantom = " << config.seeds.phantom << '\n'
             << "seed_train = " << config.seeds.train << '\n'
             << "seed_sample = " << config.seeds.sample << '\n'
             << "phantom_seed_rule = seed_phantom + phantom_id\n"
             << "rng_transform = " << kNormalTransform << '\n'
             << "split_rule = seed parity (even -> train, odd -> test)\n"
             << "condition_axes = motion amplitude (max_shift per phantom), vessel k_true\n"
             << "train_count = " << result.train_count << '\n'
             << "test_count = " << result.test_count << '\n'
             << "model_file = model.spkm\n"
             << "target_record_lo = " << format_number(model.target_record.lo) << '\n'
             << "target_record_hi = " << format_number(model.target_record.hi) << '\n';
    close_text(manifest, out_dir / "manifest.txt");
  });
  return result;
}

void cmd_simulate(const PipelineConfig& config, const fs::path& out_dir, const RunOptions& options) {
  config.validate();
  const auto cases = plan_phantoms(config);
  fs::create_directories(out_dir);
  parallel_for(cases.size(), options.threads, [&](std::size_t i) {
    const auto& c = cases[i];
    const auto r = synthesize_sequence(c.spec);
    const fs::path dir = out_dir / phantom_dir_name(c.id);
    fs::create_directories(dir);
    write_tensor(dir / "sequence.spkt", to_tensor(r.sequence),
                 {{"kind", "speckle_sequence"},
                  {"phantom_id", std::to_string(c.id)},
                  {"seed", std::to_string(c.seed)},
                  {"split", c.train ? "train" : "test"},
                  {"max_shift", std::to_string(c.max_shift)},
                  {"shift_mode", std::string(to_string(c.spec.shift_mode))},
                  {"rng_transform", kNormalTransform}});
    write_tensor(dir / "k_true.spkt", to_tensor(r.truth.k_true_map), {{"kind", "k_true"}});
    write_tensor(dir / "mu.spkt", to_tensor(r.truth.mu_map), {{"kind", "mu"}});
    write_tensor(dir / "hq_flow.spkt", to_tensor(r.truth.hq_flow), map_metadata(config, "hq_flow_unshifted"));
    write_shifts_csv(dir / "shifts.csv", r.truth.shifts);
  });
  note(options.log, "wrote " + std::to_string(cases.size()) + " phantoms to " + out_dir.string());
}

StabilizeResult cmd_register(const fs::path& in, const fs::path& out, const fs::path& shifts_csv,
                             const RegistrationSection& section, int threads) {
  const SpeckleSequence seq = sequence_from_tensor(read_tensor(in));
  StabilizeResult reg = stabilize(seq, stabilize_options(section, threads));
  write_tensor(out, to_tensor(reg.aligned),
               {{"kind", "aligned_sequence"},
                {"registration_eps", format_number(section.eps)},
                {"shift_mode", std::string(to_string(section.mode))}});
  if (!shifts_csv.empty()) write_shifts_csv(shifts_csv, reg.shifts, reg.confidence);
  return reg;
}

void cmd_contrast(const fs::path& in, const fs::path& k_out, const fs::path& flow_out, const ContrastSection& section) {
  const SpeckleSequence seq = sequence_from_tensor(read_tensor(in));
  const auto maps = contrast_and_flow(seq, section.contrast_eps, section.flow_eps);
  const Metadata meta = {{"contrast_eps", format_number(section.contrast_eps)},
                         {"flow_eps", format_number(section.flow_eps)},
                         {"frames", std::to_string(seq.n_frames())}};
  Metadata k_meta = meta;
  k_meta.insert(k_meta.begin(), {"kind", "contrast"});
  Metadata f_meta = meta;
  f_meta.insert(f_meta.begin(), {"kind", "flow"});
  write_tensor(k_out, to_tensor(maps.contrast), k_meta);
  write_tensor(flow_out, to_tensor(maps.flow), f_meta);
}

ModelFile cmd_train(const PipelineConfig& config, const fs::path& data_dir, const fs::path& model_out,
                    const RunOptions& options) {
  config.validate();
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "sequence.spkt")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError("no phantom directories with sequence.spkt under " + data_dir.string());

  bool any_split = false;
  std::vector<std::pair<fs::path, bool>> listed;
  for (const auto& d : dirs) {
    const auto meta = read_metadata(d / "sequence.spkt");
    bool train = true;
    for (const auto& [k, v] : meta) {
      if (k == "split") {
        any_split = true;
        train = v == "train";
      }
    }
    listed.emplace_back(d, train);
  }

  std::vector<TrainingSample> samples;
  std::vector<NormalizationRecord> records;
  for (const auto& [dir, train] : listed) {
    if (any_split && !train) continue;
    const auto prepared = prepare_sequence(sequence_from_tensor(read_tensor(dir / "sequence.spkt")), config,
                                           options.threads);
    samples.push_back({prepared.hq_normalized.values, prepared.condition});
    records.push_back(prepared.hq_normalized.record);
  }
  note(options.log, "training on " + std::to_string(samples.size()) + " sequences");
  std::vector<double> trace;
  ModelFile model = train_model(config, samples, records, options.threads, &trace, options.log);
  write_model(model_out, model);
  write_loss_csv(fs::path(model_out.string() + ".loss.csv"), trace);
  return model;
}

Image cmd_sample(const fs::path& model_path, const fs::path& frames, const fs::path& out, int steps,
                 std::uint64_t seed, const RegistrationSection& section) {
  const ModelFile model = read_model(model_path);
  const SpeckleSequence seq = sequence_from_tensor(read_tensor(frames));
  const int n_few = model.params.arch.cond_channels - 1;
  if (seq.n_frames() != n_few) {
    throw std::invalid_argument("model expects " + std::to_string(n_few) + " frames, got " +
                                std::to_string(seq.n_frames()));
  }
  const SpeckleSequence aligned = stabilize(seq, stabilize_options(section)).aligned;
  const Condition cond = condition_from_frames(aligned, model.prior, model.normalization);
  const int used_steps = steps > 0 ? steps : model.sampler_steps;
  Image flow = reconstruct_flow(model, cond, used_steps, seed);
  write_tensor(out, to_tensor(flow),
               {{"kind", "diffusion_flow"},
                {"sampler_steps", std::to_string(used_steps)},
                {"seed", std::to_string(seed)},
                {"record_lo", format_number(model.target_record.lo)},
                {"record_hi", format_number(model.target_record.hi)}});
  return flow;
}

MetricsRow cmd_eval(const fs::path& pred, const fs::path& ref, const fs::path& out_csv, const std::string& method,
                    const std::string& sequence_id) {
  const Image p = image_from_tensor(read_tensor(pred));
  const Image r = image_from_tensor(read_tensor(ref));
  MetricsRow row = evaluate_pair(p, r, method, sequence_id);
  write_metrics_csv(out_csv, {row});
  return row;
}

}  // namespace speckle
