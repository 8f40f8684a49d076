#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "speckle/config.hpp"
#include "speckle/errors.hpp"
#include "speckle/pipeline.hpp"

namespace fs = std::filesystem;
using namespace speckle;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4, kOther = 1 };

struct Globals {
  std::string config;
  std::string out_dir = "run";
  std::optional<std::uint64_t> seed_override;
  int threads = 1;
};

PipelineConfig require_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this command");
  PipelineConfig config = load_config(g.config);
  if (g.seed_override) config.override_seeds(*g.seed_override);
  config.validate();
  return config;
}

PipelineConfig optional_config(const Globals& g) {
  if (g.config.empty()) return {};
  return require_config(g);
}

int exit_for(StageError::Kind kind) {
  switch (kind) {
    case StageError::Kind::config: return kConfig;
    case StageError::Kind::numerical: return kNumerical;
    case StageError::Kind::io: return kIo;
    default: return kOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speckle flow imaging: phantoms, stabilization, contrast and few-frame diffusion reconstruction"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (sectioned key = value)");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--seed-override", g.seed_override, "Replace all seeds: phantom=s, train=s+1, sample=s+2");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.fallthrough();

  auto* simulate = app.add_subcommand("simulate", "Write phantom sequences and ground truth");

  auto* reg = app.add_subcommand("register", "Stabilize a sequence by phase correlation");
  std::string reg_in, reg_out, reg_shifts;
  reg->add_option("--in", reg_in)->required();
  reg->add_option("--out", reg_out)->required();
  reg->add_option("--shifts", reg_shifts, "CSV of per-frame shifts");

  auto* contrast = app.add_subcommand("contrast", "Temporal contrast and flow prior maps");
  std::string con_in, con_k, con_flow;
  contrast->add_option("--in", con_in)->required();
  contrast->add_option("--k-out", con_k)->required();
  contrast->add_option("--flow-out", con_flow)->required();

  auto* train = app.add_subcommand("train", "Train the conditional denoiser");
  std::string data_dir, model_out;
  train->add_option("--data-dir", data_dir, "Directory written by simulate")->required();
  train->add_option("--model-out", model_out);

  auto* sample = app.add_subcommand("sample", "Reconstruct a flow map from few frames");
  std::string model_path, frames, sample_out;
  int steps = 0;
  std::uint64_t sample_seed = 0;
  sample->add_option("--model", model_path)->required();
  sample->add_option("--frames", frames)->required();
  sample->add_option("--out", sample_out)->required();
  sample->add_option("--steps", steps, "Sampler steps (0 = model default)");
  sample->add_option("--seed", sample_seed);

  auto* eval = app.add_subcommand("eval", "SSIM, PSNR and MAE against a reference map");
  std::string pred, ref, eval_csv, method = "prediction", seq_id = "0";
  eval->add_option("--pred", pred)->required();
  eval->add_option("--ref", ref)->required();
  eval->add_option("--out-csv", eval_csv)->required();
  eval->add_option("--method", method);
  eval->add_option("--id", seq_id);

  auto* pipeline = app.add_subcommand("pipeline", "End-to-end run: simulate, train, sample, evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  if (g.threads == 0) g.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  try {
    RunOptions run{g.threads, &std::cerr};
    if (*simulate) {
      cmd_simulate(require_config(g), g.out_dir, run);
    } else if (*reg) {
      const auto config = optional_config(g);
      const auto result = cmd_register(reg_in, reg_out, reg_shifts, config.registration, g.threads);
      std::size_t low = 0;
      for (bool b : result.low_confidence) low += b ? 1 : 0;
      std::cout << "aligned " << result.shifts.size() << " frames, " << low << " low-confidence\n";
    } else if (*contrast) {
      cmd_contrast(con_in, con_k, con_flow, optional_config(g).contrast);
    } else if (*train) {
      if (model_out.empty()) model_out = (fs::path(g.out_dir) / "model.spkm").string();
      fs::create_directories(fs::path(model_out).parent_path().empty() ? fs::path(".")
                                                                       : fs::path(model_out).parent_path());
      cmd_train(require_config(g), data_dir, model_out, run);
      std::cout << "wrote " << model_out << '\n';
    } else if (*sample) {
      cmd_sample(model_path, frames, sample_out, steps, sample_seed, optional_config(g).registration);
    } else if (*eval) {
      const auto row = cmd_eval(pred, ref, eval_csv, method, seq_id);
      std::cout << "ssim " << row.ssim << " psnr_db " << row.psnr.to_string() << " mae " << row.mae << '\n';
    } else if (*pipeline) {
      const auto result = cmd_pipeline(require_config(g), g.out_dir, run);
      for (const auto& a : result.aggregates) {
        std::cout << a.method << ": ssim " << a.ssim_mean << " psnr_db " << a.psnr_mean << " mae " << a.mae_mean
                  << " (n=" << a.count << ")\n";
      }
      std::cout << "run directory: " << result.run_dir.string() << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_for(e.kind());
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
