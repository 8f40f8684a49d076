#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speckle/condition.hpp"
#include "speckle/config.hpp"
#include "speckle/metrics.hpp"
#include "speckle/model_io.hpp"
#include "speckle/phantom.hpp"
#include "speckle/reconstructor.hpp"
#include "speckle/registration.hpp"

namespace speckle {

/// One phantom of a run: its seed, split, and "condition" axes.
struct PhantomCase {
  int id = 0;
  std::uint64_t seed = 0;
  /// Split rule: even seeds train, odd seeds test.
  bool train = true;
  int max_shift = 0;
  PhantomSpec spec;
};

/// Deterministic phantom plan; seeds are seeds.phantom + id.
std::vector<PhantomCase> plan_phantoms(const PipelineConfig& config);

/// Stage-1 products for one sequence.
struct PreparedSequence {
  std::vector<Displacement> shifts;
  std::vector<double> confidence;
  int low_confidence_frames = 0;
  /// Flow prior of the first n_hq aligned frames.
  Image hq_flow;
  /// Flow prior of the first n_few aligned frames (Direct-5f baseline).
  Image direct_flow;
  /// Built from exactly the frames behind direct_flow.
  Condition condition;
  NormalizedMap hq_normalized;
};

StabilizeOptions stabilize_options(const RegistrationSection& section, int threads = 1);

/// Stabilize, then HQ flow from n_hq frames and condition / Direct-5f from n_few frames.
PreparedSequence prepare_sequence(const SpeckleSequence& seq, const PipelineConfig& config, int threads = 1);

/// Fresh denoiser trained on `samples`; the target record stored in the model
/// is the mean of `target_records`.
ModelFile train_model(const PipelineConfig& config, std::span<const TrainingSample> samples,
                      std::span<const NormalizationRecord> target_records, int threads,
                      std::vector<double>* loss_trace = nullptr, std::ostream* log = nullptr);

/// Samples in the normalized domain and maps back with model.target_record.
Image reconstruct_flow(const ModelFile& model, const Condition& condition, int sampler_steps, std::uint64_t seed);

struct RunOptions {
  int threads = 1;
  std::ostream* log = nullptr;
};

struct PipelineResult {
  std::filesystem::path run_dir;
  /// Held-out phantoms only; summary.csv also lists the training split.
  std::vector<MetricsRow> rows;
  std::vector<MetricsAggregate> aggregates;
  std::vector<double> loss_trace;
  int train_count = 0;
  int test_count = 0;
};

/// Raised with the name of the failing stage; partial outputs stay on disk.
/// `kind` preserves the CLI exit-code category of the root cause.
class StageError : public std::runtime_error {
public:
  enum class Kind { config, numerical, io, other };
  StageError(std::string stage, Kind kind, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)), kind_(kind) {}
  const std::string& stage() const { return stage_; }
  Kind kind() const { return kind_; }

private:
  std::string stage_;
  Kind kind_;
};

/// simulate -> split -> stabilize -> HQ / few-frame conditions -> train ->
/// sample -> evaluate (Direct-5f vs diffusion) inside `out_dir`.
PipelineResult cmd_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir,
                            const RunOptions& options = {});

/// Writes phantom_NNNN/ directories with sequence and ground truth.
void cmd_simulate(const PipelineConfig& config, const std::filesystem::path& out_dir, const RunOptions& options = {});

/// Aligns a sequence tensor; writes aligned tensor and shifts CSV.
StabilizeResult cmd_register(const std::filesystem::path& in, const std::filesystem::path& out,
                             const std::filesystem::path& shifts_csv, const RegistrationSection& section = {},
                             int threads = 1);

/// Contrast and flow maps of a (registered) sequence tensor.
void cmd_contrast(const std::filesystem::path& in, const std::filesystem::path& k_out,
                  const std::filesystem::path& flow_out, const ContrastSection& section = {});

/// Trains on the train-split phantoms of `data_dir` (all of them when no
/// split metadata is present). Loss trace goes to "<model_out>.loss.csv".
ModelFile cmd_train(const PipelineConfig& config, const std::filesystem::path& data_dir,
                    const std::filesystem::path& model_out, const RunOptions& options = {});

/// Reconstructs a flow map from a few raw frames (registered internally).
/// `steps` = 0 uses the model's sampler step count.
Image cmd_sample(const std::filesystem::path& model_path, const std::filesystem::path& frames,
                 const std::filesystem::path& out, int steps = 0, std::uint64_t seed = 0,
                 const RegistrationSection& section = {});

/// Metrics of pred vs ref as a one-row CSV.
MetricsRow cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& ref,
                    const std::filesystem::path& out_csv, const std::string& method = "pred",
                    const std::string& sequence_id = "0");

/// CSV writers shared by the commands.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<MetricsAggregate>& aggregates);
void write_shifts_csv(const std::filesystem::path& path, std::span<const Displacement> shifts,
                      std::span<const double> confidence = {});

}  // namespace speckle
