#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "speckle/contrast.hpp"
#include "speckle/errors.hpp"
#include "speckle/pipeline.hpp"
#include "speckle/tensor_io.hpp"

using namespace speckle;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(
[phantom]
count = 4
height = 16
width = 16
n_frames = 40
max_shift = 3
[registration]
[contrast]
n_hq = 40
[diffusion]
steps = 50
hidden = 4,4
time_dim = 4
train_steps = 15
sampler_steps = 5
[evaluation]
export_png = true
[seeds]
phantom = 6
train = 7
sample = 8
)";

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("speckle_pipe_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SPECKLE_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(PlanPhantoms, SeedParitySplitAndBoundedMotion) {
  const auto config = parse_config(kTiny);
  const auto cases = plan_phantoms(config);
  ASSERT_EQ(cases.size(), 4u);
  for (const auto& c : cases) {
    EXPECT_EQ(c.seed, 6u + static_cast<std::uint64_t>(c.id));
    EXPECT_EQ(c.train, c.seed % 2 == 0);
    EXPECT_LE(c.max_shift, 3);
    for (const auto& d : c.spec.motion) {
      EXPECT_LE(std::abs(d.dy), c.max_shift);
      EXPECT_LE(std::abs(d.dx), c.max_shift);
    }
  }
  EXPECT_EQ(plan_phantoms(config)[2].spec.motion, cases[2].spec.motion);
}

TEST(PrepareSequence, DirectBaselineUsesTheConditionFrames) {
  const auto config = parse_config(kTiny);
  const auto cases = plan_phantoms(config);
  const auto real = synthesize_sequence(cases[1].spec);
  const auto p = prepare_sequence(real.sequence, config);
  const auto aligned = stabilize(real.sequence).aligned;
  EXPECT_EQ(p.direct_flow, contrast_and_flow(aligned.head(5)).flow);
  EXPECT_EQ(p.hq_flow, contrast_and_flow(aligned).flow);
  EXPECT_EQ(p.condition.channel_count(), 6);
  EXPECT_EQ(p.condition.channels[5], robust_normalize(p.direct_flow).values);
  for (std::size_t t = 0; t < p.shifts.size(); ++t) EXPECT_EQ(p.shifts[t], -cases[1].spec.motion[t]);
}

TEST(Pipeline, RunDirectoryIsCompleteAndReproducible) {
  const auto config = parse_config(kTiny);
  const auto a = temp_dir("a");
  const auto b = temp_dir("b");
  const auto ra = cmd_pipeline(config, a);
  cmd_pipeline(config, b);
  for (const char* f : {"config.ini", "manifest.txt", "phantoms.csv", "model.spkm", "loss.csv", "metrics.csv",
                        "aggregate.csv", "summary.csv"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(ra.train_count, 2);
  EXPECT_EQ(ra.test_count, 2);
  EXPECT_EQ(ra.rows.size(), 4u);
  std::istringstream summary(slurp(a / "summary.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(summary, line)) ++lines;
  EXPECT_EQ(lines, 1 + 4);
  EXPECT_NE(slurp(a / "manifest.txt").find(config.hash()), std::string::npos);
  EXPECT_EQ(parse_config(slurp(a / "config.ini")).hash(), config.hash());
  EXPECT_TRUE(fs::exists(a / "test" / "phantom_0001" / "diffusion_flow.spkt"));
  EXPECT_TRUE(fs::exists(a / "test" / "phantom_0001" / "hq_flow.png"));
}

TEST(Pipeline, FailureNamesStage) {
  auto config = parse_config(kTiny);
  config.contrast.n_hq = 40;
  config.phantom.n_frames = 40;
  config.diffusion.learning_rate = 1e6;
  config.diffusion.train_steps = 300;
  const auto dir = temp_dir("fail");
  try {
    cmd_pipeline(config, dir);
    FAIL() << "expected a stage failure";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "train");
    EXPECT_EQ(e.kind(), StageError::Kind::numerical);
  }
  EXPECT_TRUE(fs::exists(dir / "config.ini"));
}

TEST(Commands, SimulateRegisterContrastTrainSampleEval) {
  auto config = parse_config(kTiny);
  const auto dir = temp_dir("cmds");
  cmd_simulate(config, dir / "data");
  const auto seq_path = dir / "data" / "phantom_0001" / "sequence.spkt";
  ASSERT_TRUE(fs::exists(seq_path));
  EXPECT_EQ(metadata_value(read_metadata(seq_path), "split"), "test");

  const auto reg = cmd_register(seq_path, dir / "aligned.spkt", dir / "shifts.csv", config.registration, 1);
  EXPECT_EQ(reg.shifts.size(), 40u);
  EXPECT_EQ(slurp(dir / "shifts.csv").substr(0, 24), "frame,dy,dx,confidence\n0");

  cmd_contrast(dir / "aligned.spkt", dir / "k.spkt", dir / "flow.spkt", config.contrast);
  EXPECT_EQ(image_from_tensor(read_tensor(dir / "k.spkt")).rows(), 16);

  const auto model = cmd_train(config, dir / "data", dir / "model.spkm");
  EXPECT_EQ(model.params.arch.cond_channels, 6);

  const auto full = sequence_from_tensor(read_tensor(seq_path));
  write_tensor(dir / "five.spkt", to_tensor(full.head(5)));
  const Image recon = cmd_sample(dir / "model.spkm", dir / "five.spkt", dir / "recon.spkt", 0, 3);
  EXPECT_EQ(recon.rows(), 16);

  const auto row = cmd_eval(dir / "recon.spkt", dir / "flow.spkt", dir / "eval.csv", "diffusion", "1");
  EXPECT_GE(row.ssim, -1.0);
  EXPECT_EQ(slurp(dir / "eval.csv").substr(0, 33), "method,sequence_id,ssim,psnr_db,m");
  EXPECT_THROW(cmd_sample(dir / "model.spkm", seq_path, dir / "x.spkt"), std::invalid_argument);
}

TEST(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "good.ini") << kTiny;
    std::string missing = kTiny;
    missing.erase(missing.find("[diffusion]"), missing.find("[evaluation]") - missing.find("[diffusion]"));
    std::ofstream(dir / "missing.ini") << missing;
  }
  EXPECT_EQ(run_cli("--config " + (dir / "missing.ini").string() + " --out-dir " + (dir / "r0").string() + " pipeline"), 2);
  EXPECT_FALSE(fs::exists(dir / "r0"));
  EXPECT_EQ(run_cli("--config " + (dir / "nope.ini").string() + " pipeline"), 4);
  EXPECT_EQ(run_cli("eval --pred /nonexistent.spkt --ref /nonexistent.spkt --out-csv /tmp/x.csv"), 4);
  EXPECT_EQ(run_cli("--config " + (dir / "good.ini").string() + " --out-dir " + (dir / "sim").string() +
                    " --seed-override 50 simulate"),
            0);
  EXPECT_EQ(metadata_value(read_metadata(dir / "sim" / "phantom_0000" / "sequence.spkt"), "seed"), "50");
  EXPECT_EQ(run_cli("bogus-verb"), 2);
}
