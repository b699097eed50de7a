#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "lssat/checkpoint.hpp"
#include "lssat/config.hpp"
#include "lssat/netpbm.hpp"
#include "lssat/report.hpp"
#include "lssat_cli/cli.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace lssat;
using lssat::cli::run_cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> tiny_train(const std::filesystem::path& out) {
  return {"train", "--preset", "toy-b", "--epochs", "1", "--synth-per-class", "6", "--batch-size", "4",
          "--seed", "3", "--out", out.string()};
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}), cli::kUsage);
  EXPECT_EQ(run_cli({"train", "--no-such-flag"}), cli::kUsage);
  EXPECT_EQ(run_cli({"frobnicate"}), cli::kUsage);
  EXPECT_EQ(run_cli({"sweep", "--presets", "toy-b"}), cli::kUsage);
  EXPECT_EQ(run_cli({"train", "--dry-run", "--lambda", "2"}), cli::kUsage);
  EXPECT_EQ(run_cli({"train", "--dry-run", "--triplet", "LDP,LDP,LDP"}), cli::kUsage);
  EXPECT_EQ(run_cli({"train", "--dry-run", "--config", "/nonexistent/config.json"}), cli::kUsage);
}

TEST(Cli, DefaultsEcho) {
  gen::TempDir dir;
  ASSERT_EQ(run_cli({"train", "--dry-run", "--lambda", "0.1", "--mask-ratio", "0.75", "--epochs", "75", "--out",
                     dir.path().string()}),
            cli::kOk);
  const ExperimentConfig c = load_config(dir / "config.json");
  EXPECT_EQ(c.lambda, 0.1);
  EXPECT_EQ(c.mask_ratio, 0.75);
  EXPECT_EQ(c.epochs, 75u);
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.patch_size, 16u);
  EXPECT_EQ(c.image_size, 224u);
  EXPECT_EQ(c.lr_max, 5e-5);
  EXPECT_EQ(c.lr_min, 1e-6);
  EXPECT_EQ(c.weight_decay, 0.05);
  EXPECT_EQ(c.drop_path_rate, 0.01);
  EXPECT_EQ(slurp(dir / "seed.txt"), "0\n");
}

TEST(Cli, FlagsOverrideConfigFile) {
  gen::TempDir dir;
  ExperimentConfig base = default_config("toy-l");
  base.lambda = 0.4;
  base.epochs = 9;
  save_config(base, dir / "in.json");
  ASSERT_EQ(run_cli({"train", "--dry-run", "--config", (dir / "in.json").string(), "--epochs", "2", "--out",
                     (dir / "out").string()}),
            cli::kOk);
  const ExperimentConfig c = load_config(dir / "out" / "config.json");
  EXPECT_EQ(c.preset, "toy-l");
  EXPECT_EQ(c.lambda, 0.4);
  EXPECT_EQ(c.epochs, 2u);
  EXPECT_EQ(c.image_size, 32u);
}

TEST(Cli, TrainWritesRunDirAndEchoReproduces) {
  gen::TempDir dir;
  ASSERT_EQ(run_cli(tiny_train(dir / "a")), cli::kOk);
  for (const char* f : {"config.json", "seed.txt", "report.json", "roc.csv", "checkpoint.lssat"})
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
  ASSERT_EQ(run_cli({"train", "--config", (dir / "a" / "config.json").string(), "--synth-per-class", "6", "--out",
                     (dir / "b").string()}),
            cli::kOk);
  EXPECT_EQ(slurp(dir / "a" / "checkpoint.lssat"), slurp(dir / "b" / "checkpoint.lssat"));
  EXPECT_EQ(slurp(dir / "a" / "roc.csv"), slurp(dir / "b" / "roc.csv"));
  RunReport ra = report_from_json(slurp(dir / "a" / "report.json"));
  RunReport rb = report_from_json(slurp(dir / "b" / "report.json"));
  ra.wall_clock_seconds = rb.wall_clock_seconds = 0.0;
  EXPECT_EQ(report_to_json(ra), report_to_json(rb));
}

TEST(Cli, EvaluateChecksPreset) {
  gen::TempDir dir;
  ASSERT_EQ(run_cli(tiny_train(dir / "a")), cli::kOk);
  const std::string ck = (dir / "a" / "checkpoint.lssat").string();
  EXPECT_EQ(run_cli({"evaluate", "--checkpoint", ck, "--preset", "toy-h", "--synth-per-class", "6", "--out",
                     (dir / "e").string()}),
            cli::kUsage);
  ASSERT_EQ(run_cli({"evaluate", "--checkpoint", ck, "--preset", "toy-b", "--synth-per-class", "6", "--out",
                     (dir / "e").string()}),
            cli::kOk);
  const RunReport train = report_from_json(slurp(dir / "a" / "report.json"));
  const RunReport eval = report_from_json(slurp(dir / "e" / "report.json"));
  EXPECT_EQ(eval.average_accuracy, train.average_accuracy);
  EXPECT_EQ(eval.roc, train.roc);
}

TEST(Cli, DataAndNumericFailures) {
  gen::TempDir dir;
  EXPECT_EQ(run_cli({"train", "--preset", "toy-b", "--dataset", (dir / "nowhere").string(), "--out",
                     (dir / "x").string()}),
            cli::kData);
  auto args = tiny_train(dir / "y");
  args.insert(args.end(), {"--lr-max", "1e300"});
  EXPECT_EQ(run_cli(args), cli::kNumeric);
}

TEST(Cli, GenSynthThenTrainFromDirectory) {
  gen::TempDir dir;
  ASSERT_EQ(run_cli({"gen-synth", "--out", (dir / "data").string(), "--per-class", "6", "--seed", "2"}), cli::kOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "labels.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "sample_00011.ppm"));
  EXPECT_FALSE(std::filesystem::exists(dir / "data" / "sample_00012.ppm"));
  EXPECT_EQ(run_cli({"train", "--preset", "toy-b", "--epochs", "1", "--dataset", (dir / "data").string(), "--out",
                     (dir / "run").string()}),
            cli::kOk);
  EXPECT_EQ(run_cli({"gen-synth", "--out", (dir / "bad").string(), "--kind", "plaid"}), cli::kUsage);
}

TEST(Cli, ExtractLdpMatchesOracle) {
  std::mt19937_64 rng(9);
  gen::TempDir dir;
  const Raster in{20, 24, 1, gen::pixels(20 * 24, rng)};
  write_netpbm(in, dir / "in.pgm");
  for (int k : {1, 3, 5}) {
    ASSERT_EQ(run_cli({"extract-ldp", (dir / "in.pgm").string(), (dir / "out.pgm").string(), "--k",
                       std::to_string(k)}),
              cli::kOk);
    const Raster out = read_netpbm(dir / "out.pgm");
    EXPECT_EQ(out.pixels, oracle::ldp(in.pixels, 20, 24, k)) << "k=" << k;
  }
  EXPECT_EQ(run_cli({"extract-ldp", (dir / "in.pgm").string(), (dir / "o.pgm").string(), "--k", "9"}), cli::kUsage);
}

TEST(Cli, SweepSinglePresetIsDeterministic) {
  gen::TempDir dir;
  const std::vector<std::string> base{"sweep", "--presets", "toy-b", "--epochs", "1", "--synth-per-class", "4",
                                      "--batch-size", "4", "--seed", "1"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  b.insert(b.end(), {"--out", (dir / "b").string(), "--jobs", "2"});
  ASSERT_EQ(run_cli(a), cli::kOk);
  ASSERT_EQ(run_cli(b), cli::kOk);
  const std::string csv = slurp(dir / "a" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_EQ(csv, slurp(dir / "b" / "sweep.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "config.json"));
  EXPECT_EQ(slurp(dir / "a" / "seed.txt"), "1\n");
}
