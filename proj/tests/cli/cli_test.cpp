// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the dfm executable.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dfm/checkpoint.hpp"
#include "dfm/io.hpp"

namespace dfm {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("dfm_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs dfm inside the scratch directory; stdout goes to out.txt.
  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" DFM_CLI_PATH "' " + args +
                            " > out.txt 2> err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out() const { return read_file(dir_ / "out.txt"); }
  std::string err() const { return read_file(dir_ / "err.txt"); }
  std::string file(const fs::path& rel) const { return read_file(dir_ / rel); }
  bool exists(const fs::path& rel) const { return fs::exists(dir_ / rel); }
  void write(const fs::path& rel, const std::string& text) const {
    write_file_atomic(dir_ / rel, text);
  }

  // 400 blob points partitioned into four clusters under runs/t.
  void data_and_partition(std::size_t k = 4) {
    ASSERT_EQ(run("--name t gen-data --shape blobs --n 400 --blobs 4 --seed 1"), 0) << err();
    ASSERT_EQ(run("--name t cluster --data runs/t/data/dataset.csv --k " + std::to_string(k) +
                  " --m 16 --seed 2"),
              0)
        << err();
  }

  static constexpr const char* kTrain =
      "--data runs/t/data/dataset.csv --partition runs/t/partition/assignment.csv --seed 3 "
      "--schedule linear --steps 20 --batch 32 --hidden 8";

  fs::path dir_;
};

TEST_F(Cli, GenDataWritesLabelledBlobs) {
  ASSERT_EQ(run("--name t gen-data --shape blobs --n 80 --blobs 8 --separation 10 --seed 5"), 0);
  const std::string csv = file("runs/t/data/dataset.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dim_0,dim_1,label");
  const Dataset d = dataset_from_csv(csv);
  EXPECT_EQ(d.size(), 80u);
  EXPECT_EQ(d.num_labels(), 8u);
  EXPECT_TRUE(exists("runs/t/manifest/gen-data.json"));
}

TEST_F(Cli, GenDataSingleRowAndDeterminism) {
  ASSERT_EQ(run("--name a gen-data --shape moons --n 1 --seed 9"), 0);
  EXPECT_EQ(dataset_from_csv(file("runs/a/data/dataset.csv")).size(), 1u);
  ASSERT_EQ(run("--name a gen-data --shape spiral --n 50 --seed 9 --out x.csv"), 0);
  ASSERT_EQ(run("--name b gen-data --shape spiral --n 50 --seed 9 --out y.csv"), 0);
  EXPECT_EQ(file("x.csv"), file("y.csv"));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("--name t gen-data --shape hexagon --n 5 --seed 1"), 2);
  EXPECT_EQ(run("--name t gen-data --shape blobs --n 5 --seed 1 --frobnicate"), 2);
  EXPECT_NE(err().find("frobnicate"), std::string::npos);
  EXPECT_EQ(run("--name t gen-data --shape blobs --n 5"), 2);  // no seed
  EXPECT_EQ(run("--name t"), 2);                                // no command
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, ClusterWritesAssignmentAndSidecar) {
  data_and_partition();
  const auto a = assignment_from_csv(file("runs/t/partition/assignment.csv"));
  EXPECT_EQ(a.size(), 400u);
  const std::string side = file("runs/t/partition/centroids.json");
  EXPECT_NE(side.find("\"coarse_centroids\""), std::string::npos);
  EXPECT_NE(side.find("\"fine_centroids\""), std::string::npos);
  EXPECT_EQ(run("--name t cluster --data missing.csv --k 4 --seed 1"), 3);
  EXPECT_NE(err().find("missing.csv"), std::string::npos);
}

TEST_F(Cli, MonolithEqualsSoleExpert) {
  data_and_partition(1);
  const std::string common =
      "--data runs/t/data/dataset.csv --seed 3 --schedule linear --steps 20 --batch 32 --hidden 8";
  ASSERT_EQ(run("--name t train --role monolith " + common), 0) << err();
  ASSERT_EQ(run("--name t train --role expert --k 0 --partition runs/t/partition/assignment.csv " +
                common),
            0)
      << err();
  const Checkpoint m = load_checkpoint(dir_ / "runs/t/checkpoints/monolith.json");
  const Checkpoint e = load_checkpoint(dir_ / "runs/t/checkpoints/expert_0.json");
  EXPECT_EQ(m.params_raw, e.params_raw);
  EXPECT_EQ(m.params_ema, e.params_ema);
}

TEST_F(Cli, TrainNeedsPartitionScheduleAndSeed) {
  data_and_partition();
  EXPECT_EQ(run("--name t train --role expert --k 0 --data runs/t/data/dataset.csv --seed 1 "
                "--schedule linear"),
            2);
  EXPECT_NE(err().find("--partition"), std::string::npos);
  EXPECT_EQ(run("--name t train --role router --data runs/t/data/dataset.csv --seed 1 "
                "--partition runs/t/partition/assignment.csv"),
            2);
  EXPECT_EQ(run("--name t train --role monolith --data runs/t/data/dataset.csv "
                "--schedule linear"),
            2);
}

TEST_F(Cli, DecentralizedWritesAllCheckpointsAndLedger) {
  data_and_partition();
  ASSERT_EQ(run(std::string("--name t train --decentralized --experts 4 ") + kTrain), 0) << err();
  for (int k = 0; k < 4; ++k) {
    EXPECT_TRUE(exists("runs/t/checkpoints/expert_" + std::to_string(k) + ".json"));
    EXPECT_TRUE(exists("runs/t/metrics/expert_" + std::to_string(k) + ".csv"));
  }
  EXPECT_TRUE(exists("runs/t/checkpoints/router.json"));
  const std::string metrics = file("runs/t/metrics/router.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "step,loss,flops");
  EXPECT_NE(file("runs/t/reports/training_ledger.json").find("router_overhead"),
            std::string::npos);
  EXPECT_EQ(run(std::string("--name t train --decentralized --experts 5 ") + kTrain), 3);
}

TEST_F(Cli, InterruptedExpertCanBeRetrainedAlone) {
  data_and_partition();
  ASSERT_EQ(run(std::string("--name clean train --decentralized ") + kTrain), 0) << err();
  EXPECT_EQ(run(std::string("--name t train --decentralized --inject-fault expert:2:7 ") + kTrain),
            5);
  EXPECT_NE(err().find("expert 2"), std::string::npos);
  EXPECT_FALSE(exists("runs/t/checkpoints/expert_2.json"));
  for (const char* f : {"expert_0.json", "expert_1.json", "expert_3.json", "router.json"}) {
    EXPECT_EQ(file(fs::path("runs/t/checkpoints") / f), file(fs::path("runs/clean/checkpoints") / f))
        << f;
  }
  ASSERT_EQ(run(std::string("--name t train --role expert --k 2 ") + kTrain), 0) << err();
  EXPECT_EQ(file("runs/t/checkpoints/expert_2.json"), file("runs/clean/checkpoints/expert_2.json"));
}

TEST_F(Cli, SerialAndThreadedRunsMatch) {
  data_and_partition();
  ASSERT_EQ(run(std::string("--name s train --decentralized --mode serial ") + kTrain), 0);
  ASSERT_EQ(run(std::string("--name p train --decentralized --mode threads ") + kTrain), 0);
  for (const auto& e : fs::directory_iterator(dir_ / "runs/s/checkpoints")) {
    EXPECT_EQ(read_file(e.path()), file("runs/p/checkpoints" / e.path().filename()));
  }
}

TEST_F(Cli, SampleStrategiesAndErrors) {
  data_and_partition();
  ASSERT_EQ(run(std::string("--name t train --decentralized ") + kTrain), 0) << err();
  ASSERT_EQ(run("--name t sample --strategy top-2 --n 30 --steps 5 --seed 4"), 0) << err();
  const Matrix s = samples_from_csv(file("runs/t/samples/top-2.csv"));
  EXPECT_EQ(s.rows(), 30);
  EXPECT_NE(file("runs/t/reports/sample_top-2.json").find("\"cost_per_step\""),
            std::string::npos);
  ASSERT_EQ(run("--name t sample --strategy threshold --tau 0.05 --n 5 --steps 3 --seed 4 "
                "--trajectory"),
            0);
  EXPECT_TRUE(exists("runs/t/samples/threshold-0.05_trajectory.csv"));
  EXPECT_EQ(run("--name t sample --strategy oracle --n 5 --seed 4"), 2);
  EXPECT_EQ(run("--name t sample --strategy oracle --label 1 --n 5 --steps 3 --seed 4"), 0);
  EXPECT_EQ(run("--name t sample --strategy top-9 --n 5 --seed 4"), 2);
  EXPECT_EQ(run("--name t sample --strategy full --n 5 --seed 4 --schedule cosine"), 3);
  // An expert from a different K.
  fs::copy_file(dir_ / "runs/t/checkpoints/expert_0.json", dir_ / "runs/t/checkpoints/expert_4.json");
  EXPECT_EQ(run("--name t sample --strategy full --n 5 --seed 4"), 3);
}

TEST_F(Cli, AnalyticalSamplingNeedsNoTraining) {
  data_and_partition();
  ASSERT_EQ(run("--name t sample --analytical --data runs/t/data/dataset.csv --partition "
                "runs/t/partition/assignment.csv --schedule linear --strategy full --n 20 "
                "--steps 10 --seed 1"),
            0)
      << err();
  EXPECT_EQ(samples_from_csv(file("runs/t/samples/full.csv")).rows(), 20);
  EXPECT_EQ(run("--name t sample --analytical --strategy full --n 20 --seed 1"), 2);
}

TEST_F(Cli, FlopsTable) {
  ASSERT_EQ(run("--name t flops --expert-gflops 308 --router-gflops 26 --k 8 --table1"), 0);
  const std::string o = out();
  EXPECT_EQ(o.substr(0, o.find('\n')), "strategy,cost_per_step");
  EXPECT_NE(o.find("Monolith,308\n"), std::string::npos);
  EXPECT_NE(o.find("Top-1,334\n"), std::string::npos);
  EXPECT_NE(o.find("Top-2,642\n"), std::string::npos);
  EXPECT_NE(o.find("Top-3,950\n"), std::string::npos);
  EXPECT_NE(o.find("Full,2490\n"), std::string::npos);
  EXPECT_LT(o.find("Monolith"), o.find("Full"));
  ASSERT_EQ(run("--name t flops --expert-gflops 308 --router-gflops 26 --k 8 --strategy top-2"), 0);
  EXPECT_EQ(out(), "strategy,cost_per_step\ntop-2,642\n");
  EXPECT_EQ(run("--name t flops --expert-gflops 308 --router-gflops 26 --k 8"), 2);
}

// Parses reports CSV rows into arm -> value for one metric.
std::map<std::string, double> metric_by_arm(const std::string& csv, const std::string& metric) {
  std::map<std::string, double> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (cells.size() > 3 && cells[2] == metric) out[cells[1]] = std::stod(cells[3]);
  }
  return out;
}

TEST_F(Cli, AnalyticalStrategyTable) {
  ASSERT_EQ(run("--name t eval --experiment strategy_table --analytical --seeds 0 --n-data 200 "
                "--k 4 --m 8 --n-samples 64 --sampler-steps 8"),
            0)
      << err();
  EXPECT_TRUE(exists("runs/t/reports/strategy_table.json"));
  EXPECT_TRUE(exists("runs/t/reports/strategy_table_table.csv"));
  const auto sw = metric_by_arm(file("runs/t/reports/strategy_table.csv"), "sliced_wasserstein");
  ASSERT_TRUE(sw.count("full") && sw.count("monolith") && sw.count("top-1"));
  EXPECT_NEAR(sw.at("full"), sw.at("monolith"), 1e-9);
}

TEST_F(Cli, EvalErrors) {
  EXPECT_EQ(run("--name t eval --experiment nonsense"), 3);
  EXPECT_EQ(run("--name t eval"), 2);
  EXPECT_EQ(run("--name t eval --experiment cluster_ablation --seeds 0 --n-data 200 --k 4 --m 8 "
                "--require-checkpoints --cache empty"),
            3);
  EXPECT_NE(err().find("feature-kmeans"), std::string::npos);
}

TEST_F(Cli, EvalScoresSampleFiles) {
  ASSERT_EQ(run("--name t gen-data --shape blobs --n 100 --seed 1 --out ref.csv"), 0);
  ASSERT_EQ(run("--name t gen-data --shape blobs --n 100 --seed 1 --out same.csv"), 0);
  const Dataset d = load_dataset(dir_ / "same.csv");
  write("same_samples.csv", samples_to_csv(d.points()));
  ASSERT_EQ(run("--name t eval --samples same_samples.csv --reference ref.csv"), 0) << err();
  EXPECT_NE(out().find("sliced_wasserstein,0\n"), std::string::npos) << out();
}

TEST_F(Cli, ConfigOverlayAndFlagPrecedence) {
  data_and_partition();
  write("c.txt", "# overlay\nsteps = 5\nbatch=32\nhidden = 8\nschedule=linear\n");
  ASSERT_EQ(run("--name t --config c.txt train --role monolith --data runs/t/data/dataset.csv "
                "--seed 1 --steps 7"),
            0)
      << err();
  const Checkpoint c = load_checkpoint(dir_ / "runs/t/checkpoints/monolith.json");
  EXPECT_EQ(c.step, 7u);
  write("c.json", R"({"steps": 4, "batch": 32, "hidden": [8], "schedule": "cosine"})");
  ASSERT_EQ(run("--name t --config c.json train --role monolith --data runs/t/data/dataset.csv "
                "--seed 1"),
            0)
      << err();
  const Checkpoint j = load_checkpoint(dir_ / "runs/t/checkpoints/monolith.json");
  EXPECT_EQ(j.step, 4u);
  EXPECT_EQ(j.schedule, ScheduleKind::kCosine);
  write("bad.txt", "stepz=3\n");
  EXPECT_EQ(run("--name t --config bad.txt train --role monolith --data x --seed 1 "
                "--schedule linear"),
            2);
  EXPECT_EQ(run("--name t --config nope.txt flops --expert-gflops 1 --router-gflops 1 --k 1 "
                "--table1"),
            3);
}

TEST_F(Cli, ManifestReproducesOutputs) {
  data_and_partition();
  ASSERT_EQ(run(std::string("--name t train --decentralized ") + kTrain), 0);
  ASSERT_EQ(run("--name t sample --strategy sample-2 --n 40 --steps 6 --seed 8"), 0);
  const std::string samples = file("runs/t/samples/sample-2.csv");
  const std::string ckpt = file("runs/t/checkpoints/expert_1.json");
  fs::copy_file(dir_ / "runs/t/manifest/train.json", dir_ / "train.json");
  fs::copy_file(dir_ / "runs/t/manifest/sample.json", dir_ / "sample.json");
  fs::remove_all(dir_ / "runs/t/checkpoints");
  fs::remove_all(dir_ / "runs/t/samples");
  ASSERT_EQ(run("--name t --config train.json train"), 0) << err();
  ASSERT_EQ(run("--name t --config sample.json sample"), 0) << err();
  EXPECT_EQ(file("runs/t/checkpoints/expert_1.json"), ckpt);
  EXPECT_EQ(file("runs/t/samples/sample-2.csv"), samples);
  EXPECT_EQ(file("runs/t/manifest/train.json"), file("train.json"));
  EXPECT_EQ(run("--name t --config train.json sample"), 2);
}

}  // namespace
}  // namespace dfm
