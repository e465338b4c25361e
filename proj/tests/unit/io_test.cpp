// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <limits>

#include "dfm/checkpoint.hpp"
#include "dfm/errors.hpp"
#include "dfm/io.hpp"
#include "dfm/synthetic.hpp"
#include "test_util.hpp"

namespace dfm {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfm_io_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr),
            std::numeric_limits<double>::denorm_min());
}

TEST(DatasetCsv, RoundTripWithLabels) {
  SyntheticSpec spec;
  spec.n = 50;
  spec.num_blobs = 3;
  const Dataset d = generate(spec);
  const std::string csv = dataset_to_csv(d);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "dim_0,dim_1,label");
  const Dataset back = dataset_from_csv(csv);
  EXPECT_EQ(back.points(), d.points());
  EXPECT_EQ(back.labels(), d.labels());
}

TEST(DatasetCsv, RoundTripWithoutLabels) {
  Rng rng(2);
  const Dataset d(testing::random_points(rng, 7, 3));
  const Dataset back = dataset_from_csv(dataset_to_csv(d));
  EXPECT_EQ(back.points(), d.points());
  EXPECT_FALSE(back.has_labels());
}

TEST(DatasetCsv, MalformedInputIsConfigurationError) {
  EXPECT_THROW(dataset_from_csv("dim_0,dim_1\n1,2\n3\n"), ConfigurationError);
  EXPECT_THROW(dataset_from_csv("dim_0\nabc\n"), ConfigurationError);
  EXPECT_THROW(dataset_from_csv(""), ConfigurationError);
}

TEST(AssignmentCsv, RoundTrip) {
  const std::vector<std::size_t> a = {0, 2, 1, 1, 0};
  const std::string csv = assignment_to_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,cluster");
  EXPECT_EQ(assignment_from_csv(csv), a);
}

TEST(SamplesCsv, RoundTrip) {
  Rng rng(3);
  const Matrix m = testing::random_points(rng, 5, 2);
  const std::string csv = samples_to_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_id,dim_0,dim_1");
  EXPECT_EQ(samples_from_csv(csv), m);
}

TEST(AtomicWrite, CreatesDirectoriesAndReplaces) {
  const fs::path dir = scratch("atomic");
  const fs::path f = dir / "a" / "b.txt";
  write_file_atomic(f, "one");
  write_file_atomic(f, "two");
  EXPECT_EQ(read_file(f), "two");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(f.parent_path())) ++entries;
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(read_file(dir / "missing"), IoError);
  fs::remove_all(dir);
}

Checkpoint sample_checkpoint() {
  Rng rng(9);
  MlpShape shape;
  shape.input_dim = 2;
  shape.output_dim = 2;
  shape.hidden = {8, 8};
  const MlpModel m = MlpModel::initialized(shape, rng);
  Checkpoint c;
  c.role = Role::kExpert;
  c.k = 3;
  c.num_experts = 8;
  c.shape = shape;
  c.params_raw = m.params();
  c.params_ema = m.params() * 0.5;
  c.params_ema[0] = 1.0 / 3.0;
  c.step = 42;
  c.seed = 7;
  c.config_hash = 0xfedcba9876543210ULL;
  return c;
}

TEST(Checkpoint, JsonRoundTripIsBitExact) {
  const Checkpoint c = sample_checkpoint();
  const std::string text = checkpoint_to_json(c);
  const Checkpoint back = checkpoint_from_json(text);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(checkpoint_to_json(back), text);
}

TEST(Checkpoint, FileRoundTrip) {
  const fs::path dir = scratch("ckpt");
  const Checkpoint c = sample_checkpoint();
  save_checkpoint(dir / checkpoint_filename(Role::kExpert, 3), c);
  EXPECT_TRUE(load_checkpoint(dir / "expert_3.json") == c);
  fs::remove_all(dir);
}

TEST(Checkpoint, RejectsWrongVersionAndGarbage) {
  std::string text = checkpoint_to_json(sample_checkpoint());
  const auto pos = text.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 11, "\"version\":9");
  EXPECT_THROW(checkpoint_from_json(text), ConfigurationError);
  EXPECT_THROW(checkpoint_from_json("{not json"), ConfigurationError);
  EXPECT_THROW(checkpoint_from_json("{}"), ConfigurationError);
}

TEST(Checkpoint, ModelUsesRequestedParameters) {
  const Checkpoint c = sample_checkpoint();
  EXPECT_EQ(c.model(false).params(), c.params_raw);
  EXPECT_EQ(c.model(true).params(), c.params_ema);
}

TEST(Checkpoint, Filenames) {
  EXPECT_EQ(checkpoint_filename(Role::kExpert, 5), "expert_5.json");
  EXPECT_EQ(checkpoint_filename(Role::kRouter), "router.json");
  EXPECT_EQ(checkpoint_filename(Role::kMonolith), "monolith.json");
  EXPECT_EQ(checkpoint_filename(Role::kStudent), "student.json");
}

}  // namespace
}  // namespace dfm
