#include "kcc/dataset.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "kcc/errors.hpp"

namespace kcc {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "kcc_dataset_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Dataset, SplitSizes) {
  EXPECT_EQ(train_split_size(1000), 800u);
  EXPECT_EQ(train_split_size(4), 3u);
  const auto d = generate(4, 1, ModelConfig{});
  EXPECT_EQ(d.train.size(), 3u);
  EXPECT_EQ(d.validation.size(), 1u);
  EXPECT_THROW(generate(1, 1, ModelConfig{}), ValidationError);
}

TEST(Dataset, LabelsAndSplitAreConsistent) {
  const ModelConfig cfg;
  const auto d = generate(1000, 7, cfg);
  ASSERT_EQ(d.size(), 1000u);
  EXPECT_EQ(d.train.size(), 800u);
  EXPECT_EQ(d.validation.size(), 200u);
  std::set<std::size_t> all(d.train.begin(), d.train.end());
  all.insert(d.validation.begin(), d.validation.end());
  EXPECT_EQ(all.size(), 1000u);
  for (const auto& s : d.samples) {
    EXPECT_TRUE(in_domain(s.state.xi));
    EXPECT_TRUE(in_domain(2.0 * s.state.xbar - s.state.xi, 1e-12));
    EXPECT_GE(s.V, 0.0);
  }
  const auto f = sdre_feedback(d.samples[123].state, cfg);
  EXPECT_EQ(f.V, d.samples[123].V);
  EXPECT_EQ(f.u, d.samples[123].u);
}

TEST(Dataset, DeterministicInSeed) {
  const auto a = generate(50, 3, ModelConfig{});
  const auto b = generate(50, 3, ModelConfig{});
  const auto c = generate(50, 4, ModelConfig{});
  EXPECT_EQ(a.train, b.train);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a.samples[k].V, b.samples[k].V);
  EXPECT_NE(a.samples[0].state.xi, c.samples[0].state.xi);
}

TEST(Dataset, SampleStatesCoverTheSquare) {
  const auto s = sample_states(4000, 11);
  double mx = -1, mn = 1;
  for (const auto& t : s) {
    mx = std::max(mx, t.xi);
    mn = std::min(mn, t.xi);
  }
  EXPECT_GT(mx, 0.99);
  EXPECT_LT(mn, -0.99);
}

TEST(Dataset, SaveLoadRoundTrip) {
  ModelConfig cfg;
  cfg.gamma = 0.05;
  const auto d = generate(40, 9, cfg);
  const auto path = scratch("rt.csv").string();
  save_dataset(d, path);
  const auto back = load_dataset(path);
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.model.gamma, 0.05);
  EXPECT_EQ(back.train, d.train);
  EXPECT_EQ(back.validation, d.validation);
  for (std::size_t k = 0; k < d.size(); ++k) {
    EXPECT_EQ(back.samples[k].state.xbar, d.samples[k].state.xbar);
    EXPECT_EQ(back.samples[k].gradV, d.samples[k].gradV);
  }
}

TEST(Dataset, LoadDetectsChangedModel) {
  const auto d = generate(40, 9, ModelConfig{});
  const auto path = scratch("tampered.csv").string();
  save_dataset(d, path);
  // Rewrite the metadata with another gamma: labels no longer match.
  std::ifstream in(metadata_path(path));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("gamma=");
  text.replace(pos, text.find('\n', pos) - pos, "gamma=0.5");
  std::ofstream(metadata_path(path)) << text;
  EXPECT_THROW(load_dataset(path), ValidationError);
  EXPECT_NO_THROW(load_dataset(path, false));
}

TEST(Dataset, LoadErrors) {
  EXPECT_THROW(load_dataset(scratch("missing.csv").string()), IoError);
  const auto path = scratch("bad_header.csv").string();
  std::ofstream(path) << "a,b\n1,2\n";
  EXPECT_THROW(load_dataset(path), SchemaError);
}

TEST(Dataset, UnwritablePathLeavesNothing) {
  const auto d = generate(10, 1, ModelConfig{});
  EXPECT_THROW(save_dataset(d, "/nonexistent_dir/x.csv"), IoError);
  EXPECT_FALSE(fs::exists("/nonexistent_dir"));
}

}  // namespace
}  // namespace kcc
