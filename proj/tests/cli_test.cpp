#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kcc/csv.hpp"
#include "kcc/dataset.hpp"
#include "kcc/errors.hpp"
#include "kcc/neural.hpp"

namespace kcc::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / "kcc_cli_test" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  // Runs the CLI in-process with --out-dir pointing at this test's directory.
  int kcc(std::vector<std::string> args, const fs::path& out_dir = {}) {
    args.insert(args.begin(), {"--out-dir", (out_dir.empty() ? dir_ : out_dir).string()});
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void write_file(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, HelpSucceeds) {
  EXPECT_EQ(kcc({"--help"}), kOk);
  EXPECT_NE(out_.str().find("simulate-kinetic"), std::string::npos);
  EXPECT_EQ(kcc({}), kValidation);
  EXPECT_EQ(kcc({"frobnicate"}), kValidation);
}

TEST_F(CliTest, GenDataDefaultSplit) {
  ASSERT_EQ(kcc({"gen-data"}), kOk) << err_.str();
  const auto d = load_dataset(path("dataset.csv"));
  EXPECT_EQ(d.size(), 1000u);
  EXPECT_EQ(d.train.size(), 800u);
  EXPECT_EQ(d.validation.size(), 200u);
  EXPECT_NE(out_.str().find("train=800 validation=200"), std::string::npos);
}

TEST_F(CliTest, GenDataFloorSplit) {
  ASSERT_EQ(kcc({"gen-data", "--n", "4", "--out", "tiny.csv"}), kOk) << err_.str();
  const auto d = load_dataset(path("tiny.csv"));
  EXPECT_EQ(d.train.size(), 3u);
  EXPECT_EQ(d.validation.size(), 1u);
}

TEST_F(CliTest, UnwritablePathLeavesNothing) {
  EXPECT_EQ(kcc({"gen-data", "--out", "no/such/dir/data.csv"}), kIo);
  EXPECT_TRUE(fs::is_empty(dir_));
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, InvalidConfigLeavesFilesystemUnchanged) {
  const fs::path out = dir_ / "out";
  fs::create_directories(out);
  write_file("bad.ini", "[model]\ngamma = -1\n");
  EXPECT_EQ(kcc({"--config", path("bad.ini"), "gen-data"}, out), kValidation);
  EXPECT_EQ(kcc({"--gamma", "0", "gen-data"}, out), kValidation);
  EXPECT_EQ(kcc({"--eps", "-0.1", "simulate-kinetic"}, out), kValidation);
  EXPECT_EQ(kcc({"--controller", "openloop", "simulate-kinetic"}, out), kValidation);
  EXPECT_TRUE(fs::is_empty(out));
}

TEST_F(CliTest, ConfigRejectsUnknownKeysAndBadNumbers) {
  write_file("typo.ini", "[model]\ngama = 0.1\n");
  EXPECT_EQ(kcc({"--config", path("typo.ini"), "gen-data"}), kValidation);
  EXPECT_NE(err_.str().find("model.gama"), std::string::npos);
  write_file("nan.ini", "[train]\nepochs = ten\n");
  EXPECT_EQ(kcc({"--config", path("nan.ini"), "gen-data"}), kValidation);
  EXPECT_EQ(kcc({"--config", path("missing.ini"), "gen-data"}), kIo);
}

TEST_F(CliTest, ConfigRoundTrip) {
  RunConfig c;
  c.model.gamma = 0.05;
  c.grid.mu_dV = {0.0, 0.01, 0.1};
  c.kinetic.f0 = MixtureSpec{{{0.25, -0.3, 0.1}, {0.75, 0.6, 0.2}}};
  c.kinetic.controller = ControllerKind::nn_direct;
  c.target = Target::control;
  c.paths.out_dir = "runs/a";
  const RunConfig back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(back.kinetic.f0.components[1].mean, 0.6);
  EXPECT_EQ(back.grid.mu_dV, c.grid.mu_dV);
  EXPECT_EQ(back.resolve("x.csv"), "runs/a/x.csv");
  EXPECT_EQ(back.resolve("/abs/x.csv"), "/abs/x.csv");
}

TEST_F(CliTest, TrainZeroEpochsWritesSeededInit) {
  write_file("small.ini", "[train]\nwidth = 6\nseed = 9\n");
  ASSERT_EQ(kcc({"gen-data", "--n", "40"}), kOk);
  ASSERT_EQ(kcc({"--config", path("small.ini"), "train", "--epochs", "0"}), kOk) << err_.str();
  EXPECT_EQ(slurp(path("value_model.json")), mlp_to_json(make_mlp(1, 9, 6, 2)));
  const auto h = read_csv(path("value_model_history.csv"));
  require_header(h, {"epoch", "train_loss", "val_loss"}, "history");
  EXPECT_EQ(h.rows.size(), 1u);
}

TEST_F(CliTest, TrainIsByteReproducible) {
  write_file("small.ini", "[train]\nwidth = 8\nepochs = 40\n");
  ASSERT_EQ(kcc({"gen-data", "--n", "60"}), kOk);
  ASSERT_EQ(kcc({"--config", path("small.ini"), "train", "--out", "a.json"}), kOk);
  ASSERT_EQ(kcc({"--config", path("small.ini"), "train", "--out", "b.json"}), kOk);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a_history.csv")), slurp(path("b_history.csv")));
  ASSERT_EQ(kcc({"--config", path("small.ini"), "--seed", "5", "train", "--out", "c.json"}), kOk);
  EXPECT_NE(slurp(path("a.json")), slurp(path("c.json")));
}

TEST_F(CliTest, DivergenceKeepsHistory) {
  write_file("wild.ini", "[train]\nwidth = 4\nepochs = 50\noptimizer = sgd\nlearning_rate = 1e200\n");
  ASSERT_EQ(kcc({"gen-data", "--n", "20"}), kOk);
  EXPECT_EQ(kcc({"--config", path("wild.ini"), "train"}), kNumerical);
  EXPECT_FALSE(fs::exists(path("value_model.json")));
  const auto h = read_csv(path("value_model_history.csv"));
  ASSERT_GE(h.rows.size(), 1u);
  EXPECT_TRUE(std::isfinite(h.rows.front()[1]));
}

TEST_F(CliTest, MissingDatasetIsAnIoError) {
  EXPECT_EQ(kcc({"train"}), kIo);
  EXPECT_EQ(kcc({"--controller", "nn_value", "simulate-binary"}), kIo);
}

TEST_F(CliTest, GridSearchLeaderboardSorted) {
  write_file("grid.ini", "[train]\nepochs = 60\nlearning_rate = 0.01\n[grid]\nmu_dv = 0, 0.05\nwidths = 6, 10\n");
  ASSERT_EQ(kcc({"gen-data", "--n", "80"}), kOk);
  ASSERT_EQ(kcc({"--config", path("grid.ini"), "grid-search"}), kOk) << err_.str();
  const auto t = read_csv(path("leaderboard.csv"));
  require_header(t, {"mu_dV", "width", "depth", "val_mre", "val_mse", "val_r2"}, "leaderboard");
  ASSERT_EQ(t.rows.size(), 4u);
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LE(t.rows[k - 1][3], t.rows[k][3]);
  const Mlp best = load_mlp(path("value_model.json"));
  EXPECT_EQ(best.layer_dims()[1], static_cast<int>(t.rows[0][1]));
  EXPECT_EQ(kcc({"--mu-dv", "0", "--mu-dv", "0.05", "train"}), kValidation);
}

TEST_F(CliTest, EvalWritesTableShapedCsv) {
  write_file("small.ini", "[train]\nwidth = 8\nepochs = 30\n[eval]\ngrid_per_axis = 15\n");
  ASSERT_EQ(kcc({"gen-data", "--n", "50"}), kOk);
  ASSERT_EQ(kcc({"--config", path("small.ini"), "train"}), kOk);
  ASSERT_EQ(kcc({"--config", path("small.ini"), "train", "--target", "control"}), kOk);
  ASSERT_EQ(kcc({"--config", path("small.ini"), "eval"}), kOk) << err_.str();
  std::ifstream in(path("eval.csv"));
  std::string line;
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> cells;
  std::getline(in, line);
  EXPECT_EQ(line, "quantity,mse,r2,mre");
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> row;
    for (std::string c; std::getline(ss, c, ',');) row.push_back(c);
    names.push_back(row[0]);
    cells.push_back(row);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"V_theta", "dV_theta", "u_V", "u_theta"}));
  // u_V is a uniform scaling of dV_theta.
  EXPECT_EQ(cells[1][3], cells[2][3]);
  EXPECT_NEAR(std::stod(cells[1][2]), std::stod(cells[2][2]), 1e-12);
}

TEST_F(CliTest, BinaryConsensusStartIsFlat) {
  ASSERT_EQ(kcc({"--controller", "none", "simulate-binary", "--xi", "0.3", "--xj", "0.3", "--T", "5"}), kOk);
  const auto rec = read_trajectory_csv(path("trajectory_none.csv"));
  ASSERT_EQ(rec.size(), 501u);
  for (double g : rec.consensus_gap) EXPECT_EQ(g, 0.0);
  EXPECT_TRUE(fs::exists(path("trajectory_gap.svg")));
}

TEST_F(CliTest, BinarySdreBeatsOpenLoop) {
  ASSERT_EQ(kcc({"simulate-binary", "--controllers", "none,sdre,openloop"}), kOk) << err_.str();
  const auto sdre = read_trajectory_csv(path("trajectory_sdre.csv"));
  const auto pmp = read_trajectory_csv(path("trajectory_openloop.csv"));
  const double ts = sdre.first_time_gap_below(0.1);
  const double tp = pmp.first_time_gap_below(0.1);
  ASSERT_GE(ts, 0.0);
  EXPECT_TRUE(tp < 0.0 || tp > ts);
}

TEST_F(CliTest, UncontrolledKineticRunPolarizes) {
  // Reference run (1e5 agents): outer-quartile mass 0.50, 0.72, 0.86, 0.98
  // at steps 0, 10, 20, 50.
  ASSERT_EQ(kcc({"--controller", "none", "simulate-kinetic", "--n-agents", "10000", "--steps", "50"}), kOk)
      << err_.str();
  const auto h = read_csv(path("kinetic_none_step50.csv"));
  double outer = 0.0, width = h.rows[1][0] - h.rows[0][0];
  for (const auto& r : h.rows) {
    if (std::abs(r[0]) > 0.5) outer += r[1] * width;
  }
  EXPECT_GT(outer, 0.8);
  const auto stats = read_csv(path("kinetic_none_stats.csv"));
  EXPECT_EQ(stats.rows.size(), 51u);
  for (const char* f : {"kinetic_none_overlay.svg", "kinetic_none_surface.svg", "kinetic_none_step00.svg"}) {
    EXPECT_TRUE(fs::exists(path(f))) << f;
  }
}

TEST_F(CliTest, PlotTrajectoryAndHistograms) {
  ASSERT_EQ(kcc({"simulate-binary", "--T", "1", "--out-prefix", "traj"}), kOk);
  const fs::path plots = dir_ / "plots";
  fs::create_directories(plots);
  ASSERT_EQ(kcc({"plot", path("traj_sdre.csv")}, plots), kOk) << err_.str();
  EXPECT_EQ(std::distance(fs::directory_iterator(plots), fs::directory_iterator{}), 1);
  EXPECT_NE(slurp(plots / "traj_sdre.svg").find("<polyline"), std::string::npos);

  ASSERT_EQ(kcc({"simulate-kinetic", "--n-agents", "1000", "--steps", "9", "--out-prefix", "kin"}), kOk);
  const fs::path hist = dir_ / "hist";
  fs::create_directories(hist);
  std::vector<std::string> args = {"plot"};
  for (int k = 0; k < 10; ++k) args.push_back(path("kin_step0" + std::to_string(k) + ".csv"));
  ASSERT_EQ(kcc(args, hist), kOk) << err_.str();
  EXPECT_EQ(std::distance(fs::directory_iterator(hist), fs::directory_iterator{}), 11);
  EXPECT_TRUE(fs::exists(hist / "density_overlay.svg"));
}

TEST_F(CliTest, PlotRejectsEmptyCsv) {
  write_file("empty.csv", "");
  write_file("header_only.csv", "t,xi,xj,ui,uj,cost,gap\n");
  write_file("odd.csv", "a,b\n1,2\n");
  const fs::path plots = dir_ / "plots";
  fs::create_directories(plots);
  EXPECT_EQ(kcc({"plot", path("empty.csv")}, plots), kIo);
  EXPECT_EQ(kcc({"plot", path("header_only.csv")}, plots), kIo);
  EXPECT_EQ(kcc({"plot", path("odd.csv")}, plots), kIo);
  EXPECT_TRUE(fs::is_empty(plots));
}

TEST(ExitCodes, MapTheErrorHierarchy) {
  EXPECT_EQ(exit_code_for(ValidationError("x")), kValidation);
  EXPECT_EQ(exit_code_for(DomainViolation("x")), kValidation);
  EXPECT_EQ(exit_code_for(NoConvergence("x")), kNumerical);
  EXPECT_EQ(exit_code_for(DivergedTraining("x")), kNumerical);
  EXPECT_EQ(exit_code_for(IoError("x")), kIo);
  EXPECT_EQ(exit_code_for(SchemaError("x")), kIo);
}

// Two full pipeline runs with one seed give identical CSVs.
TEST_F(CliTest, EndToEndDeterminism) {
  write_file("e2e.ini",
             "[dataset]\nn_samples = 60\n[train]\nwidth = 8\nepochs = 40\n"
             "[eval]\ngrid_per_axis = 12\n[binary]\nT = 2\n[kinetic]\nn_agents = 2000\nn_steps = 3\n");
  auto pipeline = [&](const fs::path& out) {
    fs::create_directories(out);
    const std::string cfg = path("e2e.ini");
    for (std::vector<std::string> cmd : {std::vector<std::string>{"gen-data"},
                                         {"train"},
                                         {"train", "--target", "control"},
                                         {"eval"},
                                         {"simulate-binary", "--controllers", "none,sdre,nn_value,nn_direct,openloop"},
                                         {"--controller", "nn_value", "simulate-kinetic"},
                                         {"--controller", "sdre", "simulate-kinetic"}}) {
      cmd.insert(cmd.begin(), {"--config", cfg, "--seed", "3"});
      ASSERT_EQ(kcc(cmd, out), kOk) << err_.str();
    }
  };
  pipeline(dir_ / "a");
  pipeline(dir_ / "b");
  int compared = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "a")) {
    const auto other = dir_ / "b" / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++compared;
  }
  EXPECT_GT(compared, 20);
}

}  // namespace
}  // namespace kcc::cli
