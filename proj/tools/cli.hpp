#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kcc/binary_model.hpp"
#include "kcc/kinetic.hpp"
#include "kcc/neural.hpp"
#include "kcc/sdre_feedback.hpp"

namespace kcc::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2, kIo = 3 };

/// Maps the library error hierarchy onto the exit codes above.
int exit_code_for(const std::exception& e);

struct DatasetSection {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 1;
};

struct BinarySection {
  double xi = -0.5;
  double xj = 0.5;
  double dt = 0.01;
  double T = 100.0;
  ControllerKind controller = ControllerKind::sdre;
  int pmp_max_sweeps = 2000;
  double pmp_tol = 1e-6;
};

struct GridSection {
  std::vector<double> mu_dV = {0.0, 0.05};
  std::vector<int> widths = {100};
  std::vector<int> depths = {2};
};

struct EvalSection {
  int grid_per_axis = 316;  // 316^2, about 1e5 points
};

/// Relative paths are resolved against out_dir.
struct PathsSection {
  std::string out_dir = ".";
  std::string data = "dataset.csv";
  std::string value_model = "value_model.json";
  std::string control_model = "control_model.json";
};

struct RunConfig {
  ModelConfig model;
  DatasetSection dataset;
  TrainConfig train;
  Target target = Target::value;
  GridSection grid;
  BinarySection binary;
  KineticConfig kinetic;
  EvalSection eval;
  PathsSection paths;
  int threads = 0;  // 0: machine parallelism

  void validate() const;
  std::string resolve(const std::string& path) const;
};

/// INI file with one section per module. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& where = "config");

/// Serializes `cfg` in the format read by parse_config.
std::string format_config(const RunConfig& cfg);

/// Full command-line entry point. Never throws; returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kcc::cli
