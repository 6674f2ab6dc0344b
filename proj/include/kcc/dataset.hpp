#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kcc/binary_model.hpp"
#include "kcc/sdre_feedback.hpp"

namespace kcc {

/// One row of the supervised datasets: the value/gradient labels and the
/// control label, all from the frozen Riccati solution at `state`.
struct LabeledSample {
  TransformedState state;
  double V = 0.0;
  Vec2 gradV = Vec2::Zero();
  Vec2 u = Vec2::Zero();
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::uint64_t seed = 0;
  ModelConfig model;
  std::vector<std::size_t> train;       // indices into samples
  std::vector<std::size_t> validation;  // disjoint from train

  std::size_t size() const { return samples.size(); }
};

/// Training-split size for n samples: floor(4n/5).
std::size_t train_split_size(std::size_t n);

/// Draws (x_i, x_j) uniformly on [-1, 1]^2 and maps each pair to (x_i, xbar).
std::vector<TransformedState> sample_states(std::size_t n, std::uint64_t seed);

/// One Riccati solve per sampled state, then a seeded shuffle and an 80/20
/// split. Requires n >= 2 so both splits are nonempty.
Dataset generate(std::size_t n, std::uint64_t seed, const ModelConfig& cfg);

LabeledSample label_state(const TransformedState& t, const ModelConfig& cfg);

/// Writes `xi,xbar,V,dV1,dV2,u1,u2` to `csv_path` and the metadata
/// (seed, beta, gamma, split) to `metadata_path(csv_path)`.
void save_dataset(const Dataset& d, const std::string& csv_path);

/// Loads a dataset saved by save_dataset. When `verify` is set, ten rows
/// chosen by the stored seed are re-solved and must match to 1e-9.
Dataset load_dataset(const std::string& csv_path, bool verify = true);

std::string metadata_path(const std::string& csv_path);

/// Recomputes labels of `rows` seeded-random samples; throws ValidationError
/// on a mismatch above `tol`.
void verify_labels(const Dataset& d, std::size_t rows = 10, double tol = 1e-9);

}  // namespace kcc
