#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kcc/binary_model.hpp"
#include "kcc/dataset.hpp"
#include "kcc/sdre_feedback.hpp"

namespace kcc {

enum class Activation { identity, sigmoid };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// y = act(W x + b)
struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  Activation act = Activation::identity;
};

/// Plain feed-forward network. Samples are columns throughout.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_dim, std::vector<DenseLayer> layers);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  /// Output width of every layer, e.g. {2, 100, 100, 1}.
  std::vector<int> layer_dims() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::Index parameter_count() const;
  /// Flattened as W (column-major) then b, layer by layer.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);

  bool all_finite() const;
  /// Throws ValidationError on a broken dimension chain.
  void validate() const;

 private:
  int input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

/// Affine input layer (identity), `depth` sigmoid layers of `width`, then an
/// identity output layer of size `out`. Weights and biases are drawn
/// uniformly from ±1/sqrt(fan_in).
Mlp make_mlp(int out, std::uint64_t seed, int width = 100, int depth = 2);

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x);
Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& X);

struct ValueGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};
struct ValueGradientBatch {
  Eigen::RowVectorXd value;
  Eigen::MatrixXd gradient;  // input_dim x batch
};

/// Scalar-output nets only.
ValueGradient input_gradient(const Mlp& net, const Eigen::VectorXd& x);
ValueGradientBatch input_gradient_batch(const Mlp& net, const Eigen::MatrixXd& X);

enum class Target { value, control };
std::string to_string(Target t);
Target parse_target(const std::string& name);

struct TrainingBatch {
  Eigen::MatrixXd x;      // 2 x B
  Eigen::RowVectorXd V;   // value targets
  Eigen::MatrixXd dV;     // 2 x B
  Eigen::MatrixXd u;      // 2 x B
};

TrainingBatch make_batch(const Dataset& d, const std::vector<std::size_t>& idx);

struct LossResult {
  double loss = 0.0;
  double value_part = 0.0;     // MSE of V (or of u for control nets)
  double gradient_part = 0.0;  // MSE of the input gradient; 0 for control nets
  std::vector<DenseLayer> grads;  // same shapes as the net
};

/// value target: mean (V_θ - V)^2 + mu_dV * mean ‖∇V_θ - ∇V‖^2, with exact
/// parameter gradients (second-order terms included).
/// control target: mean ‖u_θ - u‖^2, mu_dV ignored.
LossResult loss_and_param_grad(const Mlp& net, const TrainingBatch& batch, double mu_dV,
                               Target target);
/// Loss only; skips the backward pass.
LossResult loss_only(const Mlp& net, const TrainingBatch& batch, double mu_dV, Target target);

Eigen::VectorXd flatten(const std::vector<DenseLayer>& grads);

struct TrainConfig {
  double mu_dV = 0.05;
  double learning_rate = 1e-3;
  int epochs = 5000;
  int batch_size = 0;  // 0 means full batch
  std::uint64_t seed = 1;
  std::string optimizer = "adam";  // adam or sgd
  int width = 100;
  int depth = 2;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Mlp net;
  std::vector<EpochRecord> history;  // entry k: after k optimizer epochs
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on d.train, selects the parameters with the lowest validation
/// loss. Throws DivergedTraining on a non-finite loss; `on_epoch` has seen
/// every record up to the failure.
TrainResult train(const Dataset& d, Target target, const TrainConfig& tc,
                  const EpochCallback& on_epoch = {});

struct FitMetrics {
  double mse = 0.0;
  double r2 = 0.0;
  double mre = 0.0;
};

/// pred/truth are components x points. MRE skips points with ‖truth‖ <= 1e-12.
FitMetrics fit_metrics(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// States with SDRE ground truth.
struct EvaluationGrid {
  std::vector<TransformedState> states;
  Eigen::MatrixXd x;         // 2 x N
  Eigen::RowVectorXd V;
  Eigen::MatrixXd dV;        // 2 x N
  Eigen::MatrixXd u;         // 2 x N
};

/// per_axis^2 uniform points on (x_i, x_j) in [-1, 1]^2.
std::vector<TransformedState> uniform_grid(int per_axis);
EvaluationGrid make_evaluation_grid(const std::vector<TransformedState>& states,
                                    const ModelConfig& cfg);
EvaluationGrid make_evaluation_grid(const Dataset& d, const std::vector<std::size_t>& idx);

struct EvaluationReport {
  Target target = Target::value;
  std::optional<FitMetrics> V, dV, u_V, u;
};

/// Control induced by a value net: -(1/2) R^{-1} B^T ∇V_θ.
Eigen::MatrixXd value_net_controls(const Mlp& net, const Eigen::MatrixXd& X, const ModelConfig& cfg);

EvaluationReport evaluate(const Mlp& net, const EvaluationGrid& grid, const ModelConfig& cfg,
                          Target target);

struct GridSpec {
  std::vector<double> mu_dV = {0.0, 0.05};
  std::vector<int> widths = {100};
  std::vector<int> depths = {2};
  TrainConfig base;
  Target target = Target::value;
};

struct LeaderboardRow {
  double mu_dV = 0.0;
  int width = 0;
  int depth = 0;
  double val_mre = 0.0;  // u_V for value nets, u for control nets
  double val_mse = 0.0;
  double val_r2 = 0.0;
  std::string error;  // nonempty if the run failed
};

struct GridSearchResult {
  TrainConfig best;
  Mlp best_net;
  std::vector<LeaderboardRow> leaderboard;  // sorted, failures last
};

GridSearchResult grid_search(const Dataset& d, const GridSpec& spec);

/// Feedback from a value net: first component of -(1/2) R^{-1} B^T ∇V_θ.
class ValueNetController final : public FeedbackController {
 public:
  ValueNetController(Mlp net, ModelConfig cfg);
  std::string name() const override { return "nn_value"; }
  double control(double self, double mean) const override;
  void control_batch(std::span<const double> self, std::span<const double> mean,
                     std::span<double> out) const override;

 private:
  Mlp net_;
  ModelConfig cfg_;
};

/// Feedback read directly off a 2-output control net (first component).
class DirectNetController final : public FeedbackController {
 public:
  explicit DirectNetController(Mlp net);
  std::string name() const override { return "nn_direct"; }
  double control(double self, double mean) const override;
  void control_batch(std::span<const double> self, std::span<const double> mean,
                     std::span<double> out) const override;

 private:
  Mlp net_;
};

void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);
std::string mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const std::string& text, const std::string& where = "model");

}  // namespace kcc
