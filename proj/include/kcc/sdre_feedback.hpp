#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kcc/binary_model.hpp"
#include "kcc/riccati.hpp"

namespace kcc {

/// Frozen-coefficient feedback at one transformed state.
struct FeedbackEval {
  Vec2 u = Vec2::Zero();  // -R^{-1} B^T Pi x
  Mat2 Pi = Mat2::Zero();
  double V = 0.0;         // x^T Pi x
  Vec2 gradV = Vec2::Zero();  // 2 Pi x
};

/// Labels (u, V, gradV) from a frozen Riccati solution at x. The control is
/// computed as -(1/2) R^{-1} B^T gradV.
FeedbackEval feedback_from_riccati(const Vec2& x, const Mat2& pi, const CostWeights<double>& w);

/// Builds A(t), freezes it, solves the Riccati equation and returns the
/// feedback evaluation.
FeedbackEval sdre_feedback(const TransformedState& t, const ModelConfig& cfg);

enum class ControllerKind { none, sdre, nn_value, nn_direct, openloop };

ControllerKind parse_controller(const std::string& name);
std::string to_string(ControllerKind kind);

/// A state feedback for one agent of a pair. `control(self, mean)` is the
/// first component of the transformed-coordinate control at (self, mean):
/// the control the agent with opinion `self` receives when its pair has
/// mean `mean`.
class FeedbackController {
 public:
  virtual ~FeedbackController() = default;
  virtual std::string name() const = 0;
  virtual double control(double self, double mean) const = 0;
  /// out[k] = control(self[k], mean[k]). The default runs the scalar
  /// version in parallel; implementations may batch.
  virtual void control_batch(std::span<const double> self, std::span<const double> mean,
                             std::span<double> out) const;
};

class NoControl final : public FeedbackController {
 public:
  std::string name() const override { return "none"; }
  double control(double, double) const override { return 0.0; }
  void control_batch(std::span<const double>, std::span<const double>,
                     std::span<double> out) const override;
};

class SdreController final : public FeedbackController {
 public:
  explicit SdreController(ModelConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  std::string name() const override { return "sdre"; }
  double control(double self, double mean) const override;

 private:
  ModelConfig cfg_;
};

/// (u_i, u_j): each agent evaluates the controller from its own position
/// and the shared pair mean.
std::pair<double, double> pair_controls(const BinaryState& s, const FeedbackController& c);
std::pair<double, double> pair_controls(const BinaryState& s, const ModelConfig& cfg);

/// One forward Euler step of an agent, before clamping. Shared by the
/// binary integrator and the kinetic collisions so both agree bit for bit.
inline double euler_update(double self, double other, double control, double h, double beta) {
  return self + h * (agent_drift(self, other, beta) + control);
}

/// xᵀQx + ũᵀRũ in transformed coordinates, with ũ = (u_i, (u_i + u_j)/2)
/// the transformed image of the physical controls.
double running_cost(const BinaryState& s, double ui, double uj, const ModelConfig& cfg);

struct TrajectoryRecord {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<BinaryState> states;
  std::vector<std::pair<double, double>> controls;
  std::vector<double> running_cost;
  std::vector<double> consensus_gap;
  /// Number of coordinate updates that clamping changed.
  int clamp_hits = 0;
  /// Only meaningful for the open-loop solver.
  bool converged = true;
  int sweeps = 0;

  std::size_t size() const { return times.size(); }
  /// Left Riemann sum of the running cost over [0, T].
  double total_cost() const;
  /// First recorded time with gap < threshold, or a negative value if none.
  double first_time_gap_below(double threshold) const;
};

/// Writes `t,xi,xj,ui,uj,cost,gap`.
void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path);
TrajectoryRecord read_trajectory_csv(const std::string& path);

TrajectoryRecord integrate_closed_loop(const BinaryState& s0, const FeedbackController& c,
                                       double dt, double T, const ModelConfig& cfg);

/// Physical controls (u_i, u_j) applied on step k, k = 0 .. n-1.
struct OpenLoopSchedule {
  double dt = 0.0;
  std::vector<std::pair<double, double>> controls;
};

TrajectoryRecord integrate_open_loop(const BinaryState& s0, const OpenLoopSchedule& schedule,
                                     const ModelConfig& cfg);

struct PmpOptions {
  double T = 100.0;
  double dt = 0.01;
  int max_sweeps = 2000;
  double tol = 1e-6;
};

/// Finite-horizon open-loop optimum by forward-backward sweeps on the
/// Euler-discretized transformed problem: forward state pass, backward
/// adjoint pass p_k = 2 dt Q x_k + (I + dt Df(x_k))^T p_{k+1}, then the
/// update u <- u + w (-(1/2) R^{-1} p_{k+1} - u) with w from Armijo
/// backtracking on the cost. The returned trajectory replays the final
/// control on the physical pair. `converged` is false when the sweep
/// budget ran out or the line search could not decrease the cost; the
/// best iterate is returned either way.
TrajectoryRecord pmp_open_loop(const BinaryState& s0, const ModelConfig& cfg,
                               const PmpOptions& opts);

}  // namespace kcc
