#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kcc/binary_model.hpp"
#include "kcc/sdre_feedback.hpp"

namespace kcc {

class Mlp;

struct MixtureComponent {
  double weight = 0.0;
  double mean = 0.0;
  double std = 1.0;
};

/// Mixture of normals truncated to [-1, 1].
struct MixtureSpec {
  std::vector<MixtureComponent> components;

  /// Equal-weight normals at ±0.5 with std 0.15.
  static MixtureSpec bimodal();
  void validate() const;
};

struct Population {
  std::vector<double> opinions;
  int step_count = 0;
  std::uint64_t rng_seed = 0;

  std::size_t size() const { return opinions.size(); }
};

/// Every agent collides once per step (Δt·λ = 1): the time step and the
/// interaction strength are both `eps`.
struct KineticConfig {
  std::size_t n_agents = 100000;
  double eps = 0.05;
  int n_steps = 10;
  ControllerKind controller = ControllerKind::none;
  MixtureSpec f0 = MixtureSpec::bimodal();
  int histogram_bins = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Rejection sampling from the truncated mixture. Needs n >= 2 even.
/// Throws RejectionStall when fewer than 1% of draws land in [-1, 1].
Population sample_initial(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

/// One controlled binary interaction with strength eta, clamped to [-1, 1].
/// A null controller means no control.
std::pair<double, double> collide_pair(double xi, double xj, double eta,
                                       const FeedbackController* controller, const ModelConfig& cfg);

/// Uniform random perfect matching of n (even) agents: pairs are
/// (m[0], m[1]), (m[2], m[3]), ...
std::vector<std::size_t> random_matching(std::size_t n, std::mt19937_64& rng);

/// One collision step. The matching is drawn serially from `rng`; the
/// collisions then run in parallel.
void step(Population& p, const FeedbackController& controller, double eps, const ModelConfig& cfg,
          std::mt19937_64& rng);

struct StepStats {
  int step = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance
};

struct Histogram {
  std::vector<double> centers;
  std::vector<double> density;  // sum(density) * width = 1
  double width = 0.0;
};

Histogram histogram(const std::vector<double>& x, int bins);
StepStats statistics(const Population& p);

struct KineticResult {
  std::vector<StepStats> stats;        // steps 0..n_steps
  std::vector<Histogram> histograms;   // one per recorded step
  Population final_population;
};

/// Samples f0, then runs n_steps collision steps recording statistics and
/// histograms (step 0 is the initial population).
KineticResult run(const KineticConfig& kc, const ModelConfig& cfg,
                  const FeedbackController& controller);
/// Same, from a given population.
KineticResult run_from(Population p, const KineticConfig& kc, const ModelConfig& cfg,
                       const FeedbackController& controller);

/// Builds the controller for `kind`. nn_value/nn_direct need the matching
/// net; openloop has no feedback form and is rejected.
std::unique_ptr<FeedbackController> make_controller(ControllerKind kind, const ModelConfig& cfg,
                                                    const Mlp* value_net = nullptr,
                                                    const Mlp* control_net = nullptr);

void write_stats_csv(const std::vector<StepStats>& stats, const std::string& path);
void write_histogram_csv(const Histogram& h, const std::string& path);

}  // namespace kcc
