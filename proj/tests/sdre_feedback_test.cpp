#include "kcc/sdre_feedback.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "kcc/errors.hpp"

namespace kcc {
namespace {

TEST(SdreFeedback, ConsensusGivesZeroControlAndValue) {
  const ModelConfig cfg;
  for (int k = 0; k <= 100; ++k) {
    const double c = -1.0 + 0.02 * k;
    const auto f = sdre_feedback(TransformedState{c, c}, cfg);
    EXPECT_LE(f.u.cwiseAbs().maxCoeff(), 1e-8) << c;
    EXPECT_LE(std::abs(f.V), 1e-8) << c;
  }
}

TEST(SdreFeedback, FrozenReferenceValues) {
  // Scalar-root oracle in the rotated basis at xi = 0.3, xbar = 0.
  const ModelConfig cfg;
  const auto f = sdre_feedback(TransformedState{0.3, 0.0}, cfg);
  const double half_pi = 0.084948762015249285;
  EXPECT_NEAR(f.Pi(0, 0), half_pi, 1e-13);
  EXPECT_NEAR(f.Pi(0, 1), -half_pi, 1e-13);
  EXPECT_NEAR(f.u(0), -2.0387702883659826, 1e-11);
  EXPECT_NEAR(f.V, 0.007645388581372435, 1e-14);
  EXPECT_LT(f.u(0), 0.0);  // pulls xi = 0.3 back toward the mean
}

TEST(SdreFeedback, InternalConsistency) {
  const ModelConfig cfg;
  const auto w = cost_weights(cfg);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (int k = 0; k < 200; ++k) {
    const auto t = to_transformed(BinaryState{unif(rng), unif(rng)});
    const auto f = sdre_feedback(t, cfg);
    const Vec2 x = t.vec();
    EXPECT_EQ(f.gradV, Vec2(2.0 * (f.Pi * x)));
    EXPECT_EQ(f.u, Vec2(-0.5 * w.R.ldlt().solve(w.B.transpose() * f.gradV)));
    EXPECT_LE((f.u + w.R.inverse() * f.Pi * x).norm(), 1e-12 * std::max(1.0, f.u.norm()));
    EXPECT_GE(f.V, 0.0);
  }
}

TEST(PairControls, SymmetryAndSigns) {
  const ModelConfig cfg;
  const auto [ui, uj] = pair_controls(BinaryState{0.0, 0.5}, cfg);
  EXPECT_GT(ui, 0.0);
  EXPECT_LT(uj, 0.0);
  const auto [vi, vj] = pair_controls(BinaryState{0.5, 0.0}, cfg);
  EXPECT_EQ(vi, uj);
  EXPECT_EQ(vj, ui);
  const auto [ci, cj] = pair_controls(BinaryState{0.4, 0.4}, cfg);
  EXPECT_LE(std::abs(ci), 1e-12);
  EXPECT_LE(std::abs(cj), 1e-12);
}

TEST(ClosedLoop, ConsensusStartStaysPut) {
  const ModelConfig cfg;
  for (double c : {-0.8, 0.0, 0.35}) {
    const auto rec = integrate_closed_loop(BinaryState{c, c}, SdreController(cfg), 0.01, 5.0, cfg);
    for (const auto& s : rec.states) {
      EXPECT_LE(std::abs(s.xi - c), 1e-8);
      EXPECT_LE(std::abs(s.xj - c), 1e-8);
    }
    const auto none = integrate_closed_loop(BinaryState{c, c}, NoControl(), 0.01, 5.0, cfg);
    EXPECT_EQ(none.states.back().xi, c);
  }
}

TEST(ClosedLoop, UncontrolledPairSeparates) {
  const ModelConfig cfg;
  const auto rec = integrate_closed_loop(BinaryState{-0.2, 0.2}, NoControl(), 0.01, 10.0, cfg);
  ASSERT_EQ(rec.size(), 1001u);
  for (std::size_t k = 1; k < rec.size(); ++k) {
    EXPECT_GT(rec.consensus_gap[k], rec.consensus_gap[k - 1]) << k;
  }
  EXPECT_EQ(rec.clamp_hits, 0);
}

TEST(ClosedLoop, SdreReachesConsensus) {
  const ModelConfig cfg;
  const auto rec = integrate_closed_loop(BinaryState{-0.2, 0.2}, SdreController(cfg), 0.01, 10.0, cfg);
  const double t = rec.first_time_gap_below(1e-2);
  EXPECT_GE(t, 0.0);
  EXPECT_LT(t, 10.0);
  EXPECT_EQ(rec.clamp_hits, 0);
}

TEST(ClosedLoop, NoClampingWhenUncontrolled) {
  const ModelConfig cfg;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(-0.99, 0.99);
  for (int k = 0; k < 20; ++k) {
    const auto rec =
        integrate_closed_loop(BinaryState{unif(rng), unif(rng)}, NoControl(), 0.01, 20.0, cfg);
    EXPECT_EQ(rec.clamp_hits, 0);
  }
}

TEST(ClosedLoop, RecordShapeAndValidation) {
  const ModelConfig cfg;
  const auto rec = integrate_closed_loop(BinaryState{0.1, 0.3}, NoControl(), 0.1, 1.0, cfg);
  ASSERT_EQ(rec.size(), 11u);
  EXPECT_EQ(rec.states.size(), rec.size());
  EXPECT_EQ(rec.controls.size(), rec.size());
  EXPECT_EQ(rec.running_cost.size(), rec.size());
  for (std::size_t k = 1; k < rec.size(); ++k) EXPECT_GT(rec.times[k], rec.times[k - 1]);
  EXPECT_THROW(integrate_closed_loop(BinaryState{0.1, 0.3}, NoControl(), 0.0, 1.0, cfg), ValidationError);
  EXPECT_THROW(integrate_closed_loop(BinaryState{0.1, 0.3}, NoControl(), 0.5, 0.1, cfg), ValidationError);
  EXPECT_THROW(integrate_closed_loop(BinaryState{1.1, 0.3}, NoControl(), 0.1, 1.0, cfg), DomainViolation);
}

class BadController final : public FeedbackController {
 public:
  std::string name() const override { return "bad"; }
  double control(double, double) const override { return std::nan(""); }
};

TEST(ClosedLoop, NonFiniteStateAborts) {
  const ModelConfig cfg;
  EXPECT_THROW(integrate_closed_loop(BinaryState{0.1, 0.3}, BadController(), 0.1, 1.0, cfg),
               NonFiniteState);
}

TEST(Pmp, ConsensusStartCostsNothing) {
  const ModelConfig cfg;
  PmpOptions o;
  o.T = 2.0;
  const auto rec = pmp_open_loop(BinaryState{0.3, 0.3}, cfg, o);
  EXPECT_TRUE(rec.converged);
  EXPECT_EQ(rec.total_cost(), 0.0);
  for (const auto& u : rec.controls) {
    EXPECT_EQ(u.first, 0.0);
    EXPECT_EQ(u.second, 0.0);
  }
}

TEST(Pmp, ShortHorizonBeatsUncontrolledAndSdre) {
  // On a short horizon the sweep gets close to the open-loop optimum, which
  // is cheaper than the frozen-coefficient feedback.
  const ModelConfig cfg;
  PmpOptions o;
  o.T = 2.0;
  const BinaryState s0{-0.5, 0.5};
  const auto pmp = pmp_open_loop(s0, cfg, o);
  const auto none = integrate_closed_loop(s0, NoControl(), o.dt, o.T, cfg);
  const auto sdre = integrate_closed_loop(s0, SdreController(cfg), o.dt, o.T, cfg);
  EXPECT_LT(pmp.total_cost(), none.total_cost());
  EXPECT_LT(pmp.total_cost(), sdre.total_cost());
}

TEST(Pmp, LongHorizonIsSlowerThanSdre) {
  // T = 100: the sweep stalls near the separating equilibrium and does not
  // reach consensus within the horizon.
  const ModelConfig cfg;
  const BinaryState s0{-0.5, 0.5};
  const auto pmp = pmp_open_loop(s0, cfg, PmpOptions{});
  const auto sdre = integrate_closed_loop(s0, SdreController(cfg), 0.01, 100.0, cfg);
  const auto none = integrate_closed_loop(s0, NoControl(), 0.01, 100.0, cfg);
  const double t_sdre = sdre.first_time_gap_below(0.1);
  ASSERT_GE(t_sdre, 0.0);
  const double t_pmp = pmp.first_time_gap_below(0.1);
  EXPECT_TRUE(t_pmp < 0.0 || t_pmp > t_sdre);
  EXPECT_LE(pmp.total_cost(), none.total_cost());
}

TEST(CostComparison, TwentySeededPairs) {
  const ModelConfig cfg;
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> unif(-1, 1);
  PmpOptions o;
  o.T = 10.0;
  o.max_sweeps = 100;
  for (int k = 0; k < 20; ++k) {
    const BinaryState s0{unif(rng), unif(rng)};
    const auto none = integrate_closed_loop(s0, NoControl(), o.dt, o.T, cfg);
    const auto sdre = integrate_closed_loop(s0, SdreController(cfg), o.dt, o.T, cfg);
    const auto pmp = pmp_open_loop(s0, cfg, o);
    EXPECT_LE(sdre.total_cost(), none.total_cost()) << k;
    EXPECT_LE(pmp.total_cost(), none.total_cost()) << k;
  }
}

TEST(TrajectoryCsv, RoundTrip) {
  const ModelConfig cfg;
  const auto rec = integrate_closed_loop(BinaryState{-0.3, 0.6}, SdreController(cfg), 0.05, 1.0, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "kcc_traj_test.csv").string();
  write_trajectory_csv(rec, path);
  const auto back = read_trajectory_csv(path);
  ASSERT_EQ(back.size(), rec.size());
  for (std::size_t k = 0; k < rec.size(); ++k) {
    EXPECT_EQ(back.states[k].xi, rec.states[k].xi);
    EXPECT_EQ(back.controls[k].second, rec.controls[k].second);
    EXPECT_EQ(back.consensus_gap[k], rec.consensus_gap[k]);
  }
  std::filesystem::remove(path);
}

TEST(Controllers, ParseNames) {
  for (auto k : {ControllerKind::none, ControllerKind::sdre, ControllerKind::nn_value,
                 ControllerKind::nn_direct, ControllerKind::openloop}) {
    EXPECT_EQ(parse_controller(to_string(k)), k);
  }
  EXPECT_THROW(parse_controller("lqr"), ValidationError);
}

}  // namespace
}  // namespace kcc
