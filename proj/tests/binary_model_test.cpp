#include "kcc/binary_model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "kcc/errors.hpp"

namespace kcc {
namespace {

TEST(BinaryDrift, ConsensusIsEquilibrium) {
  const ModelConfig cfg;
  for (double c : {-1.0, -0.3, 0.0, 0.8, 1.0}) {
    const auto [fi, fj] = binary_drift(BinaryState{c, c}, cfg);
    EXPECT_EQ(fi, 0.0);
    EXPECT_EQ(fj, 0.0);
  }
}

TEST(BinaryDrift, HandValues) {
  const ModelConfig cfg;  // beta = -1
  auto [a, b] = binary_drift(BinaryState{0.0, 0.5}, cfg);
  EXPECT_DOUBLE_EQ(a, -0.25);
  EXPECT_DOUBLE_EQ(b, 0.1875);
  std::tie(a, b) = binary_drift(BinaryState{-0.5, 0.5}, cfg);
  EXPECT_DOUBLE_EQ(a, -0.375);
  EXPECT_DOUBLE_EQ(b, 0.375);
}

TEST(ChangeOfVariables, RoundTrips) {
  const auto t = to_transformed(BinaryState{0.2, 0.4});
  EXPECT_DOUBLE_EQ(t.xi, 0.2);
  EXPECT_DOUBLE_EQ(t.xbar, 0.30000000000000004);
  const auto s = from_transformed(t);
  EXPECT_NEAR(s.xj, 0.4, 1e-16);

  const auto c = to_transformed(BinaryState{-0.7, -0.7});
  EXPECT_EQ(c.xbar, -0.7);
  const auto e = to_transformed(BinaryState{-1.0, 1.0});
  EXPECT_EQ(e.xi, -1.0);
  EXPECT_EQ(e.xbar, 0.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (int k = 0; k < 1000; ++k) {
    const BinaryState b{unif(rng), unif(rng)};
    const auto r = from_transformed(to_transformed(b));
    EXPECT_EQ(r.xi, b.xi);
    EXPECT_NEAR(r.xj, b.xj, 4e-16);
  }
}

TEST(ChangeOfVariables, DomainViolations) {
  EXPECT_THROW(to_transformed(BinaryState{1.5, 0.0}), DomainViolation);
  // xbar = 0.9 with xi = 0 implies xj = 1.8.
  EXPECT_THROW(from_transformed(TransformedState{0.0, 0.9}), DomainViolation);
  EXPECT_NO_THROW(from_transformed(TransformedState{0.5, 0.75 + 1e-13}));
}

TEST(SemilinearA, OriginAndConsensusNullspace) {
  const ModelConfig cfg;
  Mat2 expected;
  expected << 1, -1, 0, 0;
  EXPECT_EQ(semilinear_A(TransformedState{0.0, 0.0}, cfg), expected);
  const auto w = cost_weights(cfg);
  for (double c = -1.0; c <= 1.0; c += 0.125) {
    EXPECT_EQ(semilinear_A(TransformedState{c, c}, cfg) * Vec2(1, 1), Vec2::Zero());
  }
  EXPECT_EQ(w.Q * Vec2(1, 1), Vec2::Zero());
}

TEST(SemilinearA, ReproducesTransformedDrift) {
  for (double beta : {-1.0, 0.5}) {
    ModelConfig cfg;
    cfg.beta = beta;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(-1, 1);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const BinaryState s{unif(rng), unif(rng)};
      const auto t = to_transformed(s);
      const auto [fi, fj] = binary_drift(s, cfg);
      const Vec2 target(fi, (fi + fj) / 2.0);
      worst = std::max(worst, (semilinear_A(t, cfg) * t.vec() - target).cwiseAbs().maxCoeff());
      EXPECT_LE((transformed_drift(t, cfg) - target).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_LE(worst, 1e-12);
  }
}

TEST(DriftJacobian, MatchesCentralDifferences) {
  const ModelConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-0.9, 0.9);
  const double h = 1e-6;
  for (int k = 0; k < 200; ++k) {
    const TransformedState t{unif(rng), unif(rng) * 0.5};
    const Mat2 j = transformed_drift_jacobian(t, cfg);
    for (int c = 0; c < 2; ++c) {
      Vec2 xp = t.vec(), xm = t.vec();
      xp(c) += h;
      xm(c) -= h;
      const Vec2 fd = (transformed_drift(TransformedState{xp(0), xp(1)}, cfg) -
                       transformed_drift(TransformedState{xm(0), xm(1)}, cfg)) /
                      (2 * h);
      EXPECT_LE((j.col(c) - fd).norm(), 1e-8);
    }
  }
}

TEST(CostWeights, ValuesAndSpreadIdentity) {
  const ModelConfig cfg;
  const auto w = cost_weights(cfg);
  Mat2 q;
  q << 1, -1, -1, 1;
  EXPECT_EQ(w.Q, q);
  EXPECT_EQ(w.R, Mat2(0.0125 * Mat2::Identity()));
  EXPECT_EQ(w.B, Mat2::Identity());
  const BinaryState s{0.3, -0.7};
  const auto t = to_transformed(s);
  const double spread = 0.5 * (std::pow(s.xi - t.xbar, 2) + std::pow(s.xj - t.xbar, 2));
  EXPECT_NEAR(t.vec().dot(w.Q * t.vec()), spread, 1e-15);
}

TEST(ModelConfig, RejectsNonPositiveGamma) {
  ModelConfig cfg;
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.gamma = 0.025;
  cfg.beta = std::nan("");
  EXPECT_THROW(cfg.validate(), ValidationError);
}

}  // namespace
}  // namespace kcc
