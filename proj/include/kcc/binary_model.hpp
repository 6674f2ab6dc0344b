#pragma once

// Two-agent Sznajd consensus model. Opinions live in [-1, 1]; the kernel
// beta (1 - x^2) vanishes at the boundary, and beta < 0 separates opinions.
//
// The pair (x_i, x_j) is rewritten as (x_i, xbar) with xbar the pair mean,
// where the consensus line x_i = x_j becomes the common kernel of the drift
// factorization A(x) and of the state weight Q.

#include <cmath>
#include <string>
#include <utility>

#include "kcc/errors.hpp"
#include "kcc/riccati.hpp"

namespace kcc {

struct ModelConfig {
  double beta = -1.0;    // kernel strength
  double gamma = 0.025;  // control penalty, R = gamma / 2

  void validate() const {
    if (!std::isfinite(beta)) throw ValidationError("model.beta must be finite");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("model.gamma must be > 0");
  }
};

template <typename Scalar>
struct BinaryStateT {
  Scalar xi{0};
  Scalar xj{0};
};

template <typename Scalar>
struct TransformedStateT {
  Scalar xi{0};
  Scalar xbar{0};

  Vec<Scalar, 2> vec() const { return {xi, xbar}; }
};

using BinaryState = BinaryStateT<double>;
using TransformedState = TransformedStateT<double>;

/// Slack allowed when reconstructing x_j = 2 xbar - x_i.
inline constexpr double kDomainSlack = 1e-12;

template <typename Scalar>
bool in_domain(Scalar x, Scalar slack = Scalar(0)) {
  return x >= Scalar(-1) - slack && x <= Scalar(1) + slack;
}

template <typename Scalar>
Scalar clamp_to_domain(Scalar x) {
  return x < Scalar(-1) ? Scalar(-1) : (x > Scalar(1) ? Scalar(1) : x);
}

/// P(x_i) = beta (1 - x_i^2).
template <typename Scalar>
Scalar kernel(Scalar xi, Scalar beta) {
  return beta * (Scalar(1) - xi * xi);
}

/// Uncontrolled velocity of an agent at `self` paired with `other`:
/// (beta/2)(1 - self^2)(other - self). The 1/2 is the 1/N prefactor at N = 2.
template <typename Scalar>
Scalar agent_drift(Scalar self, Scalar other, Scalar beta) {
  return Scalar(0.5) * kernel(self, beta) * (other - self);
}

template <typename Scalar>
std::pair<Scalar, Scalar> binary_drift(const BinaryStateT<Scalar>& s, const ModelConfig& cfg) {
  const auto beta = static_cast<Scalar>(cfg.beta);
  return {agent_drift(s.xi, s.xj, beta), agent_drift(s.xj, s.xi, beta)};
}

template <typename Scalar>
TransformedStateT<Scalar> to_transformed(const BinaryStateT<Scalar>& s) {
  if (!in_domain(s.xi) || !in_domain(s.xj)) {
    throw DomainViolation("to_transformed: opinions outside [-1, 1]: (" + std::to_string(s.xi) +
                          ", " + std::to_string(s.xj) + ")");
  }
  return {s.xi, (s.xi + s.xj) / Scalar(2)};
}

template <typename Scalar>
BinaryStateT<Scalar> from_transformed(const TransformedStateT<Scalar>& t) {
  const Scalar xj = Scalar(2) * t.xbar - t.xi;
  if (!in_domain(t.xi) || !in_domain(xj, Scalar(kDomainSlack))) {
    throw DomainViolation("from_transformed: implied pair (" + std::to_string(t.xi) + ", " +
                          std::to_string(xj) + ") leaves [-1, 1]");
  }
  return {t.xi, xj};
}

/// Drift in transformed coordinates, (dx_i/dt, dxbar/dt), for the pair
/// implied by t.
template <typename Scalar>
Vec<Scalar, 2> transformed_drift(const TransformedStateT<Scalar>& t, const ModelConfig& cfg) {
  const Scalar xj = Scalar(2) * t.xbar - t.xi;
  const auto [di, dj] = binary_drift(BinaryStateT<Scalar>{t.xi, xj}, cfg);
  return {di, (di + dj) / Scalar(2)};
}

/// Semilinear factorization f(x) = A(x) x of the transformed drift:
///
///   A = [ -P     P    ]     P    = beta (1 - x_i^2)
///       [ -Pbar  Pbar ],    Pbar = (beta/2) ((2 xbar - x_i)^2 - x_i^2)
///
/// Both rows are multiples of (-1, 1), so A (1, 1)^T = 0 for every state.
template <typename Scalar>
Mat<Scalar, 2> semilinear_A(const TransformedStateT<Scalar>& t, const ModelConfig& cfg) {
  const auto beta = static_cast<Scalar>(cfg.beta);
  const Scalar p = kernel(t.xi, beta);
  const Scalar xj = Scalar(2) * t.xbar - t.xi;
  const Scalar pbar = Scalar(0.5) * beta * (xj * xj - t.xi * t.xi);
  Mat<Scalar, 2> a;
  a << -p, p, -pbar, pbar;
  return a;
}

/// Jacobian of transformed_drift with respect to (x_i, xbar).
template <typename Scalar>
Mat<Scalar, 2> transformed_drift_jacobian(const TransformedStateT<Scalar>& t,
                                          const ModelConfig& cfg) {
  // f1 = beta (1 - x_i^2)(xbar - x_i), f2 = 2 beta xbar (xbar - x_i)^2
  const auto beta = static_cast<Scalar>(cfg.beta);
  const Scalar d = t.xbar - t.xi;
  Mat<Scalar, 2> j;
  j(0, 0) = -Scalar(2) * beta * t.xi * d - beta * (Scalar(1) - t.xi * t.xi);
  j(0, 1) = beta * (Scalar(1) - t.xi * t.xi);
  j(1, 0) = -Scalar(4) * beta * t.xbar * d;
  j(1, 1) = Scalar(2) * beta * d * d + Scalar(4) * beta * t.xbar * d;
  return j;
}

template <typename Scalar = double>
struct CostWeights {
  Mat<Scalar, 2> Q;
  Mat<Scalar, 2> R;
  Mat<Scalar, 2> B;
};

/// Q = 2I - J (so x^T Q x = (x_i - xbar)^2), R = (gamma/2) I, B = I.
template <typename Scalar = double>
CostWeights<Scalar> cost_weights(const ModelConfig& cfg) {
  if (!(cfg.gamma > 0.0)) throw ValidationError("cost_weights: gamma must be > 0");
  CostWeights<Scalar> w;
  w.Q << Scalar(1), Scalar(-1), Scalar(-1), Scalar(1);
  w.R = Mat<Scalar, 2>::Identity() * static_cast<Scalar>(cfg.gamma / 2.0);
  w.B = Mat<Scalar, 2>::Identity();
  return w;
}

/// Frozen-coefficient Riccati problem at state t.
template <typename Scalar>
RiccatiProblem<Scalar, 2> sdre_problem(const TransformedStateT<Scalar>& t,
                                       const ModelConfig& cfg) {
  const auto w = cost_weights<Scalar>(cfg);
  return {semilinear_A(t, cfg), w.B, w.Q, w.R};
}

}  // namespace kcc
