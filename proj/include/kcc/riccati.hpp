#pragma once

// Continuous-time algebraic Riccati equation
//
//   A^T Pi + Pi A - Pi B R^{-1} B^T Pi + Q = 0
//
// for small fixed-size problems. Two independent solvers are provided: the
// stable invariant subspace of the Hamiltonian matrix (fast path) and the
// Newton-Kleinman iteration (oracle).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <string>

#include "kcc/errors.hpp"

namespace kcc {

template <typename Scalar, int N>
using Mat = Eigen::Matrix<Scalar, N, N>;
template <typename Scalar, int N>
using Vec = Eigen::Matrix<Scalar, N, 1>;

using Mat2 = Mat<double, 2>;
using Vec2 = Vec<double, 2>;
using Mat4 = Mat<double, 4>;

template <typename Scalar, int N>
struct RiccatiProblem {
  Mat<Scalar, N> A;  // drift
  Mat<Scalar, N> B;  // control operator (unused columns may be zero)
  Mat<Scalar, N> Q;  // state weight, symmetric PSD
  Mat<Scalar, N> R;  // control weight, symmetric PD
};

template <typename Scalar, int N>
struct RiccatiSolution {
  Mat<Scalar, N> Pi;
  /// Frobenius norm of the Riccati residual at Pi.
  Scalar residual{0};
  /// Dimension of the cost-free marginal subspace ker A ∩ ker Q that was
  /// deflated. The closed loop keeps eigenvalue 0 on it.
  int marginal_modes{0};
  /// Newton iterations used (0 for the Hamiltonian solver).
  int iterations{0};
};

using RiccatiProblem2 = RiccatiProblem<double, 2>;
using RiccatiSolution2 = RiccatiSolution<double, 2>;

template <typename Scalar, int M>
struct EigenDecomposition {
  Eigen::Matrix<std::complex<Scalar>, M, 1> values;
  Eigen::Matrix<std::complex<Scalar>, M, M> vectors;  // columns
};

namespace detail {

template <typename Derived>
std::string format_matrix(const Eigen::MatrixBase<Derived>& m) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << (i ? "; " : "");
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << m(i, j);
  }
  os << "]";
  return os.str();
}

template <typename Scalar>
constexpr Scalar symmetry_tolerance() {
  return Scalar(1e-10);
}

}  // namespace detail

/// Eigenpairs of a real square matrix.
template <typename Scalar, int M>
EigenDecomposition<Scalar, M> eigen_decompose(const Mat<Scalar, M>& h) {
  if (!h.allFinite()) throw ValidationError("eigen_decompose: non-finite entries");
  Eigen::EigenSolver<Mat<Scalar, M>> solver(h, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw NoConvergence("eigen_decompose: QR iteration did not converge for " +
                        detail::format_matrix(h));
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline EigenDecomposition<double, 4> eig4(const Mat4& h) { return eigen_decompose<double, 4>(h); }

/// W = B R^{-1} B^T.
template <typename Scalar, int N>
Mat<Scalar, N> control_weight(const RiccatiProblem<Scalar, N>& p) {
  return p.B * p.R.ldlt().solve(p.B.transpose());
}

template <typename Scalar, int N>
Mat<Scalar, N> riccati_residual_matrix(const RiccatiProblem<Scalar, N>& p,
                                       const Mat<Scalar, N>& pi) {
  return p.A.transpose() * pi + pi * p.A - pi * control_weight(p) * pi + p.Q;
}

template <typename Scalar, int N>
Scalar riccati_residual(const RiccatiProblem<Scalar, N>& p, const Mat<Scalar, N>& pi) {
  return riccati_residual_matrix(p, pi).norm();
}

/// K = R^{-1} B^T Pi, so that u = -K x.
template <typename Scalar, int N>
Mat<Scalar, N> feedback_gain(const RiccatiProblem<Scalar, N>& p, const Mat<Scalar, N>& pi) {
  return p.R.ldlt().solve(p.B.transpose() * pi);
}

/// A - B R^{-1} B^T Pi.
template <typename Scalar, int N>
Mat<Scalar, N> closed_loop(const RiccatiProblem<Scalar, N>& p, const Mat<Scalar, N>& pi) {
  return p.A - control_weight(p) * pi;
}

/// Throws ValidationError unless Q is symmetric PSD and R symmetric PD.
template <typename Scalar, int N>
void validate(const RiccatiProblem<Scalar, N>& p) {
  if (!p.A.allFinite() || !p.B.allFinite() || !p.Q.allFinite() || !p.R.allFinite()) {
    throw ValidationError("Riccati problem has non-finite entries");
  }
  const Scalar tol = detail::symmetry_tolerance<Scalar>();
  const Scalar qscale = std::max<Scalar>(Scalar(1), p.Q.norm());
  const Scalar rscale = std::max<Scalar>(Scalar(1), p.R.norm());
  if ((p.Q - p.Q.transpose()).norm() > tol * qscale) {
    throw ValidationError("Q must be symmetric: " + detail::format_matrix(p.Q));
  }
  if ((p.R - p.R.transpose()).norm() > tol * rscale) {
    throw ValidationError("R must be symmetric: " + detail::format_matrix(p.R));
  }
  Eigen::SelfAdjointEigenSolver<Mat<Scalar, N>> qeig(p.Q, Eigen::EigenvaluesOnly);
  if (qeig.eigenvalues().minCoeff() < -tol * qscale) {
    throw ValidationError("Q must be positive semidefinite: " + detail::format_matrix(p.Q));
  }
  Eigen::SelfAdjointEigenSolver<Mat<Scalar, N>> reig(p.R, Eigen::EigenvaluesOnly);
  if (reig.eigenvalues().minCoeff() <= Scalar(0)) {
    throw ValidationError("R must be positive definite: " + detail::format_matrix(p.R));
  }
}

/// Orthonormal basis (columns) of ker A ∩ ker Q. These directions are
/// invisible to the cost and frozen by the drift, so the Hamiltonian carries
/// a defective zero eigenvalue on them.
template <typename Scalar, int N>
Eigen::Matrix<Scalar, N, Eigen::Dynamic> cost_free_kernel(const RiccatiProblem<Scalar, N>& p) {
  Eigen::Matrix<Scalar, 2 * N, N> stacked;
  stacked << p.A, p.Q;
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, 2 * N, N>> svd(stacked, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const Scalar tol = Scalar(1e-12) * std::max<Scalar>(Scalar(1), sigma(0));
  int rank = 0;
  for (int i = 0; i < N; ++i) rank += sigma(i) > tol ? 1 : 0;
  return svd.matrixV().rightCols(N - rank);
}

/// Stabilizing solution from the stable invariant subspace of
///
///   H = [ A  -W ]
///       [ -Q -A^T ],   W = B R^{-1} B^T.
///
/// The subspace is spanned by the eigenvectors of the eigenvalues with
/// negative real part, completed by [v; 0] for every v in ker A ∩ ker Q.
/// With [X; Y] a basis of it, Pi = Y X^{-1}.
template <typename Scalar, int N>
RiccatiSolution<Scalar, N> solve_care_hamiltonian(const RiccatiProblem<Scalar, N>& p) {
  using Complex = std::complex<Scalar>;
  validate(p);
  const Mat<Scalar, N> W = control_weight(p);

  Mat<Scalar, 2 * N> H;
  H << p.A, -W, -p.Q, -p.A.transpose();

  const auto kernel = cost_free_kernel(p);
  const int marginal = static_cast<int>(kernel.cols());
  const int needed = N - marginal;

  const auto eig = eigen_decompose<Scalar, 2 * N>(H);
  std::array<int, 2 * N> order;
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return eig.values(a).real() < eig.values(b).real(); });

  const Scalar stable_tol = Scalar(1e-10) * std::max<Scalar>(Scalar(1), H.norm());
  Eigen::Matrix<Complex, 2 * N, N> basis;
  for (int k = 0; k < needed; ++k) {
    const Complex lambda = eig.values(order[k]);
    if (!(lambda.real() < -stable_tol)) {
      std::ostringstream os;
      os << "solve_care_hamiltonian: only " << k << " of " << needed
         << " required stable Hamiltonian eigenvalues (next: " << lambda << ") for A = "
         << detail::format_matrix(p.A) << ", Q = " << detail::format_matrix(p.Q);
      throw NotStabilizable(os.str());
    }
    basis.col(k) = eig.vectors.col(order[k]);
  }
  for (int k = 0; k < marginal; ++k) {
    basis.col(needed + k).setZero();
    basis.col(needed + k).template head<N>() = kernel.col(k).template cast<Complex>();
  }

  const Mat<Complex, N> X = basis.template topRows<N>();
  const Mat<Complex, N> Y = basis.template bottomRows<N>();
  Eigen::JacobiSVD<Mat<Complex, N>> xsvd(X);
  const auto& sx = xsvd.singularValues();
  const Scalar smin = sx(N - 1);
  if (!(smin > Scalar(0)) || sx(0) / smin > Scalar(1e12)) {
    throw SingularSubspace("solve_care_hamiltonian: stable subspace is not a graph over the "
                           "state space (cond(X) > 1e12) for A = " +
                           detail::format_matrix(p.A));
  }
  // Pi = Y X^{-1}  <=>  X^T Pi^T = Y^T.
  const Mat<Complex, N> pi_c = X.transpose().partialPivLu().solve(Y.transpose()).transpose();
  Mat<Scalar, N> pi = pi_c.real();
  pi = (pi + pi.transpose()) * Scalar(0.5);

  RiccatiSolution<Scalar, N> sol;
  sol.Pi = pi;
  sol.residual = riccati_residual(p, pi);
  sol.marginal_modes = marginal;
  return sol;
}

/// Solves F^T X + X F + C = 0 through the N^2 x N^2 Kronecker system.
template <typename Scalar, int N>
Mat<Scalar, N> solve_lyapunov(const Mat<Scalar, N>& F, const Mat<Scalar, N>& C) {
  constexpr int NN = N * N;
  const Mat<Scalar, N> I = Mat<Scalar, N>::Identity();
  const Mat<Scalar, N> Ft = F.transpose();
  // Column-major vec: vec(F^T X) = (I ⊗ F^T) vec X, vec(X F) = (F^T ⊗ I) vec X.
  Mat<Scalar, NN> K;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      K.template block<N, N>(i * N, j * N) = I(i, j) * Ft + Ft(i, j) * I;
    }
  }
  Eigen::FullPivLU<Mat<Scalar, NN>> lu(K);
  if (!lu.isInvertible()) {
    throw SingularSubspace("solve_lyapunov: singular Lyapunov operator for F = " +
                           detail::format_matrix(F));
  }
  const Vec<Scalar, NN> rhs = -Eigen::Map<const Vec<Scalar, NN>>(C.data());
  const Vec<Scalar, NN> x = lu.solve(rhs);
  Mat<Scalar, N> X = Eigen::Map<const Mat<Scalar, N>>(x.data());
  return (X + X.transpose()) * Scalar(0.5);
}

/// Initial guess Pi0 with A - W Pi0 Hurwitz, following Bass: with c larger
/// than the spectral radius of A, solve (A + cI) X + X (A + cI)^T = 2W and
/// take Pi0 = X^{-1}. Then (A - W X^{-1}) X + X (A - W X^{-1})^T = -2cX.
/// Requires (A, B) controllable.
template <typename Scalar, int N>
Mat<Scalar, N> newton_initial_guess(const RiccatiProblem<Scalar, N>& p) {
  const Mat<Scalar, N> W = control_weight(p);
  const Scalar c = p.A.norm() + Scalar(1);
  const Mat<Scalar, N> shifted = p.A + c * Mat<Scalar, N>::Identity();
  const Mat<Scalar, N> X = solve_lyapunov<Scalar, N>(-shifted.transpose(), Scalar(2) * W);
  Eigen::FullPivLU<Mat<Scalar, N>> lu(X);
  if (!lu.isInvertible()) {
    throw NotStabilizable("newton_initial_guess: (A, B) is not controllable, provide pi0");
  }
  const Mat<Scalar, N> pi0 = lu.inverse();
  return (pi0 + pi0.transpose()) * Scalar(0.5);
}

/// Newton-Kleinman iteration: Pi_{k+1} solves the Lyapunov equation
///   (A - W Pi_k)^T Pi + Pi (A - W Pi_k) + Q + Pi_k W Pi_k = 0
/// until the Riccati residual falls below tol.
template <typename Scalar, int N>
RiccatiSolution<Scalar, N> solve_care_newton(const RiccatiProblem<Scalar, N>& p,
                                             const Mat<Scalar, N>& pi0, Scalar tol,
                                             int max_iter) {
  validate(p);
  const Mat<Scalar, N> W = control_weight(p);
  Mat<Scalar, N> pi = pi0;
  for (int k = 1; k <= max_iter; ++k) {
    const Mat<Scalar, N> acl = p.A - W * pi;
    pi = solve_lyapunov<Scalar, N>(acl, p.Q + pi * W * pi);
    if (!pi.allFinite() || pi.cwiseAbs().maxCoeff() > Scalar(1e12)) {
      throw DivergedIterate("solve_care_newton: iterate diverged at step " + std::to_string(k));
    }
    const Scalar res = riccati_residual(p, pi);
    if (res < tol) {
      RiccatiSolution<Scalar, N> sol;
      sol.Pi = pi;
      sol.residual = res;
      sol.marginal_modes = static_cast<int>(cost_free_kernel(p).cols());
      sol.iterations = k;
      return sol;
    }
  }
  throw NoConvergence("solve_care_newton: residual above " + std::to_string(tol) + " after " +
                      std::to_string(max_iter) + " iterations");
}

template <typename Scalar, int N>
RiccatiSolution<Scalar, N> solve_care_newton(const RiccatiProblem<Scalar, N>& p,
                                             Scalar tol = Scalar(1e-12), int max_iter = 100) {
  return solve_care_newton(p, newton_initial_guess(p), tol, max_iter);
}

}  // namespace kcc
