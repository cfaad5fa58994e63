#pragma once

#include "ltvchase/types.hpp"

namespace ltvchase {

struct LqrWeights {
  Matrix Q;
  Matrix R;

  // Throws BadDims unless both matrices are square, symmetric to 1e-10 and
  // positive definite.
  void validate() const;

  static LqrWeights identity(int n, int m);
};

struct LqrSolution {
  Matrix P;  // value matrix
  Matrix K;  // gain, applied as u = K x
  int iterations = 0;
  double residual = 0.0;  // Frobenius norm of the DARE residual at P
};

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

/// Infinite-horizon discrete LQR for the model theta = [A B].
///
/// Runs Riccati value iteration from P = Q until the relative change drops
/// below `tol`. The returned gain carries the minus sign:
///   K = -(R + B'PB)^{-1} B'PA,   u = K x.
/// Throws NonConvergent when the iteration budget is exhausted, P blows up,
/// or the resulting closed loop A + BK is not Schur stable.
LqrSolution solve_dare(const ParamPoint& theta, const LqrWeights& weights,
                       const DareOptions& options = {});

/// Frobenius norm of P - (Q + A'PA - A'PB(R+B'PB)^{-1}B'PA).
double dare_residual(const ParamPoint& theta, const LqrWeights& weights,
                     const Matrix& P);

/// Solves X - F' X F = M for symmetric M.
///
/// Throws Unstable when the spectral radius of F is at least 1 - margin,
/// since the defining series sum_k (F')^k M F^k diverges there.
Matrix dlyap(const Matrix& F, const Matrix& M, double margin = 1e-9);

double spectral_radius(const Matrix& M);

// P(A,B) = dlyap(A+BK, I + K'K) with K the LQR gain for Q = I, R = I.
Matrix closed_loop_value(const ParamPoint& theta);

// H(A,B) = dlyap(A+BK, I).
Matrix closed_loop_lyapunov(const ParamPoint& theta);

}  // namespace ltvchase
