#include "ltvchase/control.hpp"

#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace ltvchase {

namespace {

void check_spd(const Matrix& M, const char* name) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw BadDims(fmt::format("{} must be square and nonempty", name));
  }
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw BadDims(fmt::format("{} must be symmetric", name));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw BadDims(fmt::format("{} must be positive definite", name));
  }
}

// One Riccati backup. Also returns the gain of the backup.
Matrix riccati_step(const Matrix& A, const Matrix& B, const Matrix& Q,
                    const Matrix& R, const Matrix& P, Matrix* gain) {
  const Matrix BtP = B.transpose() * P;
  const Matrix S = R + BtP * B;
  const Matrix K = -S.ldlt().solve(BtP * A);
  if (gain != nullptr) *gain = K;
  // A'PA - A'PB S^{-1} B'PA = A'P(A + BK)
  Matrix next = Q + A.transpose() * P * (A + B * K);
  return 0.5 * (next + next.transpose());
}

}  // namespace

void LqrWeights::validate() const {
  check_spd(Q, "Q");
  check_spd(R, "R");
}

LqrWeights LqrWeights::identity(int n, int m) {
  return {Matrix::Identity(n, n), Matrix::Identity(m, m)};
}

double dare_residual(const ParamPoint& theta, const LqrWeights& weights,
                     const Matrix& P) {
  const Matrix A = theta.A();
  const Matrix B = theta.B();
  return (P - riccati_step(A, B, weights.Q, weights.R, P, nullptr)).norm();
}

LqrSolution solve_dare(const ParamPoint& theta, const LqrWeights& weights,
                       const DareOptions& options) {
  const int n = theta.n();
  const int m = theta.m();
  if (weights.Q.rows() != n || weights.R.rows() != m) {
    throw BadDims(fmt::format("solve_dare: weights are {}x{} / {}x{} for n={}, m={}",
                              weights.Q.rows(), weights.Q.cols(), weights.R.rows(),
                              weights.R.cols(), n, m));
  }
  weights.validate();

  const Matrix A = theta.A();
  const Matrix B = theta.B();
  Matrix P = weights.Q;
  Matrix K;
  for (int it = 1; it <= options.max_iter; ++it) {
    Matrix next = riccati_step(A, B, weights.Q, weights.R, P, &K);
    const double change = (next - P).norm();
    const double scale = std::max(1.0, next.norm());
    P = std::move(next);
    if (!P.allFinite() || scale > 1e14) {
      throw NonConvergent(fmt::format("solve_dare: value matrix diverged at iteration {}", it));
    }
    if (change <= options.tol * scale) {
      LqrSolution sol;
      // Gain consistent with the returned P.
      riccati_step(A, B, weights.Q, weights.R, P, &K);
      sol.P = P;
      sol.K = K;
      sol.iterations = it;
      sol.residual = dare_residual(theta, weights, P);
      if (spectral_radius(A + B * K) >= 1.0) {
        throw NonConvergent("solve_dare: fixed point does not stabilize the model");
      }
      return sol;
    }
  }
  throw NonConvergent(
      fmt::format("solve_dare: no convergence after {} iterations", options.max_iter));
}

double spectral_radius(const Matrix& M) {
  if (M.rows() != M.cols()) throw BadDims("spectral_radius: matrix must be square");
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix dlyap(const Matrix& F, const Matrix& M, double margin) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n || M.rows() != n || M.cols() != n) {
    throw BadDims("dlyap: F and M must be square of equal size");
  }
  const double rho = spectral_radius(F);
  if (rho >= 1.0 - margin) {
    throw Unstable(fmt::format("dlyap: spectral radius {} is not below 1", rho));
  }
  // vec(F' X F) = (F' kron F') vec(X) in column-major vectorization.
  const Eigen::Index nn = n * n;
  Matrix lhs = Matrix::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      lhs.block(i * n, j * n, n, n) -= F(j, i) * F.transpose();
    }
  }
  const Vector rhs = Eigen::Map<const Vector>(M.data(), nn);
  const Vector sol = lhs.partialPivLu().solve(rhs);
  Matrix X = Eigen::Map<const Matrix>(sol.data(), n, n);
  return 0.5 * (X + X.transpose());
}

Matrix closed_loop_value(const ParamPoint& theta) {
  const auto lqr = solve_dare(theta, LqrWeights::identity(theta.n(), theta.m()));
  const Matrix F = theta.A() + theta.B() * lqr.K;
  const Matrix M = Matrix::Identity(theta.n(), theta.n()) + lqr.K.transpose() * lqr.K;
  return dlyap(F, M);
}

Matrix closed_loop_lyapunov(const ParamPoint& theta) {
  const auto lqr = solve_dare(theta, LqrWeights::identity(theta.n(), theta.m()));
  const Matrix F = theta.A() + theta.B() * lqr.K;
  return dlyap(F, Matrix::Identity(theta.n(), theta.n()));
}

}  // namespace ltvchase
