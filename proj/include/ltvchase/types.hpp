#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ltvchase {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error hierarchy. Every failure the library reports derives from Error so
// callers can catch broadly at the orchestration layer.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadDims : public Error {
 public:
  using Error::Error;
};

// DARE fixed-point iteration diverged or ran out of iterations.
class NonConvergent : public Error {
 public:
  using Error::Error;
};

// dlyap called with a matrix whose spectral radius is too close to (or above) 1.
class Unstable : public Error {
 public:
  using Error::Error;
};

// A conic program that should be feasible was certified empty (or the solver
// broke down on it).
class Infeasible : public Error {
 public:
  explicit Infeasible(const std::string& what, long step = -1)
      : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// Observed data contradicts the disturbance bound W.
class WViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A system hypothesis theta = [A B], an n x (n+m) matrix. The flat view used
// by the chasing machinery is the row-major vectorization of [A B]:
//   flat[i*(n+m) + j] = theta(i, j).
class ParamPoint {
 public:
  ParamPoint() = default;
  ParamPoint(const Matrix& A, const Matrix& B);
  explicit ParamPoint(Matrix theta);

  static ParamPoint from_flat(const Vector& flat, int n, int m);

  int n() const { return static_cast<int>(theta_.rows()); }
  int m() const { return static_cast<int>(theta_.cols() - theta_.rows()); }
  int flat_dim() const { return static_cast<int>(theta_.size()); }

  auto A() const { return theta_.leftCols(n()); }
  auto B() const { return theta_.rightCols(m()); }
  const Matrix& matrix() const { return theta_; }

  Vector flat() const;

 private:
  Matrix theta_;
};

inline int flat_dim(int n, int m) { return n * (n + m); }

}  // namespace ltvchase
