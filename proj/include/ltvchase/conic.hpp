#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "ltvchase/types.hpp"

namespace ltvchase::conic {

using SparseVector = Eigen::SparseVector<double>;
using SparseMatrix = Eigen::SparseMatrix<double>;

// a . z <= b
struct LinearIneq {
  SparseVector normal;
  double offset = 0.0;
};

// || A z + b || <= c . z + d
struct SocConstraint {
  SparseMatrix A;
  Vector b;
  SparseVector c;
  double d = 0.0;
};

struct SocpProblem {
  int num_vars = 0;
  Vector objective;  // minimized as objective . z
  std::vector<LinearIneq> linear_ineqs;
  std::vector<SocConstraint> soc_constraints;

  // Throws BadDims on any size mismatch or non-finite objective.
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };

const char* to_string(SolveStatus status);

struct Residuals {
  double primal = 0.0;  // max-abs slack equation residual
  double dual = 0.0;    // max-abs stationarity residual
  double gap = 0.0;     // complementarity s'z
};

struct SocpSolution {
  SolveStatus status = SolveStatus::MaxIter;
  Vector primal;
  double objective_value = 0.0;
  Residuals residuals;
  int iterations = 0;
};

struct SolverSettings {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iter = 200;
};

/// Primal-dual interior point method on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling and Mehrotra correction.
///
/// The constraint system (rows, cones, sparsity) is analysed once at
/// construction; `solve` may then be called with any objective of matching
/// size. `solve` is const and keeps no state between calls, so one solver can
/// serve many threads at once.
class ConeSolver {
 public:
  // The objective stored in `problem` is used by the one-argument `solve`.
  explicit ConeSolver(const SocpProblem& problem);
  ~ConeSolver();
  ConeSolver(ConeSolver&&) noexcept;
  ConeSolver& operator=(ConeSolver&&) noexcept;

  int num_vars() const;

  SocpSolution solve(const SolverSettings& settings = {}) const;
  SocpSolution solve(const Vector& objective, const SolverSettings& settings = {}) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SocpSolution solve_socp(const SocpProblem& problem, const SolverSettings& settings = {});

/// Largest violation of any raw constraint at z (<= 0 means feasible).
double max_violation(const SocpProblem& problem, const Vector& z);

// Convenience builders.
SparseVector sparse_from_dense(const Vector& v);

}  // namespace ltvchase::conic
