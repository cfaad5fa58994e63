#pragma once

#include <vector>

#include "ltvchase/conic.hpp"
#include "ltvchase/types.hpp"

namespace ltvchase {

inline constexpr double kMembershipTol = 1e-7;
inline constexpr double kDegeneracyTol = 1e-12;

// a . z <= b over the flat parameter space.
class Halfspace {
 public:
  // Throws BadDims if ||a|| <= kDegeneracyTol.
  Halfspace(Vector a, double b);

  const Vector& normal() const { return a_; }
  double offset() const { return b_; }
  int dim() const { return static_cast<int>(a_.size()); }

  // Same set, unit normal.
  Halfspace normalized() const;
  double violation(const Vector& z) const { return a_.dot(z) - b_; }

 private:
  Vector a_;
  double b_;
};

class Polytope {
 public:
  explicit Polytope(int dim) : dim_(dim) {}
  Polytope(int dim, std::vector<Halfspace> halfspaces);

  int dim() const { return dim_; }
  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }
  std::size_t size() const { return halfspaces_.size(); }

  void add(Halfspace h);
  void add(const std::vector<Halfspace>& hs);
  Polytope intersect(const Polytope& other) const;

 private:
  int dim_;
  std::vector<Halfspace> halfspaces_;
};

// Entrywise box lo <= theta(i,j) <= hi on the parameter matrix.
struct BoxBounds {
  double lo = -1.0;
  double hi = 1.0;

  void validate() const;  // throws BadDims unless lo < hi
  // Frobenius diameter and max Frobenius norm of the box in dimension dim.
  double diameter(int dim) const;
  double max_norm(int dim) const;
};

/// Halfspaces in flat parameter space for ||x_next - A x - B u||_inf <= W.
///
/// Row i of theta meets the regressor z = [x; u] through the i-th row block
/// of the flat vector, giving theta_i . z <= x_next[i] + W and
/// -theta_i . z <= W - x_next[i]. Normals are returned with unit length.
/// A zero regressor makes both constraints vacuous as long as
/// |x_next[i]| <= W; they are dropped then, and WViolation is thrown
/// otherwise.
std::vector<Halfspace> consistent_halfspaces(const Vector& x, const Vector& u,
                                             const Vector& x_next, double W);

Polytope box_polytope(const BoxBounds& bounds, int n, int m);
Polytope box_polytope(const BoxBounds& bounds, int dim);

bool contains(const Polytope& poly, const Vector& z, double tol = kMembershipTol);

/// Euclidean projection onto the polytope. Returns z unchanged if z is
/// already inside (tol = 0). Throws Infeasible if the polytope is empty.
Vector project(const Polytope& poly, const Vector& z,
               const conic::SolverSettings& settings = {});

struct ChebyshevBall {
  Vector center;
  double radius = 0.0;  // < 0 means empty interior, +inf for unbounded radius
};

ChebyshevBall chebyshev_center(const Polytope& poly,
                               const conic::SolverSettings& settings = {});

// max d.z - min d.z over the polytope (directional width). Throws Infeasible
// for an empty polytope.
double width(const Polytope& poly, const Vector& direction,
             const conic::SolverSettings& settings = {});

// Linear rows of a polytope as conic inequalities over variables
// [offset, offset + poly.dim()) of a problem with num_vars variables.
void append_rows(const Polytope& poly, int num_vars, int offset,
                 std::vector<conic::LinearIneq>& out);

}  // namespace ltvchase
