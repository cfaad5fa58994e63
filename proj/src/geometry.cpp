#include "ltvchase/geometry.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace ltvchase {

Halfspace::Halfspace(Vector a, double b) : a_(std::move(a)), b_(b) {
  if (!(a_.norm() > kDegeneracyTol)) {
    throw BadDims("Halfspace: degenerate normal");
  }
}

Halfspace Halfspace::normalized() const {
  const double s = a_.norm();
  return Halfspace(a_ / s, b_ / s);
}

Polytope::Polytope(int dim, std::vector<Halfspace> halfspaces) : dim_(dim) {
  halfspaces_.reserve(halfspaces.size());
  for (auto& h : halfspaces) add(std::move(h));
}

void Polytope::add(Halfspace h) {
  if (h.dim() != dim_) {
    throw BadDims(fmt::format("Polytope: halfspace of dim {} added to polytope of dim {}", h.dim(), dim_));
  }
  halfspaces_.push_back(std::move(h));
}

void Polytope::add(const std::vector<Halfspace>& hs) {
  for (const auto& h : hs) add(h);
}

Polytope Polytope::intersect(const Polytope& other) const {
  if (other.dim_ != dim_) throw BadDims("Polytope::intersect: dimension mismatch");
  Polytope out = *this;
  out.add(other.halfspaces_);
  return out;
}

void BoxBounds::validate() const {
  if (!(lo < hi)) throw BadDims(fmt::format("BoxBounds: need lo < hi, got [{}, {}]", lo, hi));
}

double BoxBounds::diameter(int dim) const { return (hi - lo) * std::sqrt(static_cast<double>(dim)); }

double BoxBounds::max_norm(int dim) const {
  return std::max(std::abs(lo), std::abs(hi)) * std::sqrt(static_cast<double>(dim));
}

std::vector<Halfspace> consistent_halfspaces(const Vector& x, const Vector& u,
                                             const Vector& x_next, double W) {
  const auto n = x.size();
  const auto m = u.size();
  if (x_next.size() != n || n == 0) {
    throw BadDims(fmt::format("consistent_halfspaces: x has {} entries, x_next has {}", n, x_next.size()));
  }
  if (!(W > 0.0)) throw BadDims("consistent_halfspaces: W must be positive");
  Vector z(n + m);
  z << x, u;
  const double zn = z.norm();
  std::vector<Halfspace> out;
  if (zn <= kDegeneracyTol) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(x_next[i]) > W) {
        throw WViolation(fmt::format(
            "observed |x_next[{}]| = {} exceeds W = {} with zero regressor", i, std::abs(x_next[i]), W));
      }
    }
    return out;
  }
  const Eigen::Index dim = n * (n + m);
  out.reserve(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector a = Vector::Zero(dim);
    a.segment(i * (n + m), n + m) = z / zn;
    out.emplace_back(a, (x_next[i] + W) / zn);
    out.emplace_back(-a, (W - x_next[i]) / zn);
  }
  return out;
}

Polytope box_polytope(const BoxBounds& bounds, int dim) {
  bounds.validate();
  Polytope p(dim);
  for (int j = 0; j < dim; ++j) {
    Vector e = Vector::Zero(dim);
    e[j] = 1.0;
    p.add(Halfspace(e, bounds.hi));
    p.add(Halfspace(-e, -bounds.lo));
  }
  return p;
}

Polytope box_polytope(const BoxBounds& bounds, int n, int m) { return box_polytope(bounds, flat_dim(n, m)); }

bool contains(const Polytope& poly, const Vector& z, double tol) {
  if (z.size() != poly.dim()) {
    throw BadDims(fmt::format("contains: point of dim {} for polytope of dim {}", z.size(), poly.dim()));
  }
  for (const auto& h : poly.halfspaces()) {
    if (h.violation(z) > tol) return false;
  }
  return true;
}

void append_rows(const Polytope& poly, int num_vars, int offset, std::vector<conic::LinearIneq>& out) {
  for (const auto& h : poly.halfspaces()) {
    conic::SparseVector a(num_vars);
    const Vector& nrm = h.normal();
    for (int j = 0; j < poly.dim(); ++j) {
      if (nrm[j] != 0.0) a.insert(offset + j) = nrm[j];
    }
    out.push_back({std::move(a), h.offset()});
  }
}

Vector project(const Polytope& poly, const Vector& z, const conic::SolverSettings& settings) {
  if (z.size() != poly.dim()) throw BadDims("project: dimension mismatch");
  if (contains(poly, z, 0.0)) return z;
  const int d = poly.dim();
  // variables: y (d), t
  conic::SocpProblem prob;
  prob.num_vars = d + 1;
  prob.objective = Vector::Zero(d + 1);
  prob.objective[d] = 1.0;
  append_rows(poly, d + 1, 0, prob.linear_ineqs);
  conic::SocConstraint dist;
  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < d; ++j) trip.emplace_back(j, j, 1.0);
  dist.A.resize(d, d + 1);
  dist.A.setFromTriplets(trip.begin(), trip.end());
  dist.b = -z;
  dist.c.resize(d + 1);
  dist.c.insert(d) = 1.0;
  prob.soc_constraints.push_back(std::move(dist));
  const auto sol = conic::solve_socp(prob, settings);
  if (sol.status != conic::SolveStatus::Optimal) {
    throw Infeasible(fmt::format("project: conic solve ended with status {}", conic::to_string(sol.status)));
  }
  return sol.primal.head(d);
}

ChebyshevBall chebyshev_center(const Polytope& poly, const conic::SolverSettings& settings) {
  if (poly.size() == 0) throw BadDims("chebyshev_center: polytope has no halfspaces");
  const int d = poly.dim();
  // max r  s.t.  a.c + ||a|| r <= b
  conic::SocpProblem prob;
  prob.num_vars = d + 1;
  prob.objective = Vector::Zero(d + 1);
  prob.objective[d] = -1.0;
  for (const auto& h : poly.halfspaces()) {
    Vector row(d + 1);
    row << h.normal(), h.normal().norm();
    prob.linear_ineqs.push_back({conic::sparse_from_dense(row), h.offset()});
  }
  const auto sol = conic::solve_socp(prob, settings);
  ChebyshevBall ball;
  switch (sol.status) {
    case conic::SolveStatus::Optimal:
      ball.center = sol.primal.head(d);
      ball.radius = sol.primal[d];
      return ball;
    case conic::SolveStatus::Unbounded:
      ball.center = sol.primal.head(d);
      ball.radius = std::numeric_limits<double>::infinity();
      return ball;
    default:
      throw Infeasible(fmt::format("chebyshev_center: conic solve ended with status {}",
                                   conic::to_string(sol.status)));
  }
}

double width(const Polytope& poly, const Vector& direction, const conic::SolverSettings& settings) {
  if (direction.size() != poly.dim()) throw BadDims("width: dimension mismatch");
  const int d = poly.dim();
  conic::SocpProblem prob;
  prob.num_vars = d;
  prob.objective = direction;
  append_rows(poly, d, 0, prob.linear_ineqs);
  const conic::ConeSolver solver(prob);
  const auto lo = solver.solve(direction, settings);
  const auto hi = solver.solve(-direction, settings);
  if (lo.status == conic::SolveStatus::Infeasible || hi.status == conic::SolveStatus::Infeasible) {
    throw Infeasible("width: empty polytope");
  }
  if (lo.status == conic::SolveStatus::Unbounded || hi.status == conic::SolveStatus::Unbounded) {
    return std::numeric_limits<double>::infinity();
  }
  if (lo.status != conic::SolveStatus::Optimal || hi.status != conic::SolveStatus::Optimal) {
    throw Infeasible("width: conic solve did not converge");
  }
  return -hi.objective_value - lo.objective_value;
}

}  // namespace ltvchase
