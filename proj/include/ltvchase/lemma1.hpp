#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ltvchase/geometry.hpp"

namespace ltvchase {

struct Lemma1Options {
  int dim = 2;
  int instances = 20;
  int horizon = 15;
  int samples = 2000;
  std::uint64_t seed = 1;
  BoxBounds box{-1.0, 1.0};
  double slack = 0.05;  // tolerance in units of dim * dia(box)
  int workers = 0;

  void validate() const;  // ConfigError: dim in [1, 6], horizon in [1, 20]
};

struct Lemma1Instance {
  int index = 0;
  bool solved = true;
  std::string error;
  int intervals = 0;
  int violations = 0;
  double worst_gap = 0.0;  // max over (s, e) of hat_delta - dim (dia + 2 kappa + opt_delta)
  double selector_path = 0.0;
  double opt_cost = 0.0;
};

struct Lemma1Report {
  Lemma1Options options;
  double diameter = 0.0;  // dia of the box
  double kappa = 0.0;     // largest norm in the box
  double tolerance = 0.0;
  std::vector<Lemma1Instance> instances;
  int intervals = 0;
  int violations = 0;
  int failures = 0;  // instances aborted by a solver error
  double worst_gap = 0.0;

  bool pass() const { return violations == 0 && failures == 0; }
};

/// Random sequence of `horizon` polytopes inside the box. Each is the box cut
/// by dim + 2 halfspaces around its own random center, so consecutive sets
/// are generally not nested.
std::vector<Polytope> random_request_sequence(int dim, int horizon, const BoxBounds& box, std::uint64_t seed);

// Worst value of sum_{tau=s+1}^{e} |p_tau - p_{tau-1}| minus
// dim * (dia + 2 kappa + sum_{tau=s+1}^{e} |q_tau - q_{tau-1}|) over
// 1 <= s < e <= T, where index 0 of both paths is the common start point.
struct IntervalCheck {
  int intervals = 0;
  int violations = 0;  // gaps above tolerance
  double worst_gap = -std::numeric_limits<double>::infinity();
};
IntervalCheck check_partial_paths(const std::vector<Vector>& selections, const std::vector<Vector>& opt, int dim,
                                  double diameter, double kappa, double tolerance);

Lemma1Report lemma1_test(const Lemma1Options& options);

std::string format_report(const Lemma1Report& report);

}  // namespace ltvchase
