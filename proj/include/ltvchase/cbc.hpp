#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ltvchase/conic.hpp"
#include "ltvchase/geometry.hpp"

namespace ltvchase {

inline constexpr int kDefaultWindowCap = 50;
inline constexpr int kDefaultSteinerSamples = 200;

// Base point plus the ordered request sets of a work function.
class WorkHistory {
 public:
  explicit WorkHistory(Vector anchor, int window_cap = kDefaultWindowCap);

  const Vector& anchor() const { return anchor_; }
  const std::vector<Polytope>& requests() const { return requests_; }
  int window_cap() const { return window_cap_; }
  int dim() const { return static_cast<int>(anchor_.size()); }
  std::size_t size() const { return requests_.size(); }
  bool empty() const { return requests_.empty(); }

  void append(Polytope request);  // BadDims on dimension mismatch

 private:
  friend WorkHistory truncate(const WorkHistory& history, const Vector& last_selection);
  Vector anchor_;
  std::vector<Polytope> requests_;
  int window_cap_;
};

/// Drops the oldest requests until size() == window_cap and restarts the
/// work function at last_selection, the point selected for the newest
/// dropped request. A history within its cap is returned unchanged.
WorkHistory truncate(const WorkHistory& history, const Vector& last_selection);

// Reduced: the free endpoint x is eliminated in closed form
// (inf_x ||x - q|| - v.x = -v.q for ||v|| <= 1).
// Full: x and its norm term are kept as decision variables.
enum class ConjugateForm { Reduced, Full };

/// Fenchel conjugate of the work function,
///   min over x, q_s in K_s of  sum_s ||q_s - q_{s-1}|| + ||x - q_t|| - v.x
/// with q_0 = anchor. One conic structure is built per history and reused
/// for every direction; evaluate() is safe to call concurrently.
class ConjugateEvaluator {
 public:
  struct Value {
    double value = 0.0;
    conic::SolveStatus status = conic::SolveStatus::Optimal;
    int iterations = 0;
  };

  explicit ConjugateEvaluator(const WorkHistory& history, ConjugateForm form = ConjugateForm::Reduced,
                              conic::SolverSettings settings = {});
  ~ConjugateEvaluator();
  ConjugateEvaluator(ConjugateEvaluator&&) noexcept;
  ConjugateEvaluator& operator=(ConjugateEvaluator&&) noexcept;

  int dim() const;
  // Requires ||v|| <= 1 + 1e-9. Throws Infeasible when a request is empty.
  Value evaluate(const Vector& v) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double work_conjugate(const WorkHistory& history, const Vector& v,
                      ConjugateForm form = ConjugateForm::Reduced,
                      const conic::SolverSettings& settings = {});

struct SteinerOptions {
  bool antithetic = true;  // pair each direction with its negation
  int workers = 0;         // 0: default_worker_count()
  ConjugateForm form = ConjugateForm::Reduced;
  conic::SolverSettings solver{};
  // Control variate center c: the estimate becomes
  // c - (dim/N) sum (h_i + v_i.c) v_i, unbiased for any c fixed before
  // sampling, with the linear part of h around c removed from the noise.
  std::optional<Vector> center;
};

/// Directions uniform on the unit sphere of R^dim by Gaussian normalization,
/// drawn sequentially from `seed`. Draws with ||g|| < 1e-12 are redrawn.
/// With antithetic sampling entry 2k+1 is the negation of entry 2k.
std::vector<Vector> sphere_directions(int dim, int count, std::uint64_t seed, bool antithetic);

struct ConjugateStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  int inexact = 0;  // solves that stopped at the iteration limit
};

struct SteinerEstimate {
  Vector raw;
  Vector projected;
  int samples = 0;
  ConjugateStats conjugate_values;
};

/// Monte-Carlo functional Steiner point -(dim/N) sum_i h_i v_i with
/// h_i = work_conjugate(history, v_i). The result does not depend on the
/// worker count: directions are drawn up front and summed in index order.
Vector steiner_raw(const WorkHistory& history, int num_samples, std::uint64_t seed,
                   const SteinerOptions& options = {}, ConjugateStats* stats = nullptr);

/// steiner_raw projected onto the newest request.
SteinerEstimate select_hypothesis(const WorkHistory& history, int num_samples, std::uint64_t seed,
                                  const SteinerOptions& options = {});

struct OfflinePath {
  double cost = 0.0;
  std::vector<Vector> trajectory;  // anchor followed by one point per request
};

/// Minimum of sum_s ||q_s - q_{s-1}|| over q_s in requests[s-1], q_0 = anchor.
OfflinePath offline_optimal(const std::vector<Polytope>& requests, const Vector& anchor,
                            const conic::SolverSettings& settings = {});

// sum of consecutive Euclidean step lengths; 0 for one point.
double path_length(const std::vector<Vector>& points);

}  // namespace ltvchase
