#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "ltvchase/cbc.hpp"
#include "ltvchase/control.hpp"
#include "ltvchase/geometry.hpp"

namespace ltvchase {

// ---- plants ----

struct MjlsPlant {
  std::vector<ParamPoint> modes;
  Matrix transition;  // row-stochastic
  int initial_mode = 0;
};

// The time-varying example system; see ltv_example_theta.
struct LtvFormulaPlant {};

struct ScriptedPlant {
  std::vector<ParamPoint> thetas;  // theta_t; the last entry repeats past its end
};

using PlantModel = std::variant<MjlsPlant, LtvFormulaPlant, ScriptedPlant>;

int plant_state_dim(const PlantModel& plant);
int plant_input_dim(const PlantModel& plant);
void validate_plant(const PlantModel& plant);  // BadDims

// ---- disturbances ----

struct FiniteSetDisturbance {
  std::vector<Vector> atoms;  // drawn uniformly
};
struct UniformBoxDisturbance {
  double half_width = 0.0;
};
struct ZeroDisturbance {};
// w_t = magnitude * sign(x_t), with sign(0) = +1.
struct SignAdversary {
  double magnitude = 0.0;
};

struct DisturbanceModel {
  std::variant<FiniteSetDisturbance, UniformBoxDisturbance, ZeroDisturbance, SignAdversary> kind =
      ZeroDisturbance{};
  int zero_tail = 0;  // w_t = 0 for t >= horizon - zero_tail

  // Largest ||w||_inf the model can produce.
  double bound() const;
};

// ---- controllers ----

struct CbcLqrController {
  int samples = kDefaultSteinerSamples;
  int window_cap = kDefaultWindowCap;
  std::optional<double> exploration;  // eta magnitude, if any
  bool antithetic = true;
  bool common_directions = true;  // reuse one direction set at every step
  bool control_variate = true;    // center the Steiner estimate on the previous hypothesis
};

struct OlsLqrController {
  int window = 10;
  double forgetting = 0.95;
  double ridge = 1e-8;
};

struct OpenLoopController {};

struct FixedGainController {
  Matrix K;
};

// u_t drawn entrywise from UNIF[-magnitude, magnitude].
struct RandomInputController {
  double magnitude = 1.0;
};

using ControllerSpec = std::variant<CbcLqrController, OlsLqrController, OpenLoopController,
                                    FixedGainController, RandomInputController>;

void validate_controller(const ControllerSpec& spec, int n, int m);  // BadDims
std::string controller_kind(const ControllerSpec& spec);

// ---- primitives ----

Vector step_plant(const ParamPoint& theta, const Vector& x, const Vector& u, const Vector& w);

int mjls_next_mode(const Matrix& pi, int mode, std::mt19937_64& rng);

// A(k) = [[1.5, 0.0025k], [-0.1 cos(0.3k), 1 + 0.05^1.5 sin(0.5k) sqrt(k)]],
// B(k) = 0.05 [1; (0.1k + 2) / (0.1k + 3)].
ParamPoint ltv_example_theta(int k);

struct Transition {
  Vector x;
  Vector u;
  Vector x_next;
};

/// Weighted ridge regression over the newest `window` transitions with
/// weight lambda^age (age 0 for the newest), solved row by row. The ridge
/// term ridge * ||theta - prior||_F^2 shrinks toward `prior` (zero if unset).
ParamPoint ols_estimate(const std::vector<Transition>& transitions, int window, double lambda, double ridge,
                        const std::optional<ParamPoint>& prior = std::nullopt);

// Independent generator seeds for the random streams of one run.
enum class Stream : std::uint64_t { Modes = 1, Disturbance = 2, Input = 3, Directions = 4 };
std::uint64_t stream_seed(std::uint64_t seed, Stream stream);

// ---- closed loop ----

struct RunSpec {
  std::string label;
  PlantModel plant = LtvFormulaPlant{};
  DisturbanceModel disturbance;
  ControllerSpec controller = OpenLoopController{};
  double W = 1.0;
  BoxBounds theta_box{-2.0, 3.0};
  LqrWeights weights;  // Q = I, R = I when both are left empty
  int horizon = 100;
  std::uint64_t seed = 1;
  std::optional<Vector> x0;  // zero when unset
  int workers = 0;           // Steiner sampler threads, 0 for the default
  bool chase_diagnostics = false;  // record raw-estimate distance and window diameter
  std::string config_hash;

  void validate() const;  // BadDims / ConfigError
};

enum class DareStatus : int { NotUsed = -1, Ok = 0, HeldGain = 1 };

struct StepRecord {
  int t = 0;
  int mode = -1;
  Vector x, u, w;
  Vector theta;      // flat true model theta_t
  Vector theta_hat;  // flat hypothesis selected after transition t
  double norm_x = 0.0;
  double norm_u = 0.0;
  double hyp_step = 0.0;   // ||theta_hat_t - theta_hat_{t-1}||_F
  double true_step = 0.0;  // ||theta_t - theta_{t-1}||_F
  double cum_hyp_path = 0.0;
  double cum_true_var = 0.0;
  DareStatus dare_status = DareStatus::NotUsed;
  bool consistent = true;  // theta_t in P_t and Theta
  // chasing diagnostics (NaN when not recorded)
  double raw_distance = std::numeric_limits<double>::quiet_NaN();
  double window_diameter = std::numeric_limits<double>::quiet_NaN();
  bool projected_member = true;
  int conjugate_inexact = 0;
};

struct ClosedLoopTrace {
  std::string label;
  std::uint64_t seed = 0;
  std::string config_hash;
  int n = 0;
  int m = 0;
  std::vector<StepRecord> steps;  // t = 0..horizon
  int dare_failures = 0;
  int consistency_violations = 0;
  double wall_time = 0.0;

  double cumulative_hyp_path() const { return steps.empty() ? 0.0 : steps.back().cum_hyp_path; }
  double cumulative_true_var() const { return steps.empty() ? 0.0 : steps.back().cum_true_var; }
  double max_state_norm() const;
  double final_state_norm() const;
};

/// Runs the loop for t = 0..horizon-1, starting from u_0 = 0 and the
/// Chebyshev center of Theta as the initial hypothesis. Row t of the trace
/// holds x_t, the applied u_t and w_t, and the hypothesis chosen from the
/// transition to x_{t+1}; the extra row t = horizon holds the final state.
/// Throws WViolation when the data contradicts W and Infeasible (with the
/// step index) when a consistent set turns out empty.
ClosedLoopTrace run_closed_loop(const RunSpec& spec);

// sum_{tau=s+1}^{e} ||theta_tau - theta_{tau-1}||_F from the stored models.
double total_variation(const ClosedLoopTrace& trace, int s, int e);

/// Lower bound on the diameter of the union of polytopes: the largest
/// spread of the union along the coordinate axes and the given extra
/// directions.
double union_diameter_lower_bound(const std::vector<Polytope>& sets, const std::vector<Vector>& directions);

}  // namespace ltvchase
