#include "ltvchase/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

namespace ltvchase {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kStochasticTol = 1e-12;
constexpr double kConsistencyTol = 1e-9;

ParamPoint plant_theta(const PlantModel& plant, int t, int mode) {
  return std::visit(Overloaded{
                        [&](const MjlsPlant& p) { return p.modes[static_cast<std::size_t>(mode)]; },
                        [&](const LtvFormulaPlant&) { return ltv_example_theta(t); },
                        [&](const ScriptedPlant& p) {
                          const auto k = std::min(static_cast<std::size_t>(t), p.thetas.size() - 1);
                          return p.thetas[k];
                        },
                    },
                    plant);
}

Vector draw_disturbance(const DisturbanceModel& model, const Vector& x, std::mt19937_64& rng) {
  const auto n = x.size();
  return std::visit(Overloaded{
                        [&](const FiniteSetDisturbance& d) -> Vector {
                          std::uniform_int_distribution<std::size_t> pick(0, d.atoms.size() - 1);
                          return d.atoms[pick(rng)];
                        },
                        [&](const UniformBoxDisturbance& d) -> Vector {
                          std::uniform_real_distribution<double> u(-d.half_width, d.half_width);
                          Vector w(n);
                          for (Eigen::Index i = 0; i < n; ++i) w[i] = u(rng);
                          return w;
                        },
                        [&](const ZeroDisturbance&) -> Vector { return Vector::Zero(n); },
                        [&](const SignAdversary& d) -> Vector {
                          Vector w(n);
                          for (Eigen::Index i = 0; i < n; ++i) w[i] = x[i] < 0.0 ? -d.magnitude : d.magnitude;
                          return w;
                        },
                    },
                    model.kind);
}

// Extreme values of d.z over a polytope; empty optional for an empty set.
std::optional<std::pair<double, double>> support_pair(const conic::ConeSolver& solver, const Vector& d) {
  const auto lo = solver.solve(d);
  const auto hi = solver.solve(-d);
  using conic::SolveStatus;
  if (lo.status == SolveStatus::Infeasible || hi.status == SolveStatus::Infeasible) return std::nullopt;
  if (lo.status == SolveStatus::Unbounded || hi.status == SolveStatus::Unbounded) {
    const double inf = std::numeric_limits<double>::infinity();
    return std::make_pair(-inf, inf);
  }
  return std::make_pair(lo.objective_value, -hi.objective_value);
}

LqrWeights effective_weights(const LqrWeights& w, int n, int m) {
  if (w.Q.size() == 0 && w.R.size() == 0) return LqrWeights::identity(n, m);
  return w;
}

}  // namespace

int plant_state_dim(const PlantModel& plant) {
  return std::visit(Overloaded{
                        [](const MjlsPlant& p) { return p.modes.empty() ? 0 : p.modes.front().n(); },
                        [](const LtvFormulaPlant&) { return 2; },
                        [](const ScriptedPlant& p) { return p.thetas.empty() ? 0 : p.thetas.front().n(); },
                    },
                    plant);
}

int plant_input_dim(const PlantModel& plant) {
  return std::visit(Overloaded{
                        [](const MjlsPlant& p) { return p.modes.empty() ? 0 : p.modes.front().m(); },
                        [](const LtvFormulaPlant&) { return 1; },
                        [](const ScriptedPlant& p) { return p.thetas.empty() ? 0 : p.thetas.front().m(); },
                    },
                    plant);
}

void validate_plant(const PlantModel& plant) {
  auto same_dims = [](const std::vector<ParamPoint>& thetas, const char* what) {
    if (thetas.empty()) throw BadDims(fmt::format("{}: no models", what));
    for (const auto& th : thetas) {
      if (th.n() != thetas.front().n() || th.m() != thetas.front().m()) {
        throw BadDims(fmt::format("{}: models have different dimensions", what));
      }
      if (th.n() < 1 || th.m() < 1) throw BadDims(fmt::format("{}: empty model", what));
    }
  };
  std::visit(Overloaded{
                 [&](const MjlsPlant& p) {
                   same_dims(p.modes, "mjls plant");
                   const auto k = static_cast<Eigen::Index>(p.modes.size());
                   if (p.transition.rows() != k || p.transition.cols() != k) {
                     throw BadDims(fmt::format("mjls plant: transition matrix must be {}x{}", k, k));
                   }
                   if ((p.transition.array() < 0.0).any()) throw BadDims("mjls plant: negative transition probability");
                   for (Eigen::Index i = 0; i < k; ++i) {
                     if (std::abs(p.transition.row(i).sum() - 1.0) > kStochasticTol) {
                       throw BadDims(fmt::format("mjls plant: transition row {} does not sum to 1", i));
                     }
                   }
                   if (p.initial_mode < 0 || p.initial_mode >= k) throw BadDims("mjls plant: initial mode out of range");
                 },
                 [](const LtvFormulaPlant&) {},
                 [&](const ScriptedPlant& p) { same_dims(p.thetas, "scripted plant"); },
             },
             plant);
}

double DisturbanceModel::bound() const {
  return std::visit(Overloaded{
                        [](const FiniteSetDisturbance& d) {
                          double b = 0.0;
                          for (const auto& a : d.atoms) b = std::max(b, a.lpNorm<Eigen::Infinity>());
                          return b;
                        },
                        [](const UniformBoxDisturbance& d) { return d.half_width; },
                        [](const ZeroDisturbance&) { return 0.0; },
                        [](const SignAdversary& d) { return d.magnitude; },
                    },
                    kind);
}

void validate_controller(const ControllerSpec& spec, int n, int m) {
  std::visit(Overloaded{
                 [](const CbcLqrController& c) {
                   if (c.samples < 1) throw BadDims("cbc controller: samples must be >= 1");
                   if (c.window_cap < 1) throw BadDims("cbc controller: window cap must be >= 1");
                   if (c.exploration && !(*c.exploration >= 0.0)) {
                     throw BadDims("cbc controller: exploration magnitude must be >= 0");
                   }
                 },
                 [](const OlsLqrController& c) {
                   if (c.window < 1) throw BadDims("ols controller: window must be >= 1");
                   if (!(c.forgetting > 0.0 && c.forgetting <= 1.0)) {
                     throw BadDims("ols controller: forgetting factor must lie in (0, 1]");
                   }
                   if (!(c.ridge >= 0.0)) throw BadDims("ols controller: ridge must be >= 0");
                 },
                 [](const OpenLoopController&) {},
                 [&](const FixedGainController& c) {
                   if (c.K.rows() != m || c.K.cols() != n) {
                     throw BadDims(fmt::format("fixed gain: K must be {}x{}, got {}x{}", m, n, c.K.rows(), c.K.cols()));
                   }
                 },
                 [](const RandomInputController& c) {
                   if (!(c.magnitude >= 0.0)) throw BadDims("random input: magnitude must be >= 0");
                 },
             },
             spec);
}

std::string controller_kind(const ControllerSpec& spec) {
  return std::visit(Overloaded{
                        [](const CbcLqrController&) { return std::string("cbc_lqr"); },
                        [](const OlsLqrController&) { return std::string("ols_lqr"); },
                        [](const OpenLoopController&) { return std::string("open_loop"); },
                        [](const FixedGainController&) { return std::string("fixed_gain"); },
                        [](const RandomInputController&) { return std::string("random_input"); },
                    },
                    spec);
}

Vector step_plant(const ParamPoint& theta, const Vector& x, const Vector& u, const Vector& w) {
  if (x.size() != theta.n() || w.size() != theta.n() || u.size() != theta.m()) {
    throw BadDims("step_plant: dimension mismatch");
  }
  return theta.A() * x + theta.B() * u + w;
}

int mjls_next_mode(const Matrix& pi, int mode, std::mt19937_64& rng) {
  if (mode < 0 || mode >= pi.rows()) throw BadDims("mjls_next_mode: mode out of range");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    acc += pi(mode, j);
    if (r < acc) return static_cast<int>(j);
  }
  // rounding left r above the last partial sum; take the last reachable mode
  for (Eigen::Index j = pi.cols(); j-- > 0;) {
    if (pi(mode, j) > 0.0) return static_cast<int>(j);
  }
  return mode;
}

ParamPoint ltv_example_theta(int k) {
  const double kk = k;
  Matrix A(2, 2);
  A << 1.5, 0.0025 * kk, -0.1 * std::cos(0.3 * kk), 1.0 + std::pow(0.05, 1.5) * std::sin(0.5 * kk) * std::sqrt(kk);
  Matrix B(2, 1);
  B << 0.05, 0.05 * (0.1 * kk + 2.0) / (0.1 * kk + 3.0);
  return ParamPoint(A, B);
}

ParamPoint ols_estimate(const std::vector<Transition>& transitions, int window, double lambda, double ridge,
                        const std::optional<ParamPoint>& prior) {
  if (transitions.empty()) throw BadDims("ols_estimate: no transitions");
  if (window < 1) throw BadDims("ols_estimate: window must be >= 1");
  const auto n = transitions.front().x.size();
  const auto m = transitions.front().u.size();
  const auto p = n + m;
  const auto count = std::min(transitions.size(), static_cast<std::size_t>(window));
  const auto first = transitions.size() - count;
  Matrix Z = Matrix::Zero(static_cast<Eigen::Index>(count) + p, p);
  Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(count) + p, n);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& tr = transitions[first + k];
    if (tr.x.size() != n || tr.u.size() != m || tr.x_next.size() != n) {
      throw BadDims("ols_estimate: inconsistent transition dimensions");
    }
    const double age = static_cast<double>(count - 1 - k);
    const double sw = std::sqrt(std::pow(lambda, age));
    const auto r = static_cast<Eigen::Index>(k);
    Z.block(r, 0, 1, n) = sw * tr.x.transpose();
    Z.block(r, n, 1, m) = sw * tr.u.transpose();
    Y.row(r) = sw * tr.x_next.transpose();
  }
  Z.bottomRows(p) = std::sqrt(ridge) * Matrix::Identity(p, p);
  if (prior) {
    if (prior->n() != n || prior->m() != m) throw BadDims("ols_estimate: prior dimension mismatch");
    Y.bottomRows(p) = std::sqrt(ridge) * prior->matrix().transpose();
  }
  const Matrix theta_t = Z.completeOrthogonalDecomposition().solve(Y);
  return ParamPoint(Matrix(theta_t.transpose()));
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void RunSpec::validate() const {
  validate_plant(plant);
  const int n = plant_state_dim(plant);
  const int m = plant_input_dim(plant);
  validate_controller(controller, n, m);
  theta_box.validate();
  const LqrWeights w = effective_weights(weights, n, m);
  w.validate();
  if (w.Q.rows() != n || w.R.rows() != m) {
    throw BadDims(fmt::format("run: weights must be {0}x{0} and {1}x{1}", n, m));
  }
  if (horizon < 1) throw ConfigError("run: horizon must be >= 1");
  if (!(W > 0.0)) throw ConfigError("run: W must be > 0");
  if (x0 && x0->size() != n) throw BadDims(fmt::format("run: x0 must have {} entries", n));
  if (disturbance.zero_tail < 0) throw ConfigError("run: zero tail must be >= 0");
  if (const auto* fs = std::get_if<FiniteSetDisturbance>(&disturbance.kind)) {
    if (fs->atoms.empty()) throw ConfigError("run: finite disturbance set is empty");
    for (const auto& a : fs->atoms) {
      if (a.size() != n) throw BadDims(fmt::format("run: disturbance atoms must have {} entries", n));
    }
  }
  if (disturbance.bound() > W) {
    throw ConfigError(fmt::format("run: disturbance bound {} exceeds W = {}", disturbance.bound(), W));
  }
  if (const auto* mj = std::get_if<MjlsPlant>(&plant)) {
    for (const auto& th : mj->modes) {
      const auto& M = th.matrix();
      if ((M.array() < theta_box.lo).any() || (M.array() > theta_box.hi).any()) {
        throw ConfigError("run: a plant mode lies outside the parameter box");
      }
    }
  }
}

ClosedLoopTrace run_closed_loop(const RunSpec& spec) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const int n = plant_state_dim(spec.plant);
  const int m = plant_input_dim(spec.plant);
  const int T = spec.horizon;
  const LqrWeights weights = effective_weights(spec.weights, n, m);

  ClosedLoopTrace trace;
  trace.label = spec.label;
  trace.seed = spec.seed;
  trace.config_hash = spec.config_hash;
  trace.n = n;
  trace.m = m;
  trace.steps.reserve(static_cast<std::size_t>(T) + 1);

  std::mt19937_64 mode_rng(stream_seed(spec.seed, Stream::Modes));
  std::mt19937_64 dist_rng(stream_seed(spec.seed, Stream::Disturbance));
  std::mt19937_64 input_rng(stream_seed(spec.seed, Stream::Input));
  const std::uint64_t dir_seed = stream_seed(spec.seed, Stream::Directions);

  const Polytope theta_poly = box_polytope(spec.theta_box, n, m);
  const Vector theta_init = chebyshev_center(theta_poly).center;
  const ParamPoint theta_init_point = ParamPoint::from_flat(theta_init, n, m);

  const auto* mjls = std::get_if<MjlsPlant>(&spec.plant);
  const auto* cbc = std::get_if<CbcLqrController>(&spec.controller);
  const auto* ols = std::get_if<OlsLqrController>(&spec.controller);
  const bool adaptive = cbc || ols;

  int mode = mjls ? mjls->initial_mode : -1;
  Vector x = spec.x0 ? *spec.x0 : Vector(Vector::Zero(n));
  Matrix K = Matrix::Zero(m, n);
  if (const auto* fg = std::get_if<FixedGainController>(&spec.controller)) K = fg->K;
  Vector theta_hat = theta_init;

  WorkHistory history(theta_init, cbc ? cbc->window_cap : kDefaultWindowCap);
  std::vector<Vector> selections;  // aligned with history.requests()
  std::vector<Transition> transitions;
  SteinerOptions steiner;
  steiner.workers = spec.workers;
  if (cbc) steiner.antithetic = cbc->antithetic;

  auto control = [&](int t) -> Vector {
    return std::visit(Overloaded{
                          [&](const CbcLqrController& c) -> Vector {
                            if (t == 0) return Vector::Zero(m);
                            Vector u = K * x;
                            if (c.exploration && t < T) {
                              std::uniform_real_distribution<double> eta(-*c.exploration, *c.exploration);
                              u.array() += eta(input_rng);
                            }
                            return u;
                          },
                          [&](const OlsLqrController&) -> Vector {
                            return t == 0 ? Vector(Vector::Zero(m)) : Vector(K * x);
                          },
                          [&](const OpenLoopController&) -> Vector { return Vector::Zero(m); },
                          [&](const FixedGainController&) -> Vector { return K * x; },
                          [&](const RandomInputController& c) -> Vector {
                            if (t == T) return Vector::Zero(m);
                            std::uniform_real_distribution<double> u(-c.magnitude, c.magnitude);
                            Vector out(m);
                            for (int i = 0; i < m; ++i) out[i] = u(input_rng);
                            return out;
                          },
                      },
                      spec.controller);
  };

  auto synthesize = [&](StepRecord& rec) {
    try {
      K = solve_dare(ParamPoint::from_flat(theta_hat, n, m), weights).K;
      rec.dare_status = DareStatus::Ok;
    } catch (const NonConvergent&) {
      rec.dare_status = DareStatus::HeldGain;
      ++trace.dare_failures;
    }
  };

  Vector prev_theta;
  double cum_hyp = 0.0;
  double cum_true = 0.0;
  for (int t = 0; t <= T; ++t) {
    StepRecord rec;
    rec.t = t;
    rec.mode = mode;
    const ParamPoint theta = plant_theta(spec.plant, t, mode);
    rec.theta = theta.flat();
    if (t > 0) rec.true_step = (rec.theta - prev_theta).norm();
    cum_true += rec.true_step;
    rec.cum_true_var = cum_true;
    rec.x = x;
    rec.norm_x = x.norm();
    rec.u = control(t);
    rec.norm_u = rec.u.norm();

    if (t == T) {
      rec.w = Vector::Zero(n);
      rec.theta_hat = theta_hat;
      rec.cum_hyp_path = cum_hyp;
      trace.steps.push_back(std::move(rec));
      break;
    }

    Vector w = draw_disturbance(spec.disturbance, x, dist_rng);
    if (t >= T - spec.disturbance.zero_tail) w.setZero();
    rec.w = w;
    const Vector x_next = step_plant(theta, x, rec.u, w);

    Polytope request = theta_poly;
    request.add(consistent_halfspaces(x, rec.u, x_next, spec.W));
    rec.consistent = contains(request, rec.theta, kConsistencyTol);
    if (adaptive) {
      const Vector before = theta_hat;
      if (cbc) {
        history.append(request);
        if (static_cast<int>(history.size()) > cbc->window_cap) {
          const auto drop = history.size() - static_cast<std::size_t>(cbc->window_cap);
          history = truncate(history, selections[drop - 1]);
          selections.erase(selections.begin(), selections.begin() + static_cast<std::ptrdiff_t>(drop));
        }
        SteinerEstimate est;
        if (cbc->control_variate) steiner.center = theta_hat;
        try {
          est = select_hypothesis(history, cbc->samples,
                                  cbc->common_directions ? dir_seed : dir_seed + static_cast<std::uint64_t>(t), steiner);
        } catch (const Infeasible& e) {
          throw Infeasible(fmt::format("step {}: {}", t, e.what()), t);
        }
        theta_hat = est.projected;
        selections.push_back(theta_hat);
        rec.conjugate_inexact = est.conjugate_values.inexact;
        if (spec.chase_diagnostics) {
          const Vector gap = est.raw - est.projected;
          rec.raw_distance = gap.norm();
          rec.projected_member = contains(request, est.projected);
          std::vector<Vector> extra;
          if (rec.raw_distance > kDegeneracyTol) extra.push_back(gap / rec.raw_distance);
          rec.window_diameter = union_diameter_lower_bound(history.requests(), extra);
        }
      } else {
        transitions.push_back(Transition{x, rec.u, x_next});
        Matrix est = ols_estimate(transitions, ols->window, ols->forgetting, ols->ridge, theta_init_point).matrix();
        est = est.cwiseMax(spec.theta_box.lo).cwiseMin(spec.theta_box.hi);
        theta_hat = ParamPoint(est).flat();
      }
      synthesize(rec);
      rec.hyp_step = (theta_hat - before).norm();
    }
    if (!rec.consistent) ++trace.consistency_violations;
    cum_hyp += rec.hyp_step;
    rec.cum_hyp_path = cum_hyp;
    rec.theta_hat = theta_hat;
    trace.steps.push_back(std::move(rec));

    prev_theta = theta.flat();
    if (mjls) mode = mjls_next_mode(mjls->transition, mode, mode_rng);
    x = x_next;
  }
  trace.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

double ClosedLoopTrace::max_state_norm() const {
  double best = 0.0;
  for (const auto& s : steps) best = std::max(best, s.norm_x);
  return best;
}

double ClosedLoopTrace::final_state_norm() const { return steps.empty() ? 0.0 : steps.back().norm_x; }

double total_variation(const ClosedLoopTrace& trace, int s, int e) {
  const int last = static_cast<int>(trace.steps.size()) - 1;
  if (s < 0 || e > last || s > e) throw BadDims(fmt::format("total_variation: bad interval [{}, {}]", s, e));
  double total = 0.0;
  for (int tau = s + 1; tau <= e; ++tau) {
    const auto& a = trace.steps[static_cast<std::size_t>(tau)].theta;
    const auto& b = trace.steps[static_cast<std::size_t>(tau - 1)].theta;
    total += (a - b).norm();
  }
  return total;
}

double union_diameter_lower_bound(const std::vector<Polytope>& sets, const std::vector<Vector>& directions) {
  if (sets.empty()) return 0.0;
  const int d = sets.front().dim();
  std::vector<Vector> dirs;
  for (int j = 0; j < d; ++j) dirs.push_back(Vector::Unit(d, j));
  for (const auto& v : directions) {
    if (v.size() != d) throw BadDims("union_diameter_lower_bound: direction dimension mismatch");
    if (v.norm() > kDegeneracyTol) dirs.push_back(v.normalized());
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(dirs.size(), inf);
  std::vector<double> hi(dirs.size(), -inf);
  for (const auto& poly : sets) {
    if (poly.dim() != d) throw BadDims("union_diameter_lower_bound: sets differ in dimension");
    conic::SocpProblem prob;
    prob.num_vars = d;
    prob.objective = Vector::Zero(d);
    append_rows(poly, d, 0, prob.linear_ineqs);
    const conic::ConeSolver solver(prob);
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      const auto range = support_pair(solver, dirs[k]);
      if (!range) break;  // empty set adds nothing to the union
      lo[k] = std::min(lo[k], range->first);
      hi[k] = std::max(hi[k], range->second);
    }
  }
  double best = 0.0;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    if (hi[k] >= lo[k]) best = std::max(best, hi[k] - lo[k]);
  }
  return best;
}

}  // namespace ltvchase
