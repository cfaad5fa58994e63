#include "ltvchase/cbc.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "ltvchase/parallel.hpp"

namespace ltvchase {

namespace {

constexpr double kUnitTol = 1e-9;

// Variables: q_1..q_t (t*d), lambda_1..lambda_t, then optionally x (d) and
// lambda_x. q_0 is the constant anchor.
struct ChainLayout {
  int d = 0;
  int t = 0;
  bool endpoint = false;

  int q(int s) const { return (s - 1) * d; }  // s in 1..t
  int lambda(int s) const { return t * d + (s - 1); }
  int x() const { return t * (d + 1); }
  int lambda_x() const { return t * (d + 1) + d; }
  int num_vars() const { return t * (d + 1) + (endpoint ? d + 1 : 0); }
};

conic::SocConstraint step_cone(const ChainLayout& L, int to, int from, const Vector& anchor, int lambda) {
  // ||z_to - z_from|| <= lambda, where from < 0 stands for the anchor
  const int nv = L.num_vars();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * L.d);
  for (int j = 0; j < L.d; ++j) {
    trip.emplace_back(j, to + j, 1.0);
    if (from >= 0) trip.emplace_back(j, from + j, -1.0);
  }
  conic::SocConstraint soc;
  soc.A.resize(L.d, nv);
  soc.A.setFromTriplets(trip.begin(), trip.end());
  soc.b = from >= 0 ? Vector(Vector::Zero(L.d)) : Vector(-anchor);
  soc.c.resize(nv);
  soc.c.insert(lambda) = 1.0;
  soc.d = 0.0;
  return soc;
}

conic::SocpProblem build_chain(const std::vector<Polytope>& requests, const Vector& anchor, bool endpoint,
                               ChainLayout& L) {
  L.d = static_cast<int>(anchor.size());
  L.t = static_cast<int>(requests.size());
  L.endpoint = endpoint;
  const int nv = L.num_vars();
  conic::SocpProblem prob;
  prob.num_vars = nv;
  prob.objective = Vector::Zero(nv);
  for (int s = 1; s <= L.t; ++s) {
    const auto& req = requests[static_cast<std::size_t>(s - 1)];
    if (req.dim() != L.d) throw BadDims("work function: request dimension differs from anchor");
    append_rows(req, nv, L.q(s), prob.linear_ineqs);
    prob.soc_constraints.push_back(step_cone(L, L.q(s), s > 1 ? L.q(s - 1) : -1, anchor, L.lambda(s)));
    prob.objective[L.lambda(s)] = 1.0;
  }
  if (endpoint) {
    prob.soc_constraints.push_back(step_cone(L, L.x(), L.t > 0 ? L.q(L.t) : -1, anchor, L.lambda_x()));
    prob.objective[L.lambda_x()] = 1.0;
  }
  return prob;
}

}  // namespace

WorkHistory::WorkHistory(Vector anchor, int window_cap) : anchor_(std::move(anchor)), window_cap_(window_cap) {
  if (anchor_.size() == 0) throw BadDims("WorkHistory: empty anchor");
  if (window_cap_ < 1) throw BadDims("WorkHistory: window cap must be >= 1");
}

void WorkHistory::append(Polytope request) {
  if (request.dim() != dim()) {
    throw BadDims(fmt::format("WorkHistory: request of dim {} for anchor of dim {}", request.dim(), dim()));
  }
  requests_.push_back(std::move(request));
}

WorkHistory truncate(const WorkHistory& history, const Vector& last_selection) {
  const auto cap = static_cast<std::size_t>(history.window_cap());
  if (history.size() <= cap) return history;
  if (last_selection.size() != history.dim()) throw BadDims("truncate: selection dimension mismatch");
  WorkHistory out(last_selection, history.window_cap());
  const auto drop = history.size() - cap;
  out.requests_.assign(history.requests_.begin() + static_cast<std::ptrdiff_t>(drop), history.requests_.end());
  return out;
}

struct ConjugateEvaluator::Impl {
  ChainLayout layout;
  Vector anchor;
  Vector base_objective;
  std::unique_ptr<conic::ConeSolver> solver;  // null for an empty reduced history
  conic::SolverSettings settings;
};

ConjugateEvaluator::ConjugateEvaluator(const WorkHistory& history, ConjugateForm form,
                                       conic::SolverSettings settings)
    : impl_(std::make_unique<Impl>()) {
  impl_->anchor = history.anchor();
  impl_->settings = settings;
  const bool endpoint = form == ConjugateForm::Full;
  auto prob = build_chain(history.requests(), history.anchor(), endpoint, impl_->layout);
  impl_->base_objective = prob.objective;
  if (prob.num_vars > 0) impl_->solver = std::make_unique<conic::ConeSolver>(prob);
}

ConjugateEvaluator::~ConjugateEvaluator() = default;
ConjugateEvaluator::ConjugateEvaluator(ConjugateEvaluator&&) noexcept = default;
ConjugateEvaluator& ConjugateEvaluator::operator=(ConjugateEvaluator&&) noexcept = default;

int ConjugateEvaluator::dim() const { return impl_->layout.d; }

ConjugateEvaluator::Value ConjugateEvaluator::evaluate(const Vector& v) const {
  const auto& L = impl_->layout;
  if (v.size() != L.d) throw BadDims("work_conjugate: direction dimension mismatch");
  if (!(v.norm() <= 1.0 + kUnitTol)) {
    throw BadDims(fmt::format("work_conjugate: need ||v|| <= 1, got {}", v.norm()));
  }
  Value out;
  if (!impl_->solver) {
    out.value = -v.dot(impl_->anchor);
    return out;
  }
  Vector c = impl_->base_objective;
  const int slot = L.endpoint ? L.x() : L.q(L.t);
  c.segment(slot, L.d) -= v;
  const auto sol = impl_->solver->solve(c, impl_->settings);
  out.status = sol.status;
  out.iterations = sol.iterations;
  switch (sol.status) {
    case conic::SolveStatus::Optimal:
    case conic::SolveStatus::MaxIter:
      out.value = sol.objective_value;
      return out;
    case conic::SolveStatus::Infeasible:
      throw Infeasible("work_conjugate: a request set is empty");
    case conic::SolveStatus::Unbounded:
      break;
  }
  throw Error("work_conjugate: conic solver reported an unbounded conjugate");
}

double work_conjugate(const WorkHistory& history, const Vector& v, ConjugateForm form,
                      const conic::SolverSettings& settings) {
  return ConjugateEvaluator(history, form, settings).evaluate(v).value;
}

std::vector<Vector> sphere_directions(int dim, int count, std::uint64_t seed, bool antithetic) {
  if (dim < 1 || count < 0) throw BadDims("sphere_directions: bad dimension or count");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    if (antithetic && out.size() % 2 == 1) {
      out.push_back(-out.back());
      continue;
    }
    Vector g(dim);
    double nrm = 0.0;
    do {
      for (int j = 0; j < dim; ++j) g[j] = gauss(rng);
      nrm = g.norm();
    } while (nrm < 1e-12);
    out.push_back(g / nrm);
  }
  return out;
}

Vector steiner_raw(const WorkHistory& history, int num_samples, std::uint64_t seed, const SteinerOptions& options,
                   ConjugateStats* stats) {
  if (num_samples < 1) throw BadDims("steiner_raw: need at least one sample");
  const int d = history.dim();
  const auto dirs = sphere_directions(d, num_samples, seed, options.antithetic);
  const ConjugateEvaluator eval(history, options.form, options.solver);
  std::vector<ConjugateEvaluator::Value> h(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) { h[i] = eval.evaluate(dirs[i]); }, options.workers);

  if (options.center && options.center->size() != d) throw BadDims("steiner_raw: center has the wrong dimension");
  Vector sum = Vector::Zero(d);
  ConjugateStats st;
  st.min = std::numeric_limits<double>::infinity();
  st.max = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const double shift = options.center ? dirs[i].dot(*options.center) : 0.0;
    sum += (h[i].value + shift) * dirs[i];
    total += h[i].value;
    st.min = std::min(st.min, h[i].value);
    st.max = std::max(st.max, h[i].value);
    if (h[i].status == conic::SolveStatus::MaxIter) ++st.inexact;
  }
  st.mean = total / num_samples;
  if (stats) *stats = st;
  Vector est = -(static_cast<double>(d) / num_samples) * sum;
  if (options.center) est += *options.center;
  return est;
}

SteinerEstimate select_hypothesis(const WorkHistory& history, int num_samples, std::uint64_t seed,
                                  const SteinerOptions& options) {
  if (history.empty()) throw BadDims("select_hypothesis: history has no requests");
  SteinerEstimate est;
  est.samples = num_samples;
  est.raw = steiner_raw(history, num_samples, seed, options, &est.conjugate_values);
  est.projected = project(history.requests().back(), est.raw, options.solver);
  return est;
}

OfflinePath offline_optimal(const std::vector<Polytope>& requests, const Vector& anchor,
                            const conic::SolverSettings& settings) {
  OfflinePath out;
  out.trajectory.push_back(anchor);
  if (requests.empty()) return out;
  ChainLayout L;
  const auto prob = build_chain(requests, anchor, false, L);
  const auto sol = conic::solve_socp(prob, settings);
  if (sol.status == conic::SolveStatus::Infeasible) throw Infeasible("offline_optimal: a request set is empty");
  if (sol.status != conic::SolveStatus::Optimal && sol.status != conic::SolveStatus::MaxIter) {
    throw Error(fmt::format("offline_optimal: conic solve ended with status {}", conic::to_string(sol.status)));
  }
  for (int s = 1; s <= L.t; ++s) out.trajectory.push_back(sol.primal.segment(L.q(s), L.d));
  out.cost = sol.objective_value;
  return out;
}

double path_length(const std::vector<Vector>& points) {
  if (points.empty()) throw BadDims("path_length: no points");
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

}  // namespace ltvchase
