#include "ltvchase/lemma1.hpp"

#include <random>

#include <fmt/format.h>

#include "ltvchase/cbc.hpp"
#include "ltvchase/simulator.hpp"

namespace ltvchase {

void Lemma1Options::validate() const {
  if (dim < 1 || dim > 6) throw ConfigError(fmt::format("dim must be in [1, 6], got {}", dim));
  if (horizon < 1 || horizon > 20) throw ConfigError(fmt::format("horizon must be in [1, 20], got {}", horizon));
  if (instances < 1) throw ConfigError("instances must be positive");
  if (samples < 1) throw ConfigError("samples must be positive");
  if (slack < 0.0) throw ConfigError("slack must be non-negative");
  box.validate();
}

std::vector<Polytope> random_request_sequence(int dim, int horizon, const BoxBounds& box, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double half = 0.5 * (box.hi - box.lo);
  const double mid = 0.5 * (box.hi + box.lo);
  std::uniform_real_distribution<double> center_dist(mid - 0.7 * half, mid + 0.7 * half);
  std::uniform_real_distribution<double> radius_dist(0.05 * half, 0.4 * half);
  std::normal_distribution<double> normal;

  std::vector<Polytope> out;
  out.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    Vector c(dim);
    for (int i = 0; i < dim; ++i) c[i] = center_dist(rng);
    Polytope p = box_polytope(box, dim);
    for (int k = 0; k < dim + 2; ++k) {
      Vector a(dim);
      do {
        for (int i = 0; i < dim; ++i) a[i] = normal(rng);
      } while (a.norm() < 1e-6);
      a.normalize();
      p.add(Halfspace(a, a.dot(c) + radius_dist(rng)));
    }
    out.push_back(std::move(p));
  }
  return out;
}

IntervalCheck check_partial_paths(const std::vector<Vector>& selections, const std::vector<Vector>& opt, int dim,
                                  double diameter, double kappa, double tolerance) {
  if (selections.size() != opt.size()) throw BadDims("selection and oracle paths differ in length");
  const std::size_t T = selections.size() - 1;
  // prefix sums of step lengths
  std::vector<double> hat(T + 1, 0.0), best(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    hat[t] = hat[t - 1] + (selections[t] - selections[t - 1]).norm();
    best[t] = best[t - 1] + (opt[t] - opt[t - 1]).norm();
  }
  IntervalCheck out;
  for (std::size_t s = 1; s <= T; ++s) {
    for (std::size_t e = s + 1; e <= T; ++e) {
      const double gap = (hat[e] - hat[s]) - dim * (diameter + 2.0 * kappa + (best[e] - best[s]));
      ++out.intervals;
      if (gap > tolerance) ++out.violations;
      out.worst_gap = std::max(out.worst_gap, gap);
    }
  }
  return out;
}

Lemma1Report lemma1_test(const Lemma1Options& options) {
  options.validate();
  Lemma1Report report;
  report.options = options;
  report.diameter = options.box.diameter(options.dim);
  report.kappa = options.box.max_norm(options.dim);
  report.tolerance = options.slack * options.dim * report.diameter;
  report.worst_gap = -std::numeric_limits<double>::infinity();

  const Vector anchor = Vector::Constant(options.dim, 0.5 * (options.box.lo + options.box.hi));
  SteinerOptions steiner;
  steiner.workers = options.workers;

  for (int k = 0; k < options.instances; ++k) {
    Lemma1Instance inst;
    inst.index = k;
    const std::uint64_t base = stream_seed(options.seed + 0x100000000ULL * static_cast<std::uint64_t>(k + 1), Stream::Modes);
    try {
      const auto requests = random_request_sequence(options.dim, options.horizon, options.box, base);
      const OfflinePath opt = offline_optimal(requests, anchor);
      WorkHistory history(anchor, options.horizon);
      std::vector<Vector> selections{anchor};
      const std::uint64_t direction_seed = stream_seed(base, Stream::Directions);
      for (const auto& r : requests) {
        history.append(r);
        selections.push_back(select_hypothesis(history, options.samples, direction_seed, steiner).projected);
      }
      const auto check = check_partial_paths(selections, opt.trajectory, options.dim, report.diameter, report.kappa,
                                             report.tolerance);
      inst.intervals = check.intervals;
      inst.violations = check.violations;
      inst.worst_gap = check.worst_gap;
      inst.selector_path = path_length(selections);
      inst.opt_cost = opt.cost;
      report.intervals += check.intervals;
      report.violations += check.violations;
      report.worst_gap = std::max(report.worst_gap, check.worst_gap);
    } catch (const Error& e) {
      inst.solved = false;
      inst.error = e.what();
      ++report.failures;
    }
    report.instances.push_back(std::move(inst));
  }
  return report;
}

std::string format_report(const Lemma1Report& r) {
  const auto& o = r.options;
  std::string out = fmt::format("lemma1-test dim={} instances={} horizon={} samples={} seed={}\n", o.dim, o.instances,
                                o.horizon, o.samples, o.seed);
  out += fmt::format("dia={:.6g} kappa={:.6g} tolerance={:.6g}\n", r.diameter, r.kappa, r.tolerance);
  for (const auto& i : r.instances) {
    if (!i.solved) {
      out += fmt::format("  instance {:2d}: solver failure: {}\n", i.index, i.error);
      continue;
    }
    out += fmt::format("  instance {:2d}: path {:.4f} opt {:.4f} worst gap {:.4f} violations {}\n", i.index,
                       i.selector_path, i.opt_cost, i.worst_gap, i.violations);
  }
  const double margin = r.tolerance - r.worst_gap;
  out += fmt::format("{}: {} intervals, {} violations, {} failures, worst gap {:.6g}, margin {:.6g}\n",
                     r.pass() ? "PASS" : "FAIL", r.intervals, r.violations, r.failures, r.worst_gap, margin);
  return out;
}

}  // namespace ltvchase
