// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Traces are written under the working directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ltvchase/cbc.hpp"
#include "ltvchase/config.hpp"
#include "ltvchase/control.hpp"
#include "ltvchase/experiment.hpp"
#include "ltvchase/lemma1.hpp"
#include "ltvchase/parallel.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ltvchase;
namespace fs = std::filesystem;

namespace {

int failures = 0;
int consistency_total = 0;  // criterion 6 tally over the runs of criteria 2, 4 and 5
int consistency_runs = 0;

void report(int id, bool ok, const std::string& detail, double seconds) {
  if (!ok) ++failures;
  fmt::print("criterion {}: {} ({}; {:.0f}s)\n", id, ok ? "PASS" : "FAIL", detail, seconds);
  std::fflush(stdout);
}

double since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void tally(const ExperimentResult& res) {
  for (const auto& t : res.traces) {
    consistency_total += t.consistency_violations;
    ++consistency_runs;
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig bundled(const std::string& name) {
  return load_config((fs::path(LTVCHASE_SOURCE_DIR) / "configs" / name).string());
}

void criterion1() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rho(0.05, 0.95);
  double worst_dare = 0.0, worst_lyap = 0.0;
  int dare_errors = 0;
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 4;
    const int m = 1 + k % 3;
    const Matrix A = testing::random_stable(rng, n, rho(rng));
    const Matrix B = testing::random_matrix(rng, n, m);
    const LqrWeights w{testing::random_spd(rng, n), testing::random_spd(rng, m)};
    try {
      const auto sol = solve_dare(ParamPoint(A, B), w);
      worst_dare = std::max(worst_dare, dare_residual(ParamPoint(A, B), w, sol.P));
    } catch (const Error&) {
      ++dare_errors;
    }
    const Matrix M = testing::random_spd(rng, n);
    const Matrix X = dlyap(A, M);
    worst_lyap = std::max(worst_lyap, (X - A.transpose() * X * A - M).norm());
  }
  const auto golden = solve_dare(ParamPoint(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0)),
                                 LqrWeights::identity(1, 1));
  const double golden_err = std::abs(golden.P(0, 0) - (2.0 + std::sqrt(5.0)));
  const bool ok = dare_errors == 0 && worst_dare <= 1e-8 && worst_lyap <= 1e-10 && golden_err <= 1e-6;
  report(1, ok,
         fmt::format("max DARE residual {:.2e}, max dlyap residual {:.2e}, golden P error {:.2e}, {} DARE errors",
                     worst_dare, worst_lyap, golden_err, dare_errors),
         since(start));
}

void criterion2() {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = bundled("mjls.json");
  ConfigOverrides o;
  o.controller = "cbc";
  o.samples = 1000;
  apply_overrides(cfg, o);
  cfg.seeds = {1, 2, 3};
  cfg.chase_diagnostics = true;
  const auto res = run_experiment(cfg, 0, false);
  tally(res);
  int steps = 0, member = 0, near = 0;
  double worst_ratio = 0.0;
  for (const auto& t : res.traces) {
    for (const auto& s : t.steps) {
      if (std::isnan(s.raw_distance)) continue;
      ++steps;
      if (s.projected_member) ++member;
      const double ratio = s.window_diameter > 0.0 ? s.raw_distance / s.window_diameter : 0.0;
      if (ratio <= 0.2) ++near;
      worst_ratio = std::max(worst_ratio, ratio);
    }
  }
  const double frac = steps ? static_cast<double>(near) / steps : 0.0;
  const bool ok = steps > 0 && member == steps && frac >= 0.95;
  report(2, ok,
         fmt::format("{} steps over 3 seeds, projected member {}/{}, raw within 0.2 dia in {:.1f}% (worst ratio {:.3f})",
                     steps, member, steps, 100.0 * frac, worst_ratio),
         since(start));
}

void criterion3() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (int dim : {2, 3}) {
    Lemma1Options o;
    o.dim = dim;
    o.instances = 20;
    o.horizon = 15;
    o.samples = 2000;
    o.seed = 1;
    const auto r = lemma1_test(o);
    ok = ok && r.pass();
    detail += fmt::format("{}dim {}: {} intervals, {} violations, {} failures, worst gap {:.3f} vs tolerance {:.3f}",
                          detail.empty() ? "" : "; ", dim, r.intervals, r.violations, r.failures, r.worst_gap,
                          r.tolerance);
  }
  report(3, ok, detail, since(start));
}

ExperimentResult mjls_runs(const fs::path& dir, int workers) {
  auto cfg = bundled("mjls.json");
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.output_dir = dir.string();
  return run_experiment(cfg, workers);
}

void criterion4(const ExperimentResult& res, double seconds) {
  bool open_ok = true, bounded = true, settles = true;
  int violations = 0;
  std::string open_norms, cbc_max, cbc_tail;
  for (const auto& t : res.traces) {
    violations += t.consistency_violations;
    if (t.label == "open_loop") {
      open_ok = open_ok && t.final_state_norm() > 1e6;
      open_norms += fmt::format(" {:.2g}", t.final_state_norm());
    }
    if (t.label == "cbc") {
      const double mx = t.max_state_norm();
      const double before = t.steps[t.steps.size() - 11].norm_x;
      const double after = t.final_state_norm();
      bounded = bounded && mx < 1e3;
      settles = settles && after <= 0.5 * before;
      cbc_max += fmt::format(" {:.3g}", mx);
      cbc_tail += fmt::format(" {:.3g}/{:.3g}", after, before);
    }
  }
  const bool ok = open_ok && bounded && settles && violations == 0;
  report(4, ok,
         fmt::format("(a) {} open-loop |x_T|:{}; (b) {} cbc max|x|:{}; (c) {} cbc |x_T|/|x_T-10|:{}; (d) {} "
                     "violations",
                     open_ok ? "ok" : "FAIL", open_norms, bounded ? "ok" : "FAIL", cbc_max, settles ? "ok" : "FAIL",
                     cbc_tail, violations),
         seconds);
}

void criterion5() {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = bundled("ltv.json");
  cfg.output_dir = "acceptance_out/ltv";
  const auto res = run_experiment(cfg);
  tally(res);
  double cbc = 0.0, random = 0.0;
  for (const auto& s : res.summaries) {
    if (s.controller == "cbc_lqr") cbc = std::max(cbc, s.max_state_norm);
    if (s.controller == "random_input") random = std::max(random, s.max_state_norm);
  }
  const bool ok = std::isfinite(cbc) && random > 0.0 && 100.0 * cbc <= random;
  report(5, ok, fmt::format("cbc max|x| {:.3g}, random-input max|x| {:.3g}, ratio {:.3g}", cbc, random, random / cbc),
         since(start));
}

void criterion7(const ExperimentResult& first, const fs::path& first_dir, double seconds) {
  const fs::path dir = "acceptance_out/mjls_rerun";
  const int workers_a = first.workers;
  const int workers_b = workers_a == 1 ? 3 : 1;
  const auto start = std::chrono::steady_clock::now();
  const auto second = mjls_runs(dir, workers_b);
  int identical = 0;
  for (const auto& s : first.summaries) {
    if (slurp(first_dir / s.trace_file) == slurp(dir / s.trace_file)) ++identical;
  }
  const bool ok = identical == static_cast<int>(first.summaries.size()) &&
                  second.summaries.size() == first.summaries.size();
  report(7, ok,
         fmt::format("{}/{} traces bitwise identical between {} and {} workers", identical, first.summaries.size(),
                     workers_a, workers_b),
         seconds + since(start));
}

void criterion8() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> len(0.0, 3.0);
  double worst_1d = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int T = 1 + k % 6;
    std::vector<testing::Interval> sets;
    std::vector<Polytope> req;
    for (int s = 0; s < T; ++s) {
      const double lo = u(rng);
      sets.push_back({lo, lo + len(rng)});
      req.push_back(testing::interval_polytope(sets.back()));
    }
    const double anchor = u(rng);
    const auto opt = offline_optimal(req, Vector::Constant(1, anchor));
    worst_1d = std::max(worst_1d, std::abs(opt.cost - testing::interval_chain_min(sets, anchor)));
  }
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_2d = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int T = 1 + k % 3;
    Vector anchor(2);
    anchor << 0.3 * g(rng), 0.3 * g(rng);
    WorkHistory h(anchor);
    for (int s = 0; s < T; ++s) h.append(testing::random_polygon(rng, 1 + (k + s) % 3));
    Vector v(2);
    v << g(rng), g(rng);
    v.normalize();
    worst_2d = std::max(worst_2d, std::abs(work_conjugate(h, v) - testing::planar_chain_min(h.requests(), anchor, v)));
  }
  const bool ok = worst_1d <= 1e-4 && worst_2d <= 1e-2;
  report(8, ok,
         fmt::format("offline_optimal vs 1-D enumeration max error {:.2e} on 50 instances, work_conjugate vs grid "
                     "max error {:.2e} on 20 instances",
                     worst_1d, worst_2d),
         since(start));
}

}  // namespace

int main() {
  fmt::print("acceptance run, {} worker(s) by default\n", default_worker_count());
  std::fflush(stdout);
  fs::create_directories("acceptance_out");

  criterion1();
  criterion2();
  criterion3();

  const fs::path mjls_dir = "acceptance_out/mjls";
  const auto start4 = std::chrono::steady_clock::now();
  const auto mjls = mjls_runs(mjls_dir, 1);
  const double seconds4 = since(start4);
  tally(mjls);
  criterion4(mjls, seconds4);

  criterion5();

  report(6, consistency_total == 0,
         fmt::format("{} violations over {} closed-loop runs of criteria 2, 4 and 5", consistency_total,
                     consistency_runs),
         0.0);

  criterion7(mjls, mjls_dir, 0.0);
  criterion8();

  fmt::print("{} of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
