#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ltvchase/config.hpp"
#include "ltvchase/experiment.hpp"
#include "ltvchase/lemma1.hpp"
#include "ltvchase/parallel.hpp"
#include "ltvchase/plot.hpp"

using namespace ltvchase;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kWViolation = 3 };

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> controller;
  std::optional<int> samples;
  std::optional<int> horizon;
  int workers = 0;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "run this seed only");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--controller", f.controller, "run only the controller with this label");
  app->add_option("--samples", f.samples, "Steiner samples N for cbc controllers")->check(CLI::PositiveNumber);
  app->add_option("--horizon", f.horizon, "override the horizon");
  app->add_option("--workers", f.workers, fmt::format("worker threads (default: cores, capped by {})", kWorkerEnvVar));
}

ExperimentConfig load_with_overrides(const RunFlags& f) {
  ExperimentConfig cfg = load_config(f.config);
  ConfigOverrides o;
  o.seed = f.seed;
  o.output_dir = f.out;
  o.controller = f.controller;
  o.samples = f.samples;
  o.horizon = f.horizon;
  apply_overrides(cfg, o);
  return cfg;
}

int cmd_validate(const RunFlags& f) {
  const ExperimentConfig cfg = load_with_overrides(f);
  fmt::print("ok: {} ({} controllers x {} seeds, horizon {}, hash {})\n", cfg.name, cfg.controllers.size(),
             cfg.seeds.size(), cfg.horizon, config_hash(cfg));
  return kOk;
}

int cmd_run(const RunFlags& f) {
  const ExperimentConfig cfg = load_with_overrides(f);
  const ExperimentResult res = run_experiment(cfg, f.workers);
  for (const auto& s : res.summaries) {
    fmt::print("{:<12} seed {:<4} max|x| {:<12.5g} final|x| {:<12.5g} path {:<10.4g} dare_fail {} viol {} ({:.1f}s)\n",
               s.label, s.seed, s.max_state_norm, s.final_state_norm, s.cum_hyp_path, s.dare_failures,
               s.consistency_violations, s.wall_time);
  }
  fmt::print("wrote {} traces and {}\n", res.summaries.size(), res.summary_path);
  return kOk;
}

int cmd_lemma1(const Lemma1Options& opt) {
  const Lemma1Report report = lemma1_test(opt);
  fmt::print("{}", format_report(report));
  return report.pass() ? kOk : kFailure;
}

int cmd_plot(std::vector<std::string> traces, const std::string& summary, const std::string& out) {
  if (!summary.empty()) {
    const auto dir = std::filesystem::path(summary).parent_path();
    for (const auto& r : read_summary_json(summary)) traces.push_back((dir / r.trace_file).string());
  }
  emit_plot(traces, out);
  fmt::print("wrote {}\n", out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online stabilization of unknown LTV systems by convex body chasing"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run every controller and seed of a config, writing traces and summary.json");
  add_run_flags(run, run_flags);

  RunFlags validate_flags;
  auto* validate = app.add_subcommand("validate", "parse and check a config without running it");
  add_run_flags(validate, validate_flags);

  Lemma1Options lemma;
  auto* lemma1 = app.add_subcommand("lemma1-test", "check the partial-path bound of the Steiner selector");
  lemma1->add_option("--dim", lemma.dim, "dimension of the chasing space")->check(CLI::Range(1, 6));
  lemma1->add_option("--instances", lemma.instances, "random request sequences")->check(CLI::PositiveNumber);
  lemma1->add_option("--horizon", lemma.horizon, "requests per sequence")->check(CLI::Range(1, 20));
  lemma1->add_option("--samples", lemma.samples, "Steiner samples N")->check(CLI::PositiveNumber);
  lemma1->add_option("--seed", lemma.seed, "base seed");
  lemma1->add_option("--slack", lemma.slack, "tolerance as a fraction of dim * dia");
  lemma1->add_option("--workers", lemma.workers, "Steiner sampler threads");

  std::vector<std::string> plot_traces;
  std::string plot_summary;
  std::string plot_out = "plot.svg";
  auto* plot = app.add_subcommand("plot", "render trace CSVs to an SVG figure");
  plot->add_option("traces", plot_traces, "trace CSV files")->check(CLI::ExistingFile);
  plot->add_option("--summary", plot_summary, "also plot every trace listed in this summary.json")
      ->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "output SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*validate) return cmd_validate(validate_flags);
    if (*lemma1) return cmd_lemma1(lemma);
    if (*plot) return cmd_plot(plot_traces, plot_summary, plot_out);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const WViolation& e) {
    fmt::print(stderr, "disturbance bound violated: {}\n", e.what());
    return kWViolation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kFailure;
  }
  return kFailure;
}
