#include "ltvchase/experiment.hpp"

#include <algorithm>
#include <filesystem>

#include <fmt/format.h>

#include "ltvchase/parallel.hpp"

namespace ltvchase {

ExperimentResult run_experiment(const ExperimentConfig& config, int workers, bool write_files) {
  config.validate();
  if (workers <= 0) workers = default_worker_count();

  struct Job {
    const ControllerEntry* controller;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& c : config.controllers) {
    for (auto seed : config.seeds) jobs.push_back({&c, seed});
  }

  const int outer = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  const int inner = std::max(1, workers / outer);
  const std::string hash = config_hash(config);

  ExperimentResult result;
  result.workers = workers;
  result.traces.resize(jobs.size());
  parallel_for(
      jobs.size(),
      [&](std::size_t i) {
        RunSpec spec = make_run_spec(config, *jobs[i].controller, jobs[i].seed);
        spec.workers = inner;
        spec.config_hash = hash;
        result.traces[i] = run_closed_loop(spec);
      },
      outer);

  namespace fs = std::filesystem;
  const fs::path dir(config.output_dir);
  if (write_files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(fmt::format("{}: cannot create output directory: {}", dir.string(), ec.message()));
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& trace = result.traces[i];
    const std::string file = trace_filename(jobs[i].controller->label, jobs[i].seed);
    if (write_files) write_trace_csv(trace, (dir / file).string());
    result.summaries.push_back(summarize(trace, controller_kind(jobs[i].controller->spec), file));
  }
  result.summary_path = (dir / "summary.json").string();
  if (write_files) {
    write_summary_json({config.name, hash, config.horizon, workers}, result.summaries, result.summary_path);
  }
  return result;
}

}  // namespace ltvchase
