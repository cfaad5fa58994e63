#pragma once

#include <string>
#include <vector>

#include "ltvchase/config.hpp"
#include "ltvchase/trace_io.hpp"

namespace ltvchase {

struct ExperimentResult {
  std::vector<ClosedLoopTrace> traces;  // controller-major, then seed, in config order
  std::vector<RunSummary> summaries;
  std::string summary_path;
  int workers = 1;
};

/// Runs every (controller, seed) pair of the config and writes one trace
/// CSV per pair plus summary.json into config.output_dir. Pairs are spread
/// over `workers` threads (0: default_worker_count()); the Steiner sampler
/// inside each run gets the threads left over. Files are written after all
/// runs finish. With write_files false nothing touches the disk.
ExperimentResult run_experiment(const ExperimentConfig& config, int workers = 0, bool write_files = true);

}  // namespace ltvchase
