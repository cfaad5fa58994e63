#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltvchase/simulator.hpp"

namespace ltvchase {

// t, mode, x_0..x_{n-1}, u_0..u_{m-1}, w_0..w_{n-1}, norm_x, norm_u,
// hyp_step_F, true_step_F, cum_hyp_path, cum_true_var, dare_status, consistent
std::vector<std::string> trace_columns(int n, int m);

std::string trace_filename(const std::string& label, std::uint64_t seed);

// Numbers are written with 17 significant digits so a reload reproduces
// every double exactly.
void write_trace_csv(const ClosedLoopTrace& trace, const std::string& path);
std::string trace_csv(const ClosedLoopTrace& trace);

/// Reads a trace written by write_trace_csv. Only the CSV columns are
/// restored; the true and hypothesis models stay empty. Throws Error with
/// the line number on malformed input.
ClosedLoopTrace read_trace_csv(const std::string& path);

struct RunSummary {
  std::string label;
  std::string controller;
  std::uint64_t seed = 0;
  double max_state_norm = 0.0;
  double final_state_norm = 0.0;
  double cum_hyp_path = 0.0;
  double cum_true_var = 0.0;
  int dare_failures = 0;
  int consistency_violations = 0;
  double wall_time = 0.0;
  std::string trace_file;
};

RunSummary summarize(const ClosedLoopTrace& trace, const std::string& controller, const std::string& trace_file);

struct SummaryHeader {
  std::string name;
  std::string config_hash;
  int horizon = 0;
  int workers = 0;
};

void write_summary_json(const SummaryHeader& header, const std::vector<RunSummary>& runs, const std::string& path);
std::vector<RunSummary> read_summary_json(const std::string& path);

}  // namespace ltvchase
