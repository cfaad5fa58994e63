#pragma once

#include <string>
#include <vector>

#include "ltvchase/simulator.hpp"

namespace ltvchase {

struct PlotSeries {
  std::string label;
  ClosedLoopTrace trace;
};

/// Three stacked panels: log-scale ||x_t|| per series, the cumulative
/// hypothesis path, and the true mode (or the cumulative true-model
/// variation when no series carries modes). Throws Error for an empty list
/// and for series of different lengths.
std::string render_plot_svg(const std::vector<PlotSeries>& series);

// "trace_cbc_3.csv" -> "cbc_3"
std::string series_label(const std::string& trace_path);

void emit_plot(const std::vector<std::string>& trace_paths, const std::string& out_path);

}  // namespace ltvchase
