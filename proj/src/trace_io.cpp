#include "ltvchase/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ltvchase {

namespace {

constexpr int kFixedColumns = 10;  // everything except the per-entry x, u, w columns

std::string num(double v) { return fmt::format("{:.17g}", v); }

double parse_double(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    // from_chars rejects "inf" and "nan" spelled by other writers; fall back
    try {
      std::size_t used = 0;
      v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(fmt::format("{}: '{}' is not a number", where, cell));
    }
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("{}: cannot open for writing", path));
  out << text;
  if (!out) throw Error(fmt::format("{}: write failed", path));
}

}  // namespace

std::vector<std::string> trace_columns(int n, int m) {
  std::vector<std::string> cols{"t", "mode"};
  for (int i = 0; i < n; ++i) cols.push_back(fmt::format("x_{}", i));
  for (int i = 0; i < m; ++i) cols.push_back(fmt::format("u_{}", i));
  for (int i = 0; i < n; ++i) cols.push_back(fmt::format("w_{}", i));
  for (const char* c : {"norm_x", "norm_u", "hyp_step_F", "true_step_F", "cum_hyp_path", "cum_true_var",
                        "dare_status", "consistent"}) {
    cols.emplace_back(c);
  }
  return cols;
}

std::string trace_filename(const std::string& label, std::uint64_t seed) {
  return fmt::format("trace_{}_{}.csv", label, seed);
}

std::string trace_csv(const ClosedLoopTrace& trace) {
  std::string out = fmt::format("{}\n", fmt::join(trace_columns(trace.n, trace.m), ","));
  for (const auto& s : trace.steps) {
    std::vector<std::string> row{std::to_string(s.t), std::to_string(s.mode)};
    for (Eigen::Index i = 0; i < s.x.size(); ++i) row.push_back(num(s.x[i]));
    for (Eigen::Index i = 0; i < s.u.size(); ++i) row.push_back(num(s.u[i]));
    for (Eigen::Index i = 0; i < s.w.size(); ++i) row.push_back(num(s.w[i]));
    row.push_back(num(s.norm_x));
    row.push_back(num(s.norm_u));
    row.push_back(num(s.hyp_step));
    row.push_back(num(s.true_step));
    row.push_back(num(s.cum_hyp_path));
    row.push_back(num(s.cum_true_var));
    row.push_back(std::to_string(static_cast<int>(s.dare_status)));
    row.push_back(s.consistent ? "1" : "0");
    out += fmt::format("{}\n", fmt::join(row, ","));
  }
  return out;
}

void write_trace_csv(const ClosedLoopTrace& trace, const std::string& path) { write_file(path, trace_csv(trace)); }

ClosedLoopTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("{}: cannot open trace", path));
  std::string line;
  if (!std::getline(in, line)) throw Error(fmt::format("{}: empty trace file", path));
  const auto header = split(line);
  int n = 0;
  int m = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++n;
    if (h.rfind("u_", 0) == 0) ++m;
  }
  if (header != trace_columns(n, m)) throw Error(fmt::format("{}:1: unexpected trace header", path));

  ClosedLoopTrace trace;
  trace.n = n;
  trace.m = m;
  const std::size_t width = static_cast<std::size_t>(2 * n + m + kFixedColumns);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = fmt::format("{}:{}", path, lineno);
    if (cells.size() != width) throw Error(fmt::format("{}: expected {} columns, got {}", where, width, cells.size()));
    StepRecord s;
    std::size_t c = 0;
    s.t = static_cast<int>(parse_double(cells[c++], where));
    s.mode = static_cast<int>(parse_double(cells[c++], where));
    s.x.resize(n);
    s.u.resize(m);
    s.w.resize(n);
    for (int i = 0; i < n; ++i) s.x[i] = parse_double(cells[c++], where);
    for (int i = 0; i < m; ++i) s.u[i] = parse_double(cells[c++], where);
    for (int i = 0; i < n; ++i) s.w[i] = parse_double(cells[c++], where);
    s.norm_x = parse_double(cells[c++], where);
    s.norm_u = parse_double(cells[c++], where);
    s.hyp_step = parse_double(cells[c++], where);
    s.true_step = parse_double(cells[c++], where);
    s.cum_hyp_path = parse_double(cells[c++], where);
    s.cum_true_var = parse_double(cells[c++], where);
    const int status = static_cast<int>(parse_double(cells[c++], where));
    if (status < -1 || status > 1) throw Error(fmt::format("{}: bad dare_status {}", where, status));
    s.dare_status = static_cast<DareStatus>(status);
    s.consistent = parse_double(cells[c++], where) != 0.0;
    if (s.dare_status == DareStatus::HeldGain) ++trace.dare_failures;
    if (!s.consistent) ++trace.consistency_violations;
    trace.steps.push_back(std::move(s));
  }
  return trace;
}

RunSummary summarize(const ClosedLoopTrace& trace, const std::string& controller, const std::string& trace_file) {
  RunSummary s;
  s.label = trace.label;
  s.controller = controller;
  s.seed = trace.seed;
  s.max_state_norm = trace.max_state_norm();
  s.final_state_norm = trace.final_state_norm();
  s.cum_hyp_path = trace.cumulative_hyp_path();
  s.cum_true_var = trace.cumulative_true_var();
  s.dare_failures = trace.dare_failures;
  s.consistency_violations = trace.consistency_violations;
  s.wall_time = trace.wall_time;
  s.trace_file = trace_file;
  return s;
}

void write_summary_json(const SummaryHeader& header, const std::vector<RunSummary>& runs, const std::string& path) {
  nlohmann::json j;
  j["name"] = header.name;
  j["config_hash"] = header.config_hash;
  j["horizon"] = header.horizon;
  j["workers"] = header.workers;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    j["runs"].push_back({{"label", r.label},
                         {"controller", r.controller},
                         {"seed", r.seed},
                         {"max_state_norm", r.max_state_norm},
                         {"final_state_norm", r.final_state_norm},
                         {"cum_hyp_path", r.cum_hyp_path},
                         {"cum_true_var", r.cum_true_var},
                         {"dare_failures", r.dare_failures},
                         {"consistency_violations", r.consistency_violations},
                         {"wall_time_s", r.wall_time},
                         {"trace_file", r.trace_file}});
  }
  write_file(path, j.dump(2) + "\n");
}

std::vector<RunSummary> read_summary_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("{}: cannot open summary", path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
  std::vector<RunSummary> out;
  try {
    for (const auto& r : j.at("runs")) {
      RunSummary s;
      s.label = r.at("label").get<std::string>();
      s.controller = r.at("controller").get<std::string>();
      s.seed = r.at("seed").get<std::uint64_t>();
      s.max_state_norm = r.at("max_state_norm").get<double>();
      s.final_state_norm = r.at("final_state_norm").get<double>();
      s.cum_hyp_path = r.at("cum_hyp_path").get<double>();
      s.cum_true_var = r.at("cum_true_var").get<double>();
      s.dare_failures = r.at("dare_failures").get<int>();
      s.consistency_violations = r.at("consistency_violations").get<int>();
      s.wall_time = r.at("wall_time_s").get<double>();
      s.trace_file = r.at("trace_file").get<std::string>();
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
  return out;
}

}  // namespace ltvchase
