#include "ltvchase/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include <fmt/format.h>

#include "ltvchase/trace_io.hpp"

namespace ltvchase {

namespace {

constexpr double kWidth = 900;
constexpr double kPanelHeight = 260;
constexpr double kLeft = 80, kRight = 170, kTop = 30, kGap = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Panel {
  std::string title;
  std::string ylabel;
  bool log = false;
  bool steps = false;  // draw as a staircase
  std::function<double(const StepRecord&)> value;
};

void draw_panel(std::string& svg, const Panel& panel, const std::vector<PlotSeries>& series, double top, int horizon) {
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kPanelHeight - 40;
  const double y0 = top + 20;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto transformed = [&](const StepRecord& s) {
    const double v = panel.value(s);
    if (!panel.log) return v;
    return std::log10(std::max(v, 1e-12));
  };
  for (const auto& ps : series) {
    for (const auto& s : ps.trace.steps) {
      const double v = transformed(s);
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (panel.log) {
    lo = std::floor(lo);
    hi = std::max(std::ceil(hi), lo + 1.0);
  } else if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  auto px = [&](double t) { return kLeft + plot_w * t / std::max(horizon, 1); };
  auto py = [&](double v) { return y0 + plot_h * (1.0 - (std::clamp(v, lo, hi) - lo) / (hi - lo)); };

  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\" font-weight=\"bold\">{}</text>\n", kLeft, top + 12,
                     escape(panel.title));
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft,
                     y0, plot_w, plot_h);

  // y ticks
  std::vector<double> yt;
  if (panel.log) {
    const int decades = static_cast<int>(hi - lo);
    const int stride = std::max(1, decades / 8);
    for (int d = static_cast<int>(lo); d <= static_cast<int>(hi); d += stride) yt.push_back(d);
  } else {
    for (int k = 0; k <= 4; ++k) yt.push_back(lo + (hi - lo) * k / 4.0);
  }
  for (double v : yt) {
    const std::string text = panel.log ? fmt::format("1e{}", static_cast<int>(v)) : fmt::format("{:.3g}", v);
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#dddddd\"/>\n", kLeft,
                       py(v), kLeft + plot_w);
    svg += fmt::format("<text x=\"{}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n", kLeft - 6,
                       py(v) + 4, text);
  }
  // x ticks
  const int xstride = std::max(1, horizon / 10);
  for (int t = 0; t <= horizon; t += xstride) {
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n", px(t),
                       y0 + plot_h + 14, t);
  }
  svg += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 {:.2f} {:.2f})\">{}</text>\n",
      kLeft - 55, y0 + plot_h / 2, kLeft - 55, y0 + plot_h / 2, escape(panel.ylabel));

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kColors[k % std::size(kColors)];
    std::string points;
    double prev_y = 0.0;
    bool first = true;
    for (const auto& s : series[k].trace.steps) {
      const double v = transformed(s);
      if (!std::isfinite(v)) continue;
      if (panel.steps && !first) points += fmt::format("{:.2f},{:.2f} ", px(s.t), prev_y);
      prev_y = py(v);
      points += fmt::format("{:.2f},{:.2f} ", px(s.t), prev_y);
      first = false;
    }
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, points);
  }
}

}  // namespace

std::string series_label(const std::string& trace_path) {
  std::string stem = std::filesystem::path(trace_path).stem().string();
  if (stem.rfind("trace_", 0) == 0) stem = stem.substr(6);
  return stem;
}

std::string render_plot_svg(const std::vector<PlotSeries>& series) {
  if (series.empty()) throw Error("plot: no traces given");
  const std::size_t rows = series.front().trace.steps.size();
  if (rows == 0) throw Error(fmt::format("plot: trace '{}' is empty", series.front().label));
  for (const auto& s : series) {
    if (s.trace.steps.size() != rows) {
      throw Error(fmt::format("plot: trace '{}' has horizon {}, expected {}", s.label,
                              static_cast<long>(s.trace.steps.size()) - 1, static_cast<long>(rows) - 1));
    }
  }
  const int horizon = series.front().trace.steps.back().t;

  const bool has_modes = std::any_of(series.begin(), series.end(), [](const PlotSeries& s) {
    return std::any_of(s.trace.steps.begin(), s.trace.steps.end(), [](const StepRecord& r) { return r.mode >= 0; });
  });
  std::vector<Panel> panels{
      {"State norm", "||x_t||", true, false, [](const StepRecord& s) { return s.norm_x; }},
      {"Cumulative hypothesis path", "sum ||dtheta_hat||_F", false, false,
       [](const StepRecord& s) { return s.cum_hyp_path; }},
  };
  if (has_modes) {
    panels.push_back({"True model", "mode", false, true, [](const StepRecord& s) { return double(s.mode); }});
  } else {
    panels.push_back({"True model variation", "sum ||dtheta||_F", false, false,
                      [](const StepRecord& s) { return s.cum_true_var; }});
  }

  const double height = kTop + panels.size() * (kPanelHeight + kGap);
  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, height);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    draw_panel(svg, panels[p], series, kTop + p * (kPanelHeight + kGap), horizon);
  }
  // legend
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = kTop + 30 + 18 * k;
    const double x = kWidth - kRight + 15;
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"3\"/>\n", x, y,
                       x + 20, y, kColors[k % std::size(kColors)]);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n", x + 26, y + 4,
                       escape(series[k].label));
  }
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\">t</text>\n",
                     kLeft + (kWidth - kLeft - kRight) / 2, height - 12);
  svg += "</svg>\n";
  return svg;
}

void emit_plot(const std::vector<std::string>& trace_paths, const std::string& out_path) {
  if (trace_paths.empty()) throw Error("plot: no traces given");
  std::vector<PlotSeries> series;
  for (const auto& p : trace_paths) series.push_back({series_label(p), read_trace_csv(p)});
  const std::string svg = render_plot_svg(series);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(fmt::format("{}: cannot open for writing", out_path));
  out << svg;
  if (!out) throw Error(fmt::format("{}: write failed", out_path));
}

}  // namespace ltvchase
