#pragma once

#include "spring/harness/io.hpp"
#include "spring/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace spring::plot {

enum class Mode { objective, gradmap };
enum class Axis { epoch, sfo };

inline Mode parse_mode(std::string_view s) {
  if (s == "objective") return Mode::objective;
  if (s == "gradmap") return Mode::gradmap;
  throw std::invalid_argument("unknown plot mode '" + std::string(s) + "'");
}

inline Axis parse_axis(std::string_view s) {
  if (s == "epoch") return Axis::epoch;
  if (s == "sfo") return Axis::sfo;
  throw std::invalid_argument("unknown x-axis '" + std::string(s) + "'");
}

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

inline Series series_from_trace(const Trace& trace, std::string label, Mode mode, Axis axis) {
  Series s{std::move(label), {}, {}};
  for (const TraceRow& r : trace.rows) {
    s.x.push_back(axis == Axis::epoch ? r.epoch : static_cast<double>(r.sfo_calls));
    s.y.push_back(mode == Mode::objective ? r.objective : r.grad_map_norm_sq);
  }
  return s;
}

struct Layout {
  double width = 640;
  double height = 420;
  double left = 70;
  double right = 170;
  double top = 20;
  double bottom = 50;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

inline const char* colour(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[i % (sizeof palette / sizeof *palette)];
}

}  // namespace detail

/// Log-scale y line plot. Points with non-positive or non-finite y are dropped
/// (they have no place on a log axis). Output depends only on the inputs.
inline std::string render_svg(const std::vector<Series>& series, const std::string& x_label, const std::string& y_label,
                              const Layout& L = {}) {
  if (series.empty()) throw std::invalid_argument("plot: no traces");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("plot: x/y length mismatch in '" + s.label + "'");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || s.y[i] <= 0.0) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);

  const double pw = L.width - L.left - L.right;
  const double ph = L.height - L.top - L.bottom;
  const auto px = [&](double x) { return L.left + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double ly) { return L.top + (ymax - ly) / (ymax - ymin) * ph; };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + detail::num(L.width) + "\" height=\"" +
         detail::num(L.height) + "\" viewBox=\"0 0 " + detail::num(L.width) + " " + detail::num(L.height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + detail::num(L.width) + "\" height=\"" + detail::num(L.height) +
         "\" fill=\"white\"/>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect x=\"" + detail::num(L.left) + "\" y=\"" + detail::num(L.top) + "\" width=\"" + detail::num(pw) +
         "\" height=\"" + detail::num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int d = static_cast<int>(ymin); d <= static_cast<int>(ymax); ++d) {
    const double y = py(d);
    out += "<line x1=\"" + detail::num(L.left) + "\" y1=\"" + detail::num(y) + "\" x2=\"" + detail::num(L.left + pw) +
           "\" y2=\"" + detail::num(y) + "\" stroke=\"#dddddd\"/>\n";
    out += "<text x=\"" + detail::num(L.left - 6) + "\" y=\"" + detail::num(y + 4) + "\" text-anchor=\"end\">1e" +
           std::to_string(d) + "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", xv);
    out += "<text x=\"" + detail::num(px(xv)) + "\" y=\"" + detail::num(L.top + ph + 16) +
           "\" text-anchor=\"middle\">" + buf + "</text>\n";
  }
  out += "<text x=\"" + detail::num(L.left + pw / 2) + "\" y=\"" + detail::num(L.height - 10) +
         "\" text-anchor=\"middle\">" + detail::escape(x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::num(L.top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::num(L.top + ph / 2) + ")\">" + detail::escape(y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || s.y[i] <= 0.0) continue;
      if (!pts.empty()) pts += ' ';
      pts += detail::num(px(s.x[i])) + "," + detail::num(py(std::log10(s.y[i])));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(detail::colour(k)) + "\" stroke-width=\"1.5\" points=\"" +
           pts + "\"/>\n";
    const double ly = L.top + 12 + 16.0 * static_cast<double>(k);
    const double lx = L.left + pw + 12;
    out += "<line x1=\"" + detail::num(lx) + "\" y1=\"" + detail::num(ly - 4) + "\" x2=\"" + detail::num(lx + 20) +
           "\" y2=\"" + detail::num(ly - 4) + "\" stroke=\"" + detail::colour(k) + "\" stroke-width=\"1.5\"/>\n";
    out += "<text x=\"" + detail::num(lx + 26) + "\" y=\"" + detail::num(ly) + "\">" + detail::escape(s.label) +
           "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

/// Reads the trace CSVs, labels each by its file stem and writes the SVG.
inline void emit_plot(const std::vector<std::string>& trace_paths, Mode mode, Axis axis, const std::string& out_path) {
  if (trace_paths.empty()) throw std::invalid_argument("plot: no traces");
  std::vector<Series> series;
  for (const auto& p : trace_paths) {
    series.push_back(series_from_trace(io::read_trace_csv(p), std::filesystem::path(p).stem().string(), mode, axis));
  }
  const std::string svg = render_svg(series, axis == Axis::epoch ? "epoch" : "SFO calls",
                                     mode == Mode::objective ? "objective" : "squared gradient-map norm");
  io::detail::write_file(out_path, svg);
}

}  // namespace spring::plot
