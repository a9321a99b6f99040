#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nngpw/csv.hpp"
#include "nngpw/errors.hpp"

namespace nngpw {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // mean over replicates at each x
  bool fitted = false;
  double slope = 0.0;
};

struct PlotReport {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
  std::string axis;  // "hidden_width" or "depth"
  std::vector<PlotSeries> series;
};

/// Least-squares slope of log y against log x.
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  require(sxx > 0.0, "slope fit needs two distinct x values");
  return sxy / sxx;
}

inline std::string format_slope(double slope) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.3f", slope);
  return buffer;
}

namespace detail {

inline std::string svg_number(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", v);
  return buffer;
}

inline std::string xml_escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void write_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                      bool log_scale, const std::vector<PlotSeries>& series) {
  constexpr double kWidth = 720, kHeight = 460, kLeft = 80, kRight = 220, kTop = 40, kBottom = 60;
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  auto tx = [&](double v) { return log_scale ? std::log10(v) : v; };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_lo = std::min(x_lo, tx(s.x[i]));
      x_hi = std::max(x_hi, tx(s.x[i]));
      y_lo = std::min(y_lo, tx(s.y[i]));
      y_hi = std::max(y_hi, tx(s.y[i]));
    }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (x_hi - x_lo < 1e-12) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi - y_lo < 1e-12) y_lo -= 0.5, y_hi += 0.5;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (tx(v) - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double v) { return kTop + plot_h - (tx(v) - y_lo) / (y_hi - y_lo) * plot_h; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  require(out.good(), "cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  const std::string scale_note = log_scale ? " (log10)" : "";
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << xml_escape(x_label + scale_note) << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x_lo + (x_hi - x_lo) * t / 4.0, fy = y_lo + (y_hi - y_lo) * t / 4.0;
    const double sx = kLeft + plot_w * t / 4.0, sy = kTop + plot_h - plot_h * t / 4.0;
    out << "<text x=\"" << svg_number(sx) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << svg_number(fx) << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << svg_number(sy + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << svg_number(fy) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    const auto& ser = series[s];
    if (ser.x.size() >= 2) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < ser.x.size(); ++i) out << svg_number(px(ser.x[i])) << ',' << svg_number(py(ser.y[i])) << ' ';
      out << "\"/>\n";
    }
    for (std::size_t i = 0; i < ser.x.size(); ++i)
      out << "<circle cx=\"" << svg_number(px(ser.x[i])) << "\" cy=\"" << svg_number(py(ser.y[i]))
          << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    std::string label = ser.name;
    if (ser.fitted) label += "  slope " + format_slope(ser.slope);
    out << "<text x=\"" << kWidth - kRight + 12 << "\" y=\"" << kTop + 16 + 20 * s << "\" font-size=\"12\" fill=\""
        << color << "\">" << xml_escape(label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace detail

/// Plots bias-corrected W2 (every `*_corrected` column) and `bound_total`
/// against the swept axis, averaged over replicates. Width sweeps use
/// log-log axes with a fitted slope; depth profiles use linear axes.
inline PlotReport emit_plots(const std::filesystem::path& csv_path, const std::filesystem::path& out_dir) {
  std::ifstream in(csv_path, std::ios::binary);
  require(in.good(), "cannot open results file " + csv_path.string());
  const CsvTable table = read_csv(in);
  const auto width_col = table.column("hidden_width");
  const auto depth_col = table.column("depth");
  require(width_col.has_value() && depth_col.has_value(), "malformed results CSV: hidden_width/depth columns missing");
  require(!table.rows.empty(), "results CSV has no data rows");

  auto parse = [&](const std::string& text, const std::string& column) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      require(used == text.size(), "");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("malformed results CSV: non-numeric value '" + text + "' in column " + column);
    }
  };

  PlotReport report;
  std::map<double, int> widths, depths;
  for (const auto& row : table.rows) {
    ++widths[parse(row[*width_col], "hidden_width")];
    ++depths[parse(row[*depth_col], "depth")];
  }
  std::size_t axis_col = *width_col;
  report.axis = "hidden_width";
  bool log_scale = true;
  if (widths.size() < 2 && depths.size() >= 2) {
    axis_col = *depth_col;
    report.axis = "depth";
    log_scale = false;
  }

  std::vector<std::string> names;
  for (const auto& h : table.header)
    if (h.size() > 10 && h.compare(h.size() - 10, 10, "_corrected") == 0) names.push_back(h);
  if (table.column("bound_total")) names.push_back("bound_total");

  for (const auto& name : names) {
    const std::size_t col = *table.column(name);
    std::map<double, std::pair<double, int>> sums;
    for (const auto& row : table.rows) {
      auto& entry = sums[parse(row[axis_col], report.axis)];
      entry.first += parse(row[col], name);
      entry.second += 1;
    }
    PlotSeries series;
    series.name = name;
    for (const auto& [x, acc] : sums) {
      const double y = acc.first / acc.second;
      if (log_scale && !(y > 0.0)) {
        report.warnings.push_back(name + ": non-positive mean at " + report.axis + "=" + format_slope(x) +
                                  " omitted from the log-log plot");
        continue;
      }
      series.x.push_back(x);
      series.y.push_back(y);
    }
    if (log_scale && series.x.size() >= 2) {
      series.slope = log_log_slope(series.x, series.y);
      series.fitted = true;
    }
    report.series.push_back(std::move(series));
  }
  if (widths.size() < 2 && depths.size() < 2)
    report.warnings.push_back("single sweep point: scatter only, no slope fit");

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path svg = out_dir / (csv_path.stem().string() + ".svg");
  std::string title = report.axis == "depth" ? "Bound and W2 vs depth" : "Bias-corrected W2 and bound vs width";
  detail::write_svg(svg, title, report.axis, log_scale, report.series);
  report.files.push_back(svg);
  return report;
}

}  // namespace nngpw
