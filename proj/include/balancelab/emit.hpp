#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "balancelab/core.hpp"
#include "balancelab/error.hpp"
#include "balancelab/harness.hpp"

namespace balancelab {

// Shortest round-trip decimal; "nan" for NaN so files stay locale-independent.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// RFC 4180 field quoting.
inline std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline constexpr std::string_view kCsvHeader =
    "environment,algorithm,total_requests,task_type,workers,mean_response_s,p95_response_s,"
    "deadline_miss_fraction,rejected_count,per_server_dispatch_counts";

// Per-server counts are joined with ';' into one field.
inline std::string to_csv(std::span<const SummaryRow> rows) {
  std::string out(kCsvHeader);
  out += "\r\n";
  for (const SummaryRow& r : rows) {
    std::string counts;
    for (std::size_t i = 0; i < r.per_server_dispatch_counts.size(); ++i) {
      if (i > 0) counts += ';';
      counts += format_number(r.per_server_dispatch_counts[i]);
    }
    out += csv_field(r.environment);
    out += ',' + csv_field(r.algorithm);
    out += ',' + std::to_string(r.total_requests);
    out += ',' + std::string(to_string(r.task_type));
    out += ',' + (r.workers ? std::to_string(*r.workers) : std::string());
    out += ',' + format_number(r.mean_response_s);
    out += ',' + format_number(r.p95_response_s);
    out += ',' + format_number(r.deadline_miss_fraction);
    out += ',' + format_number(r.rejected_count);
    out += ',' + csv_field(counts);
    out += "\r\n";
  }
  return out;
}

struct PlotSeries {
  std::string environment;
  Method task_type = Method::kGet;
  bool by_workers = false;           // x is the worker count instead of total_requests
  std::vector<std::string> columns;  // algorithm names, sorted
  std::map<std::uint64_t, std::map<std::string, double>> points;  // x -> algorithm -> mean
};

// Groups rows into one series per (environment, task_type).
inline std::vector<PlotSeries> plot_series(std::span<const SummaryRow> rows) {
  std::map<std::pair<std::string, int>, PlotSeries> grouped;
  for (const SummaryRow& r : rows) {
    PlotSeries& s = grouped[{r.environment, static_cast<int>(r.task_type)}];
    s.environment = r.environment;
    s.task_type = r.task_type;
    s.by_workers = s.by_workers || r.workers.has_value();
    const std::uint64_t x = r.workers ? *r.workers : r.total_requests;
    s.points[x][r.algorithm] = r.mean_response_s;
    if (std::find(s.columns.begin(), s.columns.end(), r.algorithm) == s.columns.end()) {
      s.columns.push_back(r.algorithm);
    }
  }
  std::vector<PlotSeries> out;
  for (auto& [key, s] : grouped) {
    std::sort(s.columns.begin(), s.columns.end());
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string to_gnuplot(const PlotSeries& s) {
  std::string out = "# environment=" + s.environment + " task_type=" +
                    std::string(to_string(s.task_type)) + " y=mean_response_s\n# " +
                    (s.by_workers ? "workers" : "total_requests");
  for (const auto& c : s.columns) out += ' ' + c;
  out += '\n';
  for (const auto& [x, values] : s.points) {
    out += std::to_string(x);
    for (const auto& c : s.columns) {
      auto it = values.find(c);
      out += ' ';
      out += it == values.end() ? "nan" : format_number(it->second);
    }
    out += '\n';
  }
  return out;
}

// Minimal line chart: one polyline per algorithm and the deadline as a dashed
// horizontal line.
inline std::string to_svg(const PlotSeries& s, double deadline_s = kDefaultDeadlineSeconds) {
  constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  static constexpr std::string_view kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                 "#bcbd22", "#17becf", "#000000"};
  double x_min = 0, x_max = 1, y_max = deadline_s * 1.2;
  if (!s.points.empty()) {
    x_min = static_cast<double>(s.points.begin()->first);
    x_max = static_cast<double>(s.points.rbegin()->first);
    if (x_max <= x_min) x_max = x_min + 1;
  }
  for (const auto& [x, values] : s.points) {
    for (const auto& [name, v] : values) {
      if (std::isfinite(v)) y_max = std::max(y_max, v * 1.05);
    }
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return kTop + ph - y / y_max * ph; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" +
                    num(kH) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kLeft) + "\" y=\"24\" font-size=\"14\">" + s.environment + " " +
         std::string(to_string(s.task_type)) + ": mean response time (s)</text>\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(kTop + ph) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop + ph) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = y_max * i / 4.0;
    out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(y) + 4) +
           "\" text-anchor=\"end\">" + format_number(std::round(y * 100) / 100) + "</text>\n";
    const double x = x_min + (x_max - x_min) * i / 4.0;
    out += "<text x=\"" + num(px(x)) + "\" y=\"" + num(kTop + ph + 18) +
           "\" text-anchor=\"middle\">" + std::to_string(std::llround(x)) + "</text>\n";
  }
  out += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kH - 10) + "\" text-anchor=\"middle\">" +
         (s.by_workers ? "workers" : "total requests") + "</text>\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(deadline_s)) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(py(deadline_s)) + "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";

  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    const std::string_view color = kColors[c % std::size(kColors)];
    std::string points;
    for (const auto& [x, values] : s.points) {
      auto it = values.find(s.columns[c]);
      if (it == values.end() || !std::isfinite(it->second)) continue;
      if (!points.empty()) points += ' ';
      points += num(px(static_cast<double>(x))) + "," + num(py(it->second));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
           points + "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(c);
    out += "<line x1=\"" + num(kW - kRight + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" +
           num(kW - kRight + 30) + "\" y2=\"" + num(ly) + "\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(kW - kRight + 36) + "\" y=\"" + num(ly + 4) + "\">" + s.columns[c] +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

struct EmitOptions {
  bool csv = true;
  bool plot_data = true;
  bool svg = false;
  std::string stem = "results";
  double deadline_s = kDefaultDeadlineSeconds;
};

inline void write_file(const std::filesystem::path& file, std::string_view content) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot open " + file.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::kIoError, "write failed for " + file.string());
}

// Writes <stem>.csv plus <stem>_<env>_<type>.dat (and .svg) into `dir`,
// creating it if needed. Rows are sorted first. Returns the files written.
inline std::vector<std::filesystem::path> emit(std::vector<SummaryRow> rows,
                                               const std::filesystem::path& dir,
                                               const EmitOptions& options = {}) {
  std::sort(rows.begin(), rows.end(), row_less);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  if (options.csv) {
    written.push_back(dir / (options.stem + ".csv"));
    write_file(written.back(), to_csv(rows));
  }
  if (options.plot_data || options.svg) {
    for (const PlotSeries& s : plot_series(rows)) {
      const std::string base =
          options.stem + "_" + s.environment + "_" + std::string(to_string(s.task_type));
      if (options.plot_data) {
        written.push_back(dir / (base + ".dat"));
        write_file(written.back(), to_gnuplot(s));
      }
      if (options.svg) {
        written.push_back(dir / (base + ".svg"));
        write_file(written.back(), to_svg(s, options.deadline_s));
      }
    }
  }
  return written;
}

}  // namespace balancelab
