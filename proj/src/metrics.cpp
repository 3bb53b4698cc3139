#include "amcr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "amcr/errors.hpp"

namespace amcr {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string metrics_row(const MetricsRecord& r) {
  std::string out = std::to_string(r.epoch) + ',' + r.split;
  for (double v : {r.total_loss, r.label_loss, r.row_loss, r.col_loss, r.label_acc, r.row_acc,
                   r.col_acc, r.seconds})
    out += ',' + fmt(v);
  return out;
}

void write_metrics_csv(const std::vector<MetricsRecord>& records,
                       const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : records) out << metrics_row(r) << '\n';
  if (!out) throw IoError("short write to " + file.string());
}

void append_metrics_row(const MetricsRecord& r, const std::filesystem::path& file) {
  const bool fresh = !std::filesystem::exists(file);
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot write " + file.string());
  if (fresh) out << kMetricsHeader << '\n';
  out << metrics_row(r) << '\n';
  if (!out) throw IoError("short write to " + file.string());
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(file.string() + ": empty metrics file");
  if (line != kMetricsHeader)
    throw FormatError(file.string() + ": unexpected header `" + line + "`");
  std::vector<MetricsRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    MetricsRecord r;
    double* numeric[8] = {&r.total_loss, &r.label_loss, &r.row_loss, &r.col_loss,
                          &r.label_acc, &r.row_acc, &r.col_acc, &r.seconds};
    try {
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("epoch");
      r.epoch = std::stoi(field);
      if (!std::getline(ss, r.split, ',')) throw std::invalid_argument("split");
      for (auto* dst : numeric) {
        if (!std::getline(ss, field, ',')) throw std::invalid_argument("missing column");
        *dst = std::stod(field);
      }
    } catch (const std::exception& e) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": bad metrics row (" +
                        e.what() + ")");
    }
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

struct Panel {
  double x0, y0, w, h;  // plot area in SVG coordinates
  double min_x, max_x, min_y, max_y;

  double px(double x) const { return x0 + (x - min_x) / (max_x - min_x) * w; }
  double py(double y) const { return y0 + h - (y - min_y) / (max_y - min_y) * h; }
};

const char* kPalette[] = {"#2266cc", "#cc4422", "#228844", "#aa22aa",
                          "#886600", "#116677", "#993355", "#445522"};

void draw_axes(std::string& svg, const Panel& p, const std::string& title,
               const std::string& y_label) {
  svg += "<rect x='" + fmt2(p.x0) + "' y='" + fmt2(p.y0) + "' width='" + fmt2(p.w) +
         "' height='" + fmt2(p.h) + "' fill='none' stroke='#888' stroke-width='1'/>\n";
  svg += "<text x='" + fmt2(p.x0 + p.w / 2) + "' y='" + fmt2(p.y0 - 10) +
         "' text-anchor='middle' font-size='14'>" + title + "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = p.min_x + (p.max_x - p.min_x) * t / 4.0;
    const double fy = p.min_y + (p.max_y - p.min_y) * t / 4.0;
    svg += "<line x1='" + fmt2(p.px(fx)) + "' y1='" + fmt2(p.y0 + p.h) + "' x2='" +
           fmt2(p.px(fx)) + "' y2='" + fmt2(p.y0 + p.h + 4) + "' stroke='#888'/>\n";
    svg += "<text x='" + fmt2(p.px(fx)) + "' y='" + fmt2(p.y0 + p.h + 16) +
           "' text-anchor='middle' font-size='10'>" + fmt_tick(fx) + "</text>\n";
    svg += "<line x1='" + fmt2(p.x0 - 4) + "' y1='" + fmt2(p.py(fy)) + "' x2='" + fmt2(p.x0) +
           "' y2='" + fmt2(p.py(fy)) + "' stroke='#888'/>\n";
    svg += "<text x='" + fmt2(p.x0 - 6) + "' y='" + fmt2(p.py(fy) + 3) +
           "' text-anchor='end' font-size='10'>" + fmt_tick(fy) + "</text>\n";
  }
  svg += "<text x='" + fmt2(p.x0 + p.w / 2) + "' y='" + fmt2(p.y0 + p.h + 30) +
         "' text-anchor='middle' font-size='11'>epoch</text>\n";
  svg += "<text x='" + fmt2(p.x0 - 38) + "' y='" + fmt2(p.y0 + p.h / 2) +
         "' text-anchor='middle' font-size='11' transform='rotate(-90 " + fmt2(p.x0 - 38) + " " +
         fmt2(p.y0 + p.h / 2) + ")'>" + y_label + "</text>\n";
}

void draw_series(std::string& svg, const Panel& p, const std::vector<MetricsRecord>& records,
                 const std::string& split, bool loss_panel, const char* color) {
  std::string points;
  for (const auto& r : records) {
    if (r.split != split) continue;
    const double y = loss_panel ? r.total_loss : r.label_acc;
    if (!std::isfinite(y)) continue;
    points += fmt2(p.px(r.epoch)) + "," + fmt2(p.py(std::clamp(y, p.min_y, p.max_y))) + " ";
  }
  if (points.empty()) return;
  svg += "<polyline fill='none' stroke='" + std::string(color) + "' stroke-width='1.5'";
  if (split == "train") svg += " stroke-dasharray='5,3'";
  svg += " points='" + points + "'/>\n";
}

}  // namespace

void render_svg_plot(
    const std::vector<std::pair<std::string, std::vector<MetricsRecord>>>& series,
    const std::filesystem::path& file, bool deterministic) {
  std::size_t rows = 0;
  for (const auto& [name, records] : series) rows += records.size();
  if (series.empty() || rows == 0) throw ValidationError("nothing to plot: no metrics rows");

  double max_epoch = 1, max_loss = 0;
  for (const auto& [name, records] : series)
    for (const auto& r : records) {
      max_epoch = std::max(max_epoch, static_cast<double>(r.epoch));
      if (std::isfinite(r.total_loss)) max_loss = std::max(max_loss, r.total_loss);
    }
  if (max_loss <= 0) max_loss = 1;

  const double width = 980, height = 430;
  Panel loss{70, 50, 360, 300, 1, max_epoch, 0, max_loss * 1.05};
  Panel acc{560, 50, 360, 300, 1, max_epoch, 0, 1.0};
  if (max_epoch <= 1) {
    loss.max_x = 2;
    acc.max_x = 2;
  }

  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + fmt2(width) +
                    "' height='" + fmt2(height) + "' viewBox='0 0 " + fmt2(width) + " " +
                    fmt2(height) + "'>\n";
  if (!deterministic) {
    std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    svg += std::string("<!-- generated ") + stamp + " -->\n";
  }
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  draw_axes(svg, loss, "total loss", "loss");
  draw_axes(svg, acc, "label accuracy", "accuracy");

  const std::size_t n_colors = sizeof(kPalette) / sizeof(kPalette[0]);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % n_colors];
    draw_series(svg, loss, series[s].second, "train", true, color);
    draw_series(svg, loss, series[s].second, "val", true, color);
    draw_series(svg, acc, series[s].second, "train", false, color);
    draw_series(svg, acc, series[s].second, "val", false, color);
    const double ly = height - 16.0 - 14.0 * static_cast<double>(series.size() - 1 - s);
    svg += "<line x1='70' y1='" + fmt2(ly - 4) + "' x2='100' y2='" + fmt2(ly - 4) +
           "' stroke='" + std::string(color) + "' stroke-width='2'/>\n";
    svg += "<text x='106' y='" + fmt2(ly) + "' font-size='11'>" + series[s].first +
           " (dashed=train, solid=val)</text>\n";
  }
  svg += "</svg>\n";

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << svg;
  if (!out) throw IoError("short write to " + file.string());
}

}  // namespace amcr
