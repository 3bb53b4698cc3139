#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

// Per-epoch metrics rows, their CSV form, and the SVG curve plots.

namespace amcr {

inline constexpr const char* kMetricsHeader =
    "epoch,split,total_loss,label_loss,row_loss,col_loss,label_acc,row_acc,col_acc,seconds";

struct MetricsRecord {
  int epoch = 0;       // 1-based
  std::string split;   // "train" or "val"
  double total_loss = 0.0;
  double label_loss = 0.0, row_loss = 0.0, col_loss = 0.0;
  double label_acc = 0.0, row_acc = 0.0, col_acc = 0.0;
  double seconds = 0.0;
};

std::string metrics_row(const MetricsRecord& r);
void write_metrics_csv(const std::vector<MetricsRecord>& records,
                       const std::filesystem::path& file);
void append_metrics_row(const MetricsRecord& r, const std::filesystem::path& file);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& file);

// One curve set per (name, history) pair: total loss on the left panel,
// label accuracy on the right, train rows dashed, val rows solid.
void render_svg_plot(
    const std::vector<std::pair<std::string, std::vector<MetricsRecord>>>& series,
    const std::filesystem::path& file, bool deterministic);

}  // namespace amcr
