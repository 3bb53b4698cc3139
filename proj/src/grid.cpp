#include "amcr/grid.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace amcr {

void AlphabetGrid::finalize() {
  cell_of_label.assign(static_cast<std::size_t>(num_labels), {0, 0});
  label_of_cell.assign(static_cast<std::size_t>(num_rows) * num_cols, 0);
  for (const auto& e : entries) {
    if (e.label >= 1 && e.label <= num_labels)
      cell_of_label[e.label - 1] = {e.row, e.col};
    if (e.row >= 1 && e.row <= num_rows && e.col >= 1 && e.col <= num_cols)
      label_of_cell[static_cast<std::size_t>(e.row - 1) * num_cols + e.col - 1] = e.label;
  }
}

std::pair<int, int> label_to_grid(const AlphabetGrid& grid, int label) {
  if (label < 1 || label > grid.num_labels)
    throw LookupError("label " + std::to_string(label) + " out of range 1.." +
                      std::to_string(grid.num_labels));
  return grid.cell_of_label[label - 1];
}

std::optional<int> grid_to_label(const AlphabetGrid& grid, int row, int col) {
  if (row < 1 || row > grid.num_rows || col < 1 || col > grid.num_cols)
    throw LookupError("cell (" + std::to_string(row) + "," + std::to_string(col) +
                      ") outside " + std::to_string(grid.num_rows) + "x" +
                      std::to_string(grid.num_cols) + " grid");
  const int label = grid.label_of_cell[static_cast<std::size_t>(row - 1) * grid.num_cols + col - 1];
  if (label == 0) return std::nullopt;
  return label;
}

std::vector<std::string> validate_grid(const AlphabetGrid& grid) {
  std::vector<std::string> violations;
  if (grid.num_labels <= 0 || grid.num_rows <= 0 || grid.num_cols <= 0) {
    violations.push_back("grid dimensions must be positive");
    return violations;
  }
  if (static_cast<int>(grid.entries.size()) != grid.num_labels)
    violations.push_back("entry count " + std::to_string(grid.entries.size()) +
                         " != numLabels " + std::to_string(grid.num_labels));

  std::vector<int> label_seen(static_cast<std::size_t>(grid.num_labels), 0);
  std::vector<int> cell_seen(static_cast<std::size_t>(grid.num_rows) * grid.num_cols, 0);
  for (const auto& e : grid.entries) {
    if (e.label < 1 || e.label > grid.num_labels) {
      violations.push_back("label out of range: " + std::to_string(e.label));
    } else if (++label_seen[e.label - 1] == 2) {
      violations.push_back("duplicate label " + std::to_string(e.label));
    }
    const bool row_ok = e.row >= 1 && e.row <= grid.num_rows;
    const bool col_ok = e.col >= 1 && e.col <= grid.num_cols;
    if (!row_ok)
      violations.push_back("row out of range for label " + std::to_string(e.label) + ": " +
                           std::to_string(e.row));
    if (!col_ok)
      violations.push_back("col out of range for label " + std::to_string(e.label) + ": " +
                           std::to_string(e.col));
    if (row_ok && col_ok &&
        ++cell_seen[static_cast<std::size_t>(e.row - 1) * grid.num_cols + e.col - 1] == 2)
      violations.push_back("duplicate cell (" + std::to_string(e.row) + "," +
                           std::to_string(e.col) + ")");
  }
  for (int l = 1; l <= grid.num_labels; ++l)
    if (label_seen[l - 1] == 0) violations.push_back("missing label " + std::to_string(l));
  return violations;
}

AlphabetGrid load_grid(const std::filesystem::path& file, int num_rows, int num_cols) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open grid file " + file.string());
  AlphabetGrid grid;
  grid.num_rows = std::max(num_rows, 0);
  grid.num_cols = std::max(num_cols, 0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    line.erase(0, start);

    GridEntry e;
    std::istringstream ss(line);
    std::string field;
    int* dst[3] = {&e.label, &e.row, &e.col};
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(ss, field, ','))
        throw FormatError(file.string() + ":" + std::to_string(line_no) +
                          ": expected `label,row,col[,name]`");
      try {
        std::size_t pos = 0;
        *dst[i] = std::stoi(field, &pos);
        if (pos != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError(file.string() + ":" + std::to_string(line_no) +
                          ": not an integer: `" + field + "`");
      }
    }
    if (std::getline(ss, field)) e.name = field;
    grid.entries.push_back(std::move(e));
  }
  grid.num_labels = static_cast<int>(grid.entries.size());
  if (num_rows <= 0 || num_cols <= 0) {
    for (const auto& e : grid.entries) {
      grid.num_rows = std::max(grid.num_rows, e.row);
      grid.num_cols = std::max(grid.num_cols, e.col);
    }
  }

  auto violations = validate_grid(grid);
  if (!violations.empty()) {
    std::string msg = file.string() + ": grid invalid:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  grid.finalize();
  return grid;
}

void save_grid(const AlphabetGrid& grid, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write grid file " + file.string());
  out << "# label,row,col[,name]\n";
  std::vector<GridEntry> sorted = grid.entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const GridEntry& a, const GridEntry& b) { return a.label < b.label; });
  for (const auto& e : sorted) {
    out << e.label << ',' << e.row << ',' << e.col;
    if (!e.name.empty()) out << ',' << e.name;
    out << '\n';
  }
  if (!out) throw IoError("short write to grid file " + file.string());
}

AlphabetGrid make_dense_grid(int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw ValidationError("grid dimensions must be positive");
  AlphabetGrid grid;
  grid.num_rows = rows;
  grid.num_cols = cols;
  grid.num_labels = rows * cols;
  grid.entries.reserve(static_cast<std::size_t>(grid.num_labels));
  for (int r = 1; r <= rows; ++r)
    for (int c = 1; c <= cols; ++c)
      grid.entries.push_back({(r - 1) * cols + c, r, c, ""});
  grid.finalize();
  return grid;
}

}  // namespace amcr
