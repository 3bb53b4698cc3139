#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amcr/errors.hpp"

// The alphabet is addressed two ways: by flat label (1..numLabels) and by
// (row, col) cell in a 34x9 table. Both auxiliary targets come from the cell.

namespace amcr {

struct GridEntry {
  int label = 0;  // 1-based
  int row = 0;    // 1-based
  int col = 0;    // 1-based
  std::string name;  // opaque, may be empty
};

struct AlphabetGrid {
  int num_labels = 0;
  int num_rows = 0;
  int num_cols = 0;
  std::vector<GridEntry> entries;

  // Lookup tables; rebuilt by finalize(), valid only when validate() is clean.
  std::vector<std::pair<int, int>> cell_of_label;  // label-1 -> (row, col)
  std::vector<int> label_of_cell;                  // (row-1)*num_cols + col-1 -> label, 0 if empty

  void finalize();
};

std::pair<int, int> label_to_grid(const AlphabetGrid& grid, int label);
std::optional<int> grid_to_label(const AlphabetGrid& grid, int row, int col);

// Returns every violation, not just the first. Empty means the grid is sound.
std::vector<std::string> validate_grid(const AlphabetGrid& grid);

// Line format: `label,row,col[,name]`, `#` starts a comment, blank lines
// ignored. Grid dimensions default to the largest row/col mentioned; pass
// them explicitly to demand a larger frame. Throws FormatError (with line
// number) on parse trouble and ValidationError listing all invariant
// violations.
AlphabetGrid load_grid(const std::filesystem::path& file, int num_rows = 0, int num_cols = 0);
void save_grid(const AlphabetGrid& grid, const std::filesystem::path& file);

// Fully occupied rows x cols grid with label = (row-1)*cols + col; used by the
// synthetic-glyph pipeline and small-scale tests.
AlphabetGrid make_dense_grid(int rows, int cols);

}  // namespace amcr
