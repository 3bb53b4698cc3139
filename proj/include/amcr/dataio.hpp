#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "amcr/glyph.hpp"
#include "amcr/grid.hpp"
#include "amcr/rng.hpp"
#include "amcr/tensor.hpp"

// Dataset ingestion, writer-stratified splitting, and the binary container.
//
// Container layout (all integers little-endian):
//   magic "AMCR" | version u16 | header length u32 | UTF-8 JSON header |
//   payload arrays at the offsets the header declares.
// Pixels are stored as u8 (value/255 on load), targets as u16.

namespace amcr {

struct LabelTriple {
  int label = 0;
  int row = 0;
  int col = 0;
};

struct DatasetManifest {
  int canvas = 32;
  int num_labels = 0;
  int num_rows = 0;
  int num_cols = 0;
  std::vector<std::pair<std::string, std::int64_t>> split_counts;
  std::string augment_digest;
  std::uint64_t seed = 0;
  std::string created;  // RFC 3339, empty in deterministic mode
  std::string grid_digest;

  std::int64_t count_for(const std::string& split) const;
  void set_count(const std::string& split, std::int64_t n);
};

nlohmann::ordered_json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::ordered_json& j);
void write_manifest_json(const DatasetManifest& m, const std::filesystem::path& file);

// One split's records in container order. Pixels stay in their packed u8 form;
// image_tensor materializes floats on demand.
struct SplitData {
  std::string split;
  int canvas = 0;
  std::vector<std::uint8_t> pixels;  // count * canvas * canvas
  std::vector<std::uint16_t> labels, rows, cols;  // 1-based

  std::size_t count() const { return labels.size(); }
  Tensor image_tensor(std::size_t i) const;
  LabelTriple triple(std::size_t i) const;
};

struct ContainerFile {
  DatasetManifest manifest;
  SplitData data;
};

SplitData make_split_data(const std::string& split, const std::vector<GlyphImage>& samples,
                          const AlphabetGrid& grid);

void write_container(const SplitData& data, const DatasetManifest& manifest,
                     const std::filesystem::path& file);
ContainerFile read_container(const std::filesystem::path& file);

// Every stored (label,row,col) must agree with the grid; returns violations.
std::vector<std::string> validate_split(const SplitData& data, const AlphabetGrid& grid);

struct IngestResult {
  std::vector<GlyphImage> samples;
  std::vector<std::string> warnings;
};

// Directory layout: <writerId>/<label>.<ext>. Unreadable files become
// warnings; a label outside the grid aborts the ingest.
IngestResult ingest_directory(const std::filesystem::path& dir, const AlphabetGrid& grid,
                              int canvas = 32);

struct SplitTriple {
  std::vector<GlyphImage> train, val, test;
};

// Partitions the distinct writers (not individual images) by seeded shuffle.
SplitTriple split_by_writer(const std::vector<GlyphImage>& samples,
                            std::array<int, 3> ratio, std::uint64_t seed);

Tensor one_hot(int index, int size);  // index is 1-based
LabelTriple derive_targets(int label, const AlphabetGrid& grid);

std::uint64_t fnv1a64(const void* bytes, std::size_t n);
std::string fnv1a64_hex(const std::string& s);
std::string fnv1a64_hex_file(const std::filesystem::path& file);

}  // namespace amcr
