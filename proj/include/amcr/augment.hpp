#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amcr/dataio.hpp"
#include "amcr/glyph.hpp"
#include "amcr/grid.hpp"
#include "amcr/rng.hpp"

// Seeded augmentation to exact per-class counts, plus the procedural glyph
// generator that stands in for the real handwriting corpus at desk scale.

namespace amcr {

struct AugmentationSpec {
  float rotation_min = -15.0f;
  float rotation_max = 15.0f;
  float noise_density = 0.02f;
  float shrink_min = 0.70f;
  float shrink_max = 0.87f;
  std::array<std::int64_t, 3> per_class_counts{4500, 800, 400};  // train, val, test
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  nlohmann::ordered_json to_json() const;
  static AugmentationSpec from_json(const nlohmann::ordered_json& j);
  std::string digest() const;
};

// Transforms validate their parameters against hard intervals: rotation
// within [-15, 15] degrees, shrink within [0.70, 0.87].
GlyphImage rotate(const GlyphImage& img, float degrees);
GlyphImage add_noise(const GlyphImage& img, float density, RngStream& rng);
GlyphImage shrink(const GlyphImage& img, float factor);

struct TransformLogEntry {
  int label = 0;
  std::string source_writer;
  std::string transforms;  // e.g. "rotate+shrink"
  std::string params;      // e.g. "deg=3.21;factor=0.81"
};

// Expands every class to exactly target_count images. Originals count toward
// the target; each generated image applies a nonempty random subset of
// {rotate, shrink, noise} with parameters drawn from the spec intervals.
// Class k draws from RngStream(spec.seed, base_stream + k) so per-class work
// is order-independent.
std::vector<GlyphImage> augment_split(const std::vector<GlyphImage>& samples,
                                      const AugmentationSpec& spec,
                                      std::int64_t target_count_per_class,
                                      std::uint64_t base_stream,
                                      std::vector<TransformLogEntry>* log = nullptr);

void write_transform_log(const std::vector<TransformLogEntry>& log,
                         const std::filesystem::path& file);

// Procedural glyphs on a rows x cols grid: every row owns a seeded stroke
// pattern, every column a fixed modifier mark, and a class image is the two
// superimposed plus per-sample jitter. Column-mates therefore share their
// mark exactly before jitter.
Tensor synth_row_base(int row, std::uint64_t seed, int canvas);
Tensor synth_col_mark(int col, int canvas);
Tensor synth_class_image(int row, int col, std::uint64_t seed, int canvas);

struct SynthResult {
  AlphabetGrid grid;
  // One vector per requested split, in the order the counts were given.
  std::vector<std::vector<GlyphImage>> splits;
};

SynthResult synth_glyphs(int num_rows, int num_cols, const std::vector<int>& per_class_counts,
                         std::uint64_t seed, int canvas = 32);

}  // namespace amcr
