#include "amcr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace amcr {

namespace {

constexpr float kRotationHardMin = -15.0f, kRotationHardMax = 15.0f;
constexpr float kShrinkHardMin = 0.70f, kShrinkHardMax = 0.87f;

std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", static_cast<double>(v));
  return buf;
}

// Ink is 0 on background 1, so stamping means taking the pointwise minimum
// with a darkness profile.
void stamp_disc(Tensor& img, float cy, float cx, float radius) {
  const int h = img.dim(0), w = img.dim(1);
  const int lo_y = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
  const int hi_y = std::min(h - 1, static_cast<int>(std::ceil(cy + radius + 1)));
  const int lo_x = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
  const int hi_x = std::min(w - 1, static_cast<int>(std::ceil(cx + radius + 1)));
  for (int i = lo_y; i <= hi_y; ++i)
    for (int j = lo_x; j <= hi_x; ++j) {
      const float dy = static_cast<float>(i) - cy, dx = static_cast<float>(j) - cx;
      const float d = std::sqrt(dy * dy + dx * dx);
      float& px = img.data[static_cast<std::size_t>(i) * w + j];
      px = std::min(px, std::clamp(d - radius, 0.0f, 1.0f));
    }
}

void stamp_segment(Tensor& img, float y0, float x0, float y1, float x1, float radius) {
  const int h = img.dim(0), w = img.dim(1);
  const float vy = y1 - y0, vx = x1 - x0;
  const float len2 = vy * vy + vx * vx;
  const int lo_y = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius - 1)));
  const int hi_y = std::min(h - 1, static_cast<int>(std::ceil(std::max(y0, y1) + radius + 1)));
  const int lo_x = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius - 1)));
  const int hi_x = std::min(w - 1, static_cast<int>(std::ceil(std::max(x0, x1) + radius + 1)));
  for (int i = lo_y; i <= hi_y; ++i)
    for (int j = lo_x; j <= hi_x; ++j) {
      const float py = static_cast<float>(i) - y0, px_ = static_cast<float>(j) - x0;
      float t = len2 > 0.0f ? (py * vy + px_ * vx) / len2 : 0.0f;
      t = std::clamp(t, 0.0f, 1.0f);
      const float dy = py - t * vy, dx = px_ - t * vx;
      const float d = std::sqrt(dy * dy + dx * dx);
      float& px = img.data[static_cast<std::size_t>(i) * w + j];
      px = std::min(px, std::clamp(d - radius, 0.0f, 1.0f));
    }
}

}  // namespace

void AugmentationSpec::validate() const {
  if (!(rotation_min <= rotation_max) || rotation_min < kRotationHardMin ||
      rotation_max > kRotationHardMax)
    throw ConfigError("rotation interval [" + format_float(rotation_min) + "," +
                      format_float(rotation_max) + "] must lie within [-15,15]");
  if (!(noise_density >= 0.0f && noise_density <= 1.0f))
    throw ConfigError("noise density must be in [0,1]");
  if (!(shrink_min <= shrink_max) || shrink_min < kShrinkHardMin || shrink_max > kShrinkHardMax)
    throw ConfigError("shrink interval [" + format_float(shrink_min) + "," +
                      format_float(shrink_max) + "] must lie within [0.70,0.87]");
  for (auto c : per_class_counts)
    if (c < 0) throw ConfigError("per-class counts must be >= 0");
}

nlohmann::ordered_json AugmentationSpec::to_json() const {
  return nlohmann::ordered_json{
      {"rotation", {rotation_min, rotation_max}},
      {"noise_density", noise_density},
      {"shrink", {shrink_min, shrink_max}},
      {"per_class_counts", per_class_counts},
      {"seed", seed}};
}

AugmentationSpec AugmentationSpec::from_json(const nlohmann::ordered_json& j) {
  AugmentationSpec s;
  s.rotation_min = j.at("rotation").at(0).get<float>();
  s.rotation_max = j.at("rotation").at(1).get<float>();
  s.noise_density = j.at("noise_density").get<float>();
  s.shrink_min = j.at("shrink").at(0).get<float>();
  s.shrink_max = j.at("shrink").at(1).get<float>();
  const auto& counts = j.at("per_class_counts");
  for (std::size_t i = 0; i < 3; ++i) s.per_class_counts[i] = counts.at(i).get<std::int64_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

std::string AugmentationSpec::digest() const { return fnv1a64_hex(to_json().dump()); }

GlyphImage rotate(const GlyphImage& img, float degrees) {
  if (!(degrees >= kRotationHardMin && degrees <= kRotationHardMax))
    throw ValidationError("rotation " + format_float(degrees) + " outside [-15,15] degrees");
  GlyphImage out = img;
  out.pixels = warp_rotate_translate(img.pixels, degrees);
  return out;
}

GlyphImage add_noise(const GlyphImage& img, float density, RngStream& rng) {
  if (!(density >= 0.0f && density <= 1.0f))
    throw ValidationError("noise density " + format_float(density) + " outside [0,1]");
  GlyphImage out = img;
  for (auto& px : out.pixels.data)
    if (rng.uniform_float() < density) px = rng.coin() ? 1.0f : 0.0f;
  return out;
}

GlyphImage shrink(const GlyphImage& img, float factor) {
  if (!(factor >= kShrinkHardMin && factor <= kShrinkHardMax))
    throw ValidationError("shrink factor " + format_float(factor) + " outside [0.70,0.87]");
  const int h = img.pixels.dim(0), w = img.pixels.dim(1);
  const int ih = static_cast<int>(std::lround(h * factor));
  const int iw = static_cast<int>(std::lround(w * factor));
  Tensor inner = resize_bilinear(img.pixels, ih, iw);
  GlyphImage out = img;
  out.pixels = Tensor({h, w, 1});
  out.pixels.fill(1.0f);
  const int oy = (h - ih) / 2, ox = (w - iw) / 2;
  for (int i = 0; i < ih; ++i)
    for (int j = 0; j < iw; ++j)
      out.pixels.data[static_cast<std::size_t>(oy + i) * w + ox + j] =
          inner.data[static_cast<std::size_t>(i) * iw + j];
  return out;
}

std::vector<GlyphImage> augment_split(const std::vector<GlyphImage>& samples,
                                      const AugmentationSpec& spec,
                                      std::int64_t target_count_per_class,
                                      std::uint64_t base_stream,
                                      std::vector<TransformLogEntry>* log) {
  spec.validate();
  if (target_count_per_class < 0) throw ConfigError("target count must be >= 0");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].label].push_back(i);
  if (by_class.empty()) throw ConfigError("no samples to augment");

  std::vector<GlyphImage> out;
  out.reserve(static_cast<std::size_t>(target_count_per_class) * by_class.size());
  for (const auto& [label, indices] : by_class) {
    if (indices.empty()) throw ConfigError("class " + std::to_string(label) + " has no samples");
    const auto n = static_cast<std::int64_t>(indices.size());
    if (target_count_per_class < n)
      throw ConfigError("class " + std::to_string(label) + " already has " + std::to_string(n) +
                        " samples, above the target " + std::to_string(target_count_per_class));

    for (std::size_t idx : indices) out.push_back(samples[idx]);

    RngStream rng(spec.seed, base_stream + static_cast<std::uint64_t>(label));
    for (std::int64_t k = n; k < target_count_per_class; ++k) {
      const GlyphImage& src = samples[indices[rng.below(static_cast<std::uint32_t>(n))]];
      bool use_rotate = false, use_shrink = false, use_noise = false;
      do {
        use_rotate = rng.coin();
        use_noise = rng.coin();
        use_shrink = rng.coin();
      } while (!use_rotate && !use_noise && !use_shrink);

      GlyphImage img = src;
      std::string names, params;
      auto tag = [&](const char* name, const std::string& p) {
        if (!names.empty()) names += '+';
        names += name;
        if (!p.empty()) {
          if (!params.empty()) params += ';';
          params += p;
        }
      };
      if (use_rotate) {
        const float deg = static_cast<float>(rng.uniform(spec.rotation_min, spec.rotation_max));
        img = rotate(img, deg);
        tag("rotate", "deg=" + format_float(deg));
      }
      if (use_shrink) {
        const float f = static_cast<float>(rng.uniform(spec.shrink_min, spec.shrink_max));
        img = shrink(img, f);
        tag("shrink", "factor=" + format_float(f));
      }
      if (use_noise) {
        img = add_noise(img, spec.noise_density, rng);
        tag("noise", "density=" + format_float(spec.noise_density));
      }
      if (log) log->push_back({label, src.source_writer, names, params});
      out.push_back(std::move(img));
    }
  }
  return out;
}

void write_transform_log(const std::vector<TransformLogEntry>& log,
                         const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << "class,sourceWriter,transforms,params\n";
  for (const auto& e : log)
    out << e.label << ',' << e.source_writer << ',' << e.transforms << ',' << e.params << '\n';
  if (!out) throw IoError("short write to " + file.string());
}

Tensor synth_row_base(int row, std::uint64_t seed, int canvas) {
  if (row < 1) throw ValidationError("row must be >= 1");
  RngStream rng(seed, rng_streams::kSynthRowBase + static_cast<std::uint64_t>(row));
  Tensor img({canvas, canvas, 1});
  img.fill(1.0f);
  const float s = static_cast<float>(canvas);
  const float lo = 0.45f * s, hi = 0.93f * s;
  const float min_len = 0.18f * s;
  const float radius = std::max(0.6f, 0.028f * s);
  for (int stroke = 0; stroke < 3; ++stroke) {
    float y0, x0, y1, x1;
    do {
      y0 = static_cast<float>(rng.uniform(lo, hi));
      x0 = static_cast<float>(rng.uniform(lo, hi));
      y1 = static_cast<float>(rng.uniform(lo, hi));
      x1 = static_cast<float>(rng.uniform(lo, hi));
    } while (std::hypot(y1 - y0, x1 - x0) < min_len);
    stamp_segment(img, y0, x0, y1, x1, radius);
  }
  return img;
}

Tensor synth_col_mark(int col, int canvas) {
  if (col < 1 || col > 9) throw ValidationError("column mark defined for columns 1..9");
  // Dice-style dot layouts on a 3x3 cell lattice, one layout per count.
  static const std::vector<std::vector<int>> kCells{
      {4}, {0, 8}, {0, 4, 8}, {0, 2, 6, 8}, {0, 2, 4, 6, 8},
      {0, 2, 3, 5, 6, 8}, {0, 2, 3, 4, 5, 6, 8}, {0, 1, 2, 3, 5, 6, 7, 8},
      {0, 1, 2, 3, 4, 5, 6, 7, 8}};
  Tensor img({canvas, canvas, 1});
  img.fill(1.0f);
  const float s = static_cast<float>(canvas);
  const float lo = 0.10f * s, hi = 0.42f * s;
  const float cell = (hi - lo) / 3.0f;
  const float radius = std::max(0.9f, 0.042f * s);
  for (int c : kCells[col - 1]) {
    const float cy = lo + cell * (static_cast<float>(c / 3) + 0.5f);
    const float cx = lo + cell * (static_cast<float>(c % 3) + 0.5f);
    stamp_disc(img, cy, cx, radius);
  }
  return img;
}

Tensor synth_class_image(int row, int col, std::uint64_t seed, int canvas) {
  Tensor base = synth_row_base(row, seed, canvas);
  const Tensor mark = synth_col_mark(col, canvas);
  for (std::size_t i = 0; i < base.data.size(); ++i)
    base.data[i] = std::min(base.data[i], mark.data[i]);
  return base;
}

SynthResult synth_glyphs(int num_rows, int num_cols, const std::vector<int>& per_class_counts,
                         std::uint64_t seed, int canvas) {
  if (num_rows < 1 || num_cols < 1) throw ValidationError("need at least one row and column");
  if (num_rows * num_cols > 34 * 9)
    throw ValidationError("synthetic grid larger than the 34x9 alphabet");
  if (num_cols > 9) throw ValidationError("column marks are defined up to column 9");
  if (canvas < 8) throw ValidationError("canvas too small for glyph synthesis");
  for (int c : per_class_counts)
    if (c < 0) throw ValidationError("per-class counts must be >= 0");

  SynthResult result;
  result.grid = make_dense_grid(num_rows, num_cols);

  std::vector<Tensor> class_images(static_cast<std::size_t>(num_rows) * num_cols);
  for (int r = 1; r <= num_rows; ++r)
    for (int c = 1; c <= num_cols; ++c)
      class_images[static_cast<std::size_t>(r - 1) * num_cols + (c - 1)] =
          synth_class_image(r, c, seed, canvas);

  result.splits.resize(per_class_counts.size());
  for (std::size_t s = 0; s < per_class_counts.size(); ++s) {
    auto& split = result.splits[s];
    split.reserve(static_cast<std::size_t>(per_class_counts[s]) * class_images.size());
    for (int label = 1; label <= num_rows * num_cols; ++label) {
      const Tensor& src = class_images[static_cast<std::size_t>(label - 1)];
      RngStream rng(seed, rng_streams::kSynthJitterBase + s * 100000ULL +
                              static_cast<std::uint64_t>(label));
      for (int k = 0; k < per_class_counts[s]; ++k) {
        const float deg = static_cast<float>(rng.uniform(-5.0, 5.0));
        const float dy = static_cast<float>(rng.uniform(-1.0, 1.0));
        const float dx = static_cast<float>(rng.uniform(-1.0, 1.0));
        GlyphImage g;
        g.pixels = warp_rotate_translate(src, deg, dy, dx);
        g.source_writer = "synth";
        g.label = label;
        split.push_back(std::move(g));
      }
    }
  }
  return result;
}

}  // namespace amcr
