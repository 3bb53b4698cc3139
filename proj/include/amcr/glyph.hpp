#pragma once

#include <filesystem>
#include <string>

#include "amcr/tensor.hpp"

// Grayscale glyph images. Pixels live in [0,1] with 0 = ink and 1 =
// background, shaped [H,W,1] so they feed the conv stack directly.

namespace amcr {

struct GlyphImage {
  Tensor pixels;
  std::string source_writer;
  int label = 0;  // 1-based
};

// Bilinear sample at (y, x) in pixel coordinates; outside the canvas the
// image continues as background (1.0).
float bilinear_sample(const Tensor& img, float y, float x);

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

// Inverse-mapped rotation about the canvas center (degrees, counterclockwise)
// followed by a translation of (dy, dx) pixels; background fill.
Tensor warp_rotate_translate(const Tensor& img, float degrees, float dy = 0.0f, float dx = 0.0f);

// Decoders normalize to [0,1] whatever the source bit depth. PNG (via libpng)
// and PGM (P2/P5) are the accepted formats.
Tensor decode_image(const std::filesystem::path& file);
void write_pgm(const Tensor& img, const std::filesystem::path& file);

}  // namespace amcr
