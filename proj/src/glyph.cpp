#include "amcr/glyph.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "amcr/errors.hpp"

namespace amcr {

namespace {

void require_image(const Tensor& img, const char* who) {
  if (img.rank() != 3 || img.dim(2) != 1)
    throw DimensionError(std::string(who) + " expects [H,W,1], got " + img.shape_string());
}

Tensor decode_pgm(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") throw FormatError(file.string() + ": not a PGM file");

  auto next_int = [&](const char* what) {
    // Skip whitespace and `#` comment lines between header tokens.
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string junk;
        std::getline(in, junk);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) throw FormatError(file.string() + ": bad PGM " + what);
    return v;
  };
  const long w = next_int("width"), h = next_int("height"), maxval = next_int("maxval");
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw FormatError(file.string() + ": unsupported PGM geometry");

  Tensor img({static_cast<int>(h), static_cast<int>(w), 1});
  const float scale = 1.0f / static_cast<float>(maxval);
  if (magic == "P2") {
    for (auto& px : img.data) {
      long v;
      in >> v;
      if (!in || v < 0 || v > maxval) throw FormatError(file.string() + ": bad P2 sample");
      px = static_cast<float>(v) * scale;
    }
  } else {
    in.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
      throw FormatError(file.string() + ": truncated P5 payload");
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      const unsigned v = bytes == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
      img.data[i] = static_cast<float>(v) * scale;
    }
  }
  return img;
}

Tensor decode_png(const std::filesystem::path& file) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, file.string().c_str()))
    throw FormatError(file.string() + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw FormatError(file.string() + ": " + msg);
  }
  Tensor img({static_cast<int>(png.height), static_cast<int>(png.width), 1});
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

}  // namespace

float bilinear_sample(const Tensor& img, float y, float x) {
  const int h = img.dim(0), w = img.dim(1);
  const float y0f = std::floor(y), x0f = std::floor(x);
  const int y0 = static_cast<int>(y0f), x0 = static_cast<int>(x0f);
  const float fy = y - y0f, fx = x - x0f;
  auto at = [&](int r, int c) -> float {
    if (r < 0 || r >= h || c < 0 || c >= w) return 1.0f;
    return img.data[static_cast<std::size_t>(r) * w + c];
  };
  const float top = at(y0, x0) * (1.0f - fx) + at(y0, x0 + 1) * fx;
  const float bot = at(y0 + 1, x0) * (1.0f - fx) + at(y0 + 1, x0 + 1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  require_image(img, "resize_bilinear");
  if (out_h <= 0 || out_w <= 0) throw ValidationError("resize target must be positive");
  const int h = img.dim(0), w = img.dim(1);
  Tensor out({out_h, out_w, 1});
  const float sy = static_cast<float>(h) / static_cast<float>(out_h);
  const float sx = static_cast<float>(w) / static_cast<float>(out_w);
  for (int i = 0; i < out_h; ++i) {
    const float y = (static_cast<float>(i) + 0.5f) * sy - 0.5f;
    for (int j = 0; j < out_w; ++j) {
      const float x = (static_cast<float>(j) + 0.5f) * sx - 0.5f;
      out.data[static_cast<std::size_t>(i) * out_w + j] =
          std::clamp(bilinear_sample(img, y, x), 0.0f, 1.0f);
    }
  }
  return out;
}

Tensor warp_rotate_translate(const Tensor& img, float degrees, float dy, float dx) {
  require_image(img, "warp_rotate_translate");
  const int h = img.dim(0), w = img.dim(1);
  const float rad = degrees * 3.14159265358979323846f / 180.0f;
  const float cs = std::cos(rad), sn = std::sin(rad);
  const float cy = (static_cast<float>(h) - 1.0f) / 2.0f;
  const float cx = (static_cast<float>(w) - 1.0f) / 2.0f;
  Tensor out({h, w, 1});
  for (int i = 0; i < h; ++i) {
    const float ry = static_cast<float>(i) - cy - dy;
    for (int j = 0; j < w; ++j) {
      const float rx = static_cast<float>(j) - cx - dx;
      const float sy = cy + (cs * ry - sn * rx);
      const float sx = cx + (sn * ry + cs * rx);
      out.data[static_cast<std::size_t>(i) * w + j] =
          std::clamp(bilinear_sample(img, sy, sx), 0.0f, 1.0f);
    }
  }
  return out;
}

Tensor decode_image(const std::filesystem::path& file) {
  auto ext = file.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pgm") return decode_pgm(file);
  if (ext == ".png") return decode_png(file);
  throw FormatError(file.string() + ": unsupported image format `" + ext + "`");
}

void write_pgm(const Tensor& img, const std::filesystem::path& file) {
  require_image(img, "write_pgm");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  const int h = img.dim(0), w = img.dim(1);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(
        std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("short write to " + file.string());
}

}  // namespace amcr
