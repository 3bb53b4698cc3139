#include "amcr/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "byteio.hpp"

namespace amcr {

namespace {

constexpr char kMagic[4] = {'A', 'M', 'C', 'R'};
constexpr std::uint16_t kVersion = 1;

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace

std::int64_t DatasetManifest::count_for(const std::string& split) const {
  for (const auto& [name, n] : split_counts)
    if (name == split) return n;
  return -1;
}

void DatasetManifest::set_count(const std::string& split, std::int64_t n) {
  for (auto& [name, cnt] : split_counts) {
    if (name == split) {
      cnt = n;
      return;
    }
  }
  split_counts.emplace_back(split, n);
}

nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json splits = nlohmann::ordered_json::object();
  for (const auto& [name, n] : m.split_counts) splits[name] = n;
  return nlohmann::ordered_json{{"canvas", m.canvas},
                                {"num_labels", m.num_labels},
                                {"num_rows", m.num_rows},
                                {"num_cols", m.num_cols},
                                {"splits", splits},
                                {"augment_digest", m.augment_digest},
                                {"seed", m.seed},
                                {"created", m.created},
                                {"grid_digest", m.grid_digest}};
}

DatasetManifest manifest_from_json(const nlohmann::ordered_json& j) {
  DatasetManifest m;
  m.canvas = j.at("canvas").get<int>();
  m.num_labels = j.at("num_labels").get<int>();
  m.num_rows = j.at("num_rows").get<int>();
  m.num_cols = j.at("num_cols").get<int>();
  for (const auto& [name, n] : j.at("splits").items())
    m.split_counts.emplace_back(name, n.get<std::int64_t>());
  m.augment_digest = j.at("augment_digest").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.created = j.at("created").get<std::string>();
  m.grid_digest = j.at("grid_digest").get<std::string>();
  return m;
}

void write_manifest_json(const DatasetManifest& m, const std::filesystem::path& file) {
  byteio::write_file(file, manifest_to_json(m).dump(2) + "\n");
}

Tensor SplitData::image_tensor(std::size_t i) const {
  if (i >= count()) throw LookupError("record index " + std::to_string(i) + " out of range");
  Tensor img({canvas, canvas, 1});
  const std::uint8_t* src = pixels.data() + i * static_cast<std::size_t>(canvas) * canvas;
  for (std::size_t k = 0; k < img.data.size(); ++k)
    img.data[k] = static_cast<float>(src[k]) / 255.0f;
  return img;
}

LabelTriple SplitData::triple(std::size_t i) const {
  if (i >= count()) throw LookupError("record index " + std::to_string(i) + " out of range");
  return {labels[i], rows[i], cols[i]};
}

SplitData make_split_data(const std::string& split, const std::vector<GlyphImage>& samples,
                          const AlphabetGrid& grid) {
  SplitData d;
  d.split = split;
  if (!samples.empty()) d.canvas = samples.front().pixels.dim(0);
  d.pixels.reserve(samples.size() * static_cast<std::size_t>(d.canvas) * d.canvas);
  d.labels.reserve(samples.size());
  d.rows.reserve(samples.size());
  d.cols.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.pixels.dim(0) != d.canvas || s.pixels.dim(1) != d.canvas)
      throw DimensionError("sample canvas " + s.pixels.shape_string() + " differs from " +
                           std::to_string(d.canvas));
    const auto t = derive_targets(s.label, grid);
    d.labels.push_back(static_cast<std::uint16_t>(t.label));
    d.rows.push_back(static_cast<std::uint16_t>(t.row));
    d.cols.push_back(static_cast<std::uint16_t>(t.col));
    for (float px : s.pixels.data)
      d.pixels.push_back(static_cast<std::uint8_t>(
          std::lround(std::clamp(px, 0.0f, 1.0f) * 255.0f)));
  }
  return d;
}

void write_container(const SplitData& data, const DatasetManifest& manifest,
                     const std::filesystem::path& file) {
  const std::size_t n = data.count();
  if (data.rows.size() != n || data.cols.size() != n ||
      data.pixels.size() != n * static_cast<std::size_t>(data.canvas) * data.canvas)
    throw DimensionError("container arrays disagree: " + std::to_string(n) + " records, " +
                         std::to_string(data.pixels.size()) + " pixel bytes");
  if (manifest.count_for(data.split) != static_cast<std::int64_t>(n))
    throw ValidationError("manifest count for split `" + data.split + "` is " +
                          std::to_string(manifest.count_for(data.split)) + ", container has " +
                          std::to_string(n));

  const std::size_t pixel_bytes = data.pixels.size();
  const std::size_t target_bytes = n * 2;

  // The header length feeds its own offsets, so build it with placeholder
  // offsets first to learn its size, then rewrite with the real ones.
  auto build_header = [&](std::size_t base) {
    nlohmann::ordered_json arrays = nlohmann::ordered_json::object();
    std::size_t off = base;
    arrays["pixels"] = {{"dtype", "u8"}, {"offset", off}, {"bytes", pixel_bytes}};
    off += pixel_bytes;
    for (const char* name : {"labels", "rows", "cols"}) {
      arrays[name] = {{"dtype", "u16le"}, {"offset", off}, {"bytes", target_bytes}};
      off += target_bytes;
    }
    nlohmann::ordered_json h{{"split", data.split},
                             {"canvas", data.canvas},
                             {"count", n},
                             {"arrays", arrays},
                             {"manifest", manifest_to_json(manifest)}};
    return h.dump();
  };
  std::string header = build_header(0);
  for (;;) {
    // Offsets feed the header whose size feeds the offsets; iterate until the
    // decimal digit counts stop shifting the size.
    std::string next = build_header(4 + 2 + 4 + header.size());
    const bool settled = next.size() == header.size();
    header = std::move(next);
    if (settled) break;
  }

  std::string out;
  out.reserve(4 + 2 + 4 + header.size() + pixel_bytes + 3 * target_bytes);
  out.append(kMagic, 4);
  byteio::put_u16(out, kVersion);
  byteio::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out.append(reinterpret_cast<const char*>(data.pixels.data()), pixel_bytes);
  for (const auto* arr : {&data.labels, &data.rows, &data.cols})
    for (std::uint16_t v : *arr) byteio::put_u16(out, v);
  byteio::write_file(file, out);
}

ContainerFile read_container(const std::filesystem::path& file) {
  byteio::Reader r = byteio::read_file(file);
  if (r.raw(4, "magic") != std::string(kMagic, 4)) {
    r.pos = 0;
    r.fail("bad magic, not a dataset container");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kVersion) {
    r.pos = 4;
    r.fail("unsupported container version " + std::to_string(version));
  }
  const std::uint32_t header_len = r.u32("header length");
  const std::string header_text = r.raw(header_len, "header");

  nlohmann::ordered_json h;
  try {
    h = nlohmann::ordered_json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    r.pos = 10;
    r.fail(std::string("header is not valid JSON: ") + e.what());
  }

  ContainerFile c;
  try {
    c.manifest = manifest_from_json(h.at("manifest"));
    c.data.split = h.at("split").get<std::string>();
    c.data.canvas = h.at("canvas").get<int>();
    const std::size_t n = h.at("count").get<std::size_t>();
    const auto& arrays = h.at("arrays");

    auto read_array = [&](const char* name, const char* dtype, std::size_t expect_bytes) {
      const auto& a = arrays.at(name);
      if (a.at("dtype").get<std::string>() != dtype)
        throw FormatError(file.string() + ": array `" + std::string(name) + "` has dtype `" +
                          a.at("dtype").get<std::string>() + "`, expected `" + dtype + "`");
      const std::size_t off = a.at("offset").get<std::size_t>();
      const std::size_t bytes = a.at("bytes").get<std::size_t>();
      if (bytes != expect_bytes)
        throw FormatError(file.string() + ": array `" + std::string(name) + "` declares " +
                          std::to_string(bytes) + " bytes, expected " +
                          std::to_string(expect_bytes));
      r.pos = off;
      return r.raw(bytes, name);
    };

    const std::size_t pixel_bytes = n * static_cast<std::size_t>(c.data.canvas) * c.data.canvas;
    const std::string px = read_array("pixels", "u8", pixel_bytes);
    c.data.pixels.assign(px.begin(), px.end());
    for (auto [name, dst] : {std::pair{"labels", &c.data.labels}, {"rows", &c.data.rows},
                             {"cols", &c.data.cols}}) {
      const std::string raw = read_array(name, "u16le", n * 2);
      dst->resize(n);
      for (std::size_t i = 0; i < n; ++i)
        (*dst)[i] = static_cast<std::uint16_t>(
            static_cast<unsigned char>(raw[2 * i]) |
            (static_cast<unsigned char>(raw[2 * i + 1]) << 8));
    }

    if (c.manifest.count_for(c.data.split) != static_cast<std::int64_t>(n))
      throw FormatError(file.string() + ": manifest count for split `" + c.data.split +
                        "` disagrees with record count " + std::to_string(n));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": malformed header: " + e.what());
  }
  return c;
}

std::vector<std::string> validate_split(const SplitData& data, const AlphabetGrid& grid) {
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < data.count(); ++i) {
    const int label = data.labels[i];
    if (label < 1 || label > grid.num_labels) {
      violations.push_back("record " + std::to_string(i) + ": label " + std::to_string(label) +
                           " outside grid");
      continue;
    }
    const auto [row, col] = label_to_grid(grid, label);
    if (row != data.rows[i] || col != data.cols[i])
      violations.push_back("record " + std::to_string(i) + ": targets (" +
                           std::to_string(data.rows[i]) + "," + std::to_string(data.cols[i]) +
                           ") disagree with grid cell (" + std::to_string(row) + "," +
                           std::to_string(col) + ")");
  }
  return violations;
}

IngestResult ingest_directory(const std::filesystem::path& dir, const AlphabetGrid& grid,
                              int canvas) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  IngestResult result;

  std::vector<fs::path> writer_dirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) writer_dirs.push_back(entry.path());
  std::sort(writer_dirs.begin(), writer_dirs.end());
  if (writer_dirs.empty()) {
    result.warnings.push_back(dir.string() + ": no writer directories found");
    return result;
  }

  for (const auto& wdir : writer_dirs) {
    const std::string writer = wdir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(wdir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
      const std::string stem = file.stem().string();
      int label = 0;
      try {
        std::size_t pos = 0;
        label = std::stoi(stem, &pos);
        if (pos != stem.size()) throw std::invalid_argument(stem);
      } catch (const std::exception&) {
        result.warnings.push_back(file.string() + ": file name is not a label, skipped");
        continue;
      }
      if (label < 1 || label > grid.num_labels)
        throw ValidationError(file.string() + ": label " + std::to_string(label) +
                              " out of range 1.." + std::to_string(grid.num_labels));
      try {
        GlyphImage g;
        g.pixels = resize_bilinear(decode_image(file), canvas, canvas);
        g.source_writer = writer;
        g.label = label;
        result.samples.push_back(std::move(g));
      } catch (const IoError& e) {
        result.warnings.push_back(e.what());
      }
    }
  }
  if (result.samples.empty())
    result.warnings.push_back(dir.string() + ": no images ingested");
  return result;
}

SplitTriple split_by_writer(const std::vector<GlyphImage>& samples, std::array<int, 3> ratio,
                            std::uint64_t seed) {
  for (int r : ratio)
    if (r < 0) throw ConfigError("split ratio parts must be >= 0");
  const int ratio_sum = ratio[0] + ratio[1] + ratio[2];
  if (ratio_sum <= 0) throw ConfigError("split ratio must be positive");

  std::set<std::string> writer_set;
  for (const auto& s : samples) writer_set.insert(s.source_writer);
  std::vector<std::string> writers(writer_set.begin(), writer_set.end());
  if (static_cast<int>(writers.size()) < ratio_sum)
    throw ConfigError("need at least " + std::to_string(ratio_sum) + " writers for a " +
                      std::to_string(ratio[0]) + ":" + std::to_string(ratio[1]) + ":" +
                      std::to_string(ratio[2]) + " split, have " +
                      std::to_string(writers.size()));

  RngStream rng(seed, rng_streams::kWriterSplit);
  rng.shuffle(writers);

  // Proportional share per split, remainder to the largest fractional parts
  // (ties to the earlier split).
  const int w = static_cast<int>(writers.size());
  std::array<int, 3> take{};
  std::array<double, 3> frac{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(w) * ratio[i] / ratio_sum;
    take[i] = static_cast<int>(exact);
    frac[i] = exact - take[i];
    assigned += take[i];
  }
  for (int left = w - assigned; left > 0; --left) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (frac[i] > frac[best]) best = i;
    ++take[best];
    frac[best] = -1.0;
  }

  std::set<std::string> train_w(writers.begin(), writers.begin() + take[0]);
  std::set<std::string> val_w(writers.begin() + take[0], writers.begin() + take[0] + take[1]);

  SplitTriple out;
  for (const auto& s : samples) {
    if (train_w.count(s.source_writer))
      out.train.push_back(s);
    else if (val_w.count(s.source_writer))
      out.val.push_back(s);
    else
      out.test.push_back(s);
  }
  return out;
}

Tensor one_hot(int index, int size) {
  if (size <= 0) throw ValidationError("one_hot size must be positive");
  if (index < 1 || index > size)
    throw ValidationError("one_hot index " + std::to_string(index) + " out of range 1.." +
                          std::to_string(size));
  Tensor t({size});
  t.data[index - 1] = 1.0f;
  return t;
}

LabelTriple derive_targets(int label, const AlphabetGrid& grid) {
  const auto [row, col] = label_to_grid(grid, label);
  return {label, row, col};
}

std::uint64_t fnv1a64(const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& s) { return hex64(fnv1a64(s.data(), s.size())); }

std::string fnv1a64_hex_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::string bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
  return fnv1a64_hex(bytes);
}

}  // namespace amcr
