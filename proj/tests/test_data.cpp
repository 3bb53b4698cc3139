#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "amcr/augment.hpp"
#include "amcr/dataio.hpp"
#include "amcr/errors.hpp"
#include "amcr/glyph.hpp"
#include "amcr/grid.hpp"
#include "amcr/metrics.hpp"
#include "test_util.hpp"

using namespace amcr;

namespace {

AlphabetGrid default_grid() {
  return load_grid(std::filesystem::path(testutil::source_dir()) / "data" / "amharic_grid.txt");
}

GlyphImage make_glyph(int label, const std::string& writer, int side = 16, float shade = 0.0f) {
  GlyphImage g;
  g.pixels = Tensor({side, side, 1});
  g.pixels.fill(1.0f);
  for (int i = side / 4; i < 3 * side / 4; ++i)
    g.pixels.at3(i, side / 2, 0) = shade;
  g.label = label;
  g.source_writer = writer;
  return g;
}

void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

}  // namespace

TEST_CASE("alphabet grid anchors and bijection") {
  const AlphabetGrid grid = default_grid();
  CHECK(grid.num_labels == 265);
  CHECK(grid.num_rows == 34);
  CHECK(grid.num_cols == 9);

  const auto [row, col] = label_to_grid(grid, 13);
  CHECK(row == 2);
  CHECK(col == 6);

  int labialized = 0;
  for (int label = 1; label <= 265; ++label) {
    const auto [r, c] = label_to_grid(grid, label);
    const auto back = grid_to_label(grid, r, c);
    REQUIRE(back.has_value());
    CHECK(*back == label);
    if (c >= 8) ++labialized;
  }
  CHECK(labialized == 27);

  // The base block fills the first seven columns completely.
  for (int r = 1; r <= 34; ++r)
    for (int c = 1; c <= 7; ++c) {
      const auto l = grid_to_label(grid, r, c);
      REQUIRE(l.has_value());
      CHECK(*l == (r - 1) * 7 + c);
    }
  CHECK(!grid_to_label(grid, 34, 9).has_value());
  CHECK_THROWS_AS(label_to_grid(grid, 0), LookupError);
  CHECK_THROWS_AS(label_to_grid(grid, 266), LookupError);
  CHECK_THROWS_AS(grid_to_label(grid, 35, 1), LookupError);
  CHECK_THROWS_AS(grid_to_label(grid, 1, 10), LookupError);
}

TEST_CASE("grid file parsing, saving, and violation reporting") {
  testutil::TempDir dir("grid");

  write_text(dir / "ok.txt",
             "# comment line\n"
             "1,1,1,alpha\n"
             "2,1,2\n"
             "  3,2,1  \n"
             "4,2,2,delta # trailing comment\r\n"
             "\n");
  AlphabetGrid g = load_grid(dir / "ok.txt");
  CHECK(g.num_labels == 4);
  CHECK(g.num_rows == 2);
  CHECK(g.num_cols == 2);
  CHECK(g.entries[0].name == "alpha");
  CHECK(label_to_grid(g, 4) == std::pair<int, int>{2, 2});

  save_grid(g, dir / "saved.txt");
  AlphabetGrid g2 = load_grid(dir / "saved.txt");
  CHECK(g2.num_labels == g.num_labels);
  for (int l = 1; l <= 4; ++l) CHECK(label_to_grid(g2, l) == label_to_grid(g, l));

  write_text(dir / "badint.txt", "1,1,one\n");
  CHECK_THROWS_AS(load_grid(dir / "badint.txt"), FormatError);
  write_text(dir / "short.txt", "1,1\n");
  CHECK_THROWS_AS(load_grid(dir / "short.txt"), FormatError);
  CHECK_THROWS_AS(load_grid(dir / "absent.txt"), IoError);

  // Several violations at once, all reported.
  write_text(dir / "bad.txt",
             "1,1,1\n"
             "1,1,2\n"
             "4,2,2\n"
             "3,9,9\n");
  try {
    load_grid(dir / "bad.txt", 2, 2);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("duplicate label 1") != std::string::npos);
    CHECK(msg.find("missing label 2") != std::string::npos);
    CHECK(msg.find("row out of range") != std::string::npos);
    CHECK(msg.find("col out of range") != std::string::npos);
  }

  write_text(dir / "dupcell.txt", "1,1,1\n2,1,1\n");
  CHECK_THROWS_AS(load_grid(dir / "dupcell.txt"), ValidationError);
}

TEST_CASE("dense grid layout") {
  AlphabetGrid g = make_dense_grid(3, 4);
  CHECK(g.num_labels == 12);
  CHECK(label_to_grid(g, 1) == std::pair<int, int>{1, 1});
  CHECK(label_to_grid(g, 6) == std::pair<int, int>{2, 2});
  CHECK(label_to_grid(g, 12) == std::pair<int, int>{3, 4});
  CHECK(validate_grid(g).empty());
}

TEST_CASE("pgm round trip is exact") {
  testutil::TempDir dir("pgm");
  GlyphImage g = make_glyph(1, "w1", 12, 0.25f);
  write_pgm(g.pixels, dir / "a.pgm");
  Tensor back = decode_image(dir / "a.pgm");
  REQUIRE(back.shape == g.pixels.shape);
  for (std::size_t i = 0; i < back.size(); ++i) {
    const float orig = g.pixels.data[i];
    const float expect =
        static_cast<float>(std::lround(std::min(std::max(orig, 0.0f), 1.0f) * 255.0f)) / 255.0f;
    CHECK(back.data[i] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("pgm decoder handles both encodings and rejects damage") {
  testutil::TempDir dir("pgmfmt");
  write_text(dir / "p2.pgm", "P2\n# a comment\n2 2\n255\n0 128\n255 64\n");
  Tensor t = decode_image(dir / "p2.pgm");
  REQUIRE(t.shape == std::vector<int>{2, 2, 1});
  CHECK(t.data[0] == doctest::Approx(0.0f));
  CHECK(t.data[1] == doctest::Approx(128.0f / 255.0f));
  CHECK(t.data[2] == doctest::Approx(1.0f));

  // 16-bit binary samples, big-endian per the format.
  std::string wide = "P5\n1 1\n65535\n";
  wide.push_back(static_cast<char>(0x80));
  wide.push_back(static_cast<char>(0x00));
  write_text(dir / "wide.pgm", wide);
  Tensor w = decode_image(dir / "wide.pgm");
  CHECK(w.data[0] == doctest::Approx(32768.0f / 65535.0f));

  write_text(dir / "trunc.pgm", "P5\n4 4\n255\nxx");
  CHECK_THROWS_AS(decode_image(dir / "trunc.pgm"), FormatError);
  write_text(dir / "magic.pgm", "P7\n1 1\n255\n0");
  CHECK_THROWS_AS(decode_image(dir / "magic.pgm"), FormatError);
  write_text(dir / "noext.xyz", "data");
  CHECK_THROWS_AS(decode_image(dir / "noext.xyz"), FormatError);
}

TEST_CASE("png decoding matches authored pixels") {
  const auto png = std::filesystem::path(testutil::source_dir()) / "tests" / "fixtures" /
                   "gradient_4x3.png";
  Tensor t = decode_image(png);
  REQUIRE(t.shape == std::vector<int>{3, 4, 1});
  // Row-major 8-bit values 0,20,...,220 laid down by the fixture generator.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(t.at3(i, j, 0) == doctest::Approx((i * 4 + j) * 20 / 255.0f).epsilon(1e-6));
}

TEST_CASE("bilinear resize fixes corners and interpolates") {
  Tensor src({2, 2, 1});
  src.data = {0.0f, 1.0f, 1.0f, 0.0f};
  GlyphImage g;
  g.pixels = src;
  Tensor up = resize_bilinear(g.pixels, 4, 4);
  REQUIRE(up.shape == std::vector<int>{4, 4, 1});
  for (float v : up.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // The center of a checker pattern averages to one half.
  const float mid = bilinear_sample(src, 0.5f, 0.5f);
  CHECK(mid == doctest::Approx(0.5f));
  // Identity resize is exact.
  Tensor same = resize_bilinear(src, 2, 2);
  CHECK(same.data == src.data);
}

TEST_CASE("container round trip preserves every byte") {
  testutil::TempDir dir("container");
  AlphabetGrid grid = make_dense_grid(2, 3);
  std::vector<GlyphImage> samples;
  for (int label = 1; label <= 6; ++label)
    for (int k = 0; k < 3; ++k) samples.push_back(make_glyph(label, "w" + std::to_string(k)));

  DatasetManifest manifest;
  manifest.canvas = 16;
  manifest.num_labels = 6;
  manifest.num_rows = 2;
  manifest.num_cols = 3;
  manifest.set_count("train", 18);
  manifest.grid_digest = "feedbeeffeedbeef";

  SplitData data = make_split_data("train", samples, grid);
  write_container(data, manifest, dir / "a.amcr");
  ContainerFile round = read_container(dir / "a.amcr");
  CHECK(round.manifest.canvas == 16);
  CHECK(round.manifest.count_for("train") == 18);
  CHECK(round.data.count() == 18);
  CHECK(round.data.pixels == data.pixels);
  CHECK(round.data.labels == data.labels);
  CHECK(round.data.rows == data.rows);
  CHECK(round.data.cols == data.cols);
  validate_split(round.data, grid);

  write_container(round.data, round.manifest, dir / "b.amcr");
  CHECK(testutil::same_bytes(dir / "a.amcr", dir / "b.amcr"));
}

TEST_CASE("container reader reports corruption with byte offsets") {
  testutil::TempDir dir("corrupt");
  AlphabetGrid grid = make_dense_grid(1, 2);
  std::vector<GlyphImage> samples{make_glyph(1, "w"), make_glyph(2, "w")};
  DatasetManifest manifest;
  manifest.canvas = 16;
  manifest.num_labels = 2;
  manifest.num_rows = 1;
  manifest.num_cols = 2;
  manifest.set_count("train", 2);
  write_container(make_split_data("train", samples, grid), manifest, dir / "ok.amcr");

  std::ifstream in(dir / "ok.amcr", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  write_text(dir / "magic.amcr", "XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(read_container(dir / "magic.amcr"), FormatError);

  std::string vbytes = bytes;
  vbytes[4] = 9;  // unsupported version
  write_text(dir / "ver.amcr", vbytes);
  CHECK_THROWS_AS(read_container(dir / "ver.amcr"), FormatError);

  for (std::size_t cut : {std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 5}) {
    write_text(dir / "cut.amcr", bytes.substr(0, cut));
    try {
      read_container(dir / "cut.amcr");
      FAIL("expected FormatError at cut ", cut);
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
  }

  CHECK_THROWS_AS(read_container(dir / "gone.amcr"), IoError);
}

TEST_CASE("pixel quantization in containers is lossless over the u8 range") {
  AlphabetGrid grid = make_dense_grid(1, 1);
  GlyphImage g;
  g.pixels = Tensor({16, 16, 1});
  g.label = 1;
  for (int v = 0; v < 256; ++v) g.pixels.data[v] = static_cast<float>(v) / 255.0f;
  SplitData data = make_split_data("train", {g}, grid);
  for (int v = 0; v < 256; ++v) CHECK(data.pixels[v] == static_cast<std::uint8_t>(v));
  Tensor back = data.image_tensor(0);
  for (int v = 0; v < 256; ++v)
    CHECK(back.data[v] == doctest::Approx(static_cast<float>(v) / 255.0f).epsilon(1e-9));
}

TEST_CASE("ingest walks writers, warns on junk, aborts on bad labels") {
  testutil::TempDir dir("ingest");
  AlphabetGrid grid = make_dense_grid(2, 2);
  for (const std::string writer : {"w1", "w2"}) {
    std::filesystem::create_directories(dir / writer);
    for (int label = 1; label <= 4; ++label) {
      GlyphImage g = make_glyph(label, writer, 20);
      write_pgm(g.pixels, dir.path() / writer / (std::to_string(label) + ".pgm"));
    }
  }
  write_text(dir.path() / "w1" / "README.txt", "not an image");
  write_text(dir.path() / "w2" / "3.pgm", "P5\n8 8\n255\nshort");  // corrupt, warn + skip

  IngestResult res = ingest_directory(dir.path(), grid, 16);
  CHECK(res.samples.size() == 7);  // 8 minus the corrupt one
  CHECK(res.warnings.size() == 2);
  for (const auto& s : res.samples) {
    CHECK(s.pixels.shape == std::vector<int>{16, 16, 1});
    CHECK((s.source_writer == "w1" || s.source_writer == "w2"));
    CHECK(s.label >= 1);
    CHECK(s.label <= 4);
  }

  // A label outside the grid is a hard error.
  write_text(dir.path() / "w1" / "9.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(ingest_directory(dir.path(), grid, 16), ValidationError);
  std::filesystem::remove(dir.path() / "w1" / "9.pgm");

  CHECK_THROWS_AS(ingest_directory(dir.path() / "w1" / "README.txt", grid, 16), IoError);
  std::filesystem::create_directories(dir.path() / "hollow");
  IngestResult empty = ingest_directory(dir.path() / "hollow", grid, 16);
  CHECK(empty.samples.empty());
  CHECK(!empty.warnings.empty());
}

TEST_CASE("writer split is disjoint, proportional, and seeded") {
  std::vector<GlyphImage> samples;
  for (int w = 0; w < 12; ++w)
    for (int k = 0; k < 5; ++k)
      samples.push_back(make_glyph(1 + (k % 3), "writer" + std::to_string(w)));

  for (std::uint64_t seed : {0ULL, 1ULL, 7ULL, 99ULL, 12345ULL}) {
    SplitTriple t = split_by_writer(samples, {9, 2, 1}, seed);
    CHECK(t.train.size() == 45);
    CHECK(t.val.size() == 10);
    CHECK(t.test.size() == 5);
    std::set<std::string> train_w, val_w, test_w;
    for (const auto& s : t.train) train_w.insert(s.source_writer);
    for (const auto& s : t.val) val_w.insert(s.source_writer);
    for (const auto& s : t.test) test_w.insert(s.source_writer);
    CHECK(train_w.size() == 9);
    CHECK(val_w.size() == 2);
    CHECK(test_w.size() == 1);
    for (const auto& w : val_w) CHECK(train_w.count(w) == 0);
    for (const auto& w : test_w) {
      CHECK(train_w.count(w) == 0);
      CHECK(val_w.count(w) == 0);
    }

    SplitTriple again = split_by_writer(samples, {9, 2, 1}, seed);
    CHECK(again.train.size() == t.train.size());
    for (std::size_t i = 0; i < t.train.size(); ++i)
      CHECK(again.train[i].source_writer == t.train[i].source_writer);
  }

  // Distinct seeds eventually give distinct assignments.
  SplitTriple a = split_by_writer(samples, {9, 2, 1}, 1);
  bool any_differs = false;
  for (std::uint64_t seed = 2; seed < 12 && !any_differs; ++seed) {
    SplitTriple b = split_by_writer(samples, {9, 2, 1}, seed);
    std::set<std::string> aw, bw;
    for (const auto& s : a.test) aw.insert(s.source_writer);
    for (const auto& s : b.test) bw.insert(s.source_writer);
    any_differs = aw != bw;
  }
  CHECK(any_differs);

  std::vector<GlyphImage> two{make_glyph(1, "a"), make_glyph(1, "b")};
  CHECK_THROWS_AS(split_by_writer(two, {9, 2, 1}, 0), ConfigError);
}

TEST_CASE("one-hot targets") {
  Tensor h = one_hot(3, 5);
  CHECK(h.data == std::vector<float>{0.0f, 0.0f, 1.0f, 0.0f, 0.0f});
  CHECK_THROWS_AS(one_hot(0, 5), ValidationError);
  CHECK_THROWS_AS(one_hot(6, 5), ValidationError);
}

TEST_CASE("rotation by zero is the identity and bounds are enforced") {
  GlyphImage g = make_glyph(1, "w", 24, 0.3f);
  GlyphImage r = rotate(g, 0.0f);
  CHECK(r.pixels.data == g.pixels.data);
  CHECK_THROWS_AS(rotate(g, 15.5f), ValidationError);
  CHECK_THROWS_AS(rotate(g, -16.0f), ValidationError);
  GlyphImage r2 = rotate(g, 15.0f);
  CHECK(r2.pixels.shape == g.pixels.shape);
  for (float v : r2.pixels.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("shrink keeps the canvas and centers a smaller glyph") {
  GlyphImage g = make_glyph(1, "w", 20, 0.0f);
  GlyphImage s = shrink(g, 0.70f);
  CHECK(s.pixels.shape == g.pixels.shape);
  // Border pixels are untouched background.
  for (int j = 0; j < 20; ++j) {
    CHECK(s.pixels.at3(0, j, 0) == 1.0f);
    CHECK(s.pixels.at3(19, j, 0) == 1.0f);
  }
  // Some ink must survive.
  float darkest = 1.0f;
  for (float v : s.pixels.data) darkest = std::min(darkest, v);
  CHECK(darkest < 0.5f);
  CHECK_THROWS_AS(shrink(g, 0.5f), ValidationError);
  CHECK_THROWS_AS(shrink(g, 0.95f), ValidationError);
}

TEST_CASE("salt-and-pepper noise hits roughly the requested fraction") {
  GlyphImage g;
  g.pixels = Tensor({64, 64, 1});
  g.pixels.fill(0.5f);
  RngStream rng(4, 44);
  GlyphImage noisy = add_noise(g, 0.1f, rng);
  std::size_t flipped = 0;
  for (float v : noisy.pixels.data) {
    CHECK((v == 0.5f || v == 0.0f || v == 1.0f));
    if (v != 0.5f) ++flipped;
  }
  // 4096 Bernoulli(0.1): expect 410, sigma ~ 19.
  CHECK(flipped > 410 - 5 * 19);
  CHECK(flipped < 410 + 5 * 19);
  RngStream rng2(4, 44);
  GlyphImage same = add_noise(g, 0.1f, rng2);
  CHECK(same.pixels.data == noisy.pixels.data);
}

TEST_CASE("augmentation spec validation and digest") {
  AugmentationSpec spec;
  CHECK_NOTHROW(spec.validate());
  const std::string d1 = spec.digest();
  AugmentationSpec other = spec;
  other.noise_density = 0.05f;
  CHECK(other.digest() != d1);

  AugmentationSpec round = AugmentationSpec::from_json(spec.to_json());
  CHECK(round.digest() == d1);

  AugmentationSpec bad = spec;
  bad.rotation_min = -20.0f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.shrink_max = 0.9f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.noise_density = 1.5f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.per_class_counts[0] = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("augment_split reaches exact counts and logs in-range parameters") {
  std::vector<GlyphImage> samples;
  for (int label = 1; label <= 3; ++label)
    for (int k = 0; k < 4; ++k)
      samples.push_back(make_glyph(label, "w" + std::to_string(k), 16, 0.1f * k));

  AugmentationSpec spec;
  spec.seed = 77;
  std::vector<TransformLogEntry> log;
  std::vector<GlyphImage> out = augment_split(samples, spec, 11, 500, &log);
  CHECK(out.size() == 33);

  std::map<int, int> per_class;
  for (const auto& g : out) per_class[g.label]++;
  for (int label = 1; label <= 3; ++label) CHECK(per_class[label] == 11);

  // Originals come first within each class, in input order.
  CHECK(out[0].pixels.data == samples[0].pixels.data);
  CHECK(out[11].pixels.data == samples[4].pixels.data);

  CHECK(log.size() == 33 - 12);
  for (const auto& e : log) {
    CHECK(!e.transforms.empty());
    CHECK(e.label >= 1);
    CHECK(e.label <= 3);
  }

  std::vector<GlyphImage> again = augment_split(samples, spec, 11, 500, nullptr);
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].pixels.data == out[i].pixels.data);

  CHECK_THROWS_AS(augment_split(samples, spec, 3, 500, nullptr), ConfigError);
  CHECK_THROWS_AS(augment_split({}, spec, 5, 500, nullptr), ConfigError);
}

TEST_CASE("transform log file format") {
  testutil::TempDir dir("log");
  std::vector<TransformLogEntry> log{{3, "w1", "rotate+noise", "deg=1.5"}};
  write_transform_log(log, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "class,sourceWriter,transforms,params");
  std::getline(in, line);
  CHECK(line == "3,w1,rotate+noise,deg=1.5");
}

TEST_CASE("synthetic glyphs are deterministic and column-linked") {
  SynthResult a = synth_glyphs(3, 3, {4, 2, 1}, 9, 32);
  SynthResult b = synth_glyphs(3, 3, {4, 2, 1}, 9, 32);
  REQUIRE(a.splits.size() == 3);
  CHECK(a.splits[0].size() == 36);
  CHECK(a.splits[1].size() == 18);
  CHECK(a.splits[2].size() == 9);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < a.splits[s].size(); ++i) {
      CHECK(a.splits[s][i].pixels.data == b.splits[s][i].pixels.data);
      CHECK(a.splits[s][i].label == b.splits[s][i].label);
      CHECK(a.splits[s][i].source_writer == "synth");
    }

  // Classes sharing a column share the column mark; distinct columns differ.
  Tensor m1 = synth_col_mark(1, 32), m1b = synth_col_mark(1, 32), m2 = synth_col_mark(2, 32);
  CHECK(m1.data == m1b.data);
  CHECK(m1.data != m2.data);

  SynthResult alt = synth_glyphs(3, 3, {4, 2, 1}, 10, 32);
  CHECK(alt.splits[0][0].pixels.data != a.splits[0][0].pixels.data);

  CHECK_THROWS_AS(synth_glyphs(0, 3, {1}, 0, 32), ValidationError);
  CHECK_THROWS_AS(synth_glyphs(3, 10, {1}, 0, 32), ValidationError);
  CHECK_THROWS_AS(synth_glyphs(40, 9, {1}, 0, 32), ValidationError);
  CHECK_THROWS_AS(synth_glyphs(3, 3, {1}, 0, 4), ValidationError);
}

TEST_CASE("manifest json round trip") {
  DatasetManifest m;
  m.canvas = 32;
  m.num_labels = 12;
  m.num_rows = 3;
  m.num_cols = 4;
  m.set_count("train", 100);
  m.set_count("val", 20);
  m.augment_digest = "abc123";
  m.seed = 42;
  m.created = "2024-05-01T00:00:00Z";
  m.grid_digest = "feedbeef";

  DatasetManifest round = manifest_from_json(manifest_to_json(m));
  CHECK(round.canvas == 32);
  CHECK(round.count_for("train") == 100);
  CHECK(round.count_for("val") == 20);
  CHECK(round.augment_digest == "abc123");
  CHECK(round.seed == 42);
  CHECK(round.created == m.created);
  CHECK(round.grid_digest == "feedbeef");

  testutil::TempDir dir("manifest");
  write_manifest_json(m, dir / "m.json");
  std::ifstream in(dir / "m.json");
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(body.find("\"canvas\": 32") != std::string::npos);
  CHECK(body.back() == '\n');
}

TEST_CASE("metrics csv round trip and header discipline") {
  testutil::TempDir dir("metrics");
  MetricsRecord r;
  r.epoch = 3;
  r.split = "val";
  r.total_loss = 1.25;
  r.label_loss = 1.0;
  r.row_loss = 0.5;
  r.col_loss = 0.25;
  r.label_acc = 0.75;
  r.row_acc = 0.8;
  r.col_acc = 0.9;
  r.seconds = 1.5;
  CHECK(metrics_row(r) ==
        "3,val,1.250000,1.000000,0.500000,0.250000,0.750000,0.800000,0.900000,1.500000");

  append_metrics_row(r, dir / "m.csv");
  MetricsRecord r2 = r;
  r2.epoch = 4;
  r2.split = "train";
  append_metrics_row(r2, dir / "m.csv");
  std::vector<MetricsRecord> rows = read_metrics_csv(dir / "m.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].epoch == 3);
  CHECK(rows[1].split == "train");
  CHECK(rows[1].total_loss == doctest::Approx(1.25));

  // Header appears exactly once even through appends.
  std::ifstream in(dir / "m.csv");
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(body.find(kMetricsHeader) == 0);
  CHECK(body.find(kMetricsHeader, 1) == std::string::npos);

  write_text(dir / "bad.csv", "not,a,metrics,file\n1,2,3,4\n");
  CHECK_THROWS_AS(read_metrics_csv(dir / "bad.csv"), FormatError);
  write_text(dir / "short.csv", std::string(kMetricsHeader) + "\n1,val,1,2\n");
  CHECK_THROWS_AS(read_metrics_csv(dir / "short.csv"), FormatError);
}

TEST_CASE("svg plot renders deterministically and rejects empty input") {
  testutil::TempDir dir("svg");
  std::vector<MetricsRecord> rows;
  for (int e = 1; e <= 5; ++e) {
    MetricsRecord tr;
    tr.epoch = e;
    tr.split = "train";
    tr.total_loss = 5.0 / e;
    tr.label_acc = 1.0 - 1.0 / (e + 1);
    rows.push_back(tr);
    MetricsRecord va = tr;
    va.split = "val";
    va.total_loss += 0.3;
    rows.push_back(va);
  }
  render_svg_plot({{"runA", rows}}, dir / "a.svg", true);
  render_svg_plot({{"runA", rows}}, dir / "b.svg", true);
  CHECK(testutil::same_bytes(dir / "a.svg", dir / "b.svg"));
  std::ifstream in(dir / "a.svg");
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("runA") != std::string::npos);
  CHECK(body.find("generated") == std::string::npos);

  render_svg_plot({{"runA", rows}}, dir / "c.svg", false);
  std::ifstream in2(dir / "c.svg");
  std::string body2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
  CHECK(body2.find("generated") != std::string::npos);

  CHECK_THROWS_AS(render_svg_plot({{"empty", {}}}, dir / "d.svg", true), ValidationError);
  CHECK(!std::filesystem::exists(dir / "d.svg"));
}

TEST_CASE("fnv1a64 digests match the reference vectors") {
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a64_hex("foobar") == "85944171f73967e8");

  testutil::TempDir dir("fnv");
  write_text(dir / "f.txt", "foobar");
  CHECK(fnv1a64_hex_file(dir / "f.txt") == "85944171f73967e8");
}
