#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amcr/dataio.hpp"
#include "amcr/metrics.hpp"
#include "test_util.hpp"

// End-to-end coverage of the command-line tool: every test here launches the
// real binary in a subprocess and inspects exit codes, output text, and the
// files it writes.

namespace fs = std::filesystem;
using testutil::run_command;

namespace {

std::string cli() { return testutil::cli_path(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Replaces the invoked binary path in help output so it can be compared
// against the checked-in golden files.
std::string normalize_help(std::string text) {
  const std::string needle = cli();
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos))
    text.replace(pos, needle.size(), "amcr");
  return text;
}

// Minimal flat-gray P5 image matching the default canvas.
void write_test_pgm(const fs::path& p, int side = 32, unsigned char value = 96) {
  std::ofstream out(p, std::ios::binary);
  out << "P5\n" << side << " " << side << "\n255\n";
  std::vector<char> pixels(static_cast<std::size_t>(side) * side,
                           static_cast<char>(value));
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
}

// Architecture small enough that training a couple of epochs is instant.
const char* kTinyModelJson =
    R"({"canvas":32,"convs":[[5,2],[5,2]],"hidden":4,)"
    R"("heads":{"labels":4,"rows":2,"cols":2},"keep_prob":0.5})";

// Generates the 2x2 synthetic dataset into dir/syn and returns that path.
fs::path make_synth(const testutil::TempDir& dir, std::uint64_t seed = 5) {
  const fs::path syn = dir / "syn";
  const auto r = run_command(cli() + " synth --rows 2 --cols 2 --per-class 3" +
                             " --val-per-class 1 --seed " + std::to_string(seed) +
                             " --out " + syn.string() + " --deterministic");
  REQUIRE(r.exit_code == 0);
  return syn;
}

fs::path write_tiny_model(const testutil::TempDir& dir) {
  const fs::path p = dir / "tiny_model.json";
  spit(p, kTinyModelJson);
  return p;
}

}  // namespace

TEST_CASE("top-level help lists every subcommand and matches the golden file") {
  const auto r = run_command(cli() + " --help");
  CHECK(r.exit_code == 0);
  for (const char* sub : {"ingest", "synth", "augment", "train", "eval", "predict",
                          "gradcheck", "sweep", "plot"})
    CHECK(r.output.find(sub) != std::string::npos);

  const std::string golden = slurp(fs::path(testutil::source_dir()) /
                                   "tests/fixtures/help/top.txt");
  REQUIRE_FALSE(golden.empty());
  CHECK(normalize_help(r.output) == golden);
}

TEST_CASE("per-subcommand help matches the golden files") {
  for (const char* sub : {"ingest", "synth", "augment", "train", "eval", "predict",
                          "gradcheck", "sweep", "plot"}) {
    CAPTURE(sub);
    const auto r = run_command(cli() + " " + sub + " --help");
    CHECK(r.exit_code == 0);
    const std::string golden = slurp(fs::path(testutil::source_dir()) /
                                     ("tests/fixtures/help/" + std::string(sub) + ".txt"));
    REQUIRE_FALSE(golden.empty());
    CHECK(normalize_help(r.output) == golden);
  }
}

TEST_CASE("command-line misuse exits 1 with a usage hint") {
  SUBCASE("no subcommand") {
    const auto r = run_command(cli());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("--help") != std::string::npos);
  }
  SUBCASE("unknown subcommand") {
    const auto r = run_command(cli() + " frobnicate");
    CHECK(r.exit_code == 1);
  }
  SUBCASE("unknown flag") {
    const auto r = run_command(cli() + " synth --bogus 1");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("--help") != std::string::npos);
  }
  SUBCASE("missing required flag") {
    const auto r = run_command(cli() + " synth --rows 2");
    CHECK(r.exit_code == 1);
  }
  SUBCASE("invalid flag value fails validation") {
    const auto r = run_command(cli() + " synth --rows 0 --cols 2 --per-class 3 --out /tmp/amcr_cli_misuse_unused");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("error:") != std::string::npos);
  }
}

TEST_CASE("synth writes a complete deterministic dataset directory") {
  testutil::TempDir dir("cli_synth");
  const fs::path syn = make_synth(dir);

  CHECK(fs::exists(syn / "train.amcr"));
  CHECK(fs::exists(syn / "val.amcr"));
  CHECK(fs::exists(syn / "grid.txt"));
  CHECK(fs::exists(syn / "manifest.json"));

  const auto train = amcr::read_container(syn / "train.amcr");
  CHECK(train.data.count() == 12u);  // 4 classes x 3 images
  CHECK(train.manifest.count_for("train") == 12);
  CHECK(train.manifest.count_for("val") == 4);
  CHECK(train.manifest.created.empty());  // --deterministic

  const fs::path syn2 = dir / "syn2";
  const auto r2 = run_command(cli() + " synth --rows 2 --cols 2 --per-class 3" +
                              " --val-per-class 1 --seed 5 --out " + syn2.string() +
                              " --deterministic");
  REQUIRE(r2.exit_code == 0);
  CHECK(testutil::same_bytes(syn / "train.amcr", syn2 / "train.amcr"));
  CHECK(testutil::same_bytes(syn / "val.amcr", syn2 / "val.amcr"));
  CHECK(testutil::same_bytes(syn / "manifest.json", syn2 / "manifest.json"));
}

TEST_CASE("synth then train then eval round trip succeeds") {
  testutil::TempDir dir("cli_pipeline");
  const fs::path syn = make_synth(dir);
  const fs::path model = write_tiny_model(dir);
  const fs::path run = dir / "run";

  const auto t = run_command(cli() + " train --data " + syn.string() +
                             " --model-config " + model.string() +
                             " --max-epochs 2 --batch 4 --seed 3 --out " + run.string() +
                             " --deterministic");
  REQUIRE_MESSAGE(t.exit_code == 0, t.output);
  CHECK(t.output.find("trained 2 epochs") != std::string::npos);
  CHECK(fs::exists(run / "metrics.csv"));
  CHECK(fs::exists(run / "best.ckpt"));
  CHECK(fs::exists(run / "last.ckpt"));
  CHECK(fs::exists(run / "train_config.json"));
  CHECK(fs::exists(run / "model_config.json"));

  const auto rows = amcr::read_metrics_csv(run / "metrics.csv");
  REQUIRE(rows.size() == 4u);  // (train,val) x 2 epochs
  CHECK(rows.back().epoch == 2);
  CHECK(rows.back().split == "val");

  const auto e = run_command(cli() + " eval --checkpoint " + (run / "best.ckpt").string() +
                             " --data " + (syn / "val.amcr").string());
  REQUIRE_MESSAGE(e.exit_code == 0, e.output);
  CHECK(e.output.find(amcr::kMetricsHeader) != std::string::npos);
  // The checkpoint came from the last (best) epoch, so re-evaluating it must
  // reproduce the final val row of metrics.csv except for epoch and timing.
  const std::string want = amcr::metrics_row(rows.back());
  const auto strip = [](const std::string& row) {
    const auto first = row.find(',');
    return row.substr(first, row.rfind(',') - first);
  };
  CHECK(e.output.find(strip(want)) != std::string::npos);
}

TEST_CASE("train reruns with the same seed are byte-identical") {
  testutil::TempDir dir("cli_det");
  const fs::path syn = make_synth(dir);
  const fs::path model = write_tiny_model(dir);

  const std::string flags = " train --data " + syn.string() + " --model-config " +
                            model.string() + " --max-epochs 2 --batch 4 --seed 7" +
                            " --deterministic --out ";
  const fs::path r1 = dir / "r1";
  const fs::path r2 = dir / "r2";
  REQUIRE(run_command(cli() + flags + r1.string()).exit_code == 0);
  REQUIRE(run_command(cli() + flags + r2.string()).exit_code == 0);

  for (const char* f : {"metrics.csv", "best.ckpt", "last.ckpt", "train_config.json",
                        "model_config.json"})
    CHECK(testutil::same_bytes(r1 / f, r2 / f));
}

TEST_CASE("augment expands containers to the requested per-class counts") {
  testutil::TempDir dir("cli_aug");
  const fs::path syn = make_synth(dir);
  const fs::path aug = dir / "aug";

  const auto r = run_command(cli() + " augment --in " + syn.string() + " --out " +
                             aug.string() + " --counts 5,2,0 --seed 4 --log" +
                             " --deterministic");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  // No test split in the source: skipped with a warning, not an error.
  CHECK(r.output.find("test.amcr missing") != std::string::npos);

  const auto train = amcr::read_container(aug / "train.amcr");
  CHECK(train.data.count() == 20u);  // 4 classes x 5
  const auto val = amcr::read_container(aug / "val.amcr");
  CHECK(val.data.count() == 8u);
  CHECK(fs::exists(aug / "transforms.csv"));
  CHECK(fs::exists(aug / "manifest.json"));

  const std::string log = slurp(aug / "transforms.csv");
  CHECK(log.find("class,sourceWriter,transforms,params") == 0u);

  SUBCASE("shrinking below the source count is rejected") {
    const auto bad = run_command(cli() + " augment --in " + syn.string() + " --out " +
                                 (dir / "aug2").string() + " --counts 2,1,0");
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("error:") != std::string::npos);
  }
}

TEST_CASE("ingest builds writer-disjoint containers from an image tree") {
  testutil::TempDir dir("cli_ingest");
  const fs::path syn = make_synth(dir);  // provides a 2x2 grid file
  const fs::path tree = dir / "tree";
  for (int w = 1; w <= 12; ++w) {
    const fs::path wdir = tree / ("writer" + std::to_string(w));
    fs::create_directories(wdir);
    for (int label = 1; label <= 4; ++label)
      write_test_pgm(wdir / (std::to_string(label) + ".pgm"), 32,
                     static_cast<unsigned char>(40 + 10 * w + label));
  }

  const fs::path out = dir / "ing";
  const auto r = run_command(cli() + " ingest --src " + tree.string() + " --grid " +
                             (syn / "grid.txt").string() + " --out " + out.string() +
                             " --seed 1 --deterministic");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);

  const auto train = amcr::read_container(out / "train.amcr");
  const auto val = amcr::read_container(out / "val.amcr");
  const auto test = amcr::read_container(out / "test.amcr");
  // 12 writers at ratio 9:2:1, four images each.
  CHECK(train.data.count() == 36u);
  CHECK(val.data.count() == 8u);
  CHECK(test.data.count() == 4u);
  CHECK(train.manifest.count_for("train") == 36);
  CHECK(train.manifest.count_for("val") == 8);
  CHECK(train.manifest.count_for("test") == 4);

  SUBCASE("a missing source directory is an I/O failure") {
    const auto bad = run_command(cli() + " ingest --src " + (dir / "nope").string() +
                                 " --grid " + (syn / "grid.txt").string() + " --out " +
                                 (dir / "x").string());
    CHECK(bad.exit_code == 2);
  }
}

TEST_CASE("predict prints classes, confidences, and grid consistency") {
  testutil::TempDir dir("cli_predict");
  const fs::path syn = make_synth(dir);
  const fs::path model = write_tiny_model(dir);
  const fs::path run = dir / "run";
  REQUIRE(run_command(cli() + " train --data " + syn.string() + " --model-config " +
                      model.string() + " --max-epochs 1 --batch 4 --seed 3 --out " +
                      run.string() + " --deterministic")
              .exit_code == 0);

  const fs::path img = dir / "sample.pgm";
  write_test_pgm(img);
  const auto r = run_command(cli() + " predict --checkpoint " +
                             (run / "best.ckpt").string() + " --image " + img.string() +
                             " --grid " + (syn / "grid.txt").string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(r.output.find("label=") != std::string::npos);
  CHECK(r.output.find("row=") != std::string::npos);
  CHECK(r.output.find("col=") != std::string::npos);
  CHECK(r.output.find("label_conf=") != std::string::npos);
  CHECK(r.output.find("grid_consistent=") != std::string::npos);

  SUBCASE("missing image file exits 2") {
    const auto bad = run_command(cli() + " predict --checkpoint " +
                                 (run / "best.ckpt").string() + " --image " +
                                 (dir / "absent.pgm").string() + " --grid " +
                                 (syn / "grid.txt").string());
    CHECK(bad.exit_code == 2);
  }
}

TEST_CASE("eval failure modes map to the exit-code contract") {
  testutil::TempDir dir("cli_evalerr");
  const fs::path syn = make_synth(dir);
  const fs::path model = write_tiny_model(dir);
  const fs::path run = dir / "run";
  REQUIRE(run_command(cli() + " train --data " + syn.string() + " --model-config " +
                      model.string() + " --max-epochs 1 --batch 4 --seed 3 --out " +
                      run.string() + " --deterministic")
              .exit_code == 0);
  const std::string ckpt = (run / "best.ckpt").string();

  SUBCASE("missing container exits 2") {
    const auto r = run_command(cli() + " eval --checkpoint " + ckpt + " --data " +
                               (dir / "absent.amcr").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("error:") != std::string::npos);
  }
  SUBCASE("corrupt container exits 2 and reports the byte offset") {
    const fs::path bad = dir / "bad.amcr";
    spit(bad, "AMXX this is not a container");
    const auto r = run_command(cli() + " eval --checkpoint " + ckpt + " --data " +
                               bad.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("byte offset") != std::string::npos);
  }
  SUBCASE("missing checkpoint exits 2") {
    const auto r = run_command(cli() + " eval --checkpoint " +
                               (dir / "absent.ckpt").string() + " --data " +
                               (syn / "val.amcr").string());
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("gradcheck on a small architecture passes and honors the fault control") {
  testutil::TempDir dir("cli_gradcheck");
  const fs::path model = write_tiny_model(dir);

  const std::string base = cli() + " gradcheck --config " + model.string() +
                           " --batch 2 --max-coords 6 --seed 1";
  const auto ok = run_command(base);
  REQUIRE_MESSAGE(ok.exit_code == 0, ok.output);
  CHECK(ok.output.find("parameter") != std::string::npos);
  CHECK(ok.output.find("max relative error") != std::string::npos);
  CHECK(ok.output.find("PASS") != std::string::npos);

  const auto fault = run_command(base + " --inject-fault");
  CHECK(fault.exit_code == 1);
  CHECK(fault.output.find("FAIL") != std::string::npos);
}

TEST_CASE("plot renders SVG charts and refuses empty input") {
  testutil::TempDir dir("cli_plot");
  const fs::path csv = dir / "metrics.csv";
  std::vector<amcr::MetricsRecord> rows;
  for (int e = 1; e <= 3; ++e) {
    amcr::MetricsRecord train{e, "train", 2.0 / e, 1.0 / e, 0.5, 0.25, 0.5, 0.6, 0.7, 1.0};
    amcr::MetricsRecord val{e, "val", 2.5 / e, 1.2 / e, 0.5, 0.25, 0.4, 0.5, 0.6, 0.5};
    rows.push_back(train);
    rows.push_back(val);
  }
  amcr::write_metrics_csv(rows, csv);

  const fs::path svg = dir / "curves.svg";
  const auto r = run_command(cli() + " plot --metrics " + csv.string() + " --labels run" +
                             " --out " + svg.string() + " --deterministic");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const std::string body = slurp(svg);
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("run") != std::string::npos);

  SUBCASE("header-only CSV exits 1 without creating the file") {
    const fs::path empty = dir / "empty.csv";
    spit(empty, std::string(amcr::kMetricsHeader) + "\n");
    const fs::path out = dir / "none.svg";
    const auto bad = run_command(cli() + " plot --metrics " + empty.string() + " --out " +
                                 out.string());
    CHECK(bad.exit_code == 1);
    CHECK_FALSE(fs::exists(out));
  }

  SUBCASE("two CSVs overlay with a legend entry each") {
    const fs::path csv2 = dir / "metrics2.csv";
    amcr::write_metrics_csv(rows, csv2);
    const fs::path both = dir / "both.svg";
    const auto two = run_command(cli() + " plot --metrics " + csv.string() + " " +
                                 csv2.string() + " --labels first second --out " +
                                 both.string() + " --deterministic");
    REQUIRE_MESSAGE(two.exit_code == 0, two.output);
    const std::string body2 = slurp(both);
    CHECK(body2.find("first") != std::string::npos);
    CHECK(body2.find("second") != std::string::npos);
  }
}

TEST_CASE("train resume continues an interrupted run to the same bytes") {
  testutil::TempDir dir("cli_resume");
  const fs::path syn = make_synth(dir);
  const fs::path model = write_tiny_model(dir);

  const std::string common = cli() + " train --data " + syn.string() +
                             " --model-config " + model.string() +
                             " --batch 4 --seed 11 --deterministic --out ";
  const fs::path straight = dir / "straight";
  const fs::path resumed = dir / "resumed";
  REQUIRE(run_command(common + straight.string() + " --max-epochs 3").exit_code == 0);
  REQUIRE(run_command(common + resumed.string() + " --max-epochs 2").exit_code == 0);
  REQUIRE(run_command(common + resumed.string() + " --max-epochs 3 --resume").exit_code ==
          0);

  CHECK(testutil::same_bytes(straight / "metrics.csv", resumed / "metrics.csv"));
  CHECK(testutil::same_bytes(straight / "best.ckpt", resumed / "best.ckpt"));
  CHECK(testutil::same_bytes(straight / "last.ckpt", resumed / "last.ckpt"));
}

TEST_CASE("sweep trains every alpha/seed cell and summarizes them") {
  testutil::TempDir dir("cli_sweep");
  const fs::path syn = make_synth(dir);
  const fs::path model = write_tiny_model(dir);
  const fs::path out = dir / "sw";

  const auto r = run_command(cli() + " sweep --data " + syn.string() +
                             " --model-config " + model.string() +
                             " --alphas \"1,0,0;1,0.35,0.65\" --seeds 1,2" +
                             " --batch 4 --max-epochs 1 --out " + out.string() +
                             " --deterministic");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);

  CHECK(fs::exists(out / "a1-0-0_s1" / "metrics.csv"));
  CHECK(fs::exists(out / "a1-0-0_s2" / "metrics.csv"));
  CHECK(fs::exists(out / "a1-0.35-0.65_s1" / "metrics.csv"));
  CHECK(fs::exists(out / "a1-0.35-0.65_s2" / "metrics.csv"));

  const std::string csv = slurp(out / "sweep.csv");
  CHECK(csv.find("alphas,seed,epochs,best_epoch,best_val_total_loss") == 0u);
  // Header plus one row per (alpha, seed) cell.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
