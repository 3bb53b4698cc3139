#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amcr/augment.hpp"
#include "amcr/checkpoint.hpp"
#include "amcr/dataio.hpp"
#include "amcr/errors.hpp"
#include "amcr/gradcheck.hpp"
#include "amcr/grid.hpp"
#include "amcr/metrics.hpp"
#include "amcr/model.hpp"
#include "amcr/train.hpp"

namespace fs = std::filesystem;
using namespace amcr;

namespace {

std::string default_grid_path() {
  if (const char* env = std::getenv("AMCR_DATA_DIR"))
    return (fs::path(env) / "amharic_grid.txt").string();
  return "data/amharic_grid.txt";
}

std::string timestamp_now(bool deterministic) {
  if (deterministic) return "";
  std::time_t now = std::time(nullptr);
  char stamp[64];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return stamp;
}

std::vector<std::int64_t> parse_counts(const std::string& csv, std::size_t expect) {
  std::vector<std::int64_t> counts;
  std::istringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t pos = 0;
      counts.push_back(std::stoll(field, &pos));
      if (pos != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ConfigError("count `" + field + "` is not an integer");
    }
  }
  if (counts.size() != expect)
    throw ConfigError("expected " + std::to_string(expect) + " comma-separated counts, got `" +
                      csv + "`");
  return counts;
}

struct IngestArgs {
  std::string src, grid, out;
  std::string ratio = "9,2,1";
  std::uint64_t seed = 0;
  int canvas = 32;
  bool deterministic = false;
};

void cmd_ingest(const IngestArgs& a) {
  const AlphabetGrid grid = load_grid(a.grid);
  IngestResult ingested = ingest_directory(a.src, grid, a.canvas);
  for (const auto& w : ingested.warnings) std::cerr << "warning: " << w << "\n";

  const auto ratio_v = parse_counts(a.ratio, 3);
  SplitTriple splits = split_by_writer(
      ingested.samples,
      {static_cast<int>(ratio_v[0]), static_cast<int>(ratio_v[1]), static_cast<int>(ratio_v[2])},
      a.seed);

  fs::create_directories(a.out);
  DatasetManifest manifest;
  manifest.canvas = a.canvas;
  manifest.num_labels = grid.num_labels;
  manifest.num_rows = grid.num_rows;
  manifest.num_cols = grid.num_cols;
  manifest.seed = a.seed;
  manifest.created = timestamp_now(a.deterministic);
  manifest.grid_digest = fnv1a64_hex_file(a.grid);
  manifest.set_count("train", static_cast<std::int64_t>(splits.train.size()));
  manifest.set_count("val", static_cast<std::int64_t>(splits.val.size()));
  manifest.set_count("test", static_cast<std::int64_t>(splits.test.size()));

  // The container-embedded manifest never carries a timestamp so identical
  // inputs give identical bytes; the standalone manifest may carry one.
  DatasetManifest embedded = manifest;
  embedded.created = "";
  for (const auto& [name, samples] :
       {std::pair<std::string, const std::vector<GlyphImage>*>{"train", &splits.train},
        {"val", &splits.val},
        {"test", &splits.test}}) {
    write_container(make_split_data(name, *samples, grid), embedded,
                    fs::path(a.out) / (name + ".amcr"));
    std::cout << name << ": " << samples->size() << " samples\n";
  }
  write_manifest_json(manifest, fs::path(a.out) / "manifest.json");
  std::cout << "wrote containers and manifest to " << a.out << "\n";
}

struct SynthArgs {
  int rows = 0, cols = 0, per_class = 0;
  int val_per_class = -1, test_per_class = 0;
  std::uint64_t seed = 0;
  int canvas = 32;
  std::string out;
  bool deterministic = false;
};

void cmd_synth(const SynthArgs& a) {
  const int val_count = a.val_per_class >= 0 ? a.val_per_class : std::max(1, a.per_class / 6);
  SynthResult synth =
      synth_glyphs(a.rows, a.cols, {a.per_class, val_count, a.test_per_class}, a.seed, a.canvas);

  fs::create_directories(a.out);
  const fs::path grid_path = fs::path(a.out) / "grid.txt";
  save_grid(synth.grid, grid_path);

  DatasetManifest manifest;
  manifest.canvas = a.canvas;
  manifest.num_labels = synth.grid.num_labels;
  manifest.num_rows = synth.grid.num_rows;
  manifest.num_cols = synth.grid.num_cols;
  manifest.augment_digest = "synth";
  manifest.seed = a.seed;
  manifest.created = timestamp_now(a.deterministic);
  manifest.grid_digest = fnv1a64_hex_file(grid_path);

  const std::array<std::string, 3> names{"train", "val", "test"};
  for (std::size_t s = 0; s < names.size(); ++s)
    manifest.set_count(names[s], static_cast<std::int64_t>(synth.splits[s].size()));

  DatasetManifest embedded = manifest;
  embedded.created = "";
  for (std::size_t s = 0; s < names.size(); ++s) {
    if (synth.splits[s].empty() && names[s] == "test") continue;
    write_container(make_split_data(names[s], synth.splits[s], synth.grid), embedded,
                    fs::path(a.out) / (names[s] + ".amcr"));
    std::cout << names[s] << ": " << synth.splits[s].size() << " samples\n";
  }
  write_manifest_json(manifest, fs::path(a.out) / "manifest.json");
  std::cout << a.rows * a.cols << " classes on a " << a.rows << "x" << a.cols << " grid, wrote "
            << a.out << "\n";
}

struct AugmentArgs {
  std::string in, out;
  std::string counts = "4500,800,400";
  std::string rotation = "-15,15";
  std::string shrink = "0.70,0.87";
  float noise = 0.02f;
  std::uint64_t seed = 0;
  bool write_log = false;
  bool deterministic = false;
};

void cmd_augment(const AugmentArgs& a) {
  AugmentationSpec spec;
  {
    std::istringstream rot(a.rotation), shr(a.shrink);
    std::string lo, hi;
    if (!std::getline(rot, lo, ',') || !std::getline(rot, hi))
      throw ConfigError("--rotation wants `lo,hi`");
    spec.rotation_min = std::stof(lo);
    spec.rotation_max = std::stof(hi);
    if (!std::getline(shr, lo, ',') || !std::getline(shr, hi))
      throw ConfigError("--shrink wants `lo,hi`");
    spec.shrink_min = std::stof(lo);
    spec.shrink_max = std::stof(hi);
  }
  spec.noise_density = a.noise;
  spec.seed = a.seed;
  const auto counts = parse_counts(a.counts, 3);
  for (std::size_t i = 0; i < 3; ++i) spec.per_class_counts[i] = counts[i];
  spec.validate();

  fs::create_directories(a.out);
  const std::array<std::string, 3> names{"train", "val", "test"};
  DatasetManifest manifest;
  bool have_manifest = false;
  std::vector<TransformLogEntry> log;

  for (std::size_t s = 0; s < names.size(); ++s) {
    const fs::path in_path = fs::path(a.in) / (names[s] + ".amcr");
    if (!fs::exists(in_path)) {
      std::cerr << "warning: " << in_path.string() << " missing, split skipped\n";
      continue;
    }
    ContainerFile input = read_container(in_path);
    if (!have_manifest) {
      manifest = input.manifest;
      have_manifest = true;
    }

    std::vector<GlyphImage> samples;
    samples.reserve(input.data.count());
    for (std::size_t i = 0; i < input.data.count(); ++i) {
      GlyphImage g;
      g.pixels = input.data.image_tensor(i);
      g.label = input.data.labels[i];
      samples.push_back(std::move(g));
    }
    // Writer identity does not survive containerization; the upstream split
    // already guarantees writer disjointness across splits.
    for (int label = 1; label <= input.manifest.num_labels; ++label) {
      bool present = false;
      for (const auto& g : samples)
        if (g.label == label) {
          present = true;
          break;
        }
      if (!present)
        throw ConfigError("split `" + names[s] + "` has no samples for class " +
                          std::to_string(label));
    }

    std::vector<GlyphImage> augmented =
        augment_split(samples, spec, spec.per_class_counts[s],
                      rng_streams::kAugmentBase + s * 100000ULL, a.write_log ? &log : nullptr);

    AlphabetGrid grid;  // only the label->cell map matters here
    grid.num_labels = input.manifest.num_labels;
    grid.num_rows = input.manifest.num_rows;
    grid.num_cols = input.manifest.num_cols;
    for (std::size_t i = 0; i < input.data.count(); ++i)
      grid.entries.push_back({input.data.labels[i], input.data.rows[i], input.data.cols[i], ""});
    std::sort(grid.entries.begin(), grid.entries.end(),
              [](const GridEntry& x, const GridEntry& y) { return x.label < y.label; });
    grid.entries.erase(std::unique(grid.entries.begin(), grid.entries.end(),
                                   [](const GridEntry& x, const GridEntry& y) {
                                     return x.label == y.label;
                                   }),
                       grid.entries.end());
    if (static_cast<int>(grid.entries.size()) != grid.num_labels)
      throw ValidationError("split `" + names[s] + "` does not cover every class, cannot " +
                            "rebuild the target map");
    grid.finalize();

    manifest.set_count(names[s], static_cast<std::int64_t>(augmented.size()));
    manifest.augment_digest = spec.digest();
    manifest.seed = a.seed;
    DatasetManifest embedded = manifest;
    embedded.created = "";
    write_container(make_split_data(names[s], augmented, grid), embedded,
                    fs::path(a.out) / (names[s] + ".amcr"));
    std::cout << names[s] << ": " << augmented.size() << " samples\n";
  }
  if (!have_manifest) throw IoError("no input containers found in " + a.in);
  manifest.created = timestamp_now(a.deterministic);
  write_manifest_json(manifest, fs::path(a.out) / "manifest.json");
  if (a.write_log) write_transform_log(log, fs::path(a.out) / "transforms.csv");
  std::cout << "wrote augmented containers to " << a.out << "\n";
}

struct TrainArgs {
  std::string data, train_file, val_file;
  std::string config_file, model_config_file;
  std::string alphas;
  std::string out = "runs/default";
  std::optional<std::uint64_t> seed;
  std::optional<int> batch, max_epochs, patience;
  std::optional<float> lr, l2, keep_prob, min_delta;
  std::string optimizer;
  bool resume = false;
  bool deterministic = false;
};

TrainConfig resolve_train_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw IoError("cannot open " + a.config_file);
    nlohmann::ordered_json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(a.config_file + ": " + e.what());
    }
    cfg = TrainConfig::from_json(j);
  }
  if (!a.alphas.empty()) cfg.alphas = parse_alphas(a.alphas);
  if (a.seed) cfg.seed = *a.seed;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.max_epochs) cfg.max_epochs = *a.max_epochs;
  if (a.patience) cfg.patience = *a.patience;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.l2) cfg.l2_lambda = *a.l2;
  if (a.keep_prob) cfg.keep_prob = *a.keep_prob;
  if (a.min_delta) cfg.min_delta = *a.min_delta;
  if (!a.optimizer.empty()) {
    if (a.optimizer == "adam")
      cfg.optimizer = OptimizerKind::kAdam;
    else if (a.optimizer == "sgd")
      cfg.optimizer = OptimizerKind::kSgd;
    else
      throw ConfigError("unknown optimizer `" + a.optimizer + "`");
  }
  cfg.validate();
  return cfg;
}

ModelConfig resolve_model_config(const TrainArgs& a, const DatasetManifest& manifest) {
  ModelConfig mc;
  if (!a.model_config_file.empty()) {
    std::ifstream in(a.model_config_file);
    if (!in) throw IoError("cannot open " + a.model_config_file);
    nlohmann::ordered_json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(a.model_config_file + ": " + e.what());
    }
    mc = ModelConfig::from_json(j);
    if (mc.canvas != manifest.canvas)
      throw ConfigError("model canvas " + std::to_string(mc.canvas) +
                        " does not match container canvas " + std::to_string(manifest.canvas));
  } else {
    mc.canvas = manifest.canvas;
  }
  mc.num_labels = manifest.num_labels;
  mc.num_rows = manifest.num_rows;
  mc.num_cols = manifest.num_cols;
  mc.validate();
  return mc;
}

void cmd_train(const TrainArgs& a) {
  const fs::path train_path =
      !a.train_file.empty() ? fs::path(a.train_file) : fs::path(a.data) / "train.amcr";
  const fs::path val_path =
      !a.val_file.empty() ? fs::path(a.val_file) : fs::path(a.data) / "val.amcr";
  ContainerFile train_c = read_container(train_path);
  ContainerFile val_c = read_container(val_path);

  TrainConfig cfg = resolve_train_config(a);
  ModelConfig mc = resolve_model_config(a, train_c.manifest);
  mc.keep_prob = cfg.keep_prob;

  RngStream init_rng(cfg.seed, rng_streams::kInit);
  Network net = build_model<float>(mc, init_rng);

  fs::create_directories(a.out);
  {
    std::ofstream out(fs::path(a.out) / "train_config.json", std::ios::binary);
    out << cfg.to_json().dump(2) << "\n";
    std::ofstream mout(fs::path(a.out) / "model_config.json", std::ios::binary);
    mout << mc.to_json().dump(2) << "\n";
  }

  FitOptions opts;
  opts.out_dir = a.out;
  opts.deterministic = a.deterministic;
  opts.resume = a.resume;
  FitResult result = fit(std::move(net), train_c.data, val_c.data, cfg, opts);

  std::cout << "trained " << result.last_epoch << " epochs"
            << (result.early_stopped ? " (early stop)" : "") << ", best epoch "
            << result.best_epoch << "\n";
  for (auto it = result.history.rbegin(); it != result.history.rend(); ++it) {
    if (it->split == "val") {
      std::cout << kMetricsHeader << "\n" << metrics_row(*it) << "\n";
      break;
    }
  }
  std::cout << "artifacts in " << a.out << "\n";
}

struct EvalArgs {
  std::string checkpoint, data, alphas;
  std::optional<float> l2;
};

void cmd_eval(const EvalArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  Network net = network_from_checkpoint(ckpt);
  ContainerFile c = read_container(a.data);

  std::array<float, 3> alphas{1.0f, 0.35f, 0.65f};
  float l2 = 0.0f;
  if (ckpt.meta.contains("train")) {
    const auto& t = ckpt.meta.at("train");
    for (std::size_t k = 0; k < 3; ++k) alphas[k] = t.at("alphas").at(k).get<float>();
    l2 = t.at("l2_lambda").get<float>();
  }
  if (!a.alphas.empty()) alphas = parse_alphas(a.alphas);
  if (a.l2) l2 = *a.l2;

  MetricsRecord rec = evaluate(net, c.data, alphas, l2);
  std::cout << kMetricsHeader << "\n" << metrics_row(rec) << "\n";
}

struct PredictArgs {
  std::string checkpoint, image, grid;
};

void cmd_predict(const PredictArgs& a) {
  Network net = network_from_checkpoint(load_checkpoint(a.checkpoint));
  const AlphabetGrid grid = load_grid(a.grid);
  if (grid.num_labels != net.config.num_labels || grid.num_rows != net.config.num_rows ||
      grid.num_cols != net.config.num_cols)
    throw ConfigError("grid " + std::to_string(grid.num_labels) + " labels/" +
                      std::to_string(grid.num_rows) + "x" + std::to_string(grid.num_cols) +
                      " does not match the checkpoint heads");
  Tensor img = resize_bilinear(decode_image(a.image), net.config.canvas, net.config.canvas);
  const Prediction p = predict(net, img, grid);
  std::cout << "label=" << p.label << " row=" << p.row << " col=" << p.col << "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "label_conf=%.4f row_conf=%.4f col_conf=%.4f grid_consistent=%s",
                static_cast<double>(p.label_conf), static_cast<double>(p.row_conf),
                static_cast<double>(p.col_conf), p.grid_consistent ? "true" : "false");
  std::cout << buf << "\n";
}

struct GradcheckArgs {
  std::string config_file;
  std::uint64_t seed = 2;
  int batch = 4;
  double epsilon = 1e-5;
  double tolerance = 1e-5;
  int max_coords = 24;
  bool inject_fault = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  ModelConfig mc;
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw IoError("cannot open " + a.config_file);
    nlohmann::ordered_json j;
    in >> j;
    mc = ModelConfig::from_json(j);
  }
  mc.validate();

  RngStream init_rng(a.seed, rng_streams::kInit);
  NetworkT<double> net = build_model<double>(mc, init_rng);

  RngStream data_rng(a.seed, rng_streams::kGradCheck);
  std::vector<TensorT<double>> images;
  std::vector<LabelTriple> targets;
  for (int i = 0; i < a.batch; ++i) {
    TensorT<double> img({mc.canvas, mc.canvas, 1});
    for (auto& px : img.data) px = data_rng.uniform();
    images.push_back(std::move(img));
    LabelTriple t;
    t.label = 1 + static_cast<int>(data_rng.below(static_cast<std::uint32_t>(mc.num_labels)));
    t.row = 1 + static_cast<int>(data_rng.below(static_cast<std::uint32_t>(mc.num_rows)));
    t.col = 1 + static_cast<int>(data_rng.below(static_cast<std::uint32_t>(mc.num_cols)));
    targets.push_back(t);
  }

  const std::array<double, 3> alphas{1.0, 0.35, 0.65};
  const double l2_lambda = 0.01;
  const std::array<bool, 3> active{true, true, true};

  // The dropout stream is re-seeded on every evaluation so the loss is a
  // deterministic function of the parameters.
  auto run = [&](bool with_backward) -> double {
    RngStream dropout_rng(a.seed, rng_streams::kGradCheck + 1);
    std::vector<ForwardTraceT<double>> traces(images.size());
    std::vector<MultiHeadOutputT<double>> outputs;
    for (std::size_t i = 0; i < images.size(); ++i)
      outputs.push_back(forward_one(net, images[i], Mode::kTrain, &dropout_rng,
                                    with_backward ? &traces[i] : nullptr));
    auto loss = multitask_loss<double>(outputs, targets, alphas, net.param_ptrs(), l2_lambda,
                                       with_backward);
    if (with_backward) {
      if (a.inject_fault)
        for (auto& g : loss.logit_grads)
          for (auto& v : g.label_logits.data) v = -v;
      for (std::size_t i = 0; i < images.size(); ++i)
        backward_one(net, traces[i], loss.logit_grads[i], active);
    }
    return loss.total;
  };

  net.zero_grads();
  run(true);

  GradCheckOptions opts;
  opts.epsilon = a.epsilon;
  opts.max_coords = static_cast<std::size_t>(a.max_coords);
  const GradCheckReport report =
      gradient_check(net.param_ptrs(), [&] { return run(false); }, opts);

  std::cout << "parameter                 coords   max_rel_err   worst(analytic, numeric)\n";
  for (const auto& e : report.entries) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-24s %6zu   %11.3e   [%zu] (%.6e, %.6e)", e.name.c_str(),
                  e.coords_checked, e.max_rel_error, e.worst_coord, e.worst_analytic,
                  e.worst_numeric);
    std::cout << buf << "\n";
  }
  const bool ok = report.passed(a.tolerance);
  std::cout << "max relative error " << report.max_rel_error << " in `" << report.worst_param
            << "` " << (ok ? "<" : ">=") << " tolerance " << a.tolerance
            << (ok ? " : PASS" : " : FAIL") << "\n";
  return ok ? 0 : 1;
}

struct SweepArgs {
  std::string data;
  std::string alphas = "1,0,0;1,0.35,0.65";
  std::string seeds = "1,2,3";
  std::string out = "runs/sweep";
  TrainArgs train;  // shared overrides
};

void cmd_sweep(const SweepArgs& a) {
  std::vector<std::string> triples;
  {
    std::istringstream ss(a.alphas);
    std::string t;
    while (std::getline(ss, t, ';'))
      if (!t.empty()) triples.push_back(t);
  }
  if (triples.empty()) throw ConfigError("no alpha triples given");
  const std::size_t n_seeds =
      static_cast<std::size_t>(std::count(a.seeds.begin(), a.seeds.end(), ',')) + 1;
  std::vector<std::uint64_t> seeds;
  for (auto s : parse_counts(a.seeds, n_seeds)) seeds.push_back(static_cast<std::uint64_t>(s));

  fs::create_directories(a.out);
  std::ofstream summary(fs::path(a.out) / "sweep.csv", std::ios::binary);
  summary << "alphas,seed,epochs,best_epoch,best_val_total_loss,final_val_label_acc,"
             "final_val_row_acc,final_val_col_acc\n";

  for (const auto& triple : triples) {
    for (std::uint64_t seed : seeds) {
      TrainArgs run = a.train;
      run.data = a.data;
      run.alphas = triple;
      run.seed = seed;
      std::string tag = triple;
      for (auto& c : tag)
        if (c == ',') c = '-';
      run.out = (fs::path(a.out) / ("a" + tag + "_s" + std::to_string(seed))).string();

      ContainerFile train_c = read_container(fs::path(a.data) / "train.amcr");
      ContainerFile val_c = read_container(fs::path(a.data) / "val.amcr");
      TrainConfig cfg = resolve_train_config(run);
      ModelConfig mc = resolve_model_config(run, train_c.manifest);
      mc.keep_prob = cfg.keep_prob;
      RngStream init_rng(cfg.seed, rng_streams::kInit);
      Network net = build_model<float>(mc, init_rng);

      FitOptions opts;
      opts.out_dir = run.out;
      opts.deterministic = a.train.deterministic;
      FitResult result = fit(std::move(net), train_c.data, val_c.data, cfg, opts);

      double best_val = 0.0;
      MetricsRecord final_val;
      for (const auto& r : result.history)
        if (r.split == "val") {
          final_val = r;
          if (r.epoch == result.best_epoch) best_val = r.total_loss;
        }
      char row[256];
      std::snprintf(row, sizeof(row), "\"%s\",%llu,%d,%d,%.6f,%.6f,%.6f,%.6f", triple.c_str(),
                    static_cast<unsigned long long>(seed), result.last_epoch, result.best_epoch,
                    best_val, final_val.label_acc, final_val.row_acc, final_val.col_acc);
      summary << row << "\n";
      std::cout << "alphas (" << triple << ") seed " << seed << ": best epoch "
                << result.best_epoch << ", best val loss " << best_val << "\n";
    }
  }
  std::cout << "sweep summary in " << (fs::path(a.out) / "sweep.csv").string() << "\n";
}

struct PlotArgs {
  std::vector<std::string> metrics;
  std::vector<std::string> labels;
  std::string out;
  bool deterministic = false;
};

void cmd_plot(const PlotArgs& a) {
  if (!a.labels.empty() && a.labels.size() != a.metrics.size())
    throw ConfigError("--labels must match --metrics one to one");
  std::vector<std::pair<std::string, std::vector<MetricsRecord>>> series;
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    std::string name = i < a.labels.size()
                           ? a.labels[i]
                           : fs::path(a.metrics[i]).parent_path().filename().string();
    if (name.empty()) name = fs::path(a.metrics[i]).stem().string();
    series.emplace_back(name, read_metrics_csv(a.metrics[i]));
  }
  render_svg_plot(series, a.out, a.deterministic);
  std::cout << "wrote " << a.out << "\n";
}

void add_train_flags(CLI::App* cmd, TrainArgs& args, bool with_data) {
  if (with_data) {
    cmd->add_option("--data", args.data, "Directory holding train.amcr and val.amcr");
    cmd->add_option("--train", args.train_file, "Training container (overrides --data)");
    cmd->add_option("--val", args.val_file, "Validation container (overrides --data)");
  }
  cmd->add_option("--config", args.config_file, "Training configuration JSON");
  cmd->add_option("--model-config", args.model_config_file, "Model architecture JSON");
  cmd->add_option("--seed", args.seed, "RNG seed");
  cmd->add_option("--batch", args.batch, "Batch size (default 100)");
  cmd->add_option("--lr", args.lr, "Learning rate (default 0.0001)");
  cmd->add_option("--l2", args.l2, "L2 penalty weight (default 0.01)");
  cmd->add_option("--keep-prob", args.keep_prob, "Dropout keep probability (default 0.3)");
  cmd->add_option("--max-epochs", args.max_epochs, "Epoch cap (default 300)");
  cmd->add_option("--patience", args.patience, "Early-stop patience in epochs (default 20)");
  cmd->add_option("--min-delta", args.min_delta, "Early-stop improvement threshold (default 1e-4)");
  cmd->add_option("--optimizer", args.optimizer, "Optimizer: adam or sgd (default adam)");
  cmd->add_flag("--deterministic", args.deterministic,
                "Zero timing columns and omit timestamps for byte-stable artifacts");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task handwritten-character recognition toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Decode a writer/label image tree into containers");
  ingest->add_option("--src", ingest_args.src, "Directory of <writer>/<label>.<png|pgm>")
      ->required();
  ingest->add_option("--grid", ingest_args.grid, "Alphabet grid file")
      ->default_val(default_grid_path());
  ingest->add_option("--out", ingest_args.out, "Output directory")->required();
  ingest->add_option("--seed", ingest_args.seed, "Writer-split RNG seed");
  ingest->add_option("--ratio", ingest_args.ratio, "Writer split ratio (default 9,2,1)");
  ingest->add_option("--canvas", ingest_args.canvas, "Canvas side length (default 32)");
  ingest->add_flag("--deterministic", ingest_args.deterministic,
                   "Omit timestamps for byte-stable artifacts");
  ingest->callback([&] { cmd_ingest(ingest_args); });

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate the procedural grid-glyph dataset");
  synth->add_option("--rows", synth_args.rows, "Grid rows")->required();
  synth->add_option("--cols", synth_args.cols, "Grid columns")->required();
  synth->add_option("--per-class", synth_args.per_class, "Training images per class")->required();
  synth->add_option("--val-per-class", synth_args.val_per_class,
                    "Validation images per class (default per-class/6, at least 1)");
  synth->add_option("--test-per-class", synth_args.test_per_class,
                    "Test images per class (default 0)");
  synth->add_option("--seed", synth_args.seed, "RNG seed");
  synth->add_option("--canvas", synth_args.canvas, "Canvas side length (default 32)");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_flag("--deterministic", synth_args.deterministic,
                  "Omit timestamps for byte-stable artifacts");
  synth->callback([&] { cmd_synth(synth_args); });

  AugmentArgs augment_args;
  auto* augment = app.add_subcommand("augment", "Expand containers to per-class count targets");
  augment->add_option("--in", augment_args.in, "Directory of source containers")->required();
  augment->add_option("--out", augment_args.out, "Output directory")->required();
  augment->add_option("--counts", augment_args.counts,
                      "train,val,test per-class targets (default 4500,800,400)");
  augment->add_option("--rotation", augment_args.rotation,
                      "Rotation interval in degrees (default -15,15)");
  augment->add_option("--shrink", augment_args.shrink, "Shrink interval (default 0.70,0.87)");
  augment->add_option("--noise", augment_args.noise,
                      "Salt-and-pepper pixel fraction (default 0.02)");
  augment->add_option("--seed", augment_args.seed, "RNG seed");
  augment->add_flag("--log", augment_args.write_log, "Also write transforms.csv");
  augment->add_flag("--deterministic", augment_args.deterministic,
                    "Omit timestamps for byte-stable artifacts");
  augment->callback([&] { cmd_augment(augment_args); });

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Fit the multi-task model on containers");
  add_train_flags(train, train_args, true);
  train->add_option("--alphas", train_args.alphas, "Task loss weights a1,a2,a3");
  train->add_option("--out", train_args.out, "Run directory (default runs/default)");
  train->add_flag("--resume", train_args.resume, "Continue from the run's last.ckpt");
  train->callback([&] { cmd_train(train_args); });

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one container");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", eval_args.data, "Container file")->required();
  eval->add_option("--alphas", eval_args.alphas,
                   "Task loss weights (default: from the checkpoint)");
  eval->add_option("--l2", eval_args.l2, "L2 weight for the total (default: from checkpoint)");
  eval->callback([&] { cmd_eval(eval_args); });

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Classify one image with a checkpoint");
  predict->add_option("--checkpoint", predict_args.checkpoint, "Checkpoint file")->required();
  predict->add_option("--image", predict_args.image, "PNG or PGM image")->required();
  predict->add_option("--grid", predict_args.grid, "Alphabet grid file")
      ->default_val(default_grid_path());
  predict->callback([&] { cmd_predict(predict_args); });

  GradcheckArgs gradcheck_args;
  int gradcheck_rc = 0;
  auto* gradcheck = app.add_subcommand("gradcheck",
                                       "Verify analytic gradients against finite differences");
  gradcheck->add_option("--config", gradcheck_args.config_file, "Model architecture JSON");
  gradcheck->add_option("--seed", gradcheck_args.seed, "RNG seed (default 2)");
  gradcheck->add_option("--batch", gradcheck_args.batch, "Batch size (default 4)");
  gradcheck->add_option("--epsilon", gradcheck_args.epsilon,
                        "Central-difference step (default 1e-5)");
  gradcheck->add_option("--tolerance", gradcheck_args.tolerance,
                        "Maximum relative error accepted (default 1e-5)");
  gradcheck->add_option("--max-coords", gradcheck_args.max_coords,
                        "Sampled coordinates per tensor (default 24)");
  gradcheck->add_flag("--inject-fault", gradcheck_args.inject_fault,
                      "Negative control: flip one backward sign");
  gradcheck->callback([&] { gradcheck_rc = cmd_gradcheck(gradcheck_args); });

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Train over alpha triples and seeds, summarize");
  sweep->add_option("--data", sweep_args.data, "Directory holding train.amcr and val.amcr")
      ->required();
  sweep->add_option("--alphas", sweep_args.alphas,
                    "Semicolon-separated triples (default \"1,0,0;1,0.35,0.65\")");
  sweep->add_option("--seeds", sweep_args.seeds, "Comma-separated seeds (default 1,2,3)");
  sweep->add_option("--out", sweep_args.out, "Sweep directory (default runs/sweep)");
  add_train_flags(sweep, sweep_args.train, false);
  sweep->callback([&] { cmd_sweep(sweep_args); });

  PlotArgs plot_args;
  auto* plot = app.add_subcommand("plot", "Render metrics CSVs as an SVG chart");
  plot->add_option("--metrics", plot_args.metrics, "Metrics CSV files")->required()
      ->expected(-1);
  plot->add_option("--labels", plot_args.labels, "Legend label per CSV");
  plot->add_option("--out", plot_args.out, "Output SVG file")->required();
  plot->add_flag("--deterministic", plot_args.deterministic, "Omit the timestamp comment");
  plot->callback([&] { cmd_plot(plot_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return gradcheck_rc;
}
