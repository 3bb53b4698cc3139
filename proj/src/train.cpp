#include "amcr/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace amcr {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0f)) throw ConfigError("learning rate must be > 0");
  if (l2_lambda < 0.0f) throw ConfigError("l2 lambda must be >= 0");
  if (!(keep_prob > 0.0f && keep_prob <= 1.0f))
    throw ConfigError("keep probability must be in (0,1]");
  for (float a : alphas)
    if (a < 0.0f) throw ConfigError("alphas must be >= 0");
  if (!(alphas[0] > 0.0f)) throw ConfigError("alpha1 must be > 0, the label task is mandatory");
  if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
  if (patience < 1) throw ConfigError("early-stop patience must be >= 1");
  if (min_delta < 0.0f) throw ConfigError("early-stop min delta must be >= 0");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  return nlohmann::ordered_json{
      {"batch_size", batch_size},
      {"learning_rate", learning_rate},
      {"l2_lambda", l2_lambda},
      {"keep_prob", keep_prob},
      {"alphas", alphas},
      {"max_epochs", max_epochs},
      {"patience", patience},
      {"min_delta", min_delta},
      {"seed", seed},
      {"optimizer", optimizer == OptimizerKind::kAdam ? "adam" : "sgd"}};
}

TrainConfig TrainConfig::from_json(const nlohmann::ordered_json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<float>();
  c.l2_lambda = j.at("l2_lambda").get<float>();
  c.keep_prob = j.at("keep_prob").get<float>();
  for (std::size_t k = 0; k < 3; ++k) c.alphas[k] = j.at("alphas").at(k).get<float>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.min_delta = j.at("min_delta").get<float>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const std::string opt = j.at("optimizer").get<std::string>();
  if (opt == "adam")
    c.optimizer = OptimizerKind::kAdam;
  else if (opt == "sgd")
    c.optimizer = OptimizerKind::kSgd;
  else
    throw ConfigError("unknown optimizer `" + opt + "`");
  c.validate();
  return c;
}

std::array<float, 3> parse_alphas(const std::string& csv) {
  std::array<float, 3> alphas{};
  std::istringstream ss(csv);
  std::string field;
  for (int k = 0; k < 3; ++k) {
    if (!std::getline(ss, field, ','))
      throw ConfigError("alphas need three comma-separated values, got `" + csv + "`");
    try {
      std::size_t pos = 0;
      alphas[k] = std::stof(field, &pos);
      if (pos != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ConfigError("alpha value `" + field + "` is not a number");
    }
  }
  if (std::getline(ss, field, ','))
    throw ConfigError("alphas need exactly three values, got `" + csv + "`");
  return alphas;
}

template <class T>
BatchLossT<T> multitask_loss(const std::vector<MultiHeadOutputT<T>>& outputs,
                             const std::vector<LabelTriple>& targets,
                             const std::array<T, 3>& alphas,
                             std::vector<ParamTensorT<T>*> params, T l2_lambda,
                             bool accumulate_l2_grads) {
  if (outputs.size() != targets.size())
    throw DimensionError("batch has " + std::to_string(outputs.size()) + " outputs but " +
                         std::to_string(targets.size()) + " targets");
  if (outputs.empty()) throw DimensionError("empty batch");
  for (T a : alphas)
    if (a < T(0)) throw ValidationError("alphas must be >= 0");

  const T inv_b = T(1) / static_cast<T>(outputs.size());
  BatchLossT<T> result;
  result.logit_grads.resize(outputs.size());

  for (std::size_t k = 0; k < 3; ++k) {
    const bool active = alphas[k] != T(0);
    const T scale = alphas[k] * inv_b;
    T loss_sum = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const TensorT<T>& logits = k == 0   ? outputs[i].label_logits
                                 : k == 1 ? outputs[i].row_logits
                                          : outputs[i].col_logits;
      const int target = k == 0 ? targets[i].label : k == 1 ? targets[i].row : targets[i].col;
      auto ce = softmax_cross_entropy_at(logits, target - 1);
      loss_sum += ce.loss;
      if (active) {
        for (auto& g : ce.grad_logits.data) g *= scale;
        TensorT<T>& dst = k == 0   ? result.logit_grads[i].label_logits
                          : k == 1 ? result.logit_grads[i].row_logits
                                   : result.logit_grads[i].col_logits;
        dst = std::move(ce.grad_logits);
      }
    }
    result.per_task[k] = loss_sum * inv_b;
    if (active) result.total += alphas[k] * result.per_task[k];
  }
  if (l2_lambda != T(0))
    result.total += l2_penalty<T>(std::move(params), l2_lambda, accumulate_l2_grads);
  return result;
}

template BatchLossT<float> multitask_loss<float>(const std::vector<MultiHeadOutputT<float>>&,
                                                 const std::vector<LabelTriple>&,
                                                 const std::array<float, 3>&,
                                                 std::vector<ParamTensorT<float>*>, float, bool);
template BatchLossT<double> multitask_loss<double>(const std::vector<MultiHeadOutputT<double>>&,
                                                   const std::vector<LabelTriple>&,
                                                   const std::array<double, 3>&,
                                                   std::vector<ParamTensorT<double>*>, double,
                                                   bool);

void Optimizer::init(const Network& net, OptimizerKind k, float learning_rate) {
  kind = k;
  lr = learning_rate;
  steps = 0;
  m.clear();
  v.clear();
  if (kind == OptimizerKind::kAdam) {
    for (const auto& p : net.params) {
      m.emplace_back(p.value.shape);
      v.emplace_back(p.value.shape);
    }
  }
}

void Optimizer::step(Network& net) {
  if (kind == OptimizerKind::kSgd) {
    for (auto& p : net.params) {
      float* x = p.value.ptr();
      const float* g = p.grad.ptr();
      for (std::size_t i = 0; i < p.value.size(); ++i) x[i] -= lr * g[i];
    }
    return;
  }
  ++steps;
  const float c1 = 1.0f - static_cast<float>(std::pow(static_cast<double>(beta1), steps));
  const float c2 = 1.0f - static_cast<float>(std::pow(static_cast<double>(beta2), steps));
  for (std::size_t pi = 0; pi < net.params.size(); ++pi) {
    auto& p = net.params[pi];
    float* x = p.value.ptr();
    const float* g = p.grad.ptr();
    float* mi = m[pi].ptr();
    float* vi = v[pi].ptr();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      mi[i] = beta1 * mi[i] + (1.0f - beta1) * g[i];
      vi[i] = beta2 * vi[i] + (1.0f - beta2) * g[i] * g[i];
      const float mhat = mi[i] / c1;
      const float vhat = vi[i] / c2;
      x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

MetricsRecord train_epoch(Network& net, const SplitData& train, const TrainConfig& cfg,
                          int epoch, Optimizer& opt) {
  if (train.count() == 0) throw ConfigError("training split is empty");
  const std::size_t n = train.count();
  const std::array<float, 3> alphas = cfg.alphas;
  const std::array<bool, 3> active{alphas[0] != 0.0f, alphas[1] != 0.0f, alphas[2] != 0.0f};

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream shuffle_rng(cfg.seed, rng_streams::kShuffleBase + static_cast<std::uint64_t>(epoch));
  shuffle_rng.shuffle(order);
  RngStream dropout_rng(cfg.seed, rng_streams::kDropoutBase + static_cast<std::uint64_t>(epoch));

  MetricsRecord rec;
  rec.epoch = epoch;
  rec.split = "train";
  double loss_sum = 0, label_loss_sum = 0, row_loss_sum = 0, col_loss_sum = 0;
  std::size_t label_hits = 0, row_hits = 0, col_hits = 0;

  std::vector<ForwardTraceT<float>> traces;
  std::vector<MultiHeadOutput> outputs;
  std::vector<LabelTriple> targets;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t bsize = std::min(static_cast<std::size_t>(cfg.batch_size), n - start);
    traces.assign(bsize, {});
    outputs.clear();
    targets.clear();
    for (std::size_t b = 0; b < bsize; ++b) {
      const std::size_t idx = order[start + b];
      const Tensor img = train.image_tensor(idx);
      outputs.push_back(forward_one(net, img, Mode::kTrain, &dropout_rng, &traces[b]));
      targets.push_back(train.triple(idx));
    }

    net.zero_grads();
    auto loss = multitask_loss<float>(outputs, targets, alphas, net.param_ptrs(), cfg.l2_lambda,
                                      true);
    for (std::size_t b = 0; b < bsize; ++b)
      backward_one(net, traces[b], loss.logit_grads[b], active);
    opt.step(net);

    const double w = static_cast<double>(bsize);
    loss_sum += static_cast<double>(loss.total) * w;
    label_loss_sum += static_cast<double>(loss.per_task[0]) * w;
    row_loss_sum += static_cast<double>(loss.per_task[1]) * w;
    col_loss_sum += static_cast<double>(loss.per_task[2]) * w;
    for (std::size_t b = 0; b < bsize; ++b) {
      if (argmax1(outputs[b].label_logits) == targets[b].label) ++label_hits;
      if (argmax1(outputs[b].row_logits) == targets[b].row) ++row_hits;
      if (argmax1(outputs[b].col_logits) == targets[b].col) ++col_hits;
    }
  }

  const double dn = static_cast<double>(n);
  rec.total_loss = loss_sum / dn;
  rec.label_loss = label_loss_sum / dn;
  rec.row_loss = row_loss_sum / dn;
  rec.col_loss = col_loss_sum / dn;
  rec.label_acc = static_cast<double>(label_hits) / dn;
  rec.row_acc = static_cast<double>(row_hits) / dn;
  rec.col_acc = static_cast<double>(col_hits) / dn;
  return rec;
}

MetricsRecord evaluate(const Network& net, const SplitData& data,
                       const std::array<float, 3>& alphas, float l2_lambda) {
  MetricsRecord rec;
  rec.split = data.split;
  const std::size_t n = data.count();
  if (n == 0) return rec;

  // The L2 term is a property of the parameters, not the data.
  double l2 = 0.0;
  if (l2_lambda != 0.0f) {
    double sq = 0.0;
    for (const auto& p : net.params) {
      if (!p.is_weight()) continue;
      for (float x : p.value.data) sq += static_cast<double>(x) * x;
    }
    l2 = static_cast<double>(l2_lambda) * sq;
  }

  double label_loss = 0, row_loss = 0, col_loss = 0;
  std::size_t label_hits = 0, row_hits = 0, col_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor img = data.image_tensor(i);
    const auto out = forward_one(net, img, Mode::kEval, nullptr);
    const LabelTriple t = data.triple(i);
    label_loss += softmax_cross_entropy_at(out.label_logits, t.label - 1).loss;
    row_loss += softmax_cross_entropy_at(out.row_logits, t.row - 1).loss;
    col_loss += softmax_cross_entropy_at(out.col_logits, t.col - 1).loss;
    if (argmax1(out.label_logits) == t.label) ++label_hits;
    if (argmax1(out.row_logits) == t.row) ++row_hits;
    if (argmax1(out.col_logits) == t.col) ++col_hits;
  }
  const double dn = static_cast<double>(n);
  rec.label_loss = label_loss / dn;
  rec.row_loss = row_loss / dn;
  rec.col_loss = col_loss / dn;
  rec.total_loss = alphas[0] * rec.label_loss + alphas[1] * rec.row_loss +
                   alphas[2] * rec.col_loss + l2;
  rec.label_acc = static_cast<double>(label_hits) / dn;
  rec.row_acc = static_cast<double>(row_hits) / dn;
  rec.col_acc = static_cast<double>(col_hits) / dn;
  return rec;
}

bool EarlyStopper::observe(double val_loss, int epoch) {
  if (val_loss < best - min_delta) {
    best = val_loss;
    best_epoch = epoch;
    stale = 0;
    return true;
  }
  ++stale;
  return false;
}

bool early_stop(const std::vector<double>& val_losses, int patience, double min_delta) {
  if (val_losses.empty()) throw ValidationError("early_stop needs a nonempty history");
  EarlyStopper stopper;
  stopper.patience = patience;
  stopper.min_delta = min_delta;
  for (std::size_t i = 0; i < val_losses.size(); ++i) {
    stopper.observe(val_losses[i], static_cast<int>(i) + 1);
    if (stopper.should_stop()) return true;
  }
  return stopper.should_stop();
}

namespace {

nlohmann::ordered_json stopper_to_json(const EarlyStopper& s) {
  return nlohmann::ordered_json{{"best", s.best},
                                {"best_epoch", s.best_epoch},
                                {"stale", s.stale}};
}

void stopper_from_json(EarlyStopper& s, const nlohmann::ordered_json& j) {
  s.best = j.at("best").get<double>();
  s.best_epoch = j.at("best_epoch").get<int>();
  s.stale = j.at("stale").get<int>();
}

void save_last_checkpoint(const Network& net, const Optimizer& opt, const EarlyStopper& stopper,
                          const TrainConfig& cfg, int epoch, const std::filesystem::path& file) {
  nlohmann::ordered_json meta{{"epoch", epoch},
                              {"train", cfg.to_json()},
                              {"optimizer", {{"steps", opt.steps}}},
                              {"stopper", stopper_to_json(stopper)}};
  Checkpoint ckpt = checkpoint_from_network(net, std::move(meta));
  if (opt.kind == OptimizerKind::kAdam) {
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      ckpt.tensors.emplace_back("opt.m." + net.params[i].name, opt.m[i]);
      ckpt.tensors.emplace_back("opt.v." + net.params[i].name, opt.v[i]);
    }
  }
  save_checkpoint(ckpt, file);
}

}  // namespace

FitResult fit(Network net, const SplitData& train, const SplitData& val, const TrainConfig& cfg,
              const FitOptions& opt) {
  cfg.validate();
  if (train.count() == 0) throw ConfigError("training split is empty");
  if (val.count() == 0) throw ConfigError("validation split is empty");
  net.config.keep_prob = cfg.keep_prob;

  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  const fs::path metrics_path = opt.out_dir / "metrics.csv";
  const fs::path best_path = opt.out_dir / "best.ckpt";
  const fs::path last_path = opt.out_dir / "last.ckpt";

  Optimizer optimizer;
  optimizer.init(net, cfg.optimizer, cfg.learning_rate);
  EarlyStopper stopper;
  stopper.patience = cfg.patience;
  stopper.min_delta = static_cast<double>(cfg.min_delta);

  FitResult result;
  int start_epoch = 1;

  if (opt.resume && fs::exists(last_path)) {
    Checkpoint last = load_checkpoint(last_path);
    Network restored = network_from_checkpoint(last);
    restored.config.keep_prob = cfg.keep_prob;
    net = std::move(restored);
    optimizer.init(net, cfg.optimizer, cfg.learning_rate);
    optimizer.steps = last.meta.at("optimizer").at("steps").get<std::int64_t>();
    if (cfg.optimizer == OptimizerKind::kAdam) {
      for (std::size_t i = 0; i < net.params.size(); ++i) {
        const Tensor* sm = last.find("opt.m." + net.params[i].name);
        const Tensor* sv = last.find("opt.v." + net.params[i].name);
        if (!sm || !sv)
          throw FormatError(last_path.string() + ": missing optimizer state for `" +
                            net.params[i].name + "`");
        optimizer.m[i] = *sm;
        optimizer.v[i] = *sv;
      }
    }
    stopper_from_json(stopper, last.meta.at("stopper"));
    start_epoch = last.meta.at("epoch").get<int>() + 1;
    if (fs::exists(metrics_path)) result.history = read_metrics_csv(metrics_path);
  } else {
    if (fs::exists(metrics_path)) fs::remove(metrics_path);
  }

  if (opt.resume && fs::exists(best_path))
    result.best = network_from_checkpoint(load_checkpoint(best_path));
  else
    result.best = net;
  result.best_epoch = stopper.best_epoch;

  for (int epoch = start_epoch; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsRecord train_rec = train_epoch(net, train, cfg, epoch, optimizer);
    const auto t1 = std::chrono::steady_clock::now();
    train_rec.seconds =
        opt.deterministic ? 0.0 : std::chrono::duration<double>(t1 - t0).count();
    append_metrics_row(train_rec, metrics_path);
    result.history.push_back(train_rec);

    MetricsRecord val_rec = evaluate(net, val, cfg.alphas, cfg.l2_lambda);
    const auto t2 = std::chrono::steady_clock::now();
    val_rec.epoch = epoch;
    val_rec.seconds = opt.deterministic ? 0.0 : std::chrono::duration<double>(t2 - t1).count();
    append_metrics_row(val_rec, metrics_path);
    result.history.push_back(val_rec);

    if (stopper.observe(val_rec.total_loss, epoch)) {
      result.best = net;
      nlohmann::ordered_json meta{{"epoch", epoch},
                                  {"val_total_loss", val_rec.total_loss},
                                  {"train", cfg.to_json()}};
      save_checkpoint(checkpoint_from_network(net, std::move(meta)), best_path);
    }
    save_last_checkpoint(net, optimizer, stopper, cfg, epoch, last_path);
    result.last_epoch = epoch;

    if (stopper.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch;
  return result;
}

}  // namespace amcr
