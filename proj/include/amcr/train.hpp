#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amcr/checkpoint.hpp"
#include "amcr/dataio.hpp"
#include "amcr/metrics.hpp"
#include "amcr/model.hpp"

// Weighted three-task training loop: per batch, one shared forward per image,
// alpha-weighted cross-entropies, L2, manual backward, optimizer step.

namespace amcr {

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  int batch_size = 100;
  float learning_rate = 1e-4f;
  float l2_lambda = 0.01f;
  float keep_prob = 0.3f;
  std::array<float, 3> alphas{1.0f, 0.35f, 0.65f};
  int max_epochs = 300;
  int patience = 20;
  float min_delta = 1e-4f;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;

  void validate() const;  // throws ConfigError
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::ordered_json& j);
};

std::array<float, 3> parse_alphas(const std::string& csv);  // "1,0.35,0.65"

template <class T>
struct BatchLossT {
  T total = 0;                  // alpha-weighted task losses plus L2
  std::array<T, 3> per_task{};  // mean cross-entropy per head
  // Per image, already alpha-scaled and divided by batch size; heads with
  // alpha == 0 carry empty tensors.
  std::vector<MultiHeadOutputT<T>> logit_grads;
};
using BatchLoss = BatchLossT<float>;

// When accumulate_l2_grads is set the weight gradients get their 2*lambda*x
// contribution as a side effect.
template <class T>
BatchLossT<T> multitask_loss(const std::vector<MultiHeadOutputT<T>>& outputs,
                             const std::vector<LabelTriple>& targets,
                             const std::array<T, 3>& alphas,
                             std::vector<ParamTensorT<T>*> params, T l2_lambda,
                             bool accumulate_l2_grads = true);

struct Optimizer {
  OptimizerKind kind = OptimizerKind::kAdam;
  float lr = 1e-4f;
  float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
  std::int64_t steps = 0;
  std::vector<Tensor> m, v;  // parallel to the network parameter list

  void init(const Network& net, OptimizerKind k, float learning_rate);
  void step(Network& net);
};

MetricsRecord train_epoch(Network& net, const SplitData& train, const TrainConfig& cfg,
                          int epoch, Optimizer& opt);

MetricsRecord evaluate(const Network& net, const SplitData& data,
                       const std::array<float, 3>& alphas, float l2_lambda);

struct EarlyStopper {
  int patience = 20;
  double min_delta = 1e-4;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  // True when this epoch improves on best by more than min_delta.
  bool observe(double val_loss, int epoch);
  bool should_stop() const { return stale >= patience; }
};

// Feeds the whole history through an EarlyStopper and reports its verdict.
bool early_stop(const std::vector<double>& val_losses, int patience, double min_delta);

struct FitOptions {
  std::filesystem::path out_dir;
  bool deterministic = false;  // zero the seconds column, no timestamps
  bool resume = false;         // continue from out_dir/last.ckpt
};

struct FitResult {
  Network best;
  std::vector<MetricsRecord> history;
  int best_epoch = 0;
  int last_epoch = 0;
  bool early_stopped = false;
};

// Writes metrics.csv, best.ckpt, and last.ckpt into opt.out_dir.
FitResult fit(Network net, const SplitData& train, const SplitData& val, const TrainConfig& cfg,
              const FitOptions& opt);

}  // namespace amcr
