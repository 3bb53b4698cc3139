#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amcr/grid.hpp"
#include "amcr/ops.hpp"
#include "amcr/rng.hpp"
#include "amcr/tensor.hpp"

// Shared-trunk network with three classification heads. The trunk runs once
// per image; the heads all read the same dropout output.

namespace amcr {

struct ConvStage {
  int filter_size = 0;
  int filter_count = 0;
};

struct ModelConfig {
  int canvas = 32;
  std::vector<ConvStage> convs{{5, 80}, {5, 64}};
  int hidden = 512;
  int num_labels = 265;
  int num_rows = 34;
  int num_cols = 9;
  float keep_prob = 0.3f;

  struct Trace {
    std::vector<int> spatial;  // side length after the input and each conv/pool
    int flatten = 0;
  };
  // Applies the valid-convolution size rule (side - filter + 1, then halved by
  // each pool); throws ConfigError when any stage leaves a non-positive or
  // odd side.
  Trace validate() const;
  void bind(const AlphabetGrid& grid);

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::ordered_json& j);
};

template <class T>
struct MultiHeadOutputT {
  TensorT<T> label_logits, row_logits, col_logits;
};
using MultiHeadOutput = MultiHeadOutputT<float>;

template <class T>
struct NetworkT {
  ModelConfig config;
  std::vector<ParamTensorT<T>> params;

  ParamTensorT<T>& param(const std::string& name);
  const ParamTensorT<T>& param(const std::string& name) const;
  std::vector<ParamTensorT<T>*> param_ptrs();
  void zero_grads();
  std::size_t param_count() const;

  template <class U>
  NetworkT<U> cast() const {
    NetworkT<U> out;
    out.config = config;
    out.params.reserve(params.size());
    for (const auto& p : params) out.params.push_back(p.template cast<U>());
    return out;
  }
};
using Network = NetworkT<float>;

enum class Mode { kTrain, kEval };

template <class T>
struct ForwardTraceT {
  std::vector<TensorT<T>> conv_in;   // input of each conv stage
  std::vector<TensorT<T>> conv_out;  // pre-activation conv output
  std::vector<PoolMask> pool_masks;
  TensorT<T> flat;     // flattened trunk features, input of fc1
  TensorT<T> fc1_out;  // pre-activation hidden layer
  TensorT<T> dropout_mask;
  TensorT<T> head_in;  // what all three heads consume
};

template <class T>
NetworkT<T> build_model(const ModelConfig& config, RngStream& rng);

inline Network build_model(const ModelConfig& config, const AlphabetGrid& grid, RngStream& rng) {
  ModelConfig bound = config;
  bound.bind(grid);
  return build_model<float>(bound, rng);
}

// rng is consumed only in train mode (dropout); eval mode accepts nullptr.
template <class T>
MultiHeadOutputT<T> forward_one(const NetworkT<T>& net, const TensorT<T>& image, Mode mode,
                                RngStream* rng, ForwardTraceT<T>* trace = nullptr);

// Accumulates parameter gradients for one image. active[k] == false skips
// head k entirely: its parameters receive no gradient and it contributes
// nothing to the trunk.
template <class T>
void backward_one(NetworkT<T>& net, const ForwardTraceT<T>& trace,
                  const MultiHeadOutputT<T>& logit_grads, const std::array<bool, 3>& active);

struct Prediction {
  int label = 0, row = 0, col = 0;  // 1-based argmaxes, mutually independent
  float label_conf = 0.0f, row_conf = 0.0f, col_conf = 0.0f;
  bool grid_consistent = false;
};

Prediction predict(const Network& net, const Tensor& image, const AlphabetGrid& grid);

template <class T>
int argmax1(const TensorT<T>& t);  // first maximum wins

}  // namespace amcr
