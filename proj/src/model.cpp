#include "amcr/model.hpp"

#include <cmath>

namespace amcr {

ModelConfig::Trace ModelConfig::validate() const {
  if (canvas < 1) throw ConfigError("canvas must be positive");
  if (hidden < 1) throw ConfigError("hidden width must be positive");
  if (num_labels < 1 || num_rows < 1 || num_cols < 1)
    throw ConfigError("head sizes must be positive");
  if (!(keep_prob > 0.0f && keep_prob <= 1.0f))
    throw ConfigError("keep probability must be in (0,1]");

  Trace trace;
  trace.spatial.push_back(canvas);
  int side = canvas;
  int channels = 1;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& stage = convs[i];
    if (stage.filter_size < 1 || stage.filter_count < 1)
      throw ConfigError("conv stage " + std::to_string(i) + " needs positive size and count");
    const int conv_side = side - stage.filter_size + 1;
    if (conv_side < 1)
      throw ConfigError("conv stage " + std::to_string(i) + ": side " + std::to_string(side) +
                        " - filter " + std::to_string(stage.filter_size) +
                        " + 1 = " + std::to_string(conv_side) + " is not positive");
    if (conv_side % 2 != 0)
      throw ConfigError("conv stage " + std::to_string(i) + ": side " +
                        std::to_string(conv_side) + " is odd, 2x2 pooling needs an even side");
    trace.spatial.push_back(conv_side);
    side = conv_side / 2;
    trace.spatial.push_back(side);
    channels = stage.filter_count;
  }
  trace.flatten = side * side * channels;
  return trace;
}

void ModelConfig::bind(const AlphabetGrid& grid) {
  num_labels = grid.num_labels;
  num_rows = grid.num_rows;
  num_cols = grid.num_cols;
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& s : convs) stages.push_back({s.filter_size, s.filter_count});
  return nlohmann::ordered_json{{"canvas", canvas},
                                {"convs", stages},
                                {"hidden", hidden},
                                {"heads", {{"labels", num_labels}, {"rows", num_rows}, {"cols", num_cols}}},
                                {"keep_prob", keep_prob}};
}

ModelConfig ModelConfig::from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  c.canvas = j.at("canvas").get<int>();
  c.convs.clear();
  for (const auto& s : j.at("convs"))
    c.convs.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  c.hidden = j.at("hidden").get<int>();
  c.num_labels = j.at("heads").at("labels").get<int>();
  c.num_rows = j.at("heads").at("rows").get<int>();
  c.num_cols = j.at("heads").at("cols").get<int>();
  c.keep_prob = j.at("keep_prob").get<float>();
  c.validate();
  return c;
}

template <class T>
ParamTensorT<T>& NetworkT<T>::param(const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p;
  throw LookupError("no parameter named `" + name + "`");
}

template <class T>
const ParamTensorT<T>& NetworkT<T>::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw LookupError("no parameter named `" + name + "`");
}

template <class T>
std::vector<ParamTensorT<T>*> NetworkT<T>::param_ptrs() {
  std::vector<ParamTensorT<T>*> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(&p);
  return out;
}

template <class T>
void NetworkT<T>::zero_grads() {
  for (auto& p : params) p.zero_grad();
}

template <class T>
std::size_t NetworkT<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

namespace {

template <class T>
ParamTensorT<T> make_weight(const std::string& name, std::vector<int> shape, int fan_in,
                            RngStream& rng) {
  ParamTensorT<T> p(name, TensorT<T>(std::move(shape)));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : p.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
  return p;
}

}  // namespace

template <class T>
NetworkT<T> build_model(const ModelConfig& config, RngStream& rng) {
  const auto trace = config.validate();
  NetworkT<T> net;
  net.config = config;

  int cin = 1;
  for (std::size_t i = 0; i < config.convs.size(); ++i) {
    const auto& stage = config.convs[i];
    const std::string base = "conv" + std::to_string(i);
    net.params.push_back(make_weight<T>(base + ".w",
                                        {stage.filter_size, stage.filter_size, cin, stage.filter_count},
                                        stage.filter_size * stage.filter_size * cin, rng));
    net.params.emplace_back(base + ".b", TensorT<T>({stage.filter_count}));
    cin = stage.filter_count;
  }
  net.params.push_back(make_weight<T>("fc1.w", {trace.flatten, config.hidden}, trace.flatten, rng));
  net.params.emplace_back("fc1.b", TensorT<T>({config.hidden}));
  const std::array<std::pair<const char*, int>, 3> heads{
      std::pair{"head_label", config.num_labels}, {"head_row", config.num_rows},
      {"head_col", config.num_cols}};
  for (const auto& [name, size] : heads) {
    net.params.push_back(
        make_weight<T>(std::string(name) + ".w", {config.hidden, size}, config.hidden, rng));
    net.params.emplace_back(std::string(name) + ".b", TensorT<T>({size}));
  }
  return net;
}

template <class T>
MultiHeadOutputT<T> forward_one(const NetworkT<T>& net, const TensorT<T>& image, Mode mode,
                                RngStream* rng, ForwardTraceT<T>* trace) {
  const auto& cfg = net.config;
  if (image.rank() != 3 || image.dim(0) != cfg.canvas || image.dim(1) != cfg.canvas ||
      image.dim(2) != 1)
    throw DimensionError("image " + image.shape_string() + " does not match canvas " +
                         std::to_string(cfg.canvas));

  TensorT<T> x = image;
  for (std::size_t i = 0; i < cfg.convs.size(); ++i) {
    const std::string base = "conv" + std::to_string(i);
    if (trace) trace->conv_in.push_back(x);
    TensorT<T> y = conv2d_forward(x, net.param(base + ".w").value, net.param(base + ".b").value);
    if (trace) trace->conv_out.push_back(y);
    auto pooled = maxpool2_forward(relu(y));
    if (trace) trace->pool_masks.push_back(std::move(pooled.mask));
    x = std::move(pooled.output);
  }
  x.reshape({static_cast<int>(x.size())});
  if (trace) trace->flat = x;

  TensorT<T> h = dense_forward(x, net.param("fc1.w").value, net.param("fc1.b").value);
  if (trace) trace->fc1_out = h;
  h = relu(h);

  if (mode == Mode::kTrain && cfg.keep_prob < 1.0f) {
    if (!rng) throw ValidationError("training-mode forward needs an RNG stream for dropout");
    auto dropped = dropout(h, static_cast<T>(cfg.keep_prob), *rng, true);
    h = std::move(dropped.output);
    if (trace) trace->dropout_mask = std::move(dropped.mask);
  } else if (trace) {
    trace->dropout_mask.shape = h.shape;
    trace->dropout_mask.data.assign(h.size(), T(1));
  }
  if (trace) trace->head_in = h;

  MultiHeadOutputT<T> out;
  out.label_logits = dense_forward(h, net.param("head_label.w").value, net.param("head_label.b").value);
  out.row_logits = dense_forward(h, net.param("head_row.w").value, net.param("head_row.b").value);
  out.col_logits = dense_forward(h, net.param("head_col.w").value, net.param("head_col.b").value);
  return out;
}

namespace {

template <class T>
void accumulate(TensorT<T>& dst, const TensorT<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

template <class T>
void backward_one(NetworkT<T>& net, const ForwardTraceT<T>& trace,
                  const MultiHeadOutputT<T>& logit_grads, const std::array<bool, 3>& active) {
  const auto& cfg = net.config;

  TensorT<T> head_in_grad;
  head_in_grad.shape = trace.head_in.shape;
  head_in_grad.data.assign(trace.head_in.size(), T(0));
  const std::array<std::pair<const char*, const TensorT<T>*>, 3> heads{
      std::pair{"head_label", &logit_grads.label_logits}, {"head_row", &logit_grads.row_logits},
      {"head_col", &logit_grads.col_logits}};
  for (std::size_t k = 0; k < 3; ++k) {
    if (!active[k]) continue;
    auto& w = net.param(std::string(heads[k].first) + ".w");
    auto& b = net.param(std::string(heads[k].first) + ".b");
    auto g = dense_backward(*heads[k].second, trace.head_in, w.value);
    accumulate(w.grad, g.weights);
    accumulate(b.grad, g.bias);
    accumulate(head_in_grad, g.input);
  }

  TensorT<T> g = cfg.keep_prob < 1.0f && trace.dropout_mask.size() == head_in_grad.size()
                     ? dropout_backward(head_in_grad, trace.dropout_mask,
                                        static_cast<T>(cfg.keep_prob))
                     : std::move(head_in_grad);
  g = relu_backward(g, trace.fc1_out);
  {
    auto& w = net.param("fc1.w");
    auto& b = net.param("fc1.b");
    auto dg = dense_backward(g, trace.flat, w.value);
    accumulate(w.grad, dg.weights);
    accumulate(b.grad, dg.bias);
    g = std::move(dg.input);
  }

  for (std::size_t i = cfg.convs.size(); i-- > 0;) {
    const auto& mask = trace.pool_masks[i];
    g.reshape({mask.out_h, mask.out_w, mask.channels});
    TensorT<T> pool_grad = maxpool2_backward(g, mask);
    TensorT<T> conv_grad = relu_backward(pool_grad, trace.conv_out[i]);

    const std::string base = "conv" + std::to_string(i);
    auto& w = net.param(base + ".w");
    auto& b = net.param(base + ".b");
    const bool want_input = i > 0;
    auto cg = conv2d_backward(conv_grad, trace.conv_in[i], w.value, want_input);
    accumulate(w.grad, cg.filters);
    accumulate(b.grad, cg.bias);
    if (want_input)
      g = std::move(cg.input);
    else
      break;
  }
}

template <class T>
int argmax1(const TensorT<T>& t) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(t.size()); ++i)
    if (t.data[i] > t.data[best]) best = i;
  return best + 1;
}

Prediction predict(const Network& net, const Tensor& image, const AlphabetGrid& grid) {
  const auto out = forward_one(net, image, Mode::kEval, nullptr);
  Prediction p;
  const Tensor label_probs = softmax(out.label_logits);
  const Tensor row_probs = softmax(out.row_logits);
  const Tensor col_probs = softmax(out.col_logits);
  p.label = argmax1(label_probs);
  p.row = argmax1(row_probs);
  p.col = argmax1(col_probs);
  p.label_conf = label_probs.data[p.label - 1];
  p.row_conf = row_probs.data[p.row - 1];
  p.col_conf = col_probs.data[p.col - 1];
  const auto [row, col] = label_to_grid(grid, p.label);
  p.grid_consistent = row == p.row && col == p.col;
  return p;
}

template struct NetworkT<float>;
template struct NetworkT<double>;
template NetworkT<float> build_model<float>(const ModelConfig&, RngStream&);
template NetworkT<double> build_model<double>(const ModelConfig&, RngStream&);
template MultiHeadOutputT<float> forward_one<float>(const NetworkT<float>&, const TensorT<float>&,
                                                    Mode, RngStream*, ForwardTraceT<float>*);
template MultiHeadOutputT<double> forward_one<double>(const NetworkT<double>&,
                                                      const TensorT<double>&, Mode, RngStream*,
                                                      ForwardTraceT<double>*);
template void backward_one<float>(NetworkT<float>&, const ForwardTraceT<float>&,
                                  const MultiHeadOutputT<float>&, const std::array<bool, 3>&);
template void backward_one<double>(NetworkT<double>&, const ForwardTraceT<double>&,
                                   const MultiHeadOutputT<double>&, const std::array<bool, 3>&);
template int argmax1<float>(const TensorT<float>&);
template int argmax1<double>(const TensorT<double>&);

}  // namespace amcr
