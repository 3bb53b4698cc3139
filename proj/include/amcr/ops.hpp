#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "amcr/errors.hpp"
#include "amcr/rng.hpp"
#include "amcr/tensor.hpp"

// Layer math. Every forward op has an exact analytic backward; the only size
// regimes that matter are small (gradient checks, unit tests) and the 32x32
// training canvas, so the loops are written for contiguity over the channel
// axis rather than for generality. Inputs are [H,W,C] row-major, filters
// [N,N,Cin,Cout], dense weights [K,L].

namespace amcr {

namespace opcount {
// Instrumentation used by tests to confirm the trunk is evaluated once per
// image regardless of how many heads consume it.
inline std::atomic<std::uint64_t> conv2d_forward_calls{0};
inline void reset() { conv2d_forward_calls.store(0); }
}  // namespace opcount

namespace detail {

template <class T>
T fixed_order_dot(const T* a, const T* b, int n) {
  // Eight independent accumulators: vectorizable without reassociation
  // license, and the combine order is fixed so results are reproducible.
  T acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0, acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
    acc4 += a[i + 4] * b[i + 4];
    acc5 += a[i + 5] * b[i + 5];
    acc6 += a[i + 6] * b[i + 6];
    acc7 += a[i + 7] * b[i + 7];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return (((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7))) + tail;
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (valid padding, stride 1): [H,W,Cin] * [N,N,Cin,Cout]
// -> [H-N+1, W-N+1, Cout].
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& filters,
                          const TensorT<T>& bias) {
  detail::require(input.rank() == 3, "conv input must be [H,W,Cin], got " + input.shape_string());
  detail::require(filters.rank() == 4 && filters.dim(0) == filters.dim(1),
                  "conv filters must be [N,N,Cin,Cout], got " + filters.shape_string());
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int n = filters.dim(0), cout = filters.dim(3);
  detail::require(filters.dim(2) == cin, "conv channel mismatch: input " + input.shape_string() +
                                             " vs filters " + filters.shape_string());
  detail::require(bias.rank() == 1 && bias.dim(0) == cout,
                  "conv bias must be [Cout], got " + bias.shape_string());
  detail::require(n <= h && n <= w, "conv filter " + filters.shape_string() +
                                        " larger than input " + input.shape_string());
  opcount::conv2d_forward_calls.fetch_add(1, std::memory_order_relaxed);

  const int oh = h - n + 1, ow = w - n + 1;
  TensorT<T> out({oh, ow, cout});
  const T* in = input.ptr();
  const T* ft = filters.ptr();
  const T* bs = bias.ptr();
  T* o = out.ptr();

  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      T* orow = o + (static_cast<std::size_t>(i) * ow + j) * cout;
      for (int co = 0; co < cout; ++co) orow[co] = bs[co];
      for (int a = 0; a < n; ++a) {
        const T* irow = in + (static_cast<std::size_t>(i + a) * w + j) * cin;
        const T* frow = ft + static_cast<std::size_t>(a) * n * cin * cout;
        for (int b = 0; b < n; ++b) {
          const T* ipix = irow + static_cast<std::size_t>(b) * cin;
          const T* fpix = frow + static_cast<std::size_t>(b) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const T x = ipix[ci];
            const T* fr = fpix + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) orow[co] += x * fr[co];
          }
        }
      }
    }
  }
  return out;
}

template <class T>
struct Conv2dGrads {
  TensorT<T> input;    // empty when not requested
  TensorT<T> filters;
  TensorT<T> bias;
};

template <class T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& grad_out, const TensorT<T>& input,
                               const TensorT<T>& filters, bool want_grad_input = true) {
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int n = filters.dim(0), cout = filters.dim(3);
  const int oh = h - n + 1, ow = w - n + 1;
  detail::require(grad_out.rank() == 3 && grad_out.dim(0) == oh && grad_out.dim(1) == ow &&
                      grad_out.dim(2) == cout,
                  "conv grad shape " + grad_out.shape_string() + " does not match forward output [" +
                      std::to_string(oh) + "x" + std::to_string(ow) + "x" + std::to_string(cout) + "]");
  detail::require(filters.dim(2) == cin, "conv channel mismatch: input " + input.shape_string() +
                                             " vs filters " + filters.shape_string());

  Conv2dGrads<T> g;
  g.filters = TensorT<T>(filters.shape);
  g.bias = TensorT<T>({cout});
  const T* go = grad_out.ptr();
  const T* in = input.ptr();
  T* gf = g.filters.ptr();
  T* gb = g.bias.ptr();

  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const T* grow = go + (static_cast<std::size_t>(i) * ow + j) * cout;
      for (int co = 0; co < cout; ++co) gb[co] += grow[co];
      for (int a = 0; a < n; ++a) {
        const T* irow = in + (static_cast<std::size_t>(i + a) * w + j) * cin;
        T* gfrow = gf + static_cast<std::size_t>(a) * n * cin * cout;
        for (int b = 0; b < n; ++b) {
          const T* ipix = irow + static_cast<std::size_t>(b) * cin;
          T* gfpix = gfrow + static_cast<std::size_t>(b) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const T x = ipix[ci];
            T* gfr = gfpix + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) gfr[co] += x * grow[co];
          }
        }
      }
    }
  }

  if (want_grad_input) {
    g.input = TensorT<T>(input.shape);
    T* gi = g.input.ptr();
    // Transposed filter copy [N,N,Cout,Cin] keeps the scatter loop contiguous
    // over the input channel axis.
    std::vector<T> ftr(static_cast<std::size_t>(n) * n * cout * cin);
    const T* ft = filters.ptr();
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int ci = 0; ci < cin; ++ci)
          for (int co = 0; co < cout; ++co)
            ftr[((static_cast<std::size_t>(a) * n + b) * cout + co) * cin + ci] =
                ft[((static_cast<std::size_t>(a) * n + b) * cin + ci) * cout + co];

    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const T* grow = go + (static_cast<std::size_t>(i) * ow + j) * cout;
        for (int a = 0; a < n; ++a) {
          T* girow = gi + (static_cast<std::size_t>(i + a) * w + j) * cin;
          const T* frow = ftr.data() + static_cast<std::size_t>(a) * n * cout * cin;
          for (int b = 0; b < n; ++b) {
            T* gipix = girow + static_cast<std::size_t>(b) * cin;
            const T* fpix = frow + static_cast<std::size_t>(b) * cout * cin;
            for (int co = 0; co < cout; ++co) {
              const T gv = grow[co];
              const T* fr = fpix + static_cast<std::size_t>(co) * cin;
              for (int ci = 0; ci < cin; ++ci) gipix[ci] += gv * fr[ci];
            }
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling over disjoint windows. H and W must be even.
// ---------------------------------------------------------------------------

struct PoolMask {
  int out_h = 0, out_w = 0, channels = 0;
  // Winning position per output cell, row-major within the 2x2 window
  // (0=(0,0), 1=(0,1), 2=(1,0), 3=(1,1)); ties go to the first occurrence.
  std::vector<std::uint8_t> arg;
};

template <class T>
struct PoolResult {
  TensorT<T> output;
  PoolMask mask;
};

template <class T>
PoolResult<T> maxpool2_forward(const TensorT<T>& input) {
  detail::require(input.rank() == 3, "pool input must be [H,W,C], got " + input.shape_string());
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  detail::require(h % 2 == 0 && w % 2 == 0,
                  "pool input sides must be even, got " + input.shape_string());
  const int oh = h / 2, ow = w / 2;
  PoolResult<T> r{TensorT<T>({oh, ow, c}), PoolMask{oh, ow, c, {}}};
  r.mask.arg.assign(static_cast<std::size_t>(oh) * ow * c, 0);

  const T* in = input.ptr();
  T* out = r.output.ptr();
  std::uint8_t* arg = r.mask.arg.data();
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const T* p00 = in + (static_cast<std::size_t>(2 * i) * w + 2 * j) * c;
      const T* p01 = p00 + c;
      const T* p10 = in + (static_cast<std::size_t>(2 * i + 1) * w + 2 * j) * c;
      const T* p11 = p10 + c;
      T* orow = out + (static_cast<std::size_t>(i) * ow + j) * c;
      std::uint8_t* arow = arg + (static_cast<std::size_t>(i) * ow + j) * c;
      for (int k = 0; k < c; ++k) {
        T best = p00[k];
        std::uint8_t which = 0;
        if (p01[k] > best) { best = p01[k]; which = 1; }
        if (p10[k] > best) { best = p10[k]; which = 2; }
        if (p11[k] > best) { best = p11[k]; which = 3; }
        orow[k] = best;
        arow[k] = which;
      }
    }
  }
  return r;
}

template <class T>
TensorT<T> maxpool2_backward(const TensorT<T>& grad_out, const PoolMask& mask) {
  detail::require(grad_out.rank() == 3 && grad_out.dim(0) == mask.out_h &&
                      grad_out.dim(1) == mask.out_w && grad_out.dim(2) == mask.channels,
                  "pool grad shape " + grad_out.shape_string() + " does not match mask [" +
                      std::to_string(mask.out_h) + "x" + std::to_string(mask.out_w) + "x" +
                      std::to_string(mask.channels) + "]");
  const int oh = mask.out_h, ow = mask.out_w, c = mask.channels;
  TensorT<T> grad_in({2 * oh, 2 * ow, c});
  const T* go = grad_out.ptr();
  T* gi = grad_in.ptr();
  const int w = 2 * ow;
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const T* grow = go + (static_cast<std::size_t>(i) * ow + j) * c;
      const std::uint8_t* arow = mask.arg.data() + (static_cast<std::size_t>(i) * ow + j) * c;
      for (int k = 0; k < c; ++k) {
        const int di = arow[k] >> 1, dj = arow[k] & 1;
        gi[(static_cast<std::size_t>(2 * i + di) * w + 2 * j + dj) * c + k] += grow[k];
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Dense (fully connected): [K] x [K,L] + [L] -> [L].
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> dense_forward(const TensorT<T>& input, const TensorT<T>& weights,
                         const TensorT<T>& bias) {
  detail::require(input.rank() == 1, "dense input must be rank 1, got " + input.shape_string());
  detail::require(weights.rank() == 2 && weights.dim(0) == input.dim(0),
                  "dense weights " + weights.shape_string() + " do not match input " +
                      input.shape_string());
  const int k = weights.dim(0), l = weights.dim(1);
  detail::require(bias.rank() == 1 && bias.dim(0) == l,
                  "dense bias must be [L], got " + bias.shape_string());
  TensorT<T> out({l});
  T* o = out.ptr();
  const T* in = input.ptr();
  const T* wt = weights.ptr();
  for (int j = 0; j < l; ++j) o[j] = bias.ptr()[j];
  for (int i = 0; i < k; ++i) {
    const T x = in[i];
    const T* wrow = wt + static_cast<std::size_t>(i) * l;
    for (int j = 0; j < l; ++j) o[j] += x * wrow[j];
  }
  return out;
}

template <class T>
struct DenseGrads {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

template <class T>
DenseGrads<T> dense_backward(const TensorT<T>& grad_out, const TensorT<T>& input,
                             const TensorT<T>& weights) {
  const int k = weights.dim(0), l = weights.dim(1);
  detail::require(grad_out.rank() == 1 && grad_out.dim(0) == l,
                  "dense grad " + grad_out.shape_string() + " does not match output [" +
                      std::to_string(l) + "]");
  detail::require(input.rank() == 1 && input.dim(0) == k,
                  "dense input " + input.shape_string() + " does not match weights " +
                      weights.shape_string());
  DenseGrads<T> g{TensorT<T>({k}), TensorT<T>({k, l}), TensorT<T>({l})};
  const T* go = grad_out.ptr();
  const T* in = input.ptr();
  const T* wt = weights.ptr();
  for (int j = 0; j < l; ++j) g.bias.ptr()[j] = go[j];
  T* gw = g.weights.ptr();
  T* gi = g.input.ptr();
  for (int i = 0; i < k; ++i) {
    const T x = in[i];
    const T* wrow = wt + static_cast<std::size_t>(i) * l;
    T* gwrow = gw + static_cast<std::size_t>(i) * l;
    for (int j = 0; j < l; ++j) gwrow[j] = x * go[j];
    gi[i] = detail::fixed_order_dot(wrow, go, l);
  }
  return g;
}

// ---------------------------------------------------------------------------
// ReLU.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> relu(const TensorT<T>& input) {
  TensorT<T> out;
  out.shape = input.shape;
  out.data.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i)
    out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
  return out;
}

// Subgradient 0 at exactly 0.
template <class T>
TensorT<T> relu_backward(const TensorT<T>& grad_out, const TensorT<T>& input) {
  detail::require(grad_out.shape == input.shape,
                  "relu grad " + grad_out.shape_string() + " does not match input " +
                      input.shape_string());
  TensorT<T> out;
  out.shape = input.shape;
  out.data.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i)
    out.data[i] = input.data[i] > T(0) ? grad_out.data[i] : T(0);
  return out;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy with max-subtraction stabilization.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> softmax(const TensorT<T>& logits) {
  TensorT<T> out;
  out.shape = logits.shape;
  out.data.resize(logits.size());
  T m = logits.data[0];
  for (T v : logits.data)
    if (v > m) m = v;
  T denom = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.data[i] = std::exp(logits.data[i] - m);
    denom += out.data[i];
  }
  for (auto& v : out.data) v /= denom;
  return out;
}

template <class T>
struct CeResult {
  T loss;
  TensorT<T> grad_logits;  // softmax(logits) - target
};

// target_index is 0-based.
template <class T>
CeResult<T> softmax_cross_entropy_at(const TensorT<T>& logits, int target_index) {
  detail::require(logits.rank() == 1, "logits must be rank 1, got " + logits.shape_string());
  const int l = logits.dim(0);
  if (target_index < 0 || target_index >= l)
    throw ValidationError("cross-entropy target index " + std::to_string(target_index) +
                          " out of range for " + std::to_string(l) + " classes");
  CeResult<T> r;
  r.grad_logits.shape = logits.shape;
  r.grad_logits.data.resize(logits.size());
  T m = logits.data[0];
  for (T v : logits.data)
    if (v > m) m = v;
  T denom = 0;
  for (int i = 0; i < l; ++i) {
    const T e = std::exp(logits.data[i] - m);
    r.grad_logits.data[i] = e;
    denom += e;
  }
  for (auto& v : r.grad_logits.data) v /= denom;
  // loss = log(sum exp(x - m)) + m - x[t]
  r.loss = std::log(denom) + m - logits.data[target_index];
  r.grad_logits.data[target_index] -= T(1);
  return r;
}

template <class T>
CeResult<T> softmax_cross_entropy(const TensorT<T>& logits, const TensorT<T>& target_one_hot) {
  detail::require(logits.shape == target_one_hot.shape,
                  "logits " + logits.shape_string() + " vs target " + target_one_hot.shape_string());
  int hot = -1;
  for (std::size_t i = 0; i < target_one_hot.size(); ++i) {
    const T v = target_one_hot.data[i];
    if (v == T(1)) {
      if (hot >= 0) throw ValidationError("target has more than one 1; not one-hot");
      hot = static_cast<int>(i);
    } else if (v != T(0)) {
      throw ValidationError("target entry " + std::to_string(i) + " is neither 0 nor 1");
    }
  }
  if (hot < 0) throw ValidationError("target has no 1; not one-hot");
  return softmax_cross_entropy_at(logits, hot);
}

// ---------------------------------------------------------------------------
// L2 penalty: lambda * sum of squares over weight tensors (biases excluded).
// Adds 2*lambda*x to each weight gradient when accumulate is set.
// ---------------------------------------------------------------------------

template <class T>
T l2_penalty(std::vector<ParamTensorT<T>*> params, T lambda, bool accumulate_grads = true) {
  if (lambda < T(0)) throw ValidationError("l2 lambda must be >= 0");
  T penalty = 0;
  for (auto* p : params) {
    if (!p->is_weight()) continue;
    T sq = 0;
    const T* v = p->value.ptr();
    const std::size_t n = p->value.size();
    for (std::size_t i = 0; i < n; ++i) sq += v[i] * v[i];
    penalty += sq;
    if (accumulate_grads && lambda != T(0)) {
      T* g = p->grad.ptr();
      const T two_lambda = T(2) * lambda;
      for (std::size_t i = 0; i < n; ++i) g[i] += two_lambda * v[i];
    }
  }
  return lambda * penalty;
}

// ---------------------------------------------------------------------------
// Inverted dropout: kept elements are scaled by 1/keep_prob at train time so
// evaluation is the exact identity.
// ---------------------------------------------------------------------------

template <class T>
struct DropoutResult {
  TensorT<T> output;
  TensorT<T> mask;  // entries in {0,1}
};

template <class T>
DropoutResult<T> dropout(const TensorT<T>& input, T keep_prob, RngStream& rng, bool training) {
  if (!(keep_prob > T(0) && keep_prob <= T(1)))
    throw ValidationError("dropout keep probability must be in (0,1]");
  DropoutResult<T> r;
  r.mask.shape = input.shape;
  r.output.shape = input.shape;
  if (!training) {
    r.output.data = input.data;
    r.mask.data.assign(input.size(), T(1));
    return r;
  }
  r.mask.data.resize(input.size());
  r.output.data.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const bool keep = static_cast<T>(rng.uniform_float()) < keep_prob;
    r.mask.data[i] = keep ? T(1) : T(0);
    r.output.data[i] = keep ? input.data[i] / keep_prob : T(0);
  }
  return r;
}

template <class T>
TensorT<T> dropout_backward(const TensorT<T>& grad_out, const TensorT<T>& mask, T keep_prob) {
  detail::require(grad_out.shape == mask.shape, "dropout grad/mask shape mismatch");
  TensorT<T> out;
  out.shape = grad_out.shape;
  out.data.resize(grad_out.size());
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    out.data[i] = mask.data[i] != T(0) ? grad_out.data[i] / keep_prob : T(0);
  return out;
}

}  // namespace amcr
