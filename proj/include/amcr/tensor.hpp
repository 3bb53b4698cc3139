#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "amcr/errors.hpp"

namespace amcr {

namespace detail {
inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}
}  // namespace detail

// Dense row-major N-d array. float is the training dtype; the same code
// instantiated with double is the 64-bit mode used for gradient checking.
template <class T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;

  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(checked_size(shape), T(0));
  }

  TensorT(std::vector<int> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (checked_size(shape) != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + detail::shape_str(shape));
    }
  }

  static std::size_t checked_size(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw DimensionError("non-positive dimension in shape " + detail::shape_str(s));
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  std::size_t size() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  // Flat offsets for the ranks used in this codebase.
  std::size_t idx2(int i, int j) const {
    return static_cast<std::size_t>(i) * shape[1] + j;
  }
  std::size_t idx3(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k;
  }
  std::size_t idx4(int a, int b, int c, int d) const {
    return ((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d;
  }

  T& at2(int i, int j) { return data[idx2(i, j)]; }
  const T& at2(int i, int j) const { return data[idx2(i, j)]; }
  T& at3(int i, int j, int k) { return data[idx3(i, j, k)]; }
  const T& at3(int i, int j, int k) const { return data[idx3(i, j, k)]; }
  T& at4(int a, int b, int c, int d) { return data[idx4(a, b, c, d)]; }
  const T& at4(int a, int b, int c, int d) const { return data[idx4(a, b, c, d)]; }

  void fill(T v) { data.assign(data.size(), v); }

  void zero() { fill(T(0)); }

  // Same element count, new shape; storage untouched.
  void reshape(std::vector<int> s) {
    if (checked_size(s) != data.size()) {
      throw DimensionError("cannot reshape " + detail::shape_str(shape) + " to " +
                           detail::shape_str(s));
    }
    shape = std::move(s);
  }

  std::string shape_string() const { return detail::shape_str(shape); }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool same_shape(const TensorT<T>& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <class T>
bool all_finite(const TensorT<T>& t) {
  for (T v : t.data) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

// A named trainable tensor with its gradient accumulator. Gradients are
// zeroed at the start of each minibatch; the optimizer consumes them after
// the batch's backward passes and the L2 contribution have been summed in.
template <class T>
struct ParamTensorT {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;

  ParamTensorT() = default;
  ParamTensorT(std::string n, TensorT<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() { grad.zero(); }

  // Weight tensors (not biases) carry the ".w" suffix and are the ones the
  // L2 penalty applies to.
  bool is_weight() const {
    return name.size() >= 2 && name.compare(name.size() - 2, 2, ".w") == 0;
  }

  template <class U>
  ParamTensorT<U> cast() const {
    ParamTensorT<U> out;
    out.name = name;
    out.value = value.template cast<U>();
    out.grad = grad.template cast<U>();
    return out;
  }
};

using ParamTensor = ParamTensorT<float>;

}  // namespace amcr
