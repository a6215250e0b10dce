#pragma once

#include <functional>
#include <memory>

#include "hgo/common.hpp"

namespace hgo {

template <typename T>
struct TensorT;

template <typename T>
using TensorPtr = std::shared_ptr<TensorT<T>>;

// Dense NCHW row-major tensor with an optional reverse-mode tape.
//
// Nodes form a DAG through `parents`; an op that produces a taped output
// installs a `backward_fn` closure that reads the output's grad buffer and
// accumulates into the parents' grad buffers. Leaves are taped nodes without
// a backward_fn. The production dtype is float; double exists for gradient
// checks and oracles.
template <typename T>
struct TensorT {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated lazily, same length as data when present
  bool requires_grad = false;

  std::vector<TensorPtr<T>> parents;
  std::function<void()> backward_fn;  // null for leaves

  TensorT() = default;
  explicit TensorT(Shape s, bool rg = false)
      : shape(std::move(s)), data(static_cast<std::size_t>(numel_of(shape)), T(0)), requires_grad(rg) {}

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  int dim(int i) const {
    HGO_CHECK(i >= 0 && i < rank(), "dim index " << i << " out of range for " << shape_str(shape));
    return shape[static_cast<std::size_t>(i)];
  }

  // NCHW accessors; valid only for rank-4 tensors
  int n() const { return dim4(0); }
  int c() const { return dim4(1); }
  int h() const { return dim4(2); }
  int w() const { return dim4(3); }

  std::int64_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::int64_t>(in) * c() + ic) * h() + iy) * w() + ix;
  }
  T& at(int in, int ic, int iy, int ix) { return data[static_cast<std::size_t>(index(in, ic, iy, ix))]; }
  T at(int in, int ic, int iy, int ix) const { return data[static_cast<std::size_t>(index(in, ic, iy, ix))]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { grad.assign(data.size(), T(0)); }

  bool is_leaf() const { return !backward_fn; }

 private:
  int dim4(int i) const {
    HGO_CHECK(rank() == 4, "expected rank-4 tensor, got " << shape_str(shape));
    return shape[static_cast<std::size_t>(i)];
  }
};

template <typename T>
TensorPtr<T> make_tensor(Shape shape, bool requires_grad = false) {
  return std::make_shared<TensorT<T>>(std::move(shape), requires_grad);
}

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> values, bool requires_grad = false) {
  auto t = std::make_shared<TensorT<T>>(std::move(shape), requires_grad);
  HGO_CHECK(static_cast<std::int64_t>(values.size()) == t->numel(),
            "value count " << values.size() << " does not match shape " << shape_str(t->shape));
  t->data = std::move(values);
  return t;
}

template <typename T>
TensorPtr<T> scalar_tensor(T v, bool requires_grad = false) {
  auto t = make_tensor<T>(Shape{1}, requires_grad);
  t->data[0] = v;
  return t;
}

// Reverse-mode accumulation from a 1-element output. Seeds the output grad
// with 1, walks the recorded DAG in reverse topological order, and leaves
// gradients on every taped node (leaves included). Throws on non-scalar or
// untaped outputs.
template <typename T>
void backward(const TensorPtr<T>& out);

// The production scalar type.
using Tensor = TensorPtr<float>;

extern template struct TensorT<float>;
extern template struct TensorT<double>;
extern template void backward<float>(const TensorPtr<float>&);
extern template void backward<double>(const TensorPtr<double>&);

}  // namespace hgo
