#pragma once

// Dense row-major tensors plus a reverse-mode tape.
//
// A Tensor is a shared handle to one storage node (value + optional gradient
// buffer). Ops in ops.hpp build fresh output tensors and append adjoint
// closures to a Tape; Tape::backward replays the closures in reverse. Weight
// sharing falls out of the handle semantics: a parameter used at several call
// sites is the same node, and each use's adjoint accumulates into the one
// gradient buffer.
//
// Two instantiations are used: float for training, double for the
// finite-difference gradient-check suites.

#include "perceiver/common.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace perceiver {

template <typename T>
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  Tensor() : node_(nullptr) {}

  explicit Tensor(std::vector<std::size_t> shape, bool requires_grad = false)
      : node_(std::make_shared<TensorNode<T>>()) {
    node_->shape = std::move(shape);
    node_->value.assign(count(node_->shape), T(0));
    node_->requires_grad = requires_grad;
  }

  static Tensor from_values(std::vector<std::size_t> shape, std::vector<T> values,
                            bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (values.size() != t.size())
      throw shape_error("Tensor::from_values: value count does not match shape");
    t.node_->value = std::move(values);
    return t;
  }

  static Tensor full(std::vector<std::size_t> shape, T fill, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    for (T& v : t.node_->value) v = fill;
    return t;
  }

  bool defined() const { return node_ != nullptr; }

  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  // Row/column view of the trailing dimension (used by row-structured ops).
  std::size_t cols() const {
    if (node_->shape.empty()) throw shape_error("Tensor::cols: rank-0 tensor");
    return node_->shape.back();
  }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  T& at(std::size_t i, std::size_t j) { return node_->value[i * cols() + j]; }
  T at(std::size_t i, std::size_t j) const { return node_->value[i * cols() + j]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<T>& grad() {
    if (node_->grad.empty()) node_->grad.assign(size(), T(0));
    return node_->grad;
  }
  const std::vector<T>& grad_view() const { return node_->grad; }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(size(), T(0));
  }

  // Node identity; lets callers dedup aliased (weight-shared) parameters.
  const void* id() const { return node_.get(); }
  TensorNode<T>* node() const { return node_.get(); }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Ordered record of executed primitives; backward() replays adjoints in
// reverse, exactly once.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> adjoint) { steps_.push_back(std::move(adjoint)); }

  std::size_t size() const { return steps_.size(); }
  bool consumed() const { return consumed_; }

  void backward(Tensor<T>& loss) {
    if (consumed_) throw state_error("Tape::backward: tape already consumed");
    if (!loss.defined() || loss.size() != 1)
      throw state_error("Tape::backward: loss must be a defined scalar tensor");
    consumed_ = true;
    loss.grad()[0] = T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
};

// Named parameter table; models expose their unique (alias-deduped) tables in
// a stable order for the optimizer and the checkpoint writer.
template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamSet = std::vector<NamedParam<T>>;

}  // namespace perceiver
