// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lccrl/errors.hpp"

namespace lccrl {

using Real = double;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage. Parameters live
/// across many tapes and accumulate gradients until the optimizer clears
/// them; intermediates are owned by the tape that produced them.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false)
      : data_(std::make_shared<Data>()) {
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    if (shape_size(shape) != values.size()) {
      throw ShapeError("shape " + shape_string(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    }
    data_->shape = std::move(shape);
    data_->values = std::move(values);
    data_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<Real>(n, 0.0), requires_grad);
  }
  static Tensor vector(std::vector<Real> values, bool requires_grad = false) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values), requires_grad);
  }
  static Tensor scalar(Real v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t size() const { return data_->values.size(); }
  std::size_t dim(std::size_t axis) const { return data_->shape.at(axis); }
  bool is_scalar() const { return size() == 1; }

  std::span<const Real> values() const { return data_->values; }
  std::span<Real> values() { return data_->values; }
  Real operator[](std::size_t i) const { return data_->values[i]; }
  Real item() const {
    if (!is_scalar()) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return data_->values[0];
  }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }

  bool has_grad() const { return !data_->grad.empty(); }
  std::span<const Real> grad() const { return data_->grad; }
  /// Gradient buffer, allocated zero-filled on first use. Gradients are
  /// bookkeeping on a shared handle, so this is available through const.
  std::span<Real> grad_buffer() const {
    if (data_->grad.empty()) data_->grad.assign(data_->values.size(), 0.0);
    return data_->grad;
  }
  void zero_grad() const {
    if (!data_->grad.empty()) std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
  }

  /// Deep copy without gradient.
  Tensor clone() const { return Tensor(shape(), data_->values, requires_grad()); }

  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

 private:
  struct Data {
    Shape shape;
    std::vector<Real> values;
    std::vector<Real> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Data> data_;
};

/// Define-by-run record of differentiable operations.
///
/// Each op appends a closure that propagates its output gradient into its
/// inputs. Nodes are appended after their inputs exist, so replaying the
/// closures in reverse order is a valid reverse topological sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  /// Parameter gradients accumulate; call zero_grad between steps.
  void backward(Tensor loss) {
    if (!loss.defined() || !loss.is_scalar()) {
      throw ContractError("backward() needs a scalar loss, got " +
                          (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
    }
    if (!loss.requires_grad()) return;
    loss.grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

}  // namespace lccrl
