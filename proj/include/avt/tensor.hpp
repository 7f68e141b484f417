// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "avt/common.hpp"

namespace avt::numerics {

/// Dense double-precision tensor. A Tensor is a value-semantic handle to
/// shared storage, so the backward closures recorded on the tape accumulate
/// into the same gradient buffers the caller holds.
class Tensor {
 public:
  Tensor() : s_(std::make_shared<Storage>()) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    Tensor t;
    t.s_->shape = std::move(shape);
    t.s_->data.assign(numel(t.s_->shape), 0.0);
    t.set_requires_grad(requires_grad);
    return t;
  }

  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.data()) v = value;
    return t;
  }

  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false) {
    if (numel(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.s_->shape = std::move(shape);
    t.s_->data = std::move(data);
    t.set_requires_grad(requires_grad);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  const std::vector<std::size_t>& shape() const { return s_->shape; }
  std::size_t size() const { return s_->data.size(); }
  std::size_t rows() const { return s_->shape.empty() ? 0 : s_->shape[0]; }
  std::size_t cols() const { return s_->shape.size() < 2 ? 1 : s_->shape[1]; }

  // A Tensor is a handle: const applies to the handle, not the shared storage,
  // so backward closures holding captured copies can accumulate gradients.
  std::vector<double>& data() const { return s_->data; }
  std::vector<double>& grad() const { return s_->grad; }

  double& operator[](std::size_t i) const { return s_->data[i]; }
  double& at(std::size_t r, std::size_t c) const { return s_->data[r * cols() + c]; }

  double item() const {
    if (size() != 1) throw ContractError("item() requires a scalar tensor, got " + shape_str(shape()));
    return s_->data[0];
  }

  bool requires_grad() const { return s_->requires_grad; }

  void set_requires_grad(bool on) {
    s_->requires_grad = on;
    if (on) {
      s_->grad.assign(s_->data.size(), 0.0);
    } else {
      s_->grad.clear();
    }
  }

  void zero_grad() {
    if (s_->requires_grad) s_->grad.assign(s_->data.size(), 0.0);
  }

  /// Deep copy with detached storage; gradient state is not copied.
  Tensor clone() const {
    Tensor t;
    t.s_->shape = s_->shape;
    t.s_->data = s_->data;
    return t;
  }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

  static std::size_t numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  struct Storage {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

/// Ordered record of primitive operations with backward closures. Replaying in
/// reverse order accumulates gradients into every requires_grad leaf exactly
/// once. The tape is thread_local: each thread sees its own, so independent
/// runs can execute in parallel with no shared mutable state.
class GradTape {
 public:
  static GradTape& active() {
    thread_local GradTape tape;
    return tape;
  }

  bool recording() const { return enabled_; }
  void set_recording(bool on) { enabled_ = on; }

  void record(std::function<void()> backward_fn) {
    if (enabled_) entries_.push_back(std::move(backward_fn));
  }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the whole tape in reverse.
  /// Call once per recorded forward pass; clear() between steps.
  void backward(Tensor& loss) {
    if (loss.size() != 1) {
      throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    }
    if (loss.requires_grad()) loss.grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> entries_;
  bool enabled_ = true;
};

/// RAII guard disabling tape recording (inference / finite-difference probes).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradTape::active().recording()) { GradTape::active().set_recording(false); }
  ~NoGradGuard() { GradTape::active().set_recording(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_needed(const Tensor& t) {
  return GradTape::active().recording() && t.requires_grad();
}

}  // namespace avt::numerics

namespace avt {
using numerics::GradTape;
using numerics::NoGradGuard;
using numerics::Tensor;
}  // namespace avt
