// Copyright 2026 The sparsify Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sparsify/errors.hpp"

namespace sparsify {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array with an optional gradient of the same shape.
/// Parameters are Tensors; intermediate values live on a Tape.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(numel(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != numel(shape_))
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + to_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) {
    requires_grad_ = on;
    if (!on) grad_.clear();
  }

  bool has_grad() const { return !grad_.empty(); }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }
  void zero_grad() { grad_.assign(data_.size(), T(0)); }
  void clear_grad() { grad_.clear(); }

  /// Adds `g` into the gradient. No-op when requires_grad is false.
  void accumulate_grad(std::span<const T> g) {
    if (!requires_grad_) return;
    if (g.size() != data_.size())
      throw DimensionError("gradient length mismatch for shape " +
                           to_string(shape_));
    if (grad_.empty()) grad_.assign(data_.size(), T(0));
    for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += g[i];
  }

 private:
  void check_extents() const {
    for (std::size_t d : shape_)
      if (d == 0) throw DimensionError("tensor extents must be positive, got " +
                                       to_string(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
  bool requires_grad_ = false;
};

}  // namespace sparsify
